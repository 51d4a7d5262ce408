import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from soilph import FieldDataset, FieldRecord, SynthConfig, generate_synthetic_fields
from soilph.ingest import CropType
from soilph.kernels import EARTH_RADIUS_M

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_dataset(lons, lats, phs=None, crops=None) -> FieldDataset:
    n = len(lons)
    phs = [6.5] * n if phs is None else phs
    crops = ["wheat"] * n if crops is None else crops
    recs = []
    for i in range(n):
        ph = None if phs[i] is None or (isinstance(phs[i], float) and math.isnan(phs[i])) else float(phs[i])
        recs.append(FieldRecord(f"F{i}", float(lons[i]), float(lats[i]), crops[i],
                                CropType.CROPS, ph))
    return FieldDataset(tuple(recs))


def north_of(lon, lat, meters):
    """Point ``meters`` due north along the meridian (exact haversine inverse)."""
    return lon, lat + math.degrees(meters / EARTH_RADIUS_M)


@pytest.fixture(scope="session")
def synth_small():
    return generate_synthetic_fields(SynthConfig(n_fields=300, seed=3))


@pytest.fixture(scope="session")
def synth_1000():
    return generate_synthetic_fields(SynthConfig(n_fields=1000, seed=0))


# --- acceptance summary ------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name, args in getattr(report, "acceptance", ()):
        number, title = args
        _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep.acceptance = [("acceptance", m.args) for m in item.iter_markers("acceptance")]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {verdict}: {title}")
