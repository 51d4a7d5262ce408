"""Hot numeric kernels; each has a numba path and a numpy path."""
from .geo import EARTH_RADIUS_M, haversine_np, haversine_to_many, radius_batch
from .lasso import lasso_cd
from .svr import kkt_violation, smo_svr
from .tree import grow_tree, predict_tree

__all__ = [
    "EARTH_RADIUS_M",
    "haversine_np",
    "haversine_to_many",
    "radius_batch",
    "lasso_cd",
    "kkt_violation",
    "smo_svr",
    "grow_tree",
    "predict_tree",
]
