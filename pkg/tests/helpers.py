"""Small builders shared by the unit tests."""
import numpy as np

from multirat.config import Window
from multirat.ppp import Deployment


def make_deployment(x, y, tier, K, users=None, shadow_l=None, shadow_u=None, fading_l=None,
                    fading_u=None, radius=1000.0, boundary="truncation"):
    x = np.asarray(x, dtype=float)
    n = len(x)
    tier = np.asarray(tier, dtype=np.int64)
    order = np.argsort(tier, kind="stable")
    ones = np.ones(n)

    def col(v):
        return (ones if v is None else np.asarray(v, dtype=float))[order]

    counts = tuple(int(np.sum(tier == k)) for k in range(1, K + 1))
    pops = {k: np.asarray(v, dtype=float).reshape(-1, 2) for k, v in (users or {}).items()}
    return Deployment(Window(radius, boundary), 0, counts, x[order], np.asarray(y, float)[order],
                      tier[order], col(fading_l), col(fading_u), col(shadow_l), col(shadow_u), pops)
