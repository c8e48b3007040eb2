"""Disk intersection geometry."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def lens_area(r1, r2, d):
    """Area of the intersection of two disks with radii r1, r2 and centre distance d (vectorised)."""
    r1, r2, d = np.broadcast_arrays(np.asarray(r1, float), np.asarray(r2, float), np.asarray(d, float))
    out = np.zeros(r1.shape)
    small = np.minimum(r1, r2)
    inside = d <= np.abs(r1 - r2)
    out = np.where(inside, math.pi * small * small, out)
    part = (d < r1 + r2) & ~inside
    if np.any(part):
        a, b, c = r1[part], r2[part], d[part]
        ca = np.clip((c * c + a * a - b * b) / (2 * c * a), -1.0, 1.0)
        cb = np.clip((c * c + b * b - a * a) / (2 * c * b), -1.0, 1.0)
        k = (-c + a + b) * (c + a - b) * (c - a + b) * (c + a + b)
        out[part] = a * a * np.arccos(ca) + b * b * np.arccos(cb) - 0.5 * np.sqrt(np.maximum(k, 0.0))
    return out if out.ndim else float(out)


def uncovered_area(rs, rd, d):
    """Area of the disk of radius rs not covered by a disk of radius rd at centre distance d."""
    return math.pi * np.asarray(rs, float) ** 2 - lens_area(rs, rd, d)


def disk_pair_distance_cdf(r: float, R: float) -> float:
    """P(|X - Y| < r) for X, Y independent and uniform on a disk of radius R."""
    if r <= 0:
        return 0.0
    if r >= 2 * R:
        return 1.0
    f = lambda s: lens_area(r, R, s) * 2.0 * s / (R * R)
    val, _ = integrate.quad(f, 0.0, R, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val / (math.pi * R * R)
