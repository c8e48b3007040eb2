"""Hot loops for association and contention, plus the pair counter.

Each kernel has a numba implementation (uniform-grid spatial hashing, roughly
linear in the number of points) and a pure-numpy implementation (chunked
brute force).  Both return identical results, including tie-breaking, so the
choice only affects speed.  Set ``MULTIRAT_DISABLE_NUMBA=1`` to force the numpy
path, or call :func:`set_backend` at runtime.

Coordinates live in the square ``[-half_width, half_width]^2``.  ``period`` is
the side of the wrapping square in torus mode and ``0.0`` otherwise.
"""
from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "MULTIRAT_DISABLE_NUMBA"

try:  # pragma: no cover - exercised implicitly
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


def _env_disables_numba() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


_backend = "numba" if (_HAVE_NUMBA and not _env_disables_numba()) else "numpy"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def _wrap_np(d, period):
    if period > 0.0:
        return d - period * np.floor(d / period + 0.5)
    return d


# ---------------------------------------------------------------- numpy path

_CHUNK = 1 << 22  # pairwise entries per brute-force block


def np_weighted_nearest(ux, uy, ax, ay, scale, half_width, period):
    nu, na = len(ux), len(ax)
    idx = np.full(nu, -1, dtype=np.int64)
    wd = np.full(nu, np.inf)
    if na == 0 or nu == 0:
        return idx, wd
    step = max(1, _CHUNK // na)
    for s in range(0, nu, step):
        dx = _wrap_np(ax[None, :] - ux[s:s + step, None], period)
        dy = _wrap_np(ay[None, :] - uy[s:s + step, None], period)
        w = np.sqrt(dx * dx + dy * dy) * scale[None, :]
        j = np.argmin(w, axis=1)
        idx[s:s + step] = j
        wd[s:s + step] = w[np.arange(len(j)), j]
    return idx, wd


def np_sensing_winners(x, y, backoff, radius, half_width, period):
    n = len(x)
    granted = np.ones(n, dtype=np.bool_)
    if n <= 1:
        return granted
    order = np.arange(n)
    step = max(1, _CHUNK // n)
    for s in range(0, n, step):
        sl = slice(s, s + step)
        dx = _wrap_np(x[None, :] - x[sl, None], period)
        dy = _wrap_np(y[None, :] - y[sl, None], period)
        near = (dx * dx + dy * dy) <= (radius[sl, None] ** 2)
        bi = backoff[sl, None]
        bj = backoff[None, :]
        beats = (bj < bi) | ((bj == bi) & (order[None, :] < order[sl, None]))
        beats &= order[None, :] != order[sl, None]
        granted[sl] = ~np.any(near & beats, axis=1)
    return granted


def np_count_pairs(x, y, r, half_width, period):
    n = len(x)
    if n < 2:
        return 0
    total = 0
    step = max(1, _CHUNK // n)
    for s in range(0, n, step):
        sl = slice(s, s + step)
        dx = _wrap_np(x[None, :] - x[sl, None], period)
        dy = _wrap_np(y[None, :] - y[sl, None], period)
        close = (dx * dx + dy * dy) < r * r
        upper = np.arange(n)[None, :] > np.arange(s, min(s + step, n))[:, None]
        total += int(np.count_nonzero(close & upper))
    return total


# ---------------------------------------------------------------- numba path

if _HAVE_NUMBA:
    njit = numba.njit(cache=True, boundscheck=False)

    @njit
    def _wrap(d, period):
        if period > 0.0:
            return d - period * np.floor(d / period + 0.5)
        return d

    @njit
    def _cell_of(v, lo, h, n):
        c = int((v - lo) / h)
        if c < 0:
            c = 0
        elif c >= n:
            c = n - 1
        return c

    @njit
    def _build_grid(x, y, lo, h, n):
        m = len(x)
        start = np.zeros(n * n + 1, dtype=np.int64)
        cell = np.empty(m, dtype=np.int64)
        for i in range(m):
            c = _cell_of(y[i], lo, h, n) * n + _cell_of(x[i], lo, h, n)
            cell[i] = c
            start[c + 1] += 1
        for c in range(n * n):
            start[c + 1] += start[c]
        fill = start[:-1].copy()
        items = np.empty(m, dtype=np.int64)
        for i in range(m):
            c = cell[i]
            items[fill[c]] = i
            fill[c] += 1
        return start, items

    @njit
    def nb_weighted_nearest(ux, uy, ax, ay, scale, half_width, period):
        nu = len(ux)
        na = len(ax)
        idx = np.full(nu, -1, dtype=np.int64)
        wd = np.full(nu, np.inf)
        if na == 0 or nu == 0:
            return idx, wd
        n = max(1, int(np.sqrt(na)))
        lo = -half_width
        h = 2.0 * half_width / n
        start, items = _build_grid(ax, ay, lo, h, n)
        smin = np.inf
        for j in range(na):
            if scale[j] < smin:
                smin = scale[j]
        rmax = n if period == 0.0 else n // 2 + 1
        for u in range(nu):
            px = ux[u]
            py = uy[u]
            cx = _cell_of(px, lo, h, n)
            cy = _cell_of(py, lo, h, n)
            best = np.inf
            bj = -1
            r = 0
            while r <= rmax:
                for oy in range(-r, r + 1):
                    edge = oy == -r or oy == r
                    stepx = 1 if edge else 2 * r
                    if r == 0:
                        stepx = 1
                    ox = -r
                    while ox <= r:
                        ix = cx + ox
                        iy = cy + oy
                        ok = True
                        if period > 0.0:
                            ix %= n
                            iy %= n
                        elif ix < 0 or ix >= n or iy < 0 or iy >= n:
                            ok = False
                        if ok:
                            # lower bound on distance from the user to this cell
                            ddx = _wrap(lo + (ix + 0.5) * h - px, period)
                            ddy = _wrap(lo + (iy + 0.5) * h - py, period)
                            bx = max(abs(ddx) - 0.5 * h, 0.0)
                            by = max(abs(ddy) - 0.5 * h, 0.0)
                            if np.sqrt(bx * bx + by * by) * smin <= best:
                                c = iy * n + ix
                                for k in range(start[c], start[c + 1]):
                                    j = items[k]
                                    dx = _wrap(ax[j] - px, period)
                                    dy = _wrap(ay[j] - py, period)
                                    w = np.sqrt(dx * dx + dy * dy) * scale[j]
                                    if w < best or (w == best and j < bj):
                                        best = w
                                        bj = j
                        ox += stepx
                # every cell beyond ring r is at least r*h away
                if r * h * smin > best:
                    break
                r += 1
            idx[u] = bj
            wd[u] = best
        return idx, wd

    @njit
    def _brute_winners(x, y, backoff, radius, period):
        n = len(x)
        granted = np.ones(n, dtype=np.bool_)
        for i in range(n):
            r2 = radius[i] * radius[i]
            for j in range(n):
                if j == i:
                    continue
                if backoff[j] < backoff[i] or (backoff[j] == backoff[i] and j < i):
                    dx = _wrap(x[j] - x[i], period)
                    dy = _wrap(y[j] - y[i], period)
                    if dx * dx + dy * dy <= r2:
                        granted[i] = False
                        break
        return granted

    @njit
    def nb_sensing_winners(x, y, backoff, radius, half_width, period):
        nn = len(x)
        if nn <= 1:
            return np.ones(nn, dtype=np.bool_)
        rmax = 0.0
        for i in range(nn):
            if radius[i] > rmax:
                rmax = radius[i]
        n = int(2.0 * half_width / rmax) if rmax > 0 else 1
        n = max(1, min(n, 4096))
        if period > 0.0 and n < 3:
            return _brute_winners(x, y, backoff, radius, period)
        lo = -half_width
        h = 2.0 * half_width / n
        start, items = _build_grid(x, y, lo, h, n)
        granted = np.ones(nn, dtype=np.bool_)
        for i in range(nn):
            cx = _cell_of(x[i], lo, h, n)
            cy = _cell_of(y[i], lo, h, n)
            r2 = radius[i] * radius[i]
            blocked = False
            for oy in range(-1, 2):
                if blocked:
                    break
                for ox in range(-1, 2):
                    ix = cx + ox
                    iy = cy + oy
                    if period > 0.0:
                        ix %= n
                        iy %= n
                    elif ix < 0 or ix >= n or iy < 0 or iy >= n:
                        continue
                    c = iy * n + ix
                    for k in range(start[c], start[c + 1]):
                        j = items[k]
                        if j == i:
                            continue
                        if backoff[j] < backoff[i] or (backoff[j] == backoff[i] and j < i):
                            dx = _wrap(x[j] - x[i], period)
                            dy = _wrap(y[j] - y[i], period)
                            if dx * dx + dy * dy <= r2:
                                blocked = True
                                break
                    if blocked:
                        break
            granted[i] = not blocked
        return granted

    @njit
    def nb_count_pairs(x, y, r, half_width, period):
        nn = len(x)
        if nn < 2:
            return 0
        n = int(2.0 * half_width / r) if r > 0 else 1
        n = max(1, min(n, 4096))
        total = 0
        r2 = r * r
        if period > 0.0 and n < 3:
            for i in range(nn):
                for j in range(i + 1, nn):
                    dx = _wrap(x[j] - x[i], period)
                    dy = _wrap(y[j] - y[i], period)
                    if dx * dx + dy * dy < r2:
                        total += 1
            return total
        lo = -half_width
        h = 2.0 * half_width / n
        start, items = _build_grid(x, y, lo, h, n)
        for i in range(nn):
            cx = _cell_of(x[i], lo, h, n)
            cy = _cell_of(y[i], lo, h, n)
            for oy in range(-1, 2):
                for ox in range(-1, 2):
                    ix = cx + ox
                    iy = cy + oy
                    if period > 0.0:
                        ix %= n
                        iy %= n
                    elif ix < 0 or ix >= n or iy < 0 or iy >= n:
                        continue
                    c = iy * n + ix
                    for k in range(start[c], start[c + 1]):
                        j = items[k]
                        if j <= i:
                            continue
                        dx = _wrap(x[j] - x[i], period)
                        dy = _wrap(y[j] - y[i], period)
                        if dx * dx + dy * dy < r2:
                            total += 1
        return total


# ---------------------------------------------------------------- dispatch

def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def weighted_nearest(ux, uy, ax, ay, scale, half_width, period=0.0):
    """Index of the AP minimising ``scale_j * |a_j - u|`` for each user, and that minimum.

    Ties go to the lowest AP index.  Users get index -1 and ``inf`` when there
    are no APs.
    """
    args = (_f64(ux), _f64(uy), _f64(ax), _f64(ay), _f64(scale), float(half_width), float(period))
    if _backend == "numba":
        return nb_weighted_nearest(*args)
    return np_weighted_nearest(*args)


def sensing_winners(x, y, backoff, radius, half_width, period=0.0):
    """Boolean mask of contenders with the smallest backoff inside their own sensing disk."""
    args = (_f64(x), _f64(y), _f64(backoff), _f64(radius), float(half_width), float(period))
    if _backend == "numba":
        return nb_sensing_winners(*args)
    return np_sensing_winners(*args)


def count_pairs(x, y, r, half_width, period=0.0):
    """Number of unordered point pairs at distance strictly below ``r``."""
    args = (_f64(x), _f64(y), float(r), float(half_width), float(period))
    if _backend == "numba":
        return int(nb_count_pairs(*args))
    return int(np_count_pairs(*args))
