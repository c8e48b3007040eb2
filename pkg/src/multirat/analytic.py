"""Closed-form and quadrature evaluation of the coexistence model.

Notation used in this module
----------------------------
``z``            the exponent 2/alpha.
``theta``        SIR threshold.
``assoc``        per-tier association probabilities.  ``assoc`` (noncrossing) is
                 normalised over the licensed tiers; ``assoc_hat`` (crossing)
                 over all tiers.
``nu``           per-tier void probabilities.
``rho``          per-tier channel-access probabilities (0 for tiers that never contend).
``p``            per-tier probability that the unlicensed gate gain clears the threshold.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, special

from .config import ConfigError, TierSpec

LN2 = math.log(2.0)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-8
    gh_nodes: int = 64
    limit: int = 400

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ConfigError("quadrature tolerances must be > 0")
        if self.gh_nodes < 8:
            raise ConfigError("Gauss-Hermite node count must be >= 8")

    def halved(self) -> "QuadratureSettings":
        return QuadratureSettings(self.abs_tol / 2, self.rel_tol / 2, self.gh_nodes, self.limit)


DEFAULT_QUAD = QuadratureSettings()


def _check_z(z):
    if not 0.0 < z < 1.0:
        raise ValueError(f"exponent z must lie in (0, 1), got {z}")


def _full_integral(z: float) -> float:
    """Integral of 1/(1+t^(1/z)) over [0, inf) = pi z / sin(pi z)."""
    return math.pi * z / math.sin(math.pi * z)


# --------------------------------------------------------------- l-function

def ell(x: float, y: float, z: float, settings: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Interference kernel ``x^z (pi z / sin(pi z) - int_0^{y^-z} dt / (1 + t^(1/z)))``.

    Evaluated by adaptive quadrature.  ``y = inf`` removes the integral term.
    For ``y^-z > 1`` the complementary tail integral is integrated instead,
    which is the same quantity without cancellation.
    """
    return ell_with_error(x, y, z, settings)[0]


def ell_with_error(x, y, z, settings: QuadratureSettings = DEFAULT_QUAD) -> tuple[float, float]:
    _check_z(z)
    if x <= 0:
        return 0.0, 0.0
    q = 1.0 / z
    scale = x ** z
    if math.isinf(y):
        return scale * _full_integral(z), 0.0
    if y <= 0:
        return 0.0, 0.0
    a = y ** (-z)
    f = lambda t: 1.0 / (1.0 + t ** q)
    kw = dict(epsabs=settings.abs_tol, epsrel=settings.rel_tol, limit=settings.limit)
    if a <= 1.0:
        val, err = integrate.quad(f, 0.0, a, **kw)
        return scale * (_full_integral(z) - val), scale * err
    val, err = integrate.quad(f, a, math.inf, **kw)
    return scale * val, scale * err


def ell_vec(x, y, z: float) -> np.ndarray:
    """Vectorised l-function through Gauss hypergeometric closed forms.

    With ``a = y^-z`` and ``q = 1/z``:
      * ``a <= 1``: ``int_0^a dt/(1+t^q) = a 2F1(1, z; 1+z; -a^q)``;
      * ``a > 1``:  ``int_a^inf dt/(1+t^q) = a^(1-q)/(q-1) 2F1(1, 1-z; 2-z; -a^-q)``.
    Both hypergeometric arguments lie in [-1, 0], where the series is well behaved.
    At z = 1/2 (path-loss exponent 4) the integral is ``arctan(sqrt(y))``.
    """
    _check_z(z)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    full = _full_integral(z)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if z == 0.5:
            integral = np.arctan(np.sqrt(np.maximum(y, 0.0)))
        else:
            q = 1.0 / z
            a = np.where(np.isinf(y), 0.0, np.power(np.maximum(y, 0.0), -z))
            integral = np.full(x.shape, full)
            lo = (a <= 1.0) & (a > 0.0)
            if lo.any():
                al = a[lo]
                integral[lo] = full - al * special.hyp2f1(1.0, z, 1.0 + z, -al ** q)
            hi = a > 1.0
            if hi.any():
                ah = a[hi]
                integral[hi] = ah ** (1.0 - q) / (q - 1.0) * special.hyp2f1(1.0, 1.0 - z, 2.0 - z, -ah ** (-q))
        integral = np.where(y <= 0, 0.0, integral)
        out = np.where(x > 0, np.power(np.maximum(x, 0.0), z) * integral, 0.0)
    return out


# ------------------------------------------------------- log-normal helpers

@functools.lru_cache(maxsize=32)
def _hermgauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ws = np.polynomial.hermite.hermgauss(n)
    xs.setflags(write=False)
    ws.setflags(write=False)
    return xs, ws


def lognormal_nodes(sigma_ln: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes/weights for E[f(G)] with ln G ~ N(0, sigma_ln^2)."""
    xs, ws = _hermgauss(int(n))
    return np.exp(math.sqrt(2.0) * sigma_ln * xs), ws / math.sqrt(math.pi)


def gain_threshold_probability(delta: float, shadowing_db: float, nodes: int = 64) -> float:
    """P[H G^-1 >= delta] = E[exp(-delta G)] for H ~ Exp(1) and log-normal G."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    s = shadowing_db * math.log(10.0) / 10.0
    if s == 0:
        return math.exp(-delta)
    g, w = lognormal_nodes(s, nodes)
    return float(np.dot(w, np.exp(-delta * g)))


# ------------------------------------------------------- channel access

def _uniform_intervals(tiers: Sequence[TierSpec]):
    """Backoff windows (with tau_{K+1} = 0) after checking the ordering assumption."""
    taus = np.array([t.max_backoff for t in tiers], dtype=float)
    finite = taus[np.isfinite(taus)]
    if np.any(np.diff(finite) > 0):
        raise ConfigError("backoff windows must be non-increasing in tier index among contending tiers")
    return np.append(taus, 0.0)


def _interval_term(S, lo, hi, tau_k):
    """(exp(-lo S) - exp(-hi S)) / (tau_k S), with the S -> 0 limit (hi - lo) / tau_k."""
    if hi <= lo:
        return 0.0
    if S * hi < 1e-12:
        return (hi - lo) / tau_k
    return (math.exp(-lo * S) * -math.expm1(-(hi - lo) * S)) / (tau_k * S)


def access_probability(tiers: Sequence[TierSpec], areas, nu, p, lambda_tilde,
                       method: str = "printed") -> np.ndarray:
    """Per-tier channel-access probability for uniform backoff windows.

    ``areas[k-1][m-1]`` is the mean contention area of a tier-m contender
    around a tier-k AP.  ``method="printed"`` evaluates the interval
    decomposition in which, for backoff values in ``[tau_{j+1}, tau_j]``,
    only tiers ``m <= j`` contend and the exponent is
    ``t * sum_m A_km p_m (1-nu_m) lambda_tilde_m (tau_j - tau_{j+1}) / tau_m``.
    ``method="matern"`` evaluates the type-II hard-core access probability
    ``(1/tau_k) int_0^tau_k exp(-sum_m A_km n_m min(t, tau_m)/tau_m) dt``
    with the same contender densities ``n_m``, i.e. it also counts the
    shorter-window tiers that have all finished backing off.
    Tiers that never contend get 0.
    """
    K = len(tiers)
    A = np.asarray(areas, dtype=float).reshape(K, K)
    nu = np.asarray(nu, dtype=float)
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    lt = np.asarray(lambda_tilde, dtype=float)
    taus = _uniform_intervals(tiers)
    dens = p * (1.0 - nu) * lt  # contender density per tier before the backoff thinning
    rho = np.zeros(K)
    for k in range(K):
        tk = taus[k]
        if not math.isfinite(tk):
            continue
        if tk == 0.0:
            rho[k] = 1.0
            continue
        if method == "printed":
            total = 0.0
            for j in range(k, K):
                width = taus[j] - taus[j + 1]
                S = 0.0
                for m in range(j + 1):
                    if math.isfinite(taus[m]) and taus[m] > 0:
                        S += A[k, m] * dens[m] * width / taus[m]
                if j == K - 1:
                    total += _interval_term(S, 0.0, taus[K - 1], tk)
                else:
                    total += _interval_term(S, taus[j + 1], taus[j], tk)
            rho[k] = total
        elif method == "matern":
            rho[k] = _matern_access(A[k], dens, taus[:K], tk)
        else:
            raise ValueError(f"unknown method {method!r}")
    return rho


def _matern_access(Ak, dens, taus, tk):
    # piecewise-linear exponent in t; integrate exactly between breakpoints
    breaks = sorted({0.0, tk, *[t for t in taus if math.isfinite(t) and 0 < t < tk]})
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        slope = 0.0
        const = 0.0
        for m, tm in enumerate(taus):
            if not math.isfinite(tm):
                continue
            if tm == 0.0 or tm <= lo:
                const += Ak[m] * dens[m]
            else:
                slope += Ak[m] * dens[m] / tm
        total += math.exp(-const) * _interval_term(slope, lo, hi, tk)
    return total


def access_probability_general(tiers: Sequence[TierSpec], areas, nu, p, lambda_tilde,
                               backoff_cdf: Sequence[Callable[[float], float]],
                               backoff_pdf: Sequence[Callable[[float], float]],
                               settings: QuadratureSettings = DEFAULT_QUAD) -> np.ndarray:
    """Interval decomposition for arbitrary backoff laws on [0, tau_m], by quadrature.

    The density integrated against is the tagged AP's own backoff density.
    """
    K = len(tiers)
    A = np.asarray(areas, dtype=float).reshape(K, K)
    nu = np.asarray(nu, dtype=float)
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    dens = p * (1.0 - nu) * np.asarray(lambda_tilde, dtype=float)
    taus = _uniform_intervals(tiers)
    rho = np.zeros(K)
    for k in range(K):
        if not math.isfinite(taus[k]):
            continue
        total = 0.0
        for j in range(k, K):
            lo, hi = taus[j + 1], taus[j]
            if hi <= lo:
                continue
            S = sum(A[k, m] * dens[m] * (backoff_cdf[m](hi) - backoff_cdf[m](lo))
                    for m in range(j + 1) if math.isfinite(taus[m]))
            val, _ = integrate.quad(lambda t: math.exp(-S * t) * backoff_pdf[k](t), lo, hi,
                                    epsabs=settings.abs_tol, epsrel=settings.rel_tol,
                                    limit=settings.limit)
            total += val
        rho[k] = total
    return rho


def uniform_backoff_laws(tiers: Sequence[TierSpec]):
    cdfs, pdfs = [], []
    for t in tiers:
        tau = t.max_backoff
        if math.isfinite(tau) and tau > 0:
            cdfs.append(lambda x, tau=tau: min(max(x / tau, 0.0), 1.0))
            pdfs.append(lambda x, tau=tau: 1.0 / tau if 0 <= x <= tau else 0.0)
        else:
            cdfs.append(lambda x: 0.0)
            pdfs.append(lambda x: 0.0)
    return cdfs, pdfs


# ------------------------------------------------------- coverage bounds

@dataclass
class BoundSet:
    """Lower bounds and lowest limits for one association mode at one threshold."""
    mode: str
    theta: float
    bounds: dict[str, float]
    limits: dict[str, float]
    intermediates: dict[str, object] = field(default_factory=dict)
    error: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelInputs:
    """Everything the bound formulas consume, per tier (arrays of length K)."""
    alpha: float
    sigma_ln: float
    nu: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    assoc: np.ndarray         # noncrossing association probabilities (licensed-normalised)
    assoc_hat: np.ndarray     # crossing association probabilities
    intensity: np.ndarray
    mass: np.ndarray | None = None  # lambda_k E[W^{2/alpha}], for the lambda-dagger intermediates

    @property
    def K(self) -> int:
        return len(self.nu)

    @property
    def z(self) -> float:
        return 2.0 / self.alpha

    def with_(self, **kw) -> "ModelInputs":
        d = dict(self.__dict__)
        d.update(kw)
        return ModelInputs(**d)

    def saturated(self) -> "ModelInputs":
        """Infinite user load and instantaneous backoff: nu = 0 and rho = 1 on contending tiers."""
        return self.with_(nu=np.zeros(self.K), rho=np.where(self.rho > 0, 1.0, 0.0))


def _ratio_nodes(m: ModelInputs, n: int):
    # G'/G for i.i.d. log-normals is log-normal with doubled ln-variance
    return lognormal_nodes(math.sqrt(2.0) * m.sigma_ln, n)


def _ell_same(s, z):
    return ell_vec(s, s, z)


def _ell_open(s, z):
    return ell_vec(s, np.inf, z)


def _licensed_unlicensed_link(m: ModelInputs, theta: float, weights: np.ndarray, cK_open: bool,
                              n: int, crossing: bool) -> float:
    """Nested expectation shared by the licensed-user unlicensed-band bounds.

    ``weights[m]`` multiplies tier m's inner expectation.  In noncrossing mode
    the tier-K term uses ``l(r theta, inf)``; in crossing mode it uses
    ``l(theta, theta)`` without any ratio.
    """
    z = m.z
    K = m.K
    g, w = _ratio_nodes(m, n)
    outer = g[:, None] * g[None, :] * theta      # [outer node, inner node]
    same = _ell_same(outer, z) @ w                # E_{r_m}[l(r_k r_m theta, r_k r_m theta)]
    inner = weights[:K - 1].sum() * same
    if crossing:
        inner = inner + weights[K - 1] * float(_ell_same(theta, z))
    else:
        inner = inner + weights[K - 1] * (_ell_open(outer, z) @ w)
    return float(np.dot(w, 1.0 / (1.0 + inner)))


def _coverage_noncrossing_core(m: ModelInputs, theta: float, n: int) -> dict[str, float]:
    z = m.z
    K = m.K
    a = m.assoc
    l_tt = float(_ell_same(theta, z))
    l_open = float(_ell_open(theta, z))
    c = (1.0 - m.nu) * m.rho * m.p * a
    if K > 1:
        P_Ll = 1.0 / (1.0 + l_tt * float(np.sum((1.0 - m.nu[:K - 1]) * a[:K - 1])))
        P_Lu = float(np.sum(a[:K - 1])) * _licensed_unlicensed_link(m, theta, c, True, n, False)
    else:
        P_Ll = P_Lu = math.nan
    if a[K - 1] > 0:
        P_U = 1.0 / (1.0 + (l_tt * c[K - 1] + l_open * float(np.sum(c[:K - 1]))) / a[K - 1])
    else:
        P_U = math.nan
    return {"P_Ll": P_Ll, "P_Lu": P_Lu, "P_U": P_U}


def _coverage_crossing_core(m: ModelInputs, theta: float, n: int, u_threshold: str) -> dict[str, float]:
    z = m.z
    K = m.K
    ah = m.assoc_hat
    l_tt = float(_ell_same(theta, z))
    P_Ll = 1.0 / (1.0 + l_tt * float(np.sum((1.0 - m.nu[:K - 1]) * ah[:K - 1]))) if K > 1 else math.nan
    c = (1.0 - m.nu) * m.rho * m.p * ah
    if K > 1:
        P_Lu = float(np.sum(m.assoc[:K - 1])) * _licensed_unlicensed_link(m, theta, c, False, n, True)
    else:
        P_Lu = math.nan
    if u_threshold == "printed":
        # threshold theta / G_m with G_m log-normal
        g, w = lognormal_nodes(m.sigma_ln, n)
        e_other = float(np.dot(w, _ell_same(theta / g, z)))
    elif u_threshold == "ratio":
        # threshold theta * G_m / G'_m, a log-normal ratio
        g, w = _ratio_nodes(m, n)
        e_other = float(np.dot(w, _ell_same(theta * g, z)))
    else:
        raise ValueError(f"unknown u_threshold {u_threshold!r}")
    P_U = 1.0 / (1.0 + c[K - 1] * l_tt + float(np.sum(c[:K - 1])) * e_other)
    return {"P_Ll": P_Ll, "P_Lu": P_Lu, "P_U": P_U}


def _with_error(core, m: ModelInputs, theta: float, settings: QuadratureSettings, *extra):
    hi = core(m, theta, settings.gh_nodes, *extra)
    lo = core(m, theta, max(8, settings.gh_nodes // 2), *extra)
    err = {k: abs(hi[k] - lo[k]) if not math.isnan(hi[k]) else math.nan for k in hi}
    return hi, err


def coexisting_weights(m: ModelInputs, mode: str, user_share_l: float = 0.5) -> np.ndarray:
    """Population weights for the coexisting coverage: licensed tiers then tier K.

    Noncrossing: a fraction ``user_share_l`` of users is licensed and spreads
    over licensed tiers by ``assoc``; the rest is served by tier K.
    Crossing: ``assoc_hat``.
    """
    K = m.K
    if mode == "crossing":
        return np.asarray(m.assoc_hat, dtype=float)
    if K == 1:
        return np.ones(1)
    w = np.empty(K)
    w[:K - 1] = user_share_l * m.assoc[:K - 1] / max(np.sum(m.assoc[:K - 1]), 1e-300)
    w[K - 1] = 1.0 - user_share_l
    return w


def _p_cov(vals: Mapping[str, float], weights: np.ndarray) -> float:
    K = len(weights)
    lic = float(np.sum(weights[:K - 1])) * vals["P_Ll"] if K > 1 else 0.0
    return lic + float(weights[K - 1]) * vals["P_U"]


def _intermediates(m: ModelInputs, theta: float, crossing: bool) -> dict[str, object]:
    K = m.K
    inf = math.inf
    out = {
        "theta_k": [theta if k == K - 1 else inf for k in range(K)],
        "Theta_km": "ratio*theta for m<K, +inf for m=K" if not crossing
        else "ratio*theta for m<K, theta for m=K; tier-K row theta/G_m",
    }
    if m.mass is not None:
        out["lambda_dagger"] = list(m.rho * m.p * m.mass)
    return out


def coverage_bounds_noncrossing(m: ModelInputs, theta: float, settings: QuadratureSettings = DEFAULT_QUAD,
                                user_share_l: float = 0.5) -> BoundSet:
    """Link-coverage lower bounds and their saturated limits with separate user populations."""
    b, err = _with_error(_coverage_noncrossing_core, m, theta, settings)
    lim, _ = _with_error(_coverage_noncrossing_core, m.saturated(), theta, settings)
    w = coexisting_weights(m, "noncrossing", user_share_l)
    b["P_cov"] = _p_cov(b, w)
    lim["P_cov"] = _p_cov(lim, w)
    return BoundSet("noncrossing", theta, b, lim, _intermediates(m, theta, False), err)


def coverage_bounds_crossing(m: ModelInputs, theta: float, settings: QuadratureSettings = DEFAULT_QUAD,
                             u_threshold: str = "printed") -> BoundSet:
    """Link-coverage lower bounds and limits when users may pick any tier.

    ``m.nu``/``m.rho`` must already be the crossing-mode quantities.
    ``u_threshold`` selects the tier-K user's threshold for licensed
    interferers: ``"printed"`` uses theta/G_m, ``"ratio"`` uses theta G_m/G'_m.
    """
    b, err = _with_error(_coverage_crossing_core, m, theta, settings, u_threshold)
    lim, _ = _with_error(_coverage_crossing_core, m.saturated(), theta, settings, u_threshold)
    w = coexisting_weights(m, "crossing")
    b["P_cov"] = _p_cov(b, w)
    lim["P_cov"] = _p_cov(lim, w)
    return BoundSet("crossing", theta, b, lim, _intermediates(m, theta, True), err)


def classic_limit(theta: float, alpha: float) -> float:
    """Coverage of the nearest-AP Poisson network without void cells."""
    return 1.0 / (1.0 + float(ell_vec(theta, theta, 2.0 / alpha)))


# ------------------------------------------------------- capacity

def spectral_integral(P: Callable[[float], float], z: float = 0.5,
                      settings: QuadratureSettings = DEFAULT_QUAD,
                      decades: int = 12) -> tuple[float, float]:
    """int_0^inf P(theta) / (ln2 (1+theta)) dtheta.

    Below theta = 1 the map theta = t/(1-t) gives ``P(theta) / (ln2 (1-t))``
    on t in [0, 1/2].  Above it, theta = 1/s gives ``P(1/s) / (ln2 s (1+s))``
    on s in (0, 1]; this form keeps full precision where 1 - t would cancel.
    Bounds with a small interference weight stay flat up to large theta
    before decaying like ``theta^-z``, so the s range is cut at ``decades``
    decades.  The last piece carries the endpoint factor ``s^(z-1)`` through
    QUADPACK's algebraic weight, leaving a bounded remainder.
    """
    def lower(t):
        return P(t / (1.0 - t)) / ((1.0 - t) * LN2)

    def upper(s):
        return P(1.0 / s) / (s * (1.0 + s) * LN2)

    def tail(s):
        if s <= 0.0:
            s = 1e-300
        return P(1.0 / s) * s ** (-z) / ((1.0 + s) * LN2)

    opts = dict(epsabs=settings.abs_tol, epsrel=settings.rel_tol, limit=settings.limit)
    cuts = [10.0 ** (-j) for j in range(decades + 1)]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total, err = integrate.quad(lower, 0.0, 0.5, **opts)
            for b, a in zip(cuts, cuts[1:]):
                v, e = integrate.quad(upper, a, b, **opts)
                total += v
                err += e
            v, e = integrate.quad(tail, 0.0, cuts[-1], weight="alg", wvar=(z - 1.0, 0.0), **opts)
        except integrate.IntegrationWarning as exc:
            msg = " ".join(str(exc).split())
            raise QuadratureError(f"capacity integral did not converge: {msg}") from exc
    return total + v, err + e


@dataclass
class CapacitySet:
    mode: str
    bounds: dict[str, float]
    limits: dict[str, float]
    error: dict[str, float]


def capacity_bounds(m: ModelInputs, theta: float, mode: str = "noncrossing",
                    settings: QuadratureSettings = DEFAULT_QUAD, u_threshold: str = "printed",
                    access_fraction: float | None = None) -> CapacitySet:
    """Spectrum-efficiency and network-capacity lower bounds with their saturated limits.

    ``theta`` is the operating threshold for the coverage factors of the
    network capacity; the spectrum efficiencies integrate over all thresholds.
    ``access_fraction`` overrides ``sum_{k<K} rho_k p_k assoc_k``.
    """
    K = m.K
    z = m.z
    if mode == "noncrossing":
        core = lambda mm, th: _coverage_noncrossing_core(mm, th, settings.gh_nodes)
    elif mode == "crossing":
        core = lambda mm, th: _coverage_crossing_core(mm, th, settings.gh_nodes, u_threshold)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    def assemble(mm: ModelInputs, frac):
        cache: dict[float, dict] = {}

        def get(th, key):
            if th not in cache:
                cache[th] = core(mm, th)
            return cache[th][key]

        i_ll, e_ll = spectral_integral(lambda th: get(th, "P_Ll"), z, settings) if K > 1 else (0.0, 0.0)
        i_lu, e_lu = spectral_integral(lambda th: get(th, "P_Lu"), z, settings) if K > 1 else (0.0, 0.0)
        i_u, e_u = spectral_integral(lambda th: get(th, "P_U"), z, settings)
        if frac is None:
            frac = float(np.sum(mm.rho[:K - 1] * mm.p[:K - 1] * mm.assoc[:K - 1]))
        C_L = i_ll + frac * i_lu
        C_U = mm.rho[K - 1] * mm.p[K - 1] * i_u
        at = core(mm, theta)
        lam = mm.intensity
        cov = float(np.sum(lam[:K - 1] * (1.0 - mm.nu[:K - 1]))) * at["P_Ll"] * C_L if K > 1 else 0.0
        cov += lam[K - 1] * (1.0 - mm.nu[K - 1]) * at["P_U"] * C_U
        vals = {"C_L": C_L, "C_U": C_U, "C_L+C_U": C_L + C_U, "C_cov": cov}
        errs = {"C_L": e_ll + frac * e_lu, "C_U": mm.rho[K - 1] * mm.p[K - 1] * e_u}
        errs["C_L+C_U"] = errs["C_L"] + errs["C_U"]
        errs["C_cov"] = (float(np.sum(lam[:K - 1] * (1.0 - mm.nu[:K - 1]))) * at["P_Ll"] * errs["C_L"]
                         + lam[K - 1] * (1.0 - mm.nu[K - 1]) * at["P_U"] * errs["C_U"])
        return vals, errs

    b, err = assemble(m, access_fraction)
    lim, _ = assemble(m.saturated(), None)
    return CapacitySet(mode, b, lim, err)
