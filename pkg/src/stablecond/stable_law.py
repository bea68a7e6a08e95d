"""Distribution function, density and quantile table of the unit-time law.

The law is the one produced by :func:`stablecond.stable_model.cms_transform`.
Writing the draw as ``A(V) * W**((alpha-1)/alpha)`` with ``A`` positive
exactly when ``V > -b`` gives, for ``x > 0``,

    alpha > 1:  P(X > x) = (1/pi) * int_{-b}^{pi/2} exp(-(x/A(V))**k) dV,   k = alpha/(alpha-1)
    alpha < 1:  P(X > x) = (1/pi) * int_{-b}^{pi/2} 1 - exp(-(A(V)/x)**k) dV, k = alpha/(1-alpha)

Negative arguments follow from ``X(rho) = -X(rho_hat)`` in law.  Far tails
use the convergent (alpha < 1) or asymptotic (alpha > 1) power series

    P(X > x) = (1/pi) * sum_n (-1)**(n+1) Gamma(n*alpha)/n! sin(n*pi*alpha*rho) x**(-n*alpha).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .stable_model import StableParams

__all__ = [
    "stable_cdf",
    "stable_sf",
    "stable_pdf",
    "QuantileTable",
    "quantile_table",
    "DensityTable",
    "density_table",
]

_SERIES_START = 1e-4  # leading tail term below which the power series is used
_LEVELS = (-30.0, -12.0, -5.0, -2.0, 0.0, 1.0, 2.0, 3.7)


def _log_a(alpha: float, b: float, v):
    return (
        np.log(np.sin(alpha * (v + b)))
        - np.log(np.cos(v)) / alpha
        + (1.0 - alpha) / alpha * np.log(np.cos(v - alpha * (v + b)))
    )


def _series(alpha: float, rho: float, x: float, density: bool) -> float | None:
    """Tail power series; ``None`` when it has not converged."""
    total = 0.0
    lx = np.log(x)
    for n in range(1, 60):
        if density:
            lg = gammaln(n * alpha + 1.0) - gammaln(n + 1.0) - (n * alpha + 1.0) * lx
        else:
            lg = gammaln(n * alpha) - gammaln(n + 1.0) - n * alpha * lx
        term = (-1) ** (n + 1) * np.exp(lg) * np.sin(n * np.pi * alpha * rho)
        total += term
        if abs(term) <= 1e-17 * abs(total) and n > 2:
            return total / np.pi
    return None


def _pos_tail(alpha: float, rho: float, x: float, density: bool) -> float:
    """``P(X > x)`` or the density at ``x`` for ``x > 0``."""
    if alpha == 1.0:
        return 1.0 / (np.pi * (1.0 + x * x)) if density else np.arctan2(1.0, x) / np.pi
    lead = np.exp(gammaln(alpha) - alpha * np.log(x)) / np.pi
    if lead < _SERIES_START:
        val = _series(alpha, rho, x, density)
        if val is not None:
            return val
    b = np.pi * (rho - 0.5)
    lo, hi = -b, np.pi / 2
    lx = np.log(x)
    if alpha > 1.0:
        k = alpha / (alpha - 1.0)

        def expo(v):
            return k * (lx - _log_a(alpha, b, v))
    else:
        k = alpha / (1.0 - alpha)

        def expo(v):
            return k * (_log_a(alpha, b, v) - lx)

    # the exponent is monotone in v; splitting at a ladder of its level sets
    # keeps every subinterval free of unresolved boundary layers
    eps = 1e-13
    e_lo, e_hi = expo(lo + eps), expo(hi - eps)
    edges = [lo, hi]
    for level in _LEVELS:
        if (e_lo - level) * (e_hi - level) < 0:
            edges.append(optimize.brentq(lambda v: expo(v) - level, lo + eps, hi - eps, xtol=1e-15))
    edges.sort()

    if density:
        if alpha > 1.0:
            def f(v):
                e = expo(v)
                return k / x * np.exp(e - np.exp(e)) if e < 700 else 0.0
        else:
            def f(v):
                e = expo(v)
                return k / x * np.exp(e - np.exp(e)) if e < 700 else 0.0
    else:
        if alpha > 1.0:
            def f(v):
                e = expo(v)
                return np.exp(-np.exp(e)) if e < 700 else 0.0
        else:
            def f(v):
                e = expo(v)
                return -np.expm1(-np.exp(e)) if e < 700 else 1.0

    val = sum(
        integrate.quad(f, a, c, epsabs=0.0, epsrel=1e-12, limit=400, full_output=1)[0]
        for a, c in zip(edges[:-1], edges[1:])
    )
    return val / np.pi


def _log_a_off(alpha: float, b: float, s, upper: bool):
    """``log A`` and ``d log A / d log s`` at offset ``s`` from one end.

    ``upper=False`` means ``v = -b + s``; ``upper=True`` means ``v = pi/2 - s``.
    Working with offsets keeps full relative precision next to the ends.
    """
    if upper:
        v = np.pi / 2 - s
        s1 = np.sin(alpha * (v + b))
        cosv = np.sin(s)
        tanv = 1.0 / np.tan(s)
        sgn = -1.0
    else:
        v = -b + s
        s1 = np.sin(alpha * s)
        cosv = np.cos(v)
        tanv = np.tan(v)
        sgn = 1.0
    m = v - alpha * (v + b)
    la = np.log(s1) - np.log(cosv) / alpha + (1.0 - alpha) / alpha * np.log(np.cos(m))
    dv = alpha * np.cos(alpha * (v + b)) / s1 + tanv / alpha - (1.0 - alpha) ** 2 / alpha * np.tan(m)
    return la, sgn * s * dv


@lru_cache(maxsize=64)
def _log_a_grid(alpha: float, rho: float):
    """``log A`` against ``log s`` on each half of ``(-b, pi/2)``."""
    b = np.pi * (rho - 0.5)
    half = (np.pi / 2 + b) / 2
    q = np.linspace(np.log(1e-280), np.log(half), 3000)
    out = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for upper in (False, True):
            la, _ = _log_a_off(alpha, b, np.exp(q), upper)
            la = np.maximum.accumulate(la) if not upper else np.minimum.accumulate(la)
            out.append(la)
    return q, out[0], out[1]


_E_MIN, _E_MAX, _E_PANEL = -40.0, 5.0, 0.5


@lru_cache(maxsize=1)
def _e_rule():
    """Composite Gauss-Legendre nodes and weights on ``[_E_MIN, _E_MAX]``."""
    t, w = np.polynomial.legendre.leggauss(16)
    edges = np.arange(_E_MIN, _E_MAX + 1e-9, _E_PANEL)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tail_vec(alpha: float, rho: float, x: np.ndarray, density: bool) -> np.ndarray:
    """Vectorised tail probability / density for ``x > 0``.

    The integral over ``v`` is rewritten as an integral over the exponent
    ``e = +-k (log x - log A(v))``, which is monotone in ``v``; ``v(e)`` is
    found by interpolation on a clustered grid followed by Newton steps.
    """
    x = np.asarray(x, dtype=float)
    if alpha == 1.0:
        return 1.0 / (np.pi * (1.0 + x * x)) if density else np.arctan2(1.0, x) / np.pi
    out = np.empty_like(x)
    lx = np.log(x)
    lead = np.exp(gammaln(alpha) - alpha * lx) / np.pi
    todo = np.ones(x.shape, dtype=bool)
    use_series = lead < _SERIES_START
    if np.any(use_series):
        ser = _series_vec(alpha, rho, x[use_series], density)
        ok = np.isfinite(ser)
        idx = np.flatnonzero(use_series)
        out[idx[ok]] = ser[ok]
        todo[idx[ok]] = False
    if not np.any(todo):
        return out
    xs, lxs = x[todo], lx[todo]
    b = np.pi * (rho - 0.5)
    width = np.pi / 2 + b
    q, la_lo, la_hi = _log_a_grid(alpha, rho)
    mid = la_lo[-1]
    # e increases with v for alpha < 1 and decreases for alpha > 1
    if alpha > 1.0:
        k, sgn = alpha / (alpha - 1.0), -1.0
    else:
        k, sgn = alpha / (1.0 - alpha), 1.0
    en, ew = _e_rule()
    e_all = np.concatenate((en, [_E_MIN, _E_MAX]))
    target = lxs[:, None] + sgn * e_all[None, :] / k  # required log A
    upper = target > mid
    # la_hi decreases in q, so interpolate on the reversed arrays
    qv = np.where(upper,
                  np.interp(target, la_hi[::-1], q[::-1]),
                  np.interp(target, la_lo, q))
    qmax = np.log(width) - 1e-12
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(6):
            la_l, d_l = _log_a_off(alpha, b, np.exp(qv), False)
            la_u, d_u = _log_a_off(alpha, b, np.exp(qv), True)
            la = np.where(upper, la_u, la_l)
            d = np.where(upper, d_u, d_l)
            step = (la - target) / d
            qv = np.clip(qv - np.where(np.isfinite(step), step, 0.0), q[0], qmax)
        la_l, d_l = _log_a_off(alpha, b, np.exp(qv), False)
        la_u, d_u = _log_a_off(alpha, b, np.exp(qv), True)
        la = np.where(upper, la_u, la_l)
        d = np.where(upper, d_u, d_l)
        # targets beyond the representable range sit within 1e-280 of an
        # end and carry no mass
        reached = np.abs(la - target) < 1e-9 * np.maximum(1.0, np.abs(target))
        s_off = np.exp(qv)
        dvde = np.where(reached, s_off / (k * np.abs(d)), 0.0)[:, :-2]
        e = en[None, :]
        if density:
            f = k / xs[:, None] * np.exp(e - np.exp(e))
        elif alpha > 1.0:
            f = np.exp(-np.exp(e))
        else:
            f = -np.expm1(-np.exp(e))
        val = np.sum(ew * f * dvde, axis=1)
    if not density:
        # distance from v(e_end) to pi/2, where the integrand is 1 to exp(-40)
        col = -2 if alpha > 1.0 else -1
        s_end = np.where(reached[:, col], s_off[:, col], 0.0)
        val += np.where(upper[:, col], s_end, width - s_end)
    out[todo] = val / np.pi
    return out


def _series_vec(alpha: float, rho: float, x: np.ndarray, density: bool) -> np.ndarray:
    total = np.zeros_like(x)
    done = np.zeros(x.shape, dtype=bool)
    lx = np.log(x)
    for n in range(1, 60):
        if density:
            lg = gammaln(n * alpha + 1.0) - gammaln(n + 1.0) - (n * alpha + 1.0) * lx
        else:
            lg = gammaln(n * alpha) - gammaln(n + 1.0) - n * alpha * lx
        term = (-1) ** (n + 1) * np.exp(lg) * np.sin(n * np.pi * alpha * rho)
        total = np.where(done, total, total + term)
        if n > 2:
            done |= np.abs(term) <= 1e-17 * np.abs(total)
        if done.all():
            break
    return np.where(done, total / np.pi, np.nan)


def _eval(p: StableParams, x, kind: str):
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    res = np.empty_like(flat)
    pos, neg, zero = flat > 0, flat < 0, flat == 0
    dens = kind == "pdf"
    if np.any(pos):
        res[pos] = _tail_vec(p.alpha, p.rho, flat[pos], dens)
    if np.any(neg):
        res[neg] = _tail_vec(p.alpha, p.rho_hat, -flat[neg], dens)
    if kind == "pdf":
        if np.any(zero):
            tiny = np.array([1e-7])
            res[zero] = 0.5 * (_tail_vec(p.alpha, p.rho, tiny, True)[0]
                               + _tail_vec(p.alpha, p.rho_hat, tiny, True)[0])
    else:
        # res holds P(X > x) for x > 0 and P(X < x) for x < 0
        if kind == "cdf":
            res[pos] = 1.0 - res[pos]
            res[zero] = p.rho_hat
        else:
            res[neg] = 1.0 - res[neg]
            res[zero] = p.rho
    out = res.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def stable_cdf(p: StableParams, x):
    """Distribution function ``P(X <= x)`` of the unit-time law."""
    return _eval(p, x, "cdf")


def stable_sf(p: StableParams, x):
    """Survival function ``P(X > x)`` of the unit-time law."""
    return _eval(p, x, "sf")


def stable_pdf(p: StableParams, x):
    """Density of the unit-time law."""
    return _eval(p, x, "pdf")


def _logit(p: StableParams, x: np.ndarray) -> np.ndarray:
    """``log(F(x) / (1 - F(x)))`` computed from the smaller tail."""
    t = np.full(x.shape, np.log(p.rho_hat / p.rho))
    pos, neg = x > 0, x < 0
    s = _tail_vec(p.alpha, p.rho, x[pos], False)
    t[pos] = np.log1p(-s) - np.log(s)
    c = _tail_vec(p.alpha, p.rho_hat, -x[neg], False)
    t[neg] = np.log(c) - np.log1p(-c)
    return t


@dataclass(frozen=True)
class QuantileTable:
    """Quantiles on a uniform grid in ``t = log(u/(1-u))``.

    Attributes
    ----------
    t_max : float
        Half-width of the tabulated logit range.
    values : ndarray
        Quantiles at ``t = -t_max + j * step``.
    """

    alpha: float
    b: float
    t_max: float
    step: float
    values: np.ndarray

    def __call__(self, u):
        """Quantile by linear interpolation (tabulated range only)."""
        u = np.asarray(u, dtype=float)
        t = np.log(u) - np.log1p(-u)
        pos = np.clip((t + self.t_max) / self.step, 0, len(self.values) - 1.000001)
        j = pos.astype(int)
        f = pos - j
        return (1 - f) * self.values[j] + f * self.values[j + 1]


@lru_cache(maxsize=32)
def _quantile_table_cached(alpha: float, rho: float, t_max: float, n_nodes: int, n_table: int):
    p = StableParams(alpha, rho)
    tail_p = np.exp(-t_max) / 4.0
    # x beyond which each tail probability drops below tail_p
    reach = []
    for r in (p.rho, p.rho_hat):
        c = np.exp(gammaln(alpha)) * max(np.sin(np.pi * alpha * r), 1e-300) / np.pi
        reach.append(max(np.arcsinh((c / tail_p) ** (1.0 / alpha)) + 1.0, 5.0))
    # dense core, geometric clustering at the origin, coarser tails
    near0 = np.geomspace(1e-8, 4.0, n_nodes // 8)
    core = np.concatenate((np.linspace(-4.0, 4.0, n_nodes // 4), near0, -near0, [0.0]))
    y = np.unique(np.concatenate((
        np.linspace(-reach[1], -4.0, n_nodes // 4), core, np.linspace(4.0, reach[0], n_nodes // 4))))
    x = np.sinh(y)
    t = _logit(p, x)
    keep = np.concatenate(([True], t[1:] > np.maximum.accumulate(t)[:-1]))
    spline = CubicSpline(t[keep], y[keep])
    tg = np.linspace(-t_max, t_max, n_table)
    return np.sinh(spline(tg)), tg[1] - tg[0]


def quantile_table(p: StableParams, t_max: float = 23.0, n_nodes: int = 4000,
                   n_table: int = 1 << 16) -> QuantileTable:
    """Tabulated quantile function of the unit-time law.

    Parameters
    ----------
    p : StableParams
    t_max : float
        Logit half-range covered by the table; draws outside it (probability
        about ``2*exp(-t_max)``) are left to the caller, e.g. inversion of
        the Pareto tail ``P(X > x) ~ Gamma(alpha) sin(pi alpha rho) / pi * x**-alpha``.
    n_nodes : int
        Exact distribution-function evaluations used to fit the inverse.
    n_table : int
        Size of the uniform lookup table.
    """
    values, step = _quantile_table_cached(p.alpha, p.rho, t_max, n_nodes, n_table)
    return QuantileTable(p.alpha, np.pi * (p.rho - 0.5), t_max, step, values)


@dataclass(frozen=True)
class DensityTable:
    """Unit-time density on a grid uniform in ``y = asinh(x)``.

    Outside ``|y| <= y_max`` the leading Lévy-tail term is used.
    """

    y_max: float
    step: float
    values: np.ndarray  # density at the grid points
    tail_pos: float  # coefficient of x**(-1-alpha) for x > 0
    tail_neg: float
    alpha: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.arcsinh(x)
        pos = np.clip((y + self.y_max) / self.step, 0, len(self.values) - 1.000001)
        j = pos.astype(int)
        f = pos - j
        inner = (1 - f) * self.values[j] + f * self.values[j + 1]
        ax = np.maximum(np.abs(x), 1.0)  # only used where |x| is large
        outer = np.where(x > 0, self.tail_pos, self.tail_neg) * ax ** (-1.0 - self.alpha)
        return np.where(np.abs(y) <= self.y_max, inner, outer)


@lru_cache(maxsize=32)
def _density_table_cached(alpha: float, rho: float, y_max: float, n: int):
    p = StableParams(alpha, rho)
    y = np.linspace(-y_max, y_max, n)
    return stable_pdf(p, np.sinh(y)), y[1] - y[0]


def density_table(p: StableParams, y_max: float = 12.0, n: int = 4801) -> DensityTable:
    """Tabulated unit-time density for fast repeated evaluation."""
    values, step = _density_table_cached(p.alpha, p.rho, y_max, n)
    c = np.exp(gammaln(p.alpha + 1.0)) / np.pi
    return DensityTable(y_max, step, values, c * p.sin_ar, c * p.sin_arh, p.alpha)
