"""Monte Carlo engine for the process killed on entering ``[-1, 1]``.

Paths are Euler grids with i.i.d. stable increments drawn from the tabulated
quantile function (logit range ``|t| <= 23``) with Pareto inversion beyond it.
Work is split into fixed-size blocks; block ``k`` draws from ``rng.child(k)``
so results do not depend on the number of worker threads
(``STABLECOND_WORKERS``).

The Doob chain samples the h-transformed process directly: each step draws
the next position from ``p_dt(y - x) h(y) 1{|y| > 1}`` on a grid that is
geometrically refined towards ``+-1``.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, roots_jacobi, roots_legendre

from .errors import DomainError, GridFailure, InsufficientAcceptance, KilledPath, ScopeError
from .harmonic import HKind, _exterior, avoid_zero_e, h_function
from .hitting_laws import (
    HittingWindow,
    Side,
    circ_closest_reach_mass,
    closest_reach_mass,
    entrance_window_mass,
)
from .stable_law import density_table, quantile_table
from .stable_model import RngStream, StableParams

__all__ = [
    "PathSample",
    "SimConfig",
    "EstimateWithCI",
    "CompactSet",
    "ConditioningKind",
    "Conditioning",
    "DoobSummary",
    "simulate_killed_path",
    "weighted_time_t_estimator",
    "weighted_exit_estimator",
    "exit_positions",
    "exit_weights",
    "simulate_doob_chain",
    "doob_chain_batch",
    "empirical_closest_reach",
    "closest_reach_sample",
    "conditional_law_estimator",
    "n_workers",
]

BLOCK_SIZE = 4096
WORKERS_ENV = "STABLECOND_WORKERS"


# ---------------------------------------------------------------------------
# data types


@dataclass
class PathSample:
    """A simulated grid path.

    ``kill_index`` is the first grid index with ``|position| <= 1`` (``None``
    when the path was not killed); ``truncated`` marks paths stopped at the
    horizon.
    """

    times: np.ndarray
    positions: np.ndarray
    killed: bool
    kill_index: int | None
    truncated: bool

    def __post_init__(self):
        if len(self.times) != len(self.positions) or len(self.times) == 0:
            raise DomainError("times and positions must be non-empty and of equal length")
        if abs(self.positions[0]) <= 1.0:
            raise DomainError("a path must start outside [-1, 1]")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    dt : float
        Time step.
    horizon : float
        Maximal simulated time.
    n_paths : int
        Number of paths (or chains).
    rng : RngStream
        Root stream; block ``k`` uses ``rng.child(k)``.
    boundary_cutoff : float
        Distance to ``+-1`` below which a Doob chain counts as absorbed.
    """

    dt: float = 1e-3
    horizon: float = 10.0
    n_paths: int = 10_000
    rng: RngStream = field(default_factory=lambda: RngStream(0))
    boundary_cutoff: float = 1e-4

    def __post_init__(self):
        if not (self.dt > 0 and self.dt < self.horizon):
            raise DomainError("need 0 < dt < horizon")
        if int(self.n_paths) < 1:
            raise DomainError("n_paths must be >= 1")
        if not self.boundary_cutoff > 0:
            raise DomainError("boundary_cutoff must be positive")

    def with_(self, **kw) -> "SimConfig":
        d = dict(dt=self.dt, horizon=self.horizon, n_paths=self.n_paths, rng=self.rng,
                 boundary_cutoff=self.boundary_cutoff)
        d.update(kw)
        return SimConfig(**d)


@dataclass(frozen=True)
class EstimateWithCI:
    """Sample mean with its standard error ``std / sqrt(n)``."""

    value: float
    std_error: float
    n: int

    @classmethod
    def from_samples(cls, s) -> "EstimateWithCI":
        s = np.asarray(s, dtype=float)
        n = len(s)
        if n == 0:
            raise DomainError("no samples")
        sd = float(np.std(s, ddof=1)) if n > 1 else 0.0
        return cls(float(np.mean(s)), sd / math.sqrt(n), n)

    def within(self, target: float, k: float = 3.0, extra: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.std_error + extra


@dataclass(frozen=True)
class CompactSet:
    """Union of two closed intervals outside ``[-1, 1]``."""

    intervals: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        iv = tuple((float(a), float(b)) for a, b in self.intervals)
        if len(iv) != 2:
            raise DomainError("need exactly two intervals")
        for a, b in iv:
            if not a < b:
                raise DomainError("empty interval")
            if a <= 1.0 and b >= -1.0:
                raise DomainError("intervals must avoid [-1, 1]")
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def symmetric(cls, inner: float, outer: float) -> "CompactSet":
        return cls(((-outer, -inner), (inner, outer)))

    def interior_contains(self, x: float) -> bool:
        return any(a < x < b for a, b in self.intervals)

    def as_array(self) -> np.ndarray:
        return np.array(self.intervals, dtype=float).ravel()


def n_workers() -> int:
    """Worker threads for block-parallel sampling (``STABLECOND_WORKERS``, default 1)."""
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _blocks(n: int, size: int = BLOCK_SIZE):
    return [(k, min(size, n - k * size)) for k in range((n + size - 1) // size)]


def _run_blocks(fn, rng: RngStream, n: int):
    """Apply ``fn(generator, count)`` to each block; results in block order."""
    jobs = _blocks(n)
    def one(job):
        k, m = job
        return fn(rng.child(k).generator, m)
    w = n_workers()
    if w == 1 or len(jobs) == 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(one, jobs))


# ---------------------------------------------------------------------------
# increment sampling


class _Sampler:
    """Flattened quantile table plus Pareto tail constants for the kernels."""

    def __init__(self, p: StableParams):
        qt = quantile_table(p)
        c = np.exp(gammaln(p.alpha)) / np.pi
        self.vals = qt.values
        self.tmax = float(qt.t_max)
        self.step = float(qt.step)
        self.alpha = float(p.alpha)
        self.cpos = float(c * p.sin_ar)
        self.cneg = float(c * p.sin_arh)

    @property
    def args(self):
        return self.vals, self.tmax, self.step, self.alpha, self.cpos, self.cneg


@lru_cache(maxsize=16)
def _sampler(alpha: float, rho: float) -> _Sampler:
    return _Sampler(StableParams(alpha, rho))


def _get_sampler(p: StableParams) -> _Sampler:
    return _sampler(p.alpha, p.rho)


@njit(nogil=True, cache=True)
def _unit_draw(g, vals, tmax, step, alpha, cpos, cneg):
    u = g.random()
    while u == 0.0:
        u = g.random()
    t = math.log(u) - math.log1p(-u)
    if t >= tmax:
        return (cpos / (1.0 - u)) ** (1.0 / alpha)
    if t <= -tmax:
        return -((cneg / u) ** (1.0 / alpha))
    pos = (t + tmax) / step
    j = int(pos)
    f = pos - j
    return vals[j] * (1.0 - f) + vals[j + 1] * f


@njit(nogil=True, cache=True)
def _draw_many(g, n, vals, tmax, step, alpha, cpos, cneg):
    out = np.empty(n)
    for i in range(n):
        out[i] = _unit_draw(g, vals, tmax, step, alpha, cpos, cneg)
    return out


def draw_unit(p: StableParams, rng: RngStream, n: int) -> np.ndarray:
    """``n`` unit-time draws through the tabulated sampler (used for validation)."""
    s = _get_sampler(p)
    return _draw_many(rng.generator, int(n), *s.args)


# ---------------------------------------------------------------------------
# killed paths


@njit(nogil=True, cache=True)
def _path_kernel(g, x, nmax, scale, vals, tmax, step, alpha, cpos, cneg):
    pos = np.empty(nmax + 1)
    pos[0] = x
    y = x
    for i in range(1, nmax + 1):
        y += scale * _unit_draw(g, vals, tmax, step, alpha, cpos, cneg)
        pos[i] = y
        if abs(y) <= 1.0:
            return pos[: i + 1], i
    return pos, -1


def _nsteps(t: float, dt: float) -> int:
    return max(1, int(round(t / dt)))


def simulate_killed_path(p: StableParams, x, c: SimConfig) -> PathSample:
    """One grid path from ``x`` killed at the first grid point inside ``[-1, 1]``.

    The stream ``c.rng`` is used from its start, so equal ``(seed, stream_id)``
    give identical paths.  Excursions into the interval between grid points
    are not detected.
    """
    x = float(_exterior(x))
    s = _get_sampler(p)
    nmax = _nsteps(c.horizon, c.dt)
    pos, k = _path_kernel(c.rng.fresh().generator, x, nmax, c.dt ** (1.0 / p.alpha), *s.args)
    times = np.arange(len(pos)) * c.dt
    killed = k >= 0
    return PathSample(times, pos, killed, int(k) if killed else None, not killed)


@njit(nogil=True, cache=True)
def _time_t_kernel(g, x, n, nsteps, scale, sub, kill_r, vals, tmax, step, alpha, cpos, cneg):
    """Positions at step ``nsteps`` on the fine grid and on the ``sub``-coarsened grid.

    A path is killed once ``|position| <= kill_r`` at one of its own grid
    points; killed paths report NaN.  Coarse increments are sums of ``sub``
    consecutive fine increments.
    """
    fine = np.empty(n)
    coarse = np.empty(n)
    fmin = np.empty(n)
    for i in range(n):
        yf = x
        yc = x
        af = True
        ac = True
        m = abs(x)
        for k in range(1, nsteps * sub + 1):
            d = scale * _unit_draw(g, vals, tmax, step, alpha, cpos, cneg)
            yf += d
            yc += d
            if af:
                if abs(yf) <= kill_r:
                    af = False
                elif abs(yf) < m:
                    m = abs(yf)
            if ac and k % sub == 0 and abs(yc) <= kill_r:
                ac = False
            if not af and not ac:
                break
        fine[i] = yf if af else np.nan
        coarse[i] = yc if ac else np.nan
        fmin[i] = m
    return fine, coarse, fmin


def _positions_at(p: StableParams, x: float, t: float, c: SimConfig, kill_r: float = 1.0,
                  halving: bool = False):
    """Time-``t`` positions of surviving paths (NaN if killed), fine and coarse."""
    s = _get_sampler(p)
    n = _nsteps(t, c.dt)
    sub = 2 if halving else 1
    scale = (c.dt / sub) ** (1.0 / p.alpha)
    res = _run_blocks(lambda g, m: _time_t_kernel(g, x, m, n, scale, sub, kill_r, *s.args),
                      c.rng, int(c.n_paths))
    fine = np.concatenate([r[0] for r in res])
    coarse = np.concatenate([r[1] for r in res])
    return fine, coarse


def _weights(p: StableParams, kind: HKind, x: float, y: np.ndarray) -> np.ndarray:
    h = h_function(p, kind)
    w = np.zeros_like(y)
    ok = np.isfinite(y) & (np.abs(y) > 1.0)
    if np.any(ok):
        w[ok] = h(y[ok])
    return w / float(h(x))


def weighted_time_t_estimator(p: StableParams, x, t: float, h_kind: HKind,
                              payoff: Callable[[np.ndarray], np.ndarray] | None,
                              c: SimConfig, kill_radius: float = 1.0,
                              halving: bool = False):
    """Estimate ``E^x[1{t < T} payoff(xi_t) h(xi_t)] / h(x)``.

    Parameters
    ----------
    payoff : callable or None
        Vectorised bounded function of the time-``t`` position; ``None`` means 1.
    kill_radius : float
        Paths are killed when ``|position| <= kill_radius``; the default is
        the interval itself, larger values give the restriction to
        ``t < T_{(-r, r)}``.
    halving : bool
        Also return the estimate on the grid with half the step (same noise).

    Returns
    -------
    EstimateWithCI, or a pair ``(at dt, at dt/2)`` when ``halving``.
    """
    x = float(_exterior(x))
    if h_kind is HKind.H and p.alpha <= 1.0:
        raise ScopeError("h requires alpha > 1")
    if not 0 < t < c.horizon:
        raise DomainError("need 0 < t < horizon")
    if not kill_radius >= 1.0 or abs(x) <= kill_radius:
        raise DomainError("start point must lie outside the killing interval")
    fine, coarse = _positions_at(p, x, t, c, kill_radius, halving)

    def est(y):
        w = _weights(p, h_kind, x, y)
        if payoff is not None:
            ok = np.isfinite(y)
            pay = np.zeros_like(y)
            pay[ok] = np.asarray(payoff(y[ok]), dtype=float)
            w = w * pay
        return EstimateWithCI.from_samples(w)

    if halving:
        return est(coarse), est(fine)
    return est(fine)


# ---------------------------------------------------------------------------
# exit from a compact set


@njit(nogil=True, cache=True)
def _inside(y, kk):
    return (kk[0] <= y <= kk[1]) or (kk[2] <= y <= kk[3])


@njit(nogil=True, cache=True)
def _exit_kernel(g, x, n, nmax, scale, sub, kk, vals, tmax, step, alpha, cpos, cneg):
    """First grid position outside K on the fine and on the coarse grid (NaN at horizon)."""
    fine = np.empty(n)
    coarse = np.empty(n)
    for i in range(n):
        yf = x
        yc = x
        af = True
        ac = True
        fine[i] = np.nan
        coarse[i] = np.nan
        for k in range(1, nmax * sub + 1):
            d = scale * _unit_draw(g, vals, tmax, step, alpha, cpos, cneg)
            yf += d
            yc += d
            if af and not _inside(yf, kk):
                af = False
                fine[i] = yf
            if ac and k % sub == 0 and not _inside(yc, kk):
                ac = False
                coarse[i] = yc
            if not af and not ac:
                break
    return fine, coarse


def exit_positions(p: StableParams, x, K: CompactSet, c: SimConfig, halving: bool = False):
    """Grid exit positions from ``K`` (NaN when the horizon is reached first).

    Returns ``(positions at dt, positions at dt/2)`` with common noise when
    ``halving``, else a single array.
    """
    x = float(_exterior(x))
    if not K.interior_contains(x):
        raise DomainError("x must lie in the interior of K")
    s = _get_sampler(p)
    sub = 2 if halving else 1
    nmax = _nsteps(c.horizon, c.dt)
    scale = (c.dt / sub) ** (1.0 / p.alpha)
    kk = K.as_array()
    res = _run_blocks(lambda g, m: _exit_kernel(g, x, m, nmax, scale, sub, kk, *s.args),
                      c.rng, int(c.n_paths))
    fine = np.concatenate([r[0] for r in res])
    coarse = np.concatenate([r[1] for r in res])
    return (coarse, fine) if halving else fine


# Conditional Monte Carlo for the exit functional.  Landing in the band
# B = {1 < |z| < 1 + eta} between the interval and K carries the weight
# h(z), which is unbounded at the poles of v1 / v_{-1}; with alpha*rho_hat < 1/2
# its variance is infinite.  The band term is replaced by its conditional
# expectation given the pre-jump position, g(y) = E[h(y + D) 1{y + D in B}],
# summed over the steps spent in K.  The estimator keeps its mean.

_RB_NODES = 400
# g is evaluated every _RB_THIN-th step from a uniform random offset and
# multiplied by _RB_THIN (systematic sampling, unbiased)
_RB_THIN = 16
# the band only has to cover the poles; wider bands add thinning noise
_RB_BAND_MAX = 0.1


def _band_width(K: CompactSet) -> float:
    return min(_RB_BAND_MAX, min(min(abs(a), abs(b)) - 1.0 for a, b in K.intervals))


def _pole_exponent(p: StableParams, kind: HKind, at_plus: bool) -> float:
    """Algebraic exponent of ``h`` at ``+1`` / ``-1`` when it is a pole, else 0."""
    if kind is HKind.V1 and at_plus:
        return p.arh - 1.0
    if kind is HKind.VMINUS1 and not at_plus:
        return p.ar - 1.0
    return 0.0


@lru_cache(maxsize=8)
def _gauss(n: int, a: float = 0.0, b: float = 0.0):
    """Gauss nodes/weights on [0, 1] for the weight ``t**a (1-t)**b``."""
    if a == 0.0 and b == 0.0:
        t, w = roots_legendre(n)
        return (t + 1) / 2, w / 2
    t, w = roots_jacobi(n, b, a)  # weight (1-t)**b (1+t)**a on [-1, 1]
    return (t + 1) / 2, w / 2 ** (1 + a + b)


def _band_g(p: StableParams, kind: HKind, dens, s: float, eta: float, y: float) -> float:
    """``int_B h(z) p_dt(z - y) dz`` for ``|y| >= 1 + eta`` by fixed Gauss rules."""
    h = h_function(p, kind)
    sg = 1.0 if y > 0 else -1.0
    r = abs(y) - 1.0 - eta
    # near half band, z = y - sg*d with d in (r, r + eta/2): composite rule in log d
    lo, hi = math.log(max(r, 1e-6 * s)), math.log(r + eta / 2)
    m = max(4, int(math.ceil(hi - lo)))
    t, w = _gauss(16)
    edges = np.linspace(lo, hi, m + 1)
    lt = (edges[:-1, None] + np.diff(edges)[:, None] * t).ravel()
    lw = (np.diff(edges)[:, None] * w).ravel()
    d = np.exp(lt)
    total = float(np.sum(lw * d * h(y - sg * d) * dens(-sg * d / s))) / s
    # the two pieces touching the interval, with the pole as a Jacobi weight
    for near in (True, False):
        at_plus = (sg > 0) == near
        e = _pole_exponent(p, kind, at_plus)
        width = eta / 2 if near else eta
        t, w = _gauss(40, e, 0.0)  # t = distance to the interval / width
        z = (1.0 + width * t) * (1.0 if at_plus else -1.0)
        val = h(z) * dens((z - y) / s) / s / (width * t) ** e
        total += float(np.sum(w * val)) * width ** (1.0 + e)
    return total


@lru_cache(maxsize=32)
def _band_table(alpha: float, rho: float, kind: HKind, dt: float, eta: float, r_max: float):
    """``g`` on both sides, uniform in ``asinh(r / s)``; returns (table, s, du)."""
    p = StableParams(alpha, rho)
    dens = density_table(p)
    s = dt ** (1.0 / alpha)
    umax = math.asinh(r_max / s) + 1e-9
    u = np.linspace(0.0, umax, _RB_NODES)
    r = s * np.sinh(u)
    tab = np.empty((2, _RB_NODES))
    for j, sg in enumerate((1.0, -1.0)):
        tab[j] = [_band_g(p, kind, dens, s, eta, sg * (1.0 + eta + v)) for v in r]
    return tab, s, u[1] - u[0]


@njit(nogil=True, cache=True)
def _band_add(acc, i, y, eta, tab, s, du, mult):
    """``acc[i, m] += mult * g_m(y)`` for every kind ``m`` (linear interpolation)."""
    r = abs(y) - 1.0 - eta
    if r < 0.0:
        r = 0.0
    pos = math.asinh(r / s) / du
    n = tab.shape[2]
    if pos >= n - 1:
        pos = n - 1.000001
    j = int(pos)
    f = pos - j
    row = 0 if y > 0 else 1
    for m in range(tab.shape[0]):
        acc[i, m] += mult * (tab[m, row, j] + f * (tab[m, row, j + 1] - tab[m, row, j]))


@njit(nogil=True, cache=True)
def _exit_rb_kernel(g, x, n, nmax, scale, sub, kk, eta, tf, sf, duf, tc, sc, duc, thin,
                    vals, tmax, step, alpha, cpos, cneg):
    """Exit positions plus accumulated band terms on the fine and coarse grids."""
    fine = np.empty(n)
    coarse = np.empty(n)
    accf = np.zeros((n, tf.shape[0]))
    accc = np.zeros((n, tf.shape[0]))
    for i in range(n):
        yf = x
        yc = x
        af = True
        ac = True
        fine[i] = np.nan
        coarse[i] = np.nan
        of = int(g.random() * thin)
        oc = int(g.random() * thin)
        for k in range(1, nmax * sub + 1):
            if af and (k - 1) % thin == of:
                _band_add(accf, i, yf, eta, tf, sf, duf, float(thin))
            if ac and (k - 1) % sub == 0 and ((k - 1) // sub) % thin == oc:
                _band_add(accc, i, yc, eta, tc, sc, duc, float(thin))
            d = scale * _unit_draw(g, vals, tmax, step, alpha, cpos, cneg)
            yf += d
            yc += d
            if af and not _inside(yf, kk):
                af = False
                fine[i] = yf
            if ac and k % sub == 0 and not _inside(yc, kk):
                ac = False
                coarse[i] = yc
            if not af and not ac:
                break
    return fine, coarse, accf, accc


def _base_kinds(kind: HKind) -> tuple[HKind, ...]:
    return (HKind.V1, HKind.VMINUS1) if kind is HKind.V else (kind,)


def exit_weights(p: StableParams, x, K: CompactSet, kinds: Sequence[HKind], c: SimConfig,
                 halving: bool = False, return_positions: bool = False):
    """Per-path conditional Monte Carlo weights of the exit functional.

    For every kind the weight is ``(sum of g over steps in K + h(exit) 1{exit
    beyond the band}) / h(x)``; its mean equals the plain weighted exit
    estimator's mean on the same grid, but it stays bounded near the poles.

    Returns
    -------
    dict
        ``kind -> weights`` on the ``dt`` grid, or ``kind -> (coarse, fine)``
        when ``halving``.  With ``return_positions`` a pair ``(dict, positions)``
        where positions are laid out like the weights.
    """
    x = float(_exterior(x))
    if not K.interior_contains(x):
        raise DomainError("x must lie in the interior of K")
    for k in kinds:
        if k is HKind.H and p.alpha <= 1.0:
            raise ScopeError("h requires alpha > 1")
    base = []
    for k in kinds:
        for b in _base_kinds(k):
            if b not in base:
                base.append(b)
    eta = _band_width(K)
    r_max = float(np.max(np.abs(K.as_array()))) - 1.0 - eta
    sub = 2 if halving else 1
    tabs = {}
    for lev, dtl in (("c", c.dt), ("f", c.dt / sub)):
        parts = [_band_table(p.alpha, p.rho, b, dtl, eta, r_max) for b in base]
        tabs[lev] = (np.stack([t[0] for t in parts]), parts[0][1], parts[0][2])
    s = _get_sampler(p)
    nmax = _nsteps(c.horizon, c.dt)
    scale = (c.dt / sub) ** (1.0 / p.alpha)
    kk = K.as_array()
    res = _run_blocks(lambda g, m: _exit_rb_kernel(g, x, m, nmax, scale, sub, kk, eta,
                                                   *tabs["f"], *tabs["c"], _RB_THIN,
                                                   *s.args),
                      c.rng, int(c.n_paths))
    fine = np.concatenate([r[0] for r in res])
    coarse = np.concatenate([r[1] for r in res])
    accf = np.concatenate([r[2] for r in res])
    accc = np.concatenate([r[3] for r in res])

    def weights(kind, y, acc):
        h = h_function(p, kind)
        w = np.zeros_like(y)
        ok = np.isfinite(y) & (np.abs(y) >= 1.0 + eta)
        if np.any(ok):
            w[ok] = h(y[ok])
        w += sum(acc[:, base.index(b)] for b in _base_kinds(kind))
        return w / float(h(x))

    out = {}
    for k in kinds:
        if halving:
            out[k] = (weights(k, coarse, accc), weights(k, fine, accf))
        else:
            out[k] = weights(k, fine, accf)
    if return_positions:
        return out, ((coarse, fine) if halving else fine)
    return out


def weighted_exit_estimator(p: StableParams, x, K: CompactSet, h_kind: HKind,
                            c: SimConfig) -> EstimateWithCI:
    """Estimate ``E^x[1{T_{K^c} < T_{[-1,1]}} h(xi_{T_{K^c}})] / h(x)``.

    Exits landing in ``[-1, 1]`` (killing) and paths still in ``K`` at the
    horizon contribute zero.  Landings between the interval and ``K`` enter
    through their conditional expectation (see :func:`exit_weights`).
    """
    if h_kind is HKind.H and p.alpha <= 1.0:
        raise ScopeError("h requires alpha > 1")
    return EstimateWithCI.from_samples(exit_weights(p, x, K, [h_kind], c)[h_kind])


# ---------------------------------------------------------------------------
# closest reach


def empirical_closest_reach(path: PathSample) -> float:
    """Signed grid position of minimal absolute value.

    Raises
    ------
    KilledPath
        If the path was killed (its closest reach lies inside the interval).
    """
    if path.killed:
        raise KilledPath("closest reach of a killed path lies inside [-1, 1]")
    j = int(np.argmin(np.abs(path.positions)))
    return float(path.positions[j])


@njit(nogil=True, cache=True)
def _closest_kernel(g, x, n, nmax, scale, vals, tmax, step, alpha, cpos, cneg):
    best = np.empty(n)
    late = np.zeros(n, dtype=np.bool_)
    half = nmax // 2
    for i in range(n):
        y = x
        m = x
        for k in range(1, nmax + 1):
            y += scale * _unit_draw(g, vals, tmax, step, alpha, cpos, cneg)
            if abs(y) < abs(m):
                m = y
                if k > half:
                    late[i] = True
        best[i] = m
    return best, late


def closest_reach_sample(p: StableParams, x, c: SimConfig):
    """Grid closest reach of ``c.n_paths`` paths over ``[0, horizon]``.

    Returns
    -------
    reach : ndarray
        Signed closest reach per path (``|reach| <= 1`` means killed).
    late_fraction : float
        Fraction of paths whose minimum moved during the second half of the
        horizon, a diagnostic for the truncation bias.
    """
    x = float(_exterior(x))
    s = _get_sampler(p)
    nmax = _nsteps(c.horizon, c.dt)
    res = _run_blocks(lambda g, m: _closest_kernel(g, x, m, nmax, c.dt ** (1.0 / p.alpha), *s.args),
                      c.rng, int(c.n_paths))
    reach = np.concatenate([r[0] for r in res])
    late = np.concatenate([r[1] for r in res])
    return reach, float(late.mean())


# ---------------------------------------------------------------------------
# Doob chain


class _LogTable:
    """``log h`` on a grid in ``r = log(|y| - 1)`` for each side, linear in between."""

    R_MIN, R_MAX, N = -30.0, 30.0, 2401

    def __init__(self, p: StableParams, kind: HKind):
        h = h_function(p, kind)
        r = np.linspace(self.R_MIN, self.R_MAX, self.N)
        d = 1.0 + np.exp(r)
        with np.errstate(divide="ignore"):
            self.pos = np.log(np.maximum(np.asarray(h(d), dtype=float), 1e-300))
            self.neg = np.log(np.maximum(np.asarray(h(-d), dtype=float), 1e-300))
        self.r0 = self.R_MIN
        self.dr = r[1] - r[0]


@lru_cache(maxsize=16)
def _log_table(alpha: float, rho: float, kind: HKind) -> _LogTable:
    return _LogTable(StableParams(alpha, rho), kind)


@njit(nogil=True, cache=True)
def _h_eval(y, r0, dr, lpos, lneg):
    a = abs(y)
    if a <= 1.0:
        return 0.0
    r = math.log(a - 1.0)
    tab = lpos if y > 0 else lneg
    n = tab.shape[0]
    u = (r - r0) / dr
    if u <= 0.0:
        lv = tab[0] + (tab[1] - tab[0]) * u
    elif u >= n - 1:
        lv = tab[n - 1] + (tab[n - 1] - tab[n - 2]) * (u - (n - 1))
    else:
        j = int(u)
        f = u - j
        lv = tab[j] * (1.0 - f) + tab[j + 1] * f
    return math.exp(lv)


@njit(nogil=True, cache=True)
def _dens_eval(z, ymax, ystep, dvals, tpos, tneg, alpha):
    w = math.asinh(z)
    if abs(w) <= ymax:
        u = (w + ymax) / ystep
        j = int(u)
        if j >= dvals.shape[0] - 1:
            j = dvals.shape[0] - 2
        f = u - j
        return dvals[j] * (1.0 - f) + dvals[j + 1] * f
    c = tpos if z > 0 else tneg
    return c * abs(z) ** (-1.0 - alpha)


@njit(nogil=True, cache=True)
def _cell_mass(y1, y2, f1, f2):
    if f1 > 0.0 and f2 > 0.0 and abs(f2 - f1) > 1e-9 * (f1 + f2):
        return (y2 - y1) * (f2 - f1) / math.log(f2 / f1)
    return 0.5 * (y2 - y1) * (f1 + f2)


@njit(nogil=True, cache=True)
def _doob_step(g, x, s, tmpl, tdens, dist, nodes, fvals, cum, ymax, ystep, dvals, tpos, tneg,
               alpha, r0, dr, lpos, lneg):
    """One transition.  Returns ``(y, mass)`` with ``mass = E[h(next); |next| > 1]``.

    Nodes are the increment template around ``x`` merged with the boundary
    ladder ``+-(1 + dist)``; ``y`` is NaN if the grid carries no mass.
    """
    nt = tmpl.shape[0]
    nd = dist.shape[0]
    lo = x + s * tmpl[0]
    hi = x + s * tmpl[nt - 1]
    m = 0
    i = 0  # template pointer
    j = 0  # boundary pointer, ascending over -(1+dist[nd-1]) .. -(1+dist[0]), 1+dist[0] ..
    while i < nt or j < 2 * nd:
        yt = x + s * tmpl[i] if i < nt else np.inf
        if j < nd:
            yb = -(1.0 + dist[nd - 1 - j])
        elif j < 2 * nd:
            yb = 1.0 + dist[j - nd]
        else:
            yb = np.inf
        if yt <= yb:
            if abs(yt) > 1.0:
                nodes[m] = yt
                fvals[m] = tdens[i] / s * _h_eval(yt, r0, dr, lpos, lneg)
                m += 1
            i += 1
        else:
            if lo < yb < hi:
                nodes[m] = yb
                fvals[m] = _dens_eval((yb - x) / s, ymax, ystep, dvals, tpos, tneg, alpha) / s \
                    * _h_eval(yb, r0, dr, lpos, lneg)
                m += 1
            j += 1
    srt = nodes
    # cell masses; cum[k] = mass up to node k, plus end pieces at +-1
    dmin = dist[0]
    total = 0.0
    cum[0] = 0.0
    for k in range(1, m):
        y1 = srt[k - 1]
        y2 = srt[k]
        if y1 < -1.0 and y2 > 1.0:
            mass = 0.0
        else:
            mass = _cell_mass(y1, y2, fvals[k - 1], fvals[k])
        total += mass
        cum[k] = total
    # algebraic end pieces (1, 1 + dmin) and (-1 - dmin, -1)
    end_p = 0.0
    end_n = 0.0
    kp = -1
    kn = -1
    for k in range(m):
        if kp < 0 and srt[k] > 1.0:
            kp = k
        if srt[k] < -1.0:
            kn = k
    if kp >= 0 and kp + 1 < m and abs(srt[kp] - 1.0 - dmin) < 1e-3 * dmin:
        b = math.log(max(fvals[kp + 1], 1e-300) / max(fvals[kp], 1e-300)) / \
            math.log((srt[kp + 1] - 1.0) / dmin)
        b = min(max(b, -0.999), 50.0)
        end_p = fvals[kp] * dmin / (b + 1.0)
    if kn >= 1 and abs(-srt[kn] - 1.0 - dmin) < 1e-3 * dmin:
        b = math.log(max(fvals[kn - 1], 1e-300) / max(fvals[kn], 1e-300)) / \
            math.log((-srt[kn - 1] - 1.0) / dmin)
        b = min(max(b, -0.999), 50.0)
        end_n = fvals[kn] * dmin / (b + 1.0)
    grand = total + end_p + end_n
    if not grand > 0.0:
        return np.nan, 0.0
    u = g.random() * grand
    if u < end_n:
        return -1.0 - dmin * g.random(), grand
    u -= end_n
    if u >= total:
        return 1.0 + dmin * g.random(), grand
    # locate cell
    a = 1
    bnd = m - 1
    while a < bnd:
        mid = (a + bnd) // 2
        if cum[mid] > u:
            bnd = mid
        else:
            a = mid + 1
    k = a
    width = cum[k] - cum[k - 1]
    f = (u - cum[k - 1]) / width if width > 0 else 0.5
    return srt[k - 1] + f * (srt[k] - srt[k - 1]), grand


@njit(nogil=True, cache=True)
def _doob_run(g, x, dt, horizon, cutoff, ratio, kill_tol, tmpl, tdens, dist, nodes, fvals, cum,
              ymax, ystep, dvals, tpos, tneg, alpha, r0, dr, lpos, lneg, rec_t, rec_y):
    """Run one chain.

    Returns ``(n_recorded, status, t_end, last_neg_step, n_steps, y_end)``;
    positions beyond the buffer overwrite its last slot.

    status: 0 truncated at the horizon, 1 killed by a step-survival draw at
    the current position, 2 killed by landing within ``cutoff`` of ``+-1``,
    3 grid failure.  ``late_neg_step`` is the last step index at which the
    chain was in ``(-1.01, -1)``.
    """
    t = 0.0
    y = x
    k = 0
    rec_t[0] = 0.0
    rec_y[0] = x
    last_neg = -1
    cap = rec_t.shape[0]
    hx = _h_eval(y, r0, dr, lpos, lneg)
    while True:
        d = abs(y) - 1.0
        h_eff = (d / ratio) ** alpha
        step_t = dt if h_eff < dt else h_eff
        if step_t > 1.0:
            step_t = 1.0
        if t + step_t > horizon:
            return min(k, cap - 1) + 1, 0, t, last_neg, k, y
        s = step_t ** (1.0 / alpha)
        ynew, grand = _doob_step(g, y, s, tmpl, tdens, dist, nodes, fvals, cum, ymax, ystep,
                                 dvals, tpos, tneg, alpha, r0, dr, lpos, lneg)
        if not np.isfinite(ynew):
            return min(k, cap - 1) + 1, 3, t, last_neg, k, y
        q = grand / hx
        t += step_t
        if 1.0 - q > kill_tol and g.random() > q:
            return min(k, cap - 1) + 1, 1, t, last_neg, k, y
        k += 1
        j = min(k, cap - 1)
        rec_t[j] = t
        rec_y[j] = ynew
        y = ynew
        hx = _h_eval(y, r0, dr, lpos, lneg)
        if -1.01 < y < -1.0:
            last_neg = k
        if abs(y) - 1.0 <= cutoff:
            return j + 1, 2, t, last_neg, k, y


class _DoobSetup:
    """Grids and tables for Doob-chain stepping."""

    N_TEMPLATE = 481
    N_DIST = 160
    RATIO = 8.0  # step scale is distance / ratio at alpha = 1.5
    KILL_TOL = 1e-3

    def __init__(self, p: StableParams, kind: HKind, cutoff: float):
        dt_ = density_table(p)
        lt = _log_table(p.alpha, p.rho, kind)
        c = math.exp(gammaln(p.alpha)) / math.pi
        umax = (c / 1e-9) ** (1.0 / p.alpha)
        W = math.asinh(umax)
        self.tmpl = np.sinh(np.linspace(-W, W, self.N_TEMPLATE))
        self.tdens = np.asarray(dt_(self.tmpl), dtype=float)
        self.dist = np.geomspace(min(cutoff, 1e-6) * 1e-3, 1e3, self.N_DIST)
        n = self.N_TEMPLATE + 2 * self.N_DIST + 4
        self.nodes = np.empty(n)
        self.fvals = np.empty(n)
        self.cum = np.empty(n)
        self.dens = (dt_.y_max, dt_.step, dt_.values, dt_.tail_pos, dt_.tail_neg, p.alpha)
        self.h = (lt.r0, lt.dr, lt.pos, lt.neg)
        # ratio**(-alpha) is the per-step chance of jumping across the gap;
        # keep it alpha-independent
        self.ratio = self.RATIO ** (1.5 / p.alpha)


@dataclass
class DoobSummary:
    """Terminal statistics of a batch of Doob chains.

    ``status``: 0 truncated, 1 killed by the survival draw, 2 absorbed
    within the cutoff, 3 grid failure.
    """

    terminal: np.ndarray
    status: np.ndarray
    death_time: np.ndarray
    late_negative: np.ndarray
    steps: np.ndarray

    @property
    def killed(self) -> np.ndarray:
        return (self.status == 1) | (self.status == 2)

    @property
    def killed_fraction(self) -> float:
        return float(self.killed.mean())

    def fraction_in(self, lo: float, hi: float) -> float:
        k = self.killed
        if not k.any():
            return 0.0
        t = self.terminal[k]
        return float(np.mean((t > lo) & (t < hi)))


def _check_kind(p: StableParams, kind: HKind):
    if kind is HKind.H and p.alpha <= 1.0:
        raise ScopeError("h requires alpha > 1")


def simulate_doob_chain(p: StableParams, x, h_kind: HKind, c: SimConfig) -> PathSample:
    """One approximate path of the h-transformed process.

    The step size is ``max(dt, ((|y| - 1) / 8)**alpha)`` (capped at 1).  Each
    step either kills the chain at its current position with the grid deficit
    ``1 - E[h(next)] / h(y)`` (when it exceeds ``1e-3``) or moves it to a draw
    from the grid inverse CDF of ``p_dt(next - y) h(next)``.  Landing within
    ``boundary_cutoff`` of ``+-1`` also kills.  ``kill_index`` points at the
    last recorded (pre-killing) position.

    Raises
    ------
    GridFailure
        If the transition mass cannot be resolved.
    """
    x = float(_exterior(x))
    _check_kind(p, h_kind)
    st = _DoobSetup(p, h_kind, c.boundary_cutoff)
    cap = _nsteps(c.horizon, c.dt) + 2
    rec_t = np.empty(cap)
    rec_y = np.empty(cap)
    n, status, _, _, _, _ = _doob_run(c.rng.fresh().generator, x, c.dt, c.horizon, c.boundary_cutoff,
                                st.ratio, st.KILL_TOL, st.tmpl, st.tdens, st.dist, st.nodes,
                                st.fvals,
                                st.cum, *st.dens, *st.h, rec_t, rec_y)
    if status == 3:
        raise GridFailure("transition mass vanished on the grid")
    killed = status in (1, 2)
    return PathSample(rec_t[:n].copy(), rec_y[:n].copy(), killed, n - 1 if killed else None,
                      status == 0)


@njit(nogil=True, cache=True)
def _doob_batch_kernel(g, x, n, dt, horizon, cutoff, ratio, kill_tol, tmpl, tdens, dist, nodes,
                       fvals,
                       cum, ymax, ystep, dvals, tpos, tneg, alpha, r0, dr, lpos, lneg, cap):
    term = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    tend = np.empty(n)
    late = np.zeros(n, dtype=np.bool_)
    steps = np.empty(n, dtype=np.int64)
    rec_t = np.empty(cap)
    rec_y = np.empty(cap)
    for i in range(n):
        m, st, te, ln, ks, ye = _doob_run(g, x, dt, horizon, cutoff, ratio, kill_tol, tmpl, tdens,
                                          dist, nodes,
                                  fvals, cum, ymax, ystep, dvals, tpos, tneg, alpha, r0, dr,
                                  lpos, lneg, rec_t, rec_y)
        term[i] = ye
        status[i] = st
        tend[i] = te
        steps[i] = ks
        late[i] = ln >= 0 and ln >= 0.9 * ks
    return term, status, tend, late, steps


def doob_chain_batch(p: StableParams, x, h_kind: HKind, c: SimConfig) -> DoobSummary:
    """Run ``c.n_paths`` Doob chains and keep terminal statistics only."""
    x = float(_exterior(x))
    _check_kind(p, h_kind)
    st = _DoobSetup(p, h_kind, c.boundary_cutoff)

    def run(g, m):
        # scratch buffers are per call so blocks may run on separate threads
        nodes, fvals, cum = (np.empty_like(st.nodes) for _ in range(3))
        return _doob_batch_kernel(g, x, m, c.dt, c.horizon, c.boundary_cutoff, st.ratio,
                                  st.KILL_TOL, st.tmpl, st.tdens, st.dist, nodes, fvals, cum,
                                  *st.dens, *st.h, 4)

    res = _run_blocks(run, c.rng, int(c.n_paths))
    out = [np.concatenate([r[i] for r in res]) for i in range(5)]
    return DoobSummary(*out)


# ---------------------------------------------------------------------------
# conditioning by acceptance


class ConditioningKind(enum.Enum):
    CLOSEST_REACH_WINDOW = "closest_reach"          # alpha < 1
    ENTRANCE_WINDOW = "entrance"                    # alpha >= 1
    CIRC_CLOSEST_REACH_WINDOW = "circ_closest_reach"  # alpha > 1, avoid-zero base measure


@dataclass(frozen=True)
class Conditioning:
    kind: ConditioningKind
    eps: float
    side: Side = Side.POSITIVE

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError("eps must be positive")


def _event_prob(p: StableParams, cond: Conditioning, y: float) -> float:
    """Probability of the conditioning event from ``y`` (|y| > 1 + eps)."""
    e = cond.eps
    if cond.kind is ConditioningKind.CLOSEST_REACH_WINDOW:
        return closest_reach_mass(p, y, HittingWindow(1.0, 1.0 + e, cond.side))
    if cond.kind is ConditioningKind.ENTRANCE_WINDOW:
        return entrance_window_mass(p, y, e, cond.side)
    kind = {Side.POSITIVE: HKind.V1, Side.NEGATIVE: HKind.VMINUS1, Side.BOTH: HKind.V}[cond.side]
    return circ_closest_reach_mass(p, y, HittingWindow(1.0, 1.0 + e, cond.side), kind) \
        * float(avoid_zero_e(p, y))


class _EventTable:
    """Spline of ``log P^y(event)`` against ``log(|y| - 1)`` on each side."""

    def __init__(self, p: StableParams, cond: Conditioning, r_lo: float, n: int = 240):
        r = np.linspace(r_lo, math.log(1e7), n)
        self.r_lo, self.r_hi = r[0], r[-1]
        d = 1.0 + np.exp(r)
        lp = np.log([max(_event_prob(p, cond, v), 1e-300) for v in d])
        ln = np.log([max(_event_prob(p, cond, -v), 1e-300) for v in d])
        self.sp = CubicSpline(r, lp)
        self.sn = CubicSpline(r, ln)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        r = np.log(np.abs(y) - 1.0)
        out = np.empty_like(y)
        for mask, sp in ((y > 0, self.sp), (y < 0, self.sn)):
            rr = r[mask]
            inner = np.clip(rr, self.r_lo, self.r_hi)
            v = sp(inner)
            hi = rr > self.r_hi
            v[hi] += sp(self.r_hi, 1) * (rr[hi] - self.r_hi)
            out[mask] = np.exp(v)
        return out


def conditional_law_estimator(p: StableParams, x, t: float,
                              event: Callable[[np.ndarray], np.ndarray] | None,
                              conditioning: Conditioning, delta: float, c: SimConfig,
                              min_accepted: float = 100.0) -> EstimateWithCI:
    """Estimate ``P^x(Lambda, t < T_{(-(1+delta), 1+delta)} | conditioning event)``.

    Paths are simulated up to time ``t`` with killing on ``(-(1+delta), 1+delta)``.
    A surviving path ending at ``y`` is accepted with the exact probability
    ``P^y(event)`` of the conditioning event for the remaining path; by the
    Markov property (``eps < delta``) this is the conditional acceptance
    probability, so the acceptance-weighted mean divided by ``P^x(event)`` is
    unbiased.  For the avoid-zero variant the base measure weight
    ``e(y)/e(x)`` is included.

    Parameters
    ----------
    event : callable or None
        Vectorised indicator of ``Lambda`` evaluated on the time-``t`` position.

    Raises
    ------
    InsufficientAcceptance
        If the effective number of accepted paths is below ``min_accepted``.
    """
    x = float(_exterior(x))
    k = conditioning.kind
    if k is ConditioningKind.CLOSEST_REACH_WINDOW and p.alpha >= 1.0:
        raise ScopeError("closest-reach conditioning needs alpha < 1")
    if k is ConditioningKind.ENTRANCE_WINDOW and p.alpha < 1.0:
        raise ScopeError("entrance-window conditioning needs alpha >= 1")
    if k is ConditioningKind.CIRC_CLOSEST_REACH_WINDOW and p.alpha <= 1.0:
        raise ScopeError("the avoid-zero measure needs alpha > 1")
    if not (0 < conditioning.eps < delta) or abs(x) <= 1.0 + delta:
        raise DomainError("need 0 < eps < delta and |x| > 1 + delta")
    fine, _ = _positions_at(p, x, t, c, kill_r=1.0 + delta)
    table = _EventTable(p, conditioning, math.log(delta))
    acc = np.zeros_like(fine)
    ok = np.isfinite(fine)
    acc[ok] = table(fine[ok])
    n_eff = acc.sum() ** 2 / max((acc ** 2).sum(), 1e-300)
    if n_eff < min_accepted:
        raise InsufficientAcceptance(f"effective accepted paths {n_eff:.1f} < {min_accepted}")
    if event is not None:
        ind = np.zeros_like(fine)
        ind[ok] = np.asarray(event(fine[ok]), dtype=float)
        acc = acc * ind
    return EstimateWithCI.from_samples(acc / _event_prob(p, conditioning, x))
