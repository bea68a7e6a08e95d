"""Process parameters, Lévy measure and stable increments.

The process is a one-dimensional strictly alpha-stable Lévy process with
positivity parameter ``rho = P(xi_1 >= 0)``.  Its Lévy density is

    Gamma(alpha+1)/pi * sin(pi*alpha*rho) / x**(alpha+1)        (x > 0)
    Gamma(alpha+1)/pi * sin(pi*alpha*rho_hat) / |x|**(alpha+1)  (x < 0)

Increments are drawn with the Chambers-Mallows-Stuck construction in a
scale that reproduces exactly this Lévy density (see :func:`cms_transform`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .errors import CauchyAsymmetric, DomainError, OneSidedJumps, OutOfRange

__all__ = [
    "StableParams",
    "RngStream",
    "validate_params",
    "levy_density",
    "skewness_from_rho",
    "sample_increment",
    "cms_transform",
    "sampler_scale",
]


@dataclass(frozen=True)
class StableParams:
    """Validated parameters of a strictly stable process.

    Parameters
    ----------
    alpha : float
        Index of stability in (0, 2).
    rho : float
        Positivity parameter ``P(xi_1 >= 0)``.
    rho_hat : float, optional
        ``1 - rho``.  Stored rather than recomputed so that swapping the
        pair twice is exactly the identity.
    """

    alpha: float
    rho: float
    rho_hat: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        alpha = float(self.alpha)
        rho = float(self.rho)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "rho", rho)
        if self.rho_hat is None:
            object.__setattr__(self, "rho_hat", 1.0 - rho)
        else:
            object.__setattr__(self, "rho_hat", float(self.rho_hat))
            if abs(self.rho + self.rho_hat - 1.0) > 1e-15:
                raise OneSidedJumps("rho + rho_hat must equal 1")
        _check_admissible(alpha, rho)
        for name, val in (("alpha*rho", self.ar), ("alpha*rho_hat", self.arh)):
            if not 0.0 < val < 1.0:
                raise OneSidedJumps(f"{name} = {val} must lie in (0, 1)")

    @property
    def ar(self) -> float:
        """``alpha * rho``."""
        return self.alpha * self.rho

    @property
    def arh(self) -> float:
        """``alpha * rho_hat``."""
        return self.alpha * self.rho_hat

    @property
    def sin_ar(self) -> float:
        return float(np.sin(np.pi * self.ar))

    @property
    def sin_arh(self) -> float:
        return float(np.sin(np.pi * self.arh))

    @property
    def is_symmetric(self) -> bool:
        return self.rho == self.rho_hat

    def swapped(self) -> "StableParams":
        """Parameters of the dual process ``-xi`` (rho and rho_hat exchanged)."""
        return StableParams(self.alpha, self.rho_hat, self.rho)


def _check_admissible(alpha: float, rho: float) -> None:
    if not np.isfinite(alpha) or not 0.0 < alpha < 2.0:
        raise OutOfRange(f"alpha = {alpha} must lie in (0, 2)")
    if not np.isfinite(rho):
        raise OneSidedJumps(f"rho = {rho} is not finite")
    if alpha == 1.0:
        if rho != 0.5:
            raise CauchyAsymmetric("alpha = 1 requires rho = 1/2 (symmetric Cauchy)")
        return
    if alpha < 1.0:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1.0 - 1.0 / alpha, 1.0 / alpha
    if not lo < rho < hi:
        raise OneSidedJumps(
            f"rho = {rho} must lie strictly inside ({lo:.6g}, {hi:.6g}) for alpha = {alpha}"
        )


def validate_params(alpha: float, rho: float) -> StableParams:
    """Build a :class:`StableParams` from raw input.

    Raises
    ------
    OutOfRange
        If ``alpha`` is not in (0, 2).
    OneSidedJumps
        If ``rho`` is at or beyond the admissible boundary.
    CauchyAsymmetric
        If ``alpha == 1`` and ``rho != 1/2``.
    """
    return StableParams(alpha, rho)


class RngStream:
    """Reproducible random substream identified by ``(seed, stream_id)``.

    The generator is PCG64 seeded through a :class:`numpy.random.SeedSequence`
    whose spawn key is the stream id, so distinct ids give statistically
    independent streams.  The underlying generator is created lazily and then
    advanced by every draw.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if int(seed) < 0 or int(stream_id) < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._gen: np.random.Generator | None = None

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def __eq__(self, other):
        if not isinstance(other, RngStream):
            return NotImplemented
        return (self.seed, self.stream_id) == (other.seed, other.stream_id)

    def __hash__(self):
        return hash((self.seed, self.stream_id))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def fresh(self) -> "RngStream":
        """A new, unconsumed stream with the same identity."""
        return RngStream(self.seed, self.stream_id)

    def child(self, k: int) -> "RngStream":
        """Deterministic derived stream, distinct from this one for every ``k``."""
        return RngStream(self.seed, (self.stream_id + 1) * 1_000_003 + int(k))


def levy_density(p: StableParams, x):
    """Lévy density of the process.

    Parameters
    ----------
    p : StableParams
    x : float or array_like
        Jump size, non-zero.

    Returns
    -------
    float or ndarray
    """
    x = np.asarray(x, dtype=float)
    if np.any(x == 0) or np.any(~np.isfinite(x)):
        raise DomainError("Lévy density is defined for finite x != 0")
    c = gamma(p.alpha + 1.0) / np.pi
    out = np.where(x > 0, c * p.sin_ar, c * p.sin_arh) / np.abs(x) ** (p.alpha + 1.0)
    return out[()] if out.ndim == 0 else out


def skewness_from_rho(p: StableParams) -> float:
    """Skewness ``beta`` of the standard parametrisation matching ``rho``."""
    if p.alpha == 1.0:
        return 0.0
    return float(np.tan(np.pi * p.alpha * (p.rho - 0.5)) / np.tan(np.pi * p.alpha / 2.0))


def sampler_scale(p: StableParams) -> float:
    """Scale of the unit-time law relative to the standard ``S(alpha, beta, 1)`` law.

    Equals ``cos(pi*alpha*(rho - 1/2))**(1/alpha)``; one for symmetric laws.
    """
    if p.alpha == 1.0:
        return 1.0
    return float(np.cos(np.pi * p.alpha * (p.rho - 0.5)) ** (1.0 / p.alpha))


def cms_transform(p: StableParams, v, w):
    """Map ``V ~ U(-pi/2, pi/2)`` and ``W ~ Exp(1)`` to a unit-time stable draw.

    With ``b = pi*(rho - 1/2)`` the draw is

        sin(alpha*(V+b)) / cos(V)**(1/alpha) * (cos(V - alpha*(V+b)) / W)**((1-alpha)/alpha)

    and ``tan(V)`` for the Cauchy case.  This law has positivity parameter
    ``rho`` and the Lévy density of :func:`levy_density`.
    """
    v = np.asarray(v, dtype=float)
    if p.alpha == 1.0:
        return np.tan(v)
    a = p.alpha
    b = np.pi * (p.rho - 0.5)
    w = np.asarray(w, dtype=float)
    return (
        np.sin(a * (v + b)) / np.cos(v) ** (1.0 / a)
        * (np.cos(v - a * (v + b)) / w) ** ((1.0 - a) / a)
    )


def sample_increment(p: StableParams, dt: float, rng: RngStream, size=None):
    """Draw increments ``xi_dt - xi_0``.

    Parameters
    ----------
    p : StableParams
    dt : float
        Time step, strictly positive.
    rng : RngStream
        Stream that is advanced by the draw.
    size : int or tuple, optional
        Output shape; a scalar is returned when omitted.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    g = rng.generator
    v = g.uniform(-np.pi / 2, np.pi / 2, size=size)
    w = g.standard_exponential(size=size)
    x = dt ** (1.0 / p.alpha) * cms_transform(p, v, w)
    return float(x) if size is None else x
