"""Exponent kernels, their primitives and auxiliary geometry.

All kernels are instances of

    k_{c,d}(u) = (u - 1)**(c - 1) * (u + 1)**(d - 1),   u > 1,

with ``psi_{alpha rho}`` corresponding to ``(c, d) = (alpha*rho_hat, alpha*rho)``.
Integrals over ``[1, x]`` are computed in two pieces: on ``[1, min(x, 3)]``
the substitution ``t = (u - 1)**c`` removes the endpoint singularity, and
beyond 3 the substitution ``u = exp(s)`` tames the power-law growth.
The substitution ``w = (u-1)/(u+1)`` gives the closed form

    int_1^x k_{c,d}(u) du = 2**(c+d-1) * int_0^{w(x)} w**(c-1) (1-w)**(-c-d) dw,

used in the test-suite as an independent oracle.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn
from scipy.special import gamma, roots_legendre, roots_sh_jacobi

from .errors import DomainError, QuadratureFailure
from .stable_model import StableParams

__all__ = [
    "ExponentSide",
    "QuadratureSettings",
    "DEFAULT_QUAD",
    "psi",
    "psi_primitive",
    "psi_primitive_fast",
    "kernel_integral",
    "kernel_primitive_fast",
    "correction_integral",
    "correction_integral_limit",
    "z_point",
    "z_minus_one",
    "z_plus_one",
    "boundary_factor_g",
    "norm_constant",
    "exponents",
]


class ExponentSide(enum.Enum):
    """Which of the two kernels ``psi_{alpha rho}`` / ``psi_{alpha rho_hat}``."""

    RHO = "rho"
    RHO_HAT = "rho_hat"

    def swap(self) -> "ExponentSide":
        return ExponentSide.RHO_HAT if self is ExponentSide.RHO else ExponentSide.RHO


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for adaptive quadrature.

    Parameters
    ----------
    rel_tol, abs_tol : float
        Requested relative and absolute accuracy, both strictly positive.
    max_subdivisions : int
        Maximum number of adaptive subintervals per call.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUAD = QuadratureSettings()

# failures are only reported when the error estimate misses the target by
# more than this factor; QUADPACK's estimates are very conservative
_ERR_SLACK = 1e3


def exponents(p: StableParams, side: ExponentSide) -> tuple[float, float]:
    """``(c, d)`` such that the kernel of ``side`` is ``k_{c,d}``."""
    if side is ExponentSide.RHO:
        return p.arh, p.ar
    return p.ar, p.arh


def _require_gt_one(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 1.0)) or np.any(~np.isfinite(x)):
        raise DomainError(f"{name} must be finite and > 1")
    return x


def psi(p: StableParams, side: ExponentSide, x):
    """Kernel ``(x-1)**(alpha rho_hat - 1) (x+1)**(alpha rho - 1)`` (side RHO).

    For side RHO_HAT the two exponents are exchanged.
    """
    x = _require_gt_one(x)
    c, d = exponents(p, side)
    out = (x - 1.0) ** (c - 1.0) * (x + 1.0) ** (d - 1.0)
    return out[()] if out.ndim == 0 else out


def _quad(f, a, b, q: QuadratureSettings):
    if b <= a:
        return 0.0
    res = integrate.quad(
        f, a, b, epsabs=q.abs_tol, epsrel=q.rel_tol, limit=q.max_subdivisions, full_output=1
    )
    val, err = res[0], res[1]
    if len(res) > 3 and err > _ERR_SLACK * max(q.abs_tol, q.rel_tol * abs(val)):
        raise QuadratureFailure(f"quadrature on [{a}, {b}] failed: {res[3]}")
    if not np.isfinite(val):
        raise QuadratureFailure(f"non-finite quadrature result on [{a}, {b}]")
    return val


def kernel_integral(c: float, d: float, lo: float, hi: float,
                    q: QuadratureSettings = DEFAULT_QUAD, weight=None) -> float:
    """``int_lo^hi (u-1)**(c-1) (u+1)**(d-1) weight(u) du`` for ``1 <= lo <= hi``.

    ``hi`` may be ``inf`` when the integral converges.  ``weight`` must be
    smooth on ``[lo, hi]``.
    """
    if lo < 1.0 or hi < lo:
        raise DomainError("need 1 <= lo <= hi")
    if hi == lo:
        return 0.0
    m = weight if weight is not None else (lambda u: 1.0)
    total = 0.0
    split = 3.0
    if lo < split:
        top = min(hi, split)
        if c < 1.0:
            inv = 1.0 / c

            def f1(t):
                u = 1.0 + t ** inv
                return inv * (u + 1.0) ** (d - 1.0) * m(u)

            total += _quad(f1, (lo - 1.0) ** c, (top - 1.0) ** c, q)
        else:
            def f1(u):
                return (u - 1.0) ** (c - 1.0) * (u + 1.0) ** (d - 1.0) * m(u)

            total += _quad(f1, lo, top, q)
    if hi > split:
        def f2(s):
            em = np.exp(-s)
            val = np.exp(s * (c + d - 1.0) + (c - 1.0) * np.log1p(-em) + (d - 1.0) * np.log1p(em))
            if weight is None or val == 0.0:
                return val
            return val * m(np.exp(min(s, 700.0)))  # weight is flat this far out

        total += _quad(f2, np.log(max(lo, split)), np.log(hi) if np.isfinite(hi) else np.inf, q)
    return total


def psi_primitive(p: StableParams, side: ExponentSide, x, q: QuadratureSettings = DEFAULT_QUAD):
    """``int_1^x psi(u) du`` by adaptive quadrature.

    Parameters
    ----------
    p : StableParams
    side : ExponentSide
    x : float or array_like
        Upper limit(s), ``>= 1``.
    q : QuadratureSettings

    Raises
    ------
    QuadratureFailure
        If the requested tolerance is not met.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(~(xs >= 1.0)):
        raise DomainError("x must be >= 1")
    c, d = exponents(p, side)
    out = np.array([kernel_integral(c, d, 1.0, xi, q) for xi in xs.ravel()]).reshape(xs.shape)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Fixed-node vectorised version for Monte Carlo weights


_GJ_NODES = 40
_GL_NODES = 30


@lru_cache(maxsize=64)
def _jacobi_rule(c: float):
    s, w = roots_sh_jacobi(_GJ_NODES, c, c)  # weight s**(c-1) on [0, 1]
    return s, w


@lru_cache(maxsize=1)
def _legendre_rule():
    t, w = roots_legendre(_GL_NODES)
    return (t + 1.0) / 2.0, w / 2.0


def kernel_primitive_fast(c: float, d: float, x, weight=None):
    """Vectorised ``int_1^x (u-1)**(c-1) (u+1)**(d-1) weight(u) du``.

    Gauss-Jacobi on ``[1, min(x, 3)]`` and composite Gauss-Legendre in
    ``log u`` on geometrically growing panels beyond.  Relative accuracy is
    close to machine precision for ``c`` in (0, 1) and smooth weights.
    ``weight`` must accept arrays.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 1.0)):
        raise DomainError("x must be >= 1")
    flat = x.ravel()
    m = weight if weight is not None else (lambda u: np.ones_like(u))
    s, w = _jacobi_rule(float(c))
    x1 = np.minimum(flat, 3.0)
    h = (x1 - 1.0)[:, None]
    u = 1.0 + h * s[None, :]
    piece = (h[:, 0] ** c) * np.sum(w[None, :] * (u + 1.0) ** (d - 1.0) * m(u), axis=1)
    out = np.where(flat > 1.0, piece, 0.0)
    far = flat > 3.0
    if np.any(far):
        sx = np.log(flat[far])
        tn, wn = _legendre_rule()
        lo = np.log(3.0)
        acc = np.zeros_like(sx)
        edge = lo
        while edge < sx.max():
            nxt = 2.0 * edge
            a = np.minimum(edge, sx)
            b = np.minimum(nxt, sx)
            width = (b - a)[:, None]
            ss = a[:, None] + width * tn[None, :]
            em = np.exp(-ss)
            f = np.exp(ss * (c + d - 1.0) + (c - 1.0) * np.log1p(-em) + (d - 1.0) * np.log1p(em))
            acc += np.sum(wn[None, :] * width * f * m(np.exp(ss)), axis=1)
            edge = nxt
        out[far] += acc
    out = out.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def psi_primitive_fast(p: StableParams, side: ExponentSide, x):
    """Vectorised ``int_1^x psi(u) du`` with fixed Gauss rules (no error control)."""
    c, d = exponents(p, side)
    return kernel_primitive_fast(c, d, x)


# ---------------------------------------------------------------------------


def correction_integral(p: StableParams, z, q: QuadratureSettings = DEFAULT_QUAD):
    """``int_1^z (u-1)**(alpha rho) (u+1)**(alpha rho_hat - 2) du``.

    The integrand is bounded at ``u = 1``.  The integral converges as
    ``z -> inf`` only for ``alpha < 1`` (see :func:`correction_integral_limit`);
    for ``alpha >= 1`` it grows like ``z**(alpha-1)`` (``log z`` at ``alpha = 1``).
    """
    zs = np.asarray(z, dtype=float)
    if np.any(~(zs >= 1.0)):
        raise DomainError("z must be >= 1")
    c, d = p.ar + 1.0, p.arh - 1.0
    out = np.array([kernel_integral(c, d, 1.0, zi, q) for zi in zs.ravel()]).reshape(zs.shape)
    return out[()] if out.ndim == 0 else out


def correction_integral_limit(p: StableParams) -> float:
    """Limit of :func:`correction_integral` as ``z -> inf``.

    Equals ``2**(alpha-1) B(alpha rho + 1, 1 - alpha)`` for ``alpha < 1`` and
    ``inf`` otherwise.
    """
    if p.alpha >= 1.0:
        return np.inf
    return float(2.0 ** (p.alpha - 1.0) * beta_fn(p.ar + 1.0, 1.0 - p.alpha))


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(np.abs(x) > 1.0)) or np.any(~(np.abs(y) > 1.0)):
        raise DomainError("both points must lie outside [-1, 1]")
    if np.any(x == y):
        raise DomainError("points must differ")
    return x, y


def z_point(x, y):
    """``|x y - 1| / |x - y|``; exceeds 1 whenever ``|x|, |y| > 1``, ``x != y``."""
    x, y = _check_pair(x, y)
    out = np.abs(x * y - 1.0) / np.abs(x - y)
    return out[()] if out.ndim == 0 else out


def z_minus_one(x, y):
    """``z(x, y) - 1`` in factored form (no cancellation)."""
    x, y = _check_pair(x, y)
    hi, lo = np.maximum(x, y), np.minimum(x, y)
    same = (hi + 1.0) * (lo - 1.0) / (hi - lo)
    mixed = (np.abs(x) - 1.0) * (np.abs(y) - 1.0) / np.abs(x - y)
    out = np.where(x * y > 0, same, mixed)
    return out[()] if out.ndim == 0 else out


def z_plus_one(x, y):
    """``z(x, y) + 1`` in factored form."""
    x, y = _check_pair(x, y)
    hi, lo = np.maximum(x, y), np.minimum(x, y)
    same = (hi - 1.0) * (lo + 1.0) / (hi - lo)
    mixed = (np.abs(x) + 1.0) * (np.abs(y) + 1.0) / np.abs(x - y)
    out = np.where(x * y > 0, same, mixed)
    return out[()] if out.ndim == 0 else out


def boundary_factor_g(p: StableParams, y):
    """``g(y) = (y-1)**(alpha rho) (y+1)**(alpha rho_hat - 1)``, i.e. ``(y-1) psi_{alpha rho_hat}(y)``."""
    y = _require_gt_one(y, "y")
    out = (y - 1.0) ** p.ar * (y + 1.0) ** (p.arh - 1.0)
    return out[()] if out.ndim == 0 else out


def norm_constant(p: StableParams, side: ExponentSide = ExponentSide.RHO) -> float:
    """``c_{alpha rho} = 2**(alpha rho) pi alpha rho Gamma(alpha rho) / Gamma(1 - alpha rho_hat)``.

    Side RHO_HAT exchanges ``rho`` and ``rho_hat``.
    """
    a, ah = (p.ar, p.arh) if side is ExponentSide.RHO else (p.arh, p.ar)
    return float(2.0 ** a * np.pi * a * gamma(a) / gamma(1.0 - ah))
