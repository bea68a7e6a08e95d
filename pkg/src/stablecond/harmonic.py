"""Harmonic functions of the process killed on entering ``[-1, 1]``.

With ``P_rho(x) = int_1^x psi_{alpha rho}`` and ``P_rho_hat`` likewise,

    v1(x)  = sin(pi alpha rho_hat) [(x+1) psi_{alpha rho}(x) - (alpha-1)_+ P_rho(x)]          x > 1
    v1(x)  = sin(pi alpha rho)     [(|x|-1) psi_{alpha rho_hat}(|x|) - (alpha-1)_+ P_rho_hat(|x|)]  x < -1

and ``v_{-1}`` is ``v1`` of the reflected process ``-xi`` evaluated at ``-x``.
The Green function of the killed process is assembled from two explicit
sign configurations and closed under duality and reflection.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .errors import DomainError, NearDiagonal, QuadratureFailure, ScopeError
from .special_functions import (
    DEFAULT_QUAD,
    ExponentSide,
    QuadratureSettings,
    boundary_factor_g,
    kernel_integral,
    kernel_primitive_fast,
    norm_constant,
    psi,
    psi_primitive,
    z_minus_one,
)
from .stable_model import StableParams

__all__ = [
    "ExteriorPoint",
    "GreenBranch",
    "HKind",
    "v1",
    "v_minus1",
    "v_total",
    "v1_limit",
    "h_function",
    "invariant_h",
    "invariant_h_constant",
    "avoid_zero_e",
    "green_u",
    "lemma31_residual",
    "green_boundary_ratio",
    "potential_mass",
    "NEAR_DIAGONAL_CUTOFF",
]

NEAR_DIAGONAL_CUTOFF = 1e-8


@dataclass(frozen=True)
class ExteriorPoint:
    """A point strictly outside ``[-1, 1]``."""

    x: float

    def __post_init__(self):
        x = float(self.x)
        if not (np.isfinite(x) and abs(x) > 1.0):
            raise DomainError(f"x = {x} must satisfy |x| > 1")
        object.__setattr__(self, "x", x)

    def __float__(self):
        return self.x


class GreenBranch(enum.Enum):
    """Which explicit formula or symmetry produced a Green-function value."""

    X_GT_Y_GT_1 = "x>y>1"
    X_NEG_Y_POS = "x<-1<1<y"
    SWAPPED_VIA_DUALITY = "duality"
    REFLECTED = "reflection"


class HKind(enum.Enum):
    """Weight functions available for h-transforms."""

    V1 = "v1"
    VMINUS1 = "v_minus1"
    V = "v"
    H = "h"


def _exterior(x) -> np.ndarray:
    if isinstance(x, ExteriorPoint):
        return np.asarray(x.x)
    x = np.asarray(x, dtype=float)
    if np.any(~(np.abs(x) > 1.0)) or np.any(~np.isfinite(x)):
        raise DomainError("points must satisfy |x| > 1")
    return x


def _scalar(out):
    return out[()] if np.ndim(out) == 0 else out


def _v1_pos(p: StableParams, s):
    """Bracket of v1 for ``s > 1`` without the sine factor."""
    c, d = p.arh, p.ar
    out = (s - 1.0) ** (c - 1.0) * (s + 1.0) ** d
    if p.alpha > 1.0:
        out = out - (p.alpha - 1.0) * kernel_primitive_fast(c, d, s)
    return out


def _v1_neg(p: StableParams, s):
    """Bracket of v1 at ``x = -s`` (``s > 1``) without the sine factor."""
    c, d = p.ar, p.arh
    out = (s - 1.0) ** c * (s + 1.0) ** (d - 1.0)
    if p.alpha > 1.0:
        out = out - (p.alpha - 1.0) * kernel_primitive_fast(c, d, s)
    return out


def v1(p: StableParams, x):
    """Harmonic function with its pole at ``+1``.

    Parameters
    ----------
    p : StableParams
    x : float, array_like or ExteriorPoint
        Points with ``|x| > 1``.

    Returns
    -------
    float or ndarray
        Strictly positive values.
    """
    x = _exterior(x)
    s = np.abs(x)
    out = np.empty(x.shape)
    pos = x > 1.0
    if np.any(pos):
        out[pos] = p.sin_arh * _v1_pos(p, s[pos])
    if np.any(~pos):
        out[~pos] = p.sin_ar * _v1_neg(p, s[~pos])
    return _scalar(out)


def v_minus1(p: StableParams, x):
    """Harmonic function with its pole at ``-1``: ``v1`` of ``-xi`` at ``-x``."""
    x = _exterior(x)
    return v1(p.swapped(), -x)


def v_total(p: StableParams, x):
    """``v = v1 + v_minus1``."""
    x = _exterior(x)
    return _scalar(np.asarray(v1(p, x)) + np.asarray(v_minus1(p, x)))


def v1_limit(p: StableParams) -> tuple[float, float]:
    """Limits of ``v1`` as ``x -> +inf`` and ``x -> -inf``.

    Uses ``d/dx[(x+1) psi(x) - (alpha-1) P(x)] = 2 (alpha rho_hat - 1) psi(x) / (x-1)``
    (and its mirror on the negative axis), integrated from ``x = 3`` to
    infinity.  Both limits are zero for ``alpha < 1``.
    """
    if p.alpha < 1.0:
        return 0.0, 0.0
    x0 = 3.0
    a, ah = p.ar, p.arh
    tail_pos = kernel_integral(ah - 1.0, a, x0, np.inf)  # int psi_{a rho}/(u-1)
    tail_neg = kernel_integral(a, ah - 1.0, x0, np.inf)  # int psi_{a rho_hat}/(u+1)
    lim_pos = float(v1(p, x0)) + p.sin_arh * 2.0 * (ah - 1.0) * tail_pos
    lim_neg = float(v1(p, -x0)) + p.sin_ar * 2.0 * (1.0 - ah) * tail_neg
    return lim_pos, lim_neg


def invariant_h(p: StableParams, x):
    """Invariant function for ``alpha > 1``.

    ``sin(pi alpha rho_hat) P_rho(x)`` for ``x > 1`` and
    ``sin(pi alpha rho) P_rho_hat(|x|)`` for ``x < -1``; the normalising
    constant of :func:`invariant_h_constant` is omitted.

    Raises
    ------
    ScopeError
        If ``alpha <= 1``.
    """
    if p.alpha <= 1.0:
        raise ScopeError("the invariant function h requires alpha > 1")
    x = _exterior(x)
    s = np.abs(x)
    pos = x > 1.0
    out = np.where(
        pos,
        p.sin_arh * kernel_primitive_fast(p.arh, p.ar, s),
        p.sin_ar * kernel_primitive_fast(p.ar, p.arh, s),
    )
    return _scalar(out)


def invariant_h_constant(p: StableParams) -> float:
    """``pi / (Gamma(1 - alpha rho) Gamma(1 - alpha rho_hat))``."""
    return float(np.pi / (gamma(1.0 - p.ar) * gamma(1.0 - p.arh)))


def avoid_zero_e(p: StableParams, x):
    """``e(x) = sin(pi alpha rho_hat) x**(alpha-1)`` (x > 0), ``sin(pi alpha rho) |x|**(alpha-1)`` (x < 0)."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0) or np.any(~np.isfinite(x)):
        raise DomainError("e is defined for finite x != 0")
    out = np.where(x > 0, p.sin_arh, p.sin_ar) * np.abs(x) ** (p.alpha - 1.0)
    return _scalar(out)


def h_function(p: StableParams, kind: HKind):
    """Vectorised weight function for ``kind``."""
    if kind is HKind.V1:
        return lambda y: v1(p, y)
    if kind is HKind.VMINUS1:
        return lambda y: v_minus1(p, y)
    if kind is HKind.V:
        return lambda y: v_total(p, y)
    if kind is HKind.H:
        if p.alpha <= 1.0:
            raise ScopeError("h requires alpha > 1")
        return lambda y: invariant_h(p, y)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Green function


def _green_prefactor(p: StableParams) -> float:
    return float(2.0 ** (1.0 - p.alpha) / (gamma(p.ar) * gamma(p.arh)))


def _prim(c, d, hi_minus_one, q):
    """``int_1^{1+h} k_{c,d}``; the width is passed separately to keep precision."""
    if q is None:
        return float(kernel_primitive_fast(c, d, 1.0 + hi_minus_one))
    return kernel_integral(c, d, 1.0, 1.0 + hi_minus_one, q)


def _power_times(base: float, expo: float, val: float) -> float:
    """``base**expo * val`` in log space (``base, val > 0``)."""
    if val <= 0.0:
        return 0.0
    return float(np.exp(expo * np.log(base) + np.log(val)))


def _green_a(p: StableParams, x: float, y: float, q) -> float:
    """Branch ``x > y > 1``."""
    zm1 = float(z_minus_one(x, y))
    a, ah = p.ar, p.arh
    head = _power_times(x - y, p.alpha - 1.0, _prim(a, ah, zm1, q))
    if p.alpha > 1.0:
        head -= (p.alpha - 1.0) * _prim(a, ah, y - 1.0, q) * _prim(ah, a, x - 1.0, q)
    return _green_prefactor(p) * head


def _green_b(p: StableParams, x: float, y: float, q) -> float:
    """Branch ``x < -1 < 1 < y``."""
    zm1 = float(z_minus_one(x, y))
    a, ah = p.ar, p.arh
    head = _power_times(y - x, p.alpha - 1.0, _prim(a, ah, zm1, q))
    if p.alpha > 1.0:
        head -= (p.alpha - 1.0) * _prim(a, ah, y - 1.0, q) * _prim(a, ah, -x - 1.0, q)
    return _green_prefactor(p) * p.sin_ar / p.sin_arh * head


def _green_dispatch(p: StableParams, x: float, y: float, q):
    if x > 1.0 and y > 1.0:
        if x >= y:
            return _green_a(p, x, y, q), GreenBranch.X_GT_Y_GT_1
        return _green_a(p.swapped(), y, x, q), GreenBranch.SWAPPED_VIA_DUALITY
    if x < -1.0 and y > 1.0:
        return _green_b(p, x, y, q), GreenBranch.X_NEG_Y_POS
    if x > 1.0 and y < -1.0:
        return _green_b(p.swapped(), y, x, q), GreenBranch.SWAPPED_VIA_DUALITY
    # both negative: reflect to the positive half-line
    ps = p.swapped()
    xr, yr = -x, -y
    if xr >= yr:
        return _green_a(ps, xr, yr, q), GreenBranch.REFLECTED
    return _green_a(p, yr, xr, q), GreenBranch.REFLECTED


def green_u(p: StableParams, x, y, q: QuadratureSettings | None = DEFAULT_QUAD,
            diag_cutoff: float = NEAR_DIAGONAL_CUTOFF):
    """Green function ``u(x, y)`` of the process killed on entering ``[-1, 1]``.

    Parameters
    ----------
    p : StableParams
    x, y : float or ExteriorPoint
        Start and target points, ``|x|, |y| > 1``.
    q : QuadratureSettings or None
        Adaptive quadrature settings; ``None`` switches to fixed Gauss rules.
    diag_cutoff : float
        For ``alpha <= 1``, pairs with ``0 < |x - y| < diag_cutoff`` raise.

    Returns
    -------
    value : float
        ``u(x, y) >= 0``; ``u(x, x) = 0`` by convention.
    branch : GreenBranch
    """
    x = float(_exterior(x))
    y = float(_exterior(y))
    if x == y:
        branch = _green_dispatch_branch(x, y)
        return 0.0, branch
    if p.alpha <= 1.0 and abs(x - y) < diag_cutoff:
        raise NearDiagonal(f"|x - y| = {abs(x - y):.3g} below the diagonal cutoff")
    val, branch = _green_dispatch(p, x, y, q)
    return max(val, 0.0), branch


def _green_dispatch_branch(x: float, y: float) -> GreenBranch:
    if x > 1.0 and y > 1.0:
        return GreenBranch.X_GT_Y_GT_1 if x >= y else GreenBranch.SWAPPED_VIA_DUALITY
    if x < -1.0 and y > 1.0:
        return GreenBranch.X_NEG_Y_POS
    if x > 1.0:
        return GreenBranch.SWAPPED_VIA_DUALITY
    return GreenBranch.REFLECTED


def lemma31_residual(p: StableParams, x, y: float, q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Right-hand side of the ``v1``/Green-function identity minus ``v1(x)``.

    The identity expresses ``v1(x)`` through ``u(x, y)``, ``g(y)``, the
    correction integral at ``z(x, y)`` and, for ``alpha > 1``, the primitives
    of ``psi``.  Valid for ``x > y > 1`` or ``x < -1 < 1 < y``.
    """
    x = float(_exterior(x))
    y = float(y)
    if not (y > 1.0 and (x > y or x < -1.0)):
        raise DomainError("need x > y > 1 or x < -1 < 1 < y")
    a, ah = p.ar, p.arh
    u, _ = green_u(p, x, y, q)
    g = float(boundary_factor_g(p, y))
    zm1 = float(z_minus_one(x, y))
    corr = kernel_integral(a + 1.0, ah - 1.0, 1.0, 1.0 + zm1, q)
    if x > 1.0:
        s, ix = p.sin_arh, (psi_primitive(p, ExponentSide.RHO, x, q) if p.alpha > 1 else 0.0)
    else:
        s, ix = p.sin_ar, (psi_primitive(p, ExponentSide.RHO_HAT, -x, q) if p.alpha > 1 else 0.0)
    rhs = 2.0 ** (ah - 1.0) * norm_constant(p) * u / g
    rhs -= s * (1.0 - ah) * abs(x - y) ** (p.alpha - 1.0) * corr / g
    if p.alpha > 1.0:
        jy = psi_primitive(p, ExponentSide.RHO_HAT, y, q)
        rhs += (p.alpha - 1.0) * s * ix * (a * jy / g - 1.0)
    return float(rhs - _v1_quad(p, x, q))


def _v1_quad(p: StableParams, x: float, q: QuadratureSettings) -> float:
    """``v1`` with adaptive primitives (reference path for identities)."""
    if x > 1.0:
        val = (x + 1.0) * float(psi(p, ExponentSide.RHO, x))
        if p.alpha > 1.0:
            val -= (p.alpha - 1.0) * psi_primitive(p, ExponentSide.RHO, x, q)
        return p.sin_arh * val
    s = -x
    val = (s - 1.0) * float(psi(p, ExponentSide.RHO_HAT, s))
    if p.alpha > 1.0:
        val -= (p.alpha - 1.0) * psi_primitive(p, ExponentSide.RHO_HAT, s, q)
    return p.sin_ar * val


def green_boundary_ratio(p: StableParams, x, delta: float,
                         q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """``c_{alpha rho} u(x, 1 + delta) / delta**(alpha rho)``; tends to ``v1(x)`` as ``delta -> 0``."""
    x = float(_exterior(x))
    if not delta > 0 or 1.0 + delta >= abs(x) and x > 0:
        raise DomainError("need 0 < delta and 1 + delta < x")
    u, _ = green_u(p, x, 1.0 + delta, q)
    return float(norm_constant(p) * u / delta ** p.ar)


def potential_mass(p: StableParams, h_kind: HKind, x, b: float,
                   q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Expected time the h-process spends in ``[-b, -1) U (1, b]``.

    Computes ``int h(y) u(x, y) dy / h(x)`` over both pieces.  Algebraic
    singularities of exponent ``alpha - 1`` at ``|y| = 1`` and at ``y = x``
    are integrated with QUADPACK's algebraic weight.
    """
    x = float(_exterior(x))
    if not b > 1.0:
        raise DomainError("b must exceed 1")
    if h_kind not in (HKind.V1, HKind.V, HKind.VMINUS1):
        raise ValueError("h_kind must be V1, VMINUS1 or V")
    h = h_function(p, h_kind)
    hx = float(h(x))
    sing = p.alpha - 1.0

    def integrand(yv):
        u, _ = green_u(p, x, yv, None, diag_cutoff=0.0)
        return float(h(yv)) * u / hx

    total = 0.0
    for lo, hi in ((1.0, b), (-b, -1.0)):
        cuts = [lo, hi]
        if lo < x < hi:
            cuts = [lo, x, hi]
        for l, r in zip(cuts[:-1], cuts[1:]):
            wl = sing if (abs(l) == 1.0 or l == x) else 0.0
            wr = sing if (abs(r) == 1.0 or r == x) else 0.0

            def f(yv, l=l, r=r, wl=wl, wr=wr):
                if yv <= l or yv >= r:
                    return 0.0
                den = (yv - l) ** wl * (r - yv) ** wr
                return integrand(yv) / den

            res = integrate.quad(f, l, r, weight="alg", wvar=(wl, wr),
                                 epsabs=q.abs_tol, epsrel=max(q.rel_tol, 1e-9),
                                 limit=q.max_subdivisions, full_output=1)
            if not np.isfinite(res[0]):
                raise QuadratureFailure("potential mass quadrature failed")
            total += res[0]
    return float(total)
