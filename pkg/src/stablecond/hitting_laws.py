"""Hitting distributions around the interval ``[-1, 1]``.

* closest reach ``xi_m`` (``alpha < 1``): for ``x > 1`` and a window ``(a, b)``

      P(xi_m in (a, b))   = K int_{x/b v 1}^{x/a} (1 + 1/z) psi_{alpha rho}(z) dz
      P(xi_m in (-b, -a)) = K int_{x/b v 1}^{x/a} (1 - 1/z) psi_{alpha rho}(z) dz

  with ``K = 2**-alpha Gamma(1 - alpha rho) / (Gamma(1 - alpha) Gamma(alpha rho_hat))``;
* first entrance into ``(-1, 1)`` (``alpha >= 1``);
* closest reach under the measure conditioned to avoid zero (``alpha > 1``).

Start points ``x < -1`` are handled by reflection (``rho <-> rho_hat``,
``x -> -x`` and the sides exchanged).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .errors import DomainError, QuadratureFailure, ScopeError
from .harmonic import HKind, _exterior, avoid_zero_e, v1, v_minus1, v_total
from .special_functions import DEFAULT_QUAD, QuadratureSettings, kernel_integral
from .stable_model import StableParams

__all__ = [
    "Side",
    "HittingWindow",
    "closest_reach_constant",
    "closest_reach_mass",
    "closest_reach_density",
    "closest_reach_asymptote",
    "first_entrance_density",
    "first_entrance_mass",
    "entrance_window_mass",
    "entrance_window_asymptote",
    "circ_closest_reach_mass",
    "circ_closest_reach_asymptote",
]


class Side(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    BOTH = "both"

    def flipped(self) -> "Side":
        if self is Side.POSITIVE:
            return Side.NEGATIVE
        if self is Side.NEGATIVE:
            return Side.POSITIVE
        return Side.BOTH


@dataclass(frozen=True)
class HittingWindow:
    """Event ``{target in (a, b)}`` on the positive side, ``(-b, -a)`` on the negative side.

    ``a = 0`` is accepted so that whole half-lines can be expressed.
    """

    a: float
    b: float
    side: Side = Side.POSITIVE

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (0.0 <= a < b):
            raise DomainError(f"window needs 0 <= a < b, got ({a}, {b})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not isinstance(self.side, Side):
            object.__setattr__(self, "side", Side(self.side))


def _quad(f, lo, hi, q: QuadratureSettings, **kw):
    res = integrate.quad(f, lo, hi, epsabs=q.abs_tol, epsrel=q.rel_tol,
                         limit=q.max_subdivisions, full_output=1, **kw)
    val, err = res[0], res[1]
    if not np.isfinite(val) or (len(res) > 3 and err > 1e3 * max(q.abs_tol, q.rel_tol * abs(val))):
        raise QuadratureFailure(f"quadrature on [{lo}, {hi}] did not converge")
    return val


# ---------------------------------------------------------------------------
# closest reach, alpha < 1


def _need_lt_one(p: StableParams):
    if p.alpha >= 1.0:
        raise ScopeError("closest reach laws require alpha < 1")


def closest_reach_constant(p: StableParams) -> float:
    """``K = 2**-alpha Gamma(1 - alpha rho) / (Gamma(1 - alpha) Gamma(alpha rho_hat))``."""
    return float(2.0 ** -p.alpha * gamma(1.0 - p.ar) / (gamma(1.0 - p.alpha) * gamma(p.arh)))


def _z_range(x: float, w: HittingWindow):
    lo = max(1.0, x / w.b)
    hi = np.inf if w.a == 0.0 else x / w.a
    return lo, hi


def _cr_pos_start(p: StableParams, x: float, w: HittingWindow, q) -> float:
    lo, hi = _z_range(x, w)
    if hi <= lo:
        return 0.0
    c, d = p.arh, p.ar
    total = 0.0
    if w.side in (Side.POSITIVE, Side.BOTH):
        total += kernel_integral(c, d, lo, hi, q, weight=lambda z: 1.0 + 1.0 / z)
    if w.side in (Side.NEGATIVE, Side.BOTH):
        total += kernel_integral(c, d, lo, hi, q, weight=lambda z: 1.0 - 1.0 / z)
    return closest_reach_constant(p) * total


def closest_reach_mass(p: StableParams, x, w: HittingWindow,
                       q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """``P^x(xi_m in window)`` for ``alpha < 1``.

    Parts of the window beyond ``|x|`` carry no mass since ``|xi_m| <= |x|``.

    Raises
    ------
    ScopeError
        If ``alpha >= 1``.
    """
    _need_lt_one(p)
    x = float(_exterior(x))
    if x > 1.0:
        return float(min(_cr_pos_start(p, x, w, q), 1.0))
    wr = HittingWindow(w.a, w.b, w.side.flipped())
    return float(min(_cr_pos_start(p.swapped(), -x, wr, q), 1.0))


def closest_reach_density(p: StableParams, x, m):
    """Density of ``xi_m`` at ``m`` (``0 < |m| < |x|``) for ``alpha < 1``.

    In the original coordinates, for ``x > 1``:
    ``K m**-alpha (x - m)**(alpha rho_hat - 1) (x + m)**(alpha rho)`` on ``(0, x)`` and
    ``K |m|**-alpha (x - |m|)**(alpha rho_hat) (x + |m|)**(alpha rho - 1)`` on ``(-x, 0)``.
    """
    _need_lt_one(p)
    x = float(_exterior(x))
    m = np.asarray(m, dtype=float)
    if x < -1.0:
        return closest_reach_density(p.swapped(), -x, -m)
    s = np.abs(m)
    if np.any((s <= 0) | (s >= x)):
        raise DomainError("need 0 < |m| < |x|")
    k = closest_reach_constant(p)
    pos = k * s ** -p.alpha * (x - s) ** (p.arh - 1.0) * (x + s) ** p.ar
    neg = k * s ** -p.alpha * (x - s) ** p.arh * (x + s) ** (p.ar - 1.0)
    out = np.where(m > 0, pos, neg)
    return out[()] if out.ndim == 0 else out


def closest_reach_asymptote(p: StableParams, x, side: Side) -> float:
    """``lim eps**-1 P^x(xi_m in (1, 1+eps))`` (and mirror / both sides), ``alpha < 1``.

    Equals ``2**-alpha Gamma(1-alpha rho) Gamma(1-alpha rho_hat) / (pi Gamma(1-alpha))``
    times ``v1``, ``v_minus1`` or ``v``.
    """
    _need_lt_one(p)
    x = _exterior(x)
    const = 2.0 ** -p.alpha * gamma(1.0 - p.ar) * gamma(1.0 - p.arh) / (np.pi * gamma(1.0 - p.alpha))
    h = {Side.POSITIVE: v1, Side.NEGATIVE: v_minus1, Side.BOTH: v_total}[side]
    return float(const * h(p, x))


# ---------------------------------------------------------------------------
# first entrance, alpha >= 1


def _need_ge_one(p: StableParams):
    if p.alpha < 1.0:
        raise ScopeError("first-entrance laws require alpha >= 1")


def _entrance_parts(p: StableParams, X: float):
    """``(A, B)`` with density ``sin(pi alpha rho_hat)/pi (1+y)**-ar (1-y)**-arh (A/(X-y) - B)``."""
    A = (X + 1.0) ** p.ar * (X - 1.0) ** p.arh
    B = 0.0
    if p.alpha > 1.0:
        B = (p.alpha - 1.0) * kernel_integral(p.arh, p.ar, 1.0, X)
    return A, B


def first_entrance_density(p: StableParams, X: float, y, q: QuadratureSettings = DEFAULT_QUAD):
    """Density of the position of first entrance into ``(-1, 1)`` from ``X``.

    Parameters
    ----------
    p : StableParams
        ``alpha >= 1``.
    X : float
        Start point, ``|X| > 1``.
    y : float or array_like
        Points in ``(-1, 1)``.
    """
    _need_ge_one(p)
    X = float(_exterior(X))
    y = np.asarray(y, dtype=float)
    if np.any(~(np.abs(y) < 1.0)):
        raise DomainError("y must lie in (-1, 1)")
    if X < -1.0:
        return first_entrance_density(p.swapped(), -X, -y, q)
    A, B = _entrance_parts(p, X)
    out = (p.sin_arh / np.pi) * (1.0 + y) ** -p.ar * (1.0 - y) ** -p.arh * (A / (X - y) - B)
    return out[()] if out.ndim == 0 else out


def first_entrance_mass(p: StableParams, X: float, lo: float = -1.0, hi: float = 1.0,
                        q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """``P^X(first entrance position in (lo, hi))`` for ``-1 <= lo < hi <= 1``.

    The endpoint singularities are integrated with algebraic weights.
    """
    _need_ge_one(p)
    X = float(_exterior(X))
    if not -1.0 <= lo < hi <= 1.0:
        raise DomainError("need -1 <= lo < hi <= 1")
    if X < -1.0:
        return first_entrance_mass(p.swapped(), -X, -hi, -lo, q)
    A, B = _entrance_parts(p, X)
    pref = p.sin_arh / np.pi
    total = 0.0
    # split at 0 so each algebraic weight sits at its own endpoint
    pieces = [(lo, min(hi, 0.0)), (max(lo, 0.0), hi)]
    for a, b in pieces:
        if b <= a:
            continue
        if a == -1.0:
            # t = 1 + y near the left end
            f = lambda t: (2.0 - t) ** -p.arh * (A / (X + 1.0 - t) - B)
            total += _quad(f, 0.0, b + 1.0, q, weight="alg", wvar=(-p.ar, 0.0))
        elif b == 1.0:
            f = lambda t: (2.0 - t) ** -p.ar * (A / (X - 1.0 + t) - B)
            total += _quad(f, 0.0, 1.0 - a, q, weight="alg", wvar=(-p.arh, 0.0))
        else:
            f = lambda yv: (1.0 + yv) ** -p.ar * (1.0 - yv) ** -p.arh * (A / (X - yv) - B)
            total += _quad(f, a, b, q)
    return float(pref * total)


def _window_pos_start(p: StableParams, x: float, eps: float, side: Side, q) -> float:
    Xs = x / (1.0 + eps)
    width = eps / (1.0 + eps)  # 1 - 1/(1+eps)
    A, B = _entrance_parts(p, Xs)
    pref = p.sin_arh / np.pi
    total = 0.0
    if side in (Side.POSITIVE, Side.BOTH):
        f = lambda t: (2.0 - t) ** -p.ar * (A / (Xs - 1.0 + t) - B)
        total += _quad(f, 0.0, width, q, weight="alg", wvar=(-p.arh, 0.0))
    if side in (Side.NEGATIVE, Side.BOTH):
        f = lambda t: (2.0 - t) ** -p.arh * (A / (Xs + 1.0 - t) - B)
        total += _quad(f, 0.0, width, q, weight="alg", wvar=(-p.ar, 0.0))
    return pref * total


def entrance_window_mass(p: StableParams, x, eps: float, side: Side,
                         q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """``P^x(xi at first entrance into (-(1+eps), 1+eps) lies in (1, 1+eps))``.

    NEGATIVE uses ``(-(1+eps), -1)``; BOTH sums the two.  Computed by scaling
    to the unit interval and integrating :func:`first_entrance_density`.
    """
    _need_ge_one(p)
    x = float(_exterior(x))
    if not eps > 0 or abs(x) <= 1.0 + eps:
        raise DomainError("need eps > 0 and |x| > 1 + eps")
    if x > 1.0:
        return float(_window_pos_start(p, x, eps, side, q))
    return float(_window_pos_start(p.swapped(), -x, eps, side.flipped(), q))


def entrance_window_asymptote(p: StableParams, x, side: Side) -> tuple[float, float]:
    """Leading behaviour ``mass ~ C * eps**k`` of :func:`entrance_window_mass`.

    Returns ``(C, k)``: ``C = 2**-(alpha rho) / (pi (1 - alpha rho_hat)) v1(x)``,
    ``k = 1 - alpha rho_hat`` on the positive side, and the mirror
    ``2**-(alpha rho_hat) / (pi (1 - alpha rho)) v_minus1(x)``, ``k = 1 - alpha rho``
    on the negative side.
    """
    _need_ge_one(p)
    x = _exterior(x)
    if side is Side.POSITIVE:
        return float(2.0 ** -p.ar / (np.pi * (1.0 - p.arh)) * v1(p, x)), 1.0 - p.arh
    if side is Side.NEGATIVE:
        return float(2.0 ** -p.arh / (np.pi * (1.0 - p.ar)) * v_minus1(p, x)), 1.0 - p.ar
    raise DomainError("asymptote is defined per side")


# ---------------------------------------------------------------------------
# closest reach under the avoid-zero measure, alpha > 1


_KIND_SIDE = {HKind.V1: Side.POSITIVE, HKind.VMINUS1: Side.NEGATIVE, HKind.V: Side.BOTH}


def _circ_pos_start(p: StableParams, x: float, w: HittingWindow, kind: HKind, q) -> float:
    lo = max(1.0, x / w.b)
    hi = np.inf if w.a == 0.0 else x / w.a
    if hi <= lo:
        return 0.0
    h = {HKind.V1: v1, HKind.VMINUS1: v_minus1, HKind.V: v_total}[kind]
    sing = p.arh - 1.0 if kind in (HKind.V1, HKind.V) else 0.0
    total = 0.0
    mid = min(hi, 10.0)
    if lo < mid:
        if lo == 1.0:
            f = lambda u: u ** -p.alpha * float(h(p, u)) / (u - 1.0) ** sing if u > 1.0 else 0.0
            total += _quad(f, 1.0, mid, q, weight="alg", wvar=(sing, 0.0))
        else:
            total += _quad(lambda u: u ** -p.alpha * float(h(p, u)), lo, mid, q)
    if hi > mid:
        total += _quad(lambda u: u ** -p.alpha * float(h(p, u)), max(lo, mid), hi, q)
    return (p.alpha - 1.0) / (2.0 * p.sin_arh) * total


def circ_closest_reach_mass(p: StableParams, x, w: HittingWindow, kind: HKind,
                            q: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Closest-reach window mass for the process conditioned to avoid zero (``alpha > 1``).

    ``kind`` selects the side: V1 positive, VMINUS1 negative, V both; it must
    agree with ``w.side``.  For ``x > 1`` the mass is
    ``(alpha-1)/(2 sin(pi alpha rho_hat)) int_{x/b v 1}^{x/a} u**-alpha v_kind(u) du``.
    """
    if p.alpha <= 1.0:
        raise ScopeError("the avoid-zero measure requires alpha > 1")
    if kind not in _KIND_SIDE:
        raise ValueError("kind must be V1, VMINUS1 or V")
    if _KIND_SIDE[kind] is not w.side:
        raise DomainError(f"kind {kind.name} does not match window side {w.side.name}")
    x = float(_exterior(x))
    if x > 1.0:
        return float(_circ_pos_start(p, x, w, kind, q))
    swap = {HKind.V1: HKind.VMINUS1, HKind.VMINUS1: HKind.V1, HKind.V: HKind.V}[kind]
    wr = HittingWindow(w.a, w.b, w.side.flipped())
    return float(_circ_pos_start(p.swapped(), -x, wr, swap, q))


def circ_closest_reach_asymptote(p: StableParams, x, kind: HKind) -> float:
    """``lim eps**-1 P_circ^x(window of width eps)`` = ``(alpha-1)/2 v_kind(x) / e(x)``."""
    if p.alpha <= 1.0:
        raise ScopeError("the avoid-zero measure requires alpha > 1")
    x = float(_exterior(x))
    h = {HKind.V1: v1, HKind.VMINUS1: v_minus1, HKind.V: v_total}[kind]
    return float((p.alpha - 1.0) / 2.0 * h(p, x) / avoid_zero_e(p, x))
