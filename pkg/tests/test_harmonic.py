import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecond import RngStream, validate_params
from stablecond.errors import DomainError, NearDiagonal, ScopeError
from stablecond.harmonic import (
    ExteriorPoint,
    GreenBranch,
    HKind,
    avoid_zero_e,
    green_boundary_ratio,
    green_u,
    invariant_h,
    invariant_h_constant,
    lemma31_residual,
    potential_mass,
    v1,
    v1_limit,
    v_minus1,
    v_total,
)
from stablecond.stable_model import sample_increment

from conftest import GRID, admissible

mp.mp.dps = 30
ext = st.floats(1.001, 200.0)
sign = st.sampled_from([1.0, -1.0])


def mp_v1(alpha, rho, x):
    """Closed form with mpmath quadrature for the primitive."""
    a, ah = alpha * rho, alpha * (1 - rho)
    if x > 1:
        psi = lambda u: (u - 1) ** (ah - 1) * (u + 1) ** (a - 1)
        val = (x + 1) * psi(mp.mpf(x))
        if alpha > 1:
            val -= (alpha - 1) * mp.quad(psi, [1, 1.5, x] if x > 1.5 else [1, x])
        return mp.sin(mp.pi * ah) * val
    s = -mp.mpf(x)
    psih = lambda u: (u - 1) ** (a - 1) * (u + 1) ** (ah - 1)
    val = (s - 1) * psih(s)
    if alpha > 1:
        val -= (alpha - 1) * mp.quad(psih, [1, 1.5, s] if s > 1.5 else [1, s])
    return mp.sin(mp.pi * a) * val


class TestExteriorPoint:
    def test_rejects_interval(self):
        for x in (1.0, -1.0, 0.0, float("nan")):
            with pytest.raises(DomainError):
                ExteriorPoint(x)
        assert float(ExteriorPoint(-2)) == -2.0


class TestV1:
    def test_examples(self):
        p = validate_params(0.5, 0.5)
        assert v1(p, 3.0) == pytest.approx(2 ** -0.75, rel=1e-14)
        assert v1(p, -3.0) == pytest.approx(2 ** -1.75, rel=1e-14)
        assert v1(p, 3.0) == pytest.approx(0.594604, abs=1e-6)

    @pytest.mark.parametrize("ar", GRID)
    @pytest.mark.parametrize("x", [-20.0, -1.1, 1.01, 2.0, 50.0])
    def test_mpmath_oracle(self, ar, x):
        p = validate_params(*ar)
        assert v1(p, x) == pytest.approx(float(mp_v1(*ar, x)), rel=1e-10)

    def test_poles(self):
        p = validate_params(1.5, 0.45)
        assert v1(p, 1 + 1e-10) > 10 * v1(p, 1.1)
        assert v1(p, -1 - 1e-10) < 1e-3 * v1(p, -1.1)
        assert v_minus1(p, -1 - 1e-10) > 1e2 * v_minus1(p, -1.1)

    def test_vectorised(self):
        p = validate_params(1.5, 0.5)
        xs = np.array([-3.0, 2.0, 5.0])
        assert np.allclose(v1(p, xs), [v1(p, x) for x in xs], rtol=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            v1(validate_params(1.5, 0.5), 0.5)

    @given(ext, sign, st.floats(0.05, 1.95).filter(lambda a: abs(a - 1) > 0.01), st.floats(0.05, 0.95))
    def test_positive_and_reflection(self, s, sg, alpha, u):
        p = validate_params(alpha, admissible(alpha, u))
        x = sg * s
        val = v1(p, x)
        assert val > 0
        assert v_minus1(p.swapped(), -x) == pytest.approx(val, rel=1e-12)

    @pytest.mark.parametrize("ar", [(0.5, 0.3), (1.5, 0.45), (1.8, 0.52)])
    def test_boundary_exponents(self, ar):
        p = validate_params(*ar)
        s = 10.0 ** -np.arange(6, 10)
        sp = np.polyfit(np.log(s), np.log(v1(p, 1 + s)), 1)[0]
        sn = np.polyfit(np.log(s), np.log(v1(p, -1 - s)), 1)[0]
        assert sp == pytest.approx(p.arh - 1, rel=0.02)
        assert sn == pytest.approx(p.ar, rel=0.02)

    def test_limit_at_infinity(self):
        p = validate_params(1.5, 0.5)
        lp, ln = v1_limit(p)
        assert lp == pytest.approx(0.59907, abs=1e-5)
        assert v1(p, 1e8) == pytest.approx(lp, rel=1e-3)
        assert v1(p, -1e8) == pytest.approx(ln, rel=1e-3)
        assert v1_limit(validate_params(0.5, 0.5)) == (0.0, 0.0)


class TestVMinus1AndTotal:
    def test_examples(self):
        p = validate_params(0.5, 0.5)
        assert v_minus1(p, 3.0) == pytest.approx(2 ** -1.75, rel=1e-14)
        assert v_total(p, 3.0) == pytest.approx(2 ** -0.75 + 2 ** -1.75, rel=1e-14)
        assert v_total(p, 3.0) == pytest.approx(0.891906, abs=1e-6)

    @pytest.mark.parametrize("x", [1.5, -1.5, 2.0, -2.0, 10.0, -10.0])
    def test_symmetric_reflection(self, x):
        p = validate_params(1.5, 0.5)
        assert v_minus1(p, x) == pytest.approx(v1(p, -x), rel=1e-14)
        assert v_total(p, x) == pytest.approx(v_total(p, -x), rel=1e-14)

    @given(ext, sign)
    def test_total_exceeds_parts(self, s, sg):
        p = validate_params(1.2, 0.45)
        x = sg * s
        t = v_total(p, x)
        assert t == v1(p, x) + v_minus1(p, x)
        assert t > max(v1(p, x), v_minus1(p, x))


class TestInvariantH:
    def test_scope(self):
        with pytest.raises(ScopeError):
            invariant_h(validate_params(1.0, 0.5), 2.0)

    def test_vanishes_at_one(self):
        p = validate_params(1.5, 0.5)
        assert invariant_h(p, 1 + 1e-12) < 1e-8

    def test_quadrature_oracle(self):
        p = validate_params(1.5, 0.5)
        ref = math.sin(0.75 * math.pi) * float(mp.quad(lambda u: (u - 1) ** -0.25 * (u + 1) ** -0.25, [1, 2]))
        assert invariant_h(p, 2.0) == pytest.approx(ref, rel=1e-8)
        ref_n = math.sin(0.75 * math.pi) * float(mp.quad(lambda u: (u - 1) ** -0.25 * (u + 1) ** -0.25, [1, 3]))
        assert invariant_h(p, -3.0) == pytest.approx(ref_n, rel=1e-8)

    def test_constant(self):
        p = validate_params(1.5, 0.5)
        assert invariant_h_constant(p) == pytest.approx(math.pi / math.gamma(0.25) ** 2, rel=1e-14)


class TestAvoidZero:
    def test_examples(self):
        p = validate_params(1.5, 0.5)
        assert avoid_zero_e(p, 2.0) == pytest.approx(1.0, rel=1e-14)
        assert avoid_zero_e(p, 1.0) == pytest.approx(math.sin(0.75 * math.pi), rel=1e-15)
        assert avoid_zero_e(p, -3.0) == avoid_zero_e(p, 3.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            avoid_zero_e(validate_params(1.5, 0.5), 0.0)


class TestGreen:
    def test_diagonal(self):
        p = validate_params(1.5, 0.5)
        assert green_u(p, 2.0, 2.0)[0] == 0.0

    def test_near_diagonal(self):
        with pytest.raises(NearDiagonal):
            green_u(validate_params(0.5, 0.5), 2.0, 2.0 + 1e-10)
        # alpha > 1 evaluates through the diagonal
        assert green_u(validate_params(1.5, 0.5), 2.0, 2.0 + 1e-10)[0] > 0

    def test_duality_example(self):
        p = validate_params(0.5, 0.3)
        a, ba = green_u(p, 3.0, 2.0)
        b, bb = green_u(p.swapped(), 2.0, 3.0)
        assert ba is GreenBranch.X_GT_Y_GT_1 and bb is GreenBranch.SWAPPED_VIA_DUALITY
        assert a == pytest.approx(b, rel=1e-9)

    def test_branches(self):
        p = validate_params(1.5, 0.45)
        assert green_u(p, -3.0, 2.0)[1] is GreenBranch.X_NEG_Y_POS
        assert green_u(p, 2.0, -3.0)[1] is GreenBranch.SWAPPED_VIA_DUALITY
        assert green_u(p, -3.0, -2.0)[1] is GreenBranch.REFLECTED

    @given(ext, ext, sign, sign, st.sampled_from(GRID))
    def test_symmetries(self, a, b, s1, s2, ar):
        x, y = s1 * a, s2 * b
        if abs(x - y) < 1e-3:
            return
        p = validate_params(*ar)
        u = green_u(p, x, y)[0]
        assert green_u(p.swapped(), y, x)[0] == pytest.approx(u, rel=1e-9, abs=1e-300)
        assert green_u(p.swapped(), -x, -y)[0] == pytest.approx(u, rel=1e-9, abs=1e-300)

    @pytest.mark.parametrize("ar", GRID)
    def test_nonnegative_grid(self, ar):
        p = validate_params(*ar)
        g = np.concatenate([-np.geomspace(1.01, 30, 25)[::-1], np.geomspace(1.01, 30, 25)])
        vals = [green_u(p, x, y)[0] for x in g for y in g if x != y]
        assert min(vals) >= 0.0 and np.all(np.isfinite(vals))


class TestGreenIdentity:
    def test_examples(self):
        assert abs(lemma31_residual(validate_params(0.5, 0.5), 3.0, 2.0)) < 1e-8
        assert abs(lemma31_residual(validate_params(1.5, 0.45), -2.0, 1.5)) < 1e-8

    def test_domain(self):
        with pytest.raises(DomainError):
            lemma31_residual(validate_params(0.5, 0.5), 2.0, 3.0)

    def test_no_systematic_bias(self):
        res = []
        for ar in GRID:
            p = validate_params(*ar)
            for x in (-20, -5, -2, -1.1, 2, 5, 20):
                for y in (1.05, 1.5, 3):
                    if x > y or x < -1:
                        r = lemma31_residual(p, x, y)
                        res.append(r / max(1.0, v1(p, x)))
        res = np.array(res)
        assert np.max(np.abs(res)) < 1e-8


class TestBoundaryRatio:
    def test_example(self):
        p = validate_params(0.5, 0.5)
        assert green_boundary_ratio(p, 3.0, 1e-6) == pytest.approx(v1(p, 3.0), rel=1e-3)

    @pytest.mark.parametrize("x", [3.0, -2.0])
    def test_error_decreases(self, x):
        p = validate_params(1.5, 0.45)
        errs = [abs(green_boundary_ratio(p, x, d) / v1(p, x) - 1) for d in (1e-4, 1e-5, 1e-6)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-3


class TestPotentialMass:
    @pytest.mark.parametrize("ar", [(0.5, 0.5), (1.5, 0.45)])
    @pytest.mark.parametrize("x", [2.0, -2.0])
    def test_finite_and_monotone(self, ar, x):
        p = validate_params(*ar)
        m2 = potential_mass(p, HKind.V1, x, 2.0)
        m10 = potential_mass(p, HKind.V1, x, 10.0)
        assert np.isfinite(m2) and np.isfinite(m10)
        assert 0 < m2 <= m10


def _occupation(p, x, dt, horizon, n, seed, bins, weight=None):
    """Time spent in each bin by killed grid paths (and its weighted version)."""
    rng = RngStream(seed)
    occ = np.zeros((n, len(bins)))
    pos = np.full(n, x)
    alive = np.ones(n, bool)
    for _ in range(int(horizon / dt)):
        pos[alive] += sample_increment(p, dt, rng, size=int(alive.sum()))
        alive &= np.abs(pos) > 1.0
        if not alive.any():
            break
        for j, (lo, hi) in enumerate(bins):
            m = alive & (pos > lo) & (pos < hi)
            occ[m, j] += dt if weight is None else dt * weight(pos[m])
    return occ


@pytest.mark.slow
class TestGreenMonteCarlo:
    def test_occupation_density(self):
        p = validate_params(0.5, 0.5)
        occ = _occupation(p, 3.0, 1e-3, 20.0, 20_000, 11, [(1.975, 2.025)])[:, 0]
        est, se = occ.mean() / 0.05, occ.std(ddof=1) / math.sqrt(len(occ)) / 0.05
        exact = float(mp.quad(lambda y: green_u(p, 3.0, float(y))[0], [1.975, 2.025])) / 0.05
        assert abs(est - exact) < 3 * se + 0.02 * exact

    def test_weighted_occupation(self):
        p = validate_params(1.5, 0.45)
        w = lambda y: v1(p, y) / v1(p, 2.0)
        # the h-process lives long, so the horizon must be far beyond its median lifetime
        occ = _occupation(p, 2.0, 5e-3, 500.0, 10_000, 13, [(-2.0, -1.0), (1.0, 2.0)], w).sum(axis=1)
        est, se = occ.mean(), occ.std(ddof=1) / math.sqrt(len(occ))
        exact = potential_mass(p, HKind.V1, 2.0, 2.0)
        assert abs(est - exact) < 3 * se + 0.01 * exact
