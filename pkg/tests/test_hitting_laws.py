import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecond import RngStream, validate_params
from stablecond.errors import DomainError, ScopeError
from stablecond.harmonic import HKind, avoid_zero_e, v1, v_minus1, v_total
from stablecond.hitting_laws import (
    HittingWindow,
    Side,
    circ_closest_reach_asymptote,
    circ_closest_reach_mass,
    closest_reach_asymptote,
    closest_reach_constant,
    closest_reach_mass,
    entrance_window_asymptote,
    entrance_window_mass,
    first_entrance_density,
    first_entrance_mass,
)
from stablecond.pathsim import SimConfig, closest_reach_sample

from conftest import rel

LOW = [(0.5, 0.5), (0.5, 0.3), (0.8, 0.55), (0.3, 0.7)]
HIGH = [(1.5, 0.5), (1.5, 0.45), (1.8, 0.52), (1.2, 0.4)]


def mp_same_side(p, x, a, b):
    """Closest-reach window mass in original coordinates, same side as x > 1."""
    f = lambda w: w ** -p.alpha * (x - w) ** (p.arh - 1) * (x + w) ** p.ar
    return closest_reach_constant(p) * float(mp.quad(f, [a, (a + b) / 2, b]))


def mp_opposite_side(p, x, a, b):
    f = lambda w: w ** -p.alpha * (x - w) ** p.arh * (x + w) ** (p.ar - 1)
    return closest_reach_constant(p) * float(mp.quad(f, [a, (a + b) / 2, b]))


class TestWindow:
    def test_validation(self):
        with pytest.raises(DomainError):
            HittingWindow(2.0, 1.0)
        with pytest.raises(DomainError):
            HittingWindow(-0.5, 1.0)
        assert HittingWindow(1, 2, "negative").side is Side.NEGATIVE

    def test_flip(self):
        assert Side.POSITIVE.flipped() is Side.NEGATIVE
        assert Side.BOTH.flipped() is Side.BOTH


class TestClosestReach:
    def test_scope(self):
        with pytest.raises(ScopeError):
            closest_reach_mass(validate_params(1.5, 0.5), 3.0, HittingWindow(1, 2))
        with pytest.raises(ScopeError):
            closest_reach_asymptote(validate_params(1.0, 0.5), 3.0, Side.POSITIVE)

    @pytest.mark.parametrize("ar", LOW)
    @pytest.mark.parametrize("x", [2.0, 3.0, -2.0, -3.0, 10.0])
    def test_total_mass(self, ar, x):
        p = validate_params(*ar)
        assert closest_reach_mass(p, x, HittingWindow(0.0, abs(x), Side.BOTH)) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("ar", LOW)
    @pytest.mark.parametrize("win", [(1.0, 1.5), (0.2, 2.9), (1.5, 2.5)])
    def test_original_coordinates(self, ar, win):
        p, x = validate_params(*ar), 3.0
        pos = closest_reach_mass(p, x, HittingWindow(*win, Side.POSITIVE))
        neg = closest_reach_mass(p, x, HittingWindow(*win, Side.NEGATIVE))
        assert pos == pytest.approx(mp_same_side(p, x, *win), rel=1e-9)
        assert neg == pytest.approx(mp_opposite_side(p, x, *win), rel=1e-9)

    def test_symmetric_both_sides(self):
        # for rho = 1/2 the two integrands add up to twice the kernel
        p, x = validate_params(0.5, 0.5), 3.0
        both = closest_reach_mass(p, x, HittingWindow(1.0, 1.5, Side.BOTH))
        f = lambda w: w ** -0.5 * (x - w) ** -0.75 * (x + w) ** -0.75 * 2 * x
        assert both == pytest.approx(closest_reach_constant(p) * float(mp.quad(f, [1, 1.5])), rel=1e-9)

    def test_window_beyond_start_is_empty(self):
        p = validate_params(0.5, 0.5)
        assert closest_reach_mass(p, 3.0, HittingWindow(3.0, 5.0, Side.POSITIVE)) == 0.0

    @given(st.floats(1.01, 50.0), st.floats(0.0, 0.98), st.floats(0.01, 1.0),
           st.sampled_from(LOW), st.sampled_from(list(Side)))
    def test_reflection_and_range(self, x, a_frac, w_frac, ar, side):
        p = validate_params(*ar)
        a = a_frac * x
        b = a + w_frac * (x - a)
        if b <= a:
            return
        m = closest_reach_mass(p, x, HittingWindow(a, b, side))
        assert 0.0 <= m <= 1.0
        mr = closest_reach_mass(p.swapped(), -x, HittingWindow(a, b, side.flipped()))
        assert mr == pytest.approx(m, rel=1e-10, abs=1e-300)

    @given(st.floats(1.5, 20.0), st.floats(1.0, 1.4), st.floats(0.01, 0.4), st.floats(0.01, 0.4))
    def test_monotone_in_window(self, x, a, w1, w2):
        p = validate_params(0.5, 0.3)
        inner = closest_reach_mass(p, x, HittingWindow(a, a + w1, Side.BOTH))
        outer = closest_reach_mass(p, x, HittingWindow(a, a + w1 + w2, Side.BOTH))
        assert inner <= outer + 1e-15

    def test_both_is_sum(self):
        p = validate_params(0.5, 0.3)
        for x in (2.0, -3.0):
            w = lambda s: HittingWindow(1.0, 1.7, s)
            both = closest_reach_mass(p, x, w(Side.BOTH))
            assert both == pytest.approx(closest_reach_mass(p, x, w(Side.POSITIVE))
                                         + closest_reach_mass(p, x, w(Side.NEGATIVE)), rel=1e-12)


class TestClosestReachAsymptote:
    @pytest.mark.parametrize("ar", [(0.5, 0.5), (0.5, 0.3)])
    @pytest.mark.parametrize("x", [2.0, 3.0, -2.0, -3.0])
    @pytest.mark.parametrize("side", list(Side))
    def test_ratio(self, ar, x, side):
        p, eps = validate_params(*ar), 1e-5
        ratio = closest_reach_mass(p, x, HittingWindow(1.0, 1.0 + eps, side)) / eps
        assert rel(ratio, closest_reach_asymptote(p, x, side)) < 1e-3

    def test_constant_value(self):
        p = validate_params(0.5, 0.5)
        c = 2 ** -0.5 * math.gamma(0.75) ** 2 / (math.pi * math.gamma(0.5))
        assert closest_reach_asymptote(p, 3.0, Side.POSITIVE) == pytest.approx(c * v1(p, 3.0), rel=1e-14)

    def test_both_is_sum(self):
        p = validate_params(0.5, 0.3)
        s = closest_reach_asymptote(p, -2.0, Side.POSITIVE) + closest_reach_asymptote(p, -2.0, Side.NEGATIVE)
        assert closest_reach_asymptote(p, -2.0, Side.BOTH) == pytest.approx(s, rel=1e-14)

    @pytest.mark.parametrize("side", [Side.POSITIVE, Side.NEGATIVE])
    def test_monotone_improvement(self, side):
        p = validate_params(0.5, 0.3)
        lim = closest_reach_asymptote(p, 3.0, side)
        errs = [rel(closest_reach_mass(p, 3.0, HittingWindow(1, 1 + e, side)) / e, lim)
                for e in (1e-3, 1e-4, 1e-5)]
        assert errs[0] > errs[1] > errs[2]


class TestFirstEntrance:
    def test_scope(self):
        with pytest.raises(ScopeError):
            first_entrance_density(validate_params(0.5, 0.5), 2.0, 0.0)

    @pytest.mark.parametrize("ar", HIGH + [(1.0, 0.5)])
    @pytest.mark.parametrize("X", [1.05, 2.0, 3.0, -3.0, 20.0])
    def test_normalisation(self, ar, X):
        assert first_entrance_mass(validate_params(*ar), X) == pytest.approx(1.0, abs=1e-8)

    def test_normalisation_mpmath(self):
        p, X = validate_params(1.5, 0.45), 3.0
        a, ah = mp.mpf(p.ar), mp.mpf(p.arh)
        A = (X + 1) ** a * (X - 1) ** ah
        # u = 1 + t**(1/ah) and y = -+(1 - t**k) remove the endpoint singularities
        kb = 1 / ah
        B = (p.alpha - 1) * mp.quad(lambda t: kb * (t ** kb + 2) ** (a - 1), [0, (X - 1) ** ah])
        dens = lambda y: mp.sin(mp.pi * ah) / mp.pi * (1 + y) ** -a * (1 - y) ** -ah * (A / (X - y) - B)
        kl, kr = 1 / (1 - a), 1 / (1 - ah)
        c = mp.sin(mp.pi * ah) / mp.pi
        left = mp.quad(lambda t: c * kl * (2 - t ** kl) ** -ah * (A / (X + 1 - t ** kl) - B), [0, 1])
        right = mp.quad(lambda t: c * kr * (2 - t ** kr) ** -a * (A / (X - 1 + t ** kr) - B), [0, 1])
        assert float(left + right) == pytest.approx(1.0, abs=1e-8)
        y = np.linspace(-0.99, 0.99, 9)
        assert np.allclose(first_entrance_density(p, X, y), [float(dens(v)) for v in y], rtol=1e-10)

    def test_cauchy_has_no_correction(self):
        p, X = validate_params(1.0, 0.5), 2.0
        y = np.linspace(-0.9, 0.9, 7)
        ref = (1 / math.pi) * math.sqrt(3) * (1 - y * y) ** -0.5 / (X - y)
        assert np.allclose(first_entrance_density(p, X, y), ref, rtol=1e-13)

    @pytest.mark.parametrize("ar", HIGH)
    def test_nonnegative(self, ar):
        p = validate_params(*ar)
        y = np.linspace(-0.999, 0.999, 201)
        for X in (1.01, 2.0, -5.0):
            assert np.all(first_entrance_density(p, X, y) >= 0)

    @given(st.floats(1.01, 50.0), st.floats(-0.99, 0.99), st.sampled_from(HIGH))
    def test_reflection(self, X, y, ar):
        p = validate_params(*ar)
        assert first_entrance_density(p, -X, -y) == pytest.approx(
            first_entrance_density(p.swapped(), X, y), rel=1e-10)

    def test_partial_masses_add(self):
        p = validate_params(1.5, 0.45)
        parts = first_entrance_mass(p, 3.0, -1, -0.3) + first_entrance_mass(p, 3.0, -0.3, 0.4) \
            + first_entrance_mass(p, 3.0, 0.4, 1.0)
        assert parts == pytest.approx(1.0, abs=1e-8)

    def test_domain(self):
        with pytest.raises(DomainError):
            first_entrance_density(validate_params(1.5, 0.5), 2.0, 1.0)
        with pytest.raises(DomainError):
            first_entrance_mass(validate_params(1.5, 0.5), 2.0, 0.5, 0.2)


class TestEntranceWindow:
    def test_domain(self):
        with pytest.raises(DomainError):
            entrance_window_mass(validate_params(1.5, 0.5), 1.05, 0.1, Side.POSITIVE)

    def test_asymptote_example(self):
        p, eps = validate_params(1.5, 0.5), 1e-4
        c, k = entrance_window_asymptote(p, 2.0, Side.POSITIVE)
        assert k == pytest.approx(0.25)
        assert c == pytest.approx(2 ** -0.75 / (math.pi * 0.25) * v1(p, 2.0), rel=1e-14)
        assert rel(entrance_window_mass(p, 2.0, eps, Side.POSITIVE) / eps ** k, c) < 1e-3

    @pytest.mark.parametrize("ar", [(1.5, 0.45), (1.8, 0.52), (1.0, 0.5)])
    @pytest.mark.parametrize("x", [2.0, -3.0])
    @pytest.mark.parametrize("side", [Side.POSITIVE, Side.NEGATIVE])
    def test_asymptote_converges(self, ar, x, side):
        p = validate_params(*ar)
        c, k = entrance_window_asymptote(p, x, side)
        errs = [rel(entrance_window_mass(p, x, e, side) / e ** k, c) for e in (1e-3, 1e-4, 1e-5)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 2e-3

    def test_both_is_sum(self):
        p = validate_params(1.5, 0.45)
        m = [entrance_window_mass(p, 2.0, 0.01, s) for s in Side]
        assert m[2] == pytest.approx(m[0] + m[1], rel=1e-12)
        with pytest.raises(DomainError):
            entrance_window_asymptote(p, 2.0, Side.BOTH)

    def test_nested_events(self):
        p = validate_params(1.5, 0.45)
        m = [entrance_window_mass(p, 3.0, e, Side.BOTH) for e in (0.5, 0.1, 0.01, 1e-3)]
        assert m[0] <= 1 and all(b < a for a, b in zip(m, m[1:]))

    def test_side_selection_slope(self):
        p = validate_params(1.5, 0.4)
        eps = np.array([1e-3, 1e-4, 1e-5, 1e-6])
        r = [entrance_window_mass(p, 2.0, e, Side.NEGATIVE) / entrance_window_mass(p, 2.0, e, Side.POSITIVE)
             for e in eps]
        slope = np.polyfit(np.log(eps), np.log(r), 1)[0]
        assert slope == pytest.approx(p.alpha * (p.rho_hat - p.rho), rel=0.1)

    @given(st.floats(1.2, 30.0), st.floats(1e-4, 0.1), st.sampled_from(HIGH), st.sampled_from(list(Side)))
    def test_reflection(self, x, eps, ar, side):
        p = validate_params(*ar)
        m = entrance_window_mass(p, x, eps, side)
        assert entrance_window_mass(p.swapped(), -x, eps, side.flipped()) == pytest.approx(m, rel=1e-10)


class TestCircClosestReach:
    def test_scope_and_sides(self):
        with pytest.raises(ScopeError):
            circ_closest_reach_mass(validate_params(1.0, 0.5), 3.0, HittingWindow(1, 2), HKind.V1)
        with pytest.raises(DomainError):
            circ_closest_reach_mass(validate_params(1.5, 0.5), 3.0, HittingWindow(1, 2), HKind.V)

    def test_asymptote_example(self):
        p, x, eps = validate_params(1.5, 0.5), 3.0, 1e-5
        m = circ_closest_reach_mass(p, x, HittingWindow(1, 1 + eps), HKind.V1)
        assert rel(avoid_zero_e(p, x) / eps * m, 0.25 * v1(p, x)) < 1e-3
        assert circ_closest_reach_asymptote(p, x, HKind.V1) == pytest.approx(
            0.25 * v1(p, x) / avoid_zero_e(p, x), rel=1e-14)

    @pytest.mark.parametrize("ar", HIGH)
    @pytest.mark.parametrize("x", [2.0, -3.0])
    @pytest.mark.parametrize("kind", [HKind.V1, HKind.VMINUS1, HKind.V])
    def test_asymptote_converges(self, ar, x, kind):
        p = validate_params(*ar)
        side = {HKind.V1: Side.POSITIVE, HKind.VMINUS1: Side.NEGATIVE, HKind.V: Side.BOTH}[kind]
        lim = circ_closest_reach_asymptote(p, x, kind)
        errs = [rel(circ_closest_reach_mass(p, x, HittingWindow(1, 1 + e, side), kind) / e, lim)
                for e in (1e-3, 1e-4, 1e-5)]
        assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-3

    def test_additivity(self):
        p = validate_params(1.5, 0.45)
        for x in (2.5, -4.0):
            pos = circ_closest_reach_mass(p, x, HittingWindow(1.2, 2.0, Side.POSITIVE), HKind.V1)
            neg = circ_closest_reach_mass(p, x, HittingWindow(1.2, 2.0, Side.NEGATIVE), HKind.VMINUS1)
            both = circ_closest_reach_mass(p, x, HittingWindow(1.2, 2.0, Side.BOTH), HKind.V)
            assert both == pytest.approx(pos + neg, rel=1e-12)

    @pytest.mark.parametrize("ar", HIGH)
    def test_full_range_normalisation(self, ar):
        p = validate_params(*ar)
        for x in (2.0, -3.0):
            m = circ_closest_reach_mass(p, x, HittingWindow(0.0, abs(x), Side.BOTH), HKind.V)
            assert m == pytest.approx(1.0, abs=1e-6)

    def test_quadrature_oracle(self):
        p, x = validate_params(1.5, 0.45), 3.0
        f = lambda u: u ** -1.5 * v_total(p, float(u))
        ref = 0.5 / (2 * p.sin_arh) * float(mp.quad(f, [1.5, 2.0, 3.0]))
        m = circ_closest_reach_mass(p, x, HittingWindow(1.0, 2.0, Side.BOTH), HKind.V)
        assert m == pytest.approx(ref, rel=1e-8)

    @given(st.floats(1.5, 30.0), st.floats(0.05, 0.9), st.sampled_from(HIGH),
           st.sampled_from([HKind.V1, HKind.VMINUS1, HKind.V]))
    def test_reflection(self, x, frac, ar, kind):
        p = validate_params(*ar)
        side = {HKind.V1: Side.POSITIVE, HKind.VMINUS1: Side.NEGATIVE, HKind.V: Side.BOTH}[kind]
        swap = {HKind.V1: HKind.VMINUS1, HKind.VMINUS1: HKind.V1, HKind.V: HKind.V}[kind]
        w = HittingWindow(1.0, 1.0 + frac * (x - 1.0), side)
        m = circ_closest_reach_mass(p, x, w, kind)
        mr = circ_closest_reach_mass(p.swapped(), -x, HittingWindow(w.a, w.b, side.flipped()), swap)
        assert 0 <= m <= 1 + 1e-9
        assert mr == pytest.approx(m, rel=1e-10)


@pytest.mark.slow
class TestClosestReachMonteCarlo:
    def test_window_frequencies(self):
        # long horizon keeps the truncation bias below the standard error
        p, x = validate_params(0.5, 0.5), 3.0
        reach, late = closest_reach_sample(p, x, SimConfig(dt=0.05, horizon=100.0, n_paths=100_000,
                                                           rng=RngStream(2024)))
        assert late < 0.02
        for side, sg in ((Side.POSITIVE, 1), (Side.NEGATIVE, -1)):
            exact = closest_reach_mass(p, x, HittingWindow(1.0, 1.5, side))
            f = np.mean((sg * reach > 1.0) & (sg * reach < 1.5))
            se = math.sqrt(f * (1 - f) / len(reach))
            assert abs(f - exact) < 3 * se, (side, f, exact, se)
        assert np.all(np.abs(reach) <= x)
