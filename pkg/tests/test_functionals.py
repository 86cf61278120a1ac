"""The growth functionals: closed forms, symmetry, inversion, tail verdicts."""

from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import IDENT, ONE, ZERO, decaying_weight, manufactured_spec, power_fn, power_spec, unit_spec
from koradial.functionals import (
    HEvaluator,
    HRangeError,
    eval_G,
    eval_H,
    eval_P1_Q1,
    eval_P2_Q2,
    eval_P3_Q3,
    evaluate_radial_functionals,
    final_value_family,
    h_inverse,
    ko_classic,
)
from koradial.problem import ProblemSpec, ScalarFn
from koradial.quadrature import make_grid, tail_limit

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# G


def test_g1_unit_weight():
    spec = unit_spec()
    g = make_grid(2.0)
    prof = eval_G(spec, 1, g)
    assert_allclose(prof.values, g.nodes**3 / 3.0, rtol=1e-12, atol=1e-15)


def test_g_zero_weight():
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ONE, p2=ZERO,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    g = make_grid(2.0)
    assert np.all(eval_G(spec, 1, g).values == 0.0)


def test_g2_linear_weight():
    # G2 integrates p1; with p1(s) = s the closed form is z^4/4
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0,
        p1=ScalarFn(lambda s: s, label="x"), p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    g = make_grid(2.0)
    prof = eval_G(spec, 2, g)
    ends = g.panel_edges
    assert_allclose(prof.values[ends], g.nodes[ends] ** 4 / 4.0, rtol=1e-12, atol=1e-14)


def test_g_index_swap():
    # G1 must consume the second weight, G2 the first
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ZERO, p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    g = make_grid(1.0)
    assert eval_G(spec, 1, g).final > 0.0
    assert eval_G(spec, 2, g).final == 0.0


# ---------------------------------------------------------------------------
# P1 / Q1


def test_p1_unit_instance_closed_form():
    spec = unit_spec()
    g = make_grid(2.0)
    p1, q1 = eval_P1_Q1(spec, g)
    exact = g.nodes**2 / 6.0 + g.nodes**4 / 120.0
    assert_allclose(p1.values, exact, rtol=1e-8, atol=1e-12)
    assert np.array_equal(p1.values, q1.values)  # symmetric instance


def test_p1_value_at_one():
    prof, _ = eval_P1_Q1(unit_spec(), make_grid(1.0))
    assert prof.final == pytest.approx(0.175, rel=1e-8)


def test_p1_zero_weight():
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ZERO, p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    p1, q1 = eval_P1_Q1(spec, make_grid(2.0))
    assert np.all(p1.values == 0.0)
    assert q1.final > 0.0  # the mirror side still sees p2


# ---------------------------------------------------------------------------
# P2 / Q2


def test_p2_zero_weights():
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ZERO, p2=ZERO,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    p2, q2 = eval_P2_Q2(spec, make_grid(2.0))
    assert np.all(p2.values == 0.0) and np.all(q2.values == 0.0)


def test_p2_unit_instance_value():
    # integrand z^1.5 (1 + z^2/6): P2(1) = 2/5 + (1/6)(2/9)
    p2, _ = eval_P2_Q2(unit_spec(), make_grid(1.0))
    assert p2.final == pytest.approx(0.4 + 2.0 / 54.0, rel=1e-8)


def test_p2_decayed_weight_finite_tail():
    flat = ScalarFn(lambda w: 1.0, label="1")
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=decaying_weight(), p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=flat, w2=IDENT,
    )
    # comparison exponent 1.5 - 4 < -1: the improper integral converges
    v = tail_limit(final_value_family(spec, "P2"))
    assert v.finite


# ---------------------------------------------------------------------------
# P3 / Q3


def test_p3_zero_weight():
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ZERO, p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    p3, _ = eval_P3_Q3(spec, make_grid(2.0))
    assert np.all(p3.values == 0.0)


def test_p3_flat_comparison():
    flat = ScalarFn(lambda w: 1.0, label="1")
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ONE, p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=flat, w2=flat,
    )
    g = make_grid(3.0)
    p3, q3 = eval_P3_Q3(spec, g)
    assert_allclose(p3.values, SQRT2 * g.nodes, rtol=1e-13, atol=1e-14)
    assert_allclose(q3.values, SQRT2 * g.nodes, rtol=1e-13, atol=1e-14)


def test_p3_against_fine_grid():
    spec = unit_spec()
    coarse = eval_P3_Q3(spec, make_grid(2.0))[0].final
    fine = eval_P3_Q3(spec, make_grid(2.0, 320, 2.0, 17))[0].final
    assert coarse == pytest.approx(fine, rel=1e-8)


# ---------------------------------------------------------------------------
# H and inversion


def test_h1_log_closed_form():
    prof = eval_H(unit_spec(), 1, upper=math.e)
    assert prof.values[0] == 0.0
    assert prof.final == pytest.approx(SQRT2, rel=1e-8)
    xs = prof.grid.nodes
    assert_allclose(prof.values, SQRT2 * np.log(xs), rtol=1e-8, atol=1e-10)


def test_h1_power_pair_closed_form():
    # h1 = identity, f2(t) = t^2: mass s^3/3, profile 2*sqrt(3)(1 - r^(-1/2))
    sq = power_fn(2.0)
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ONE, p2=ONE,
        f1=IDENT, f2=sq, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    prof = eval_H(spec, 1, upper=4.0)
    exact = 2 * math.sqrt(3.0) * (1 - 1 / np.sqrt(prof.grid.nodes))
    assert_allclose(prof.values, exact, rtol=1e-8, atol=1e-10)
    # its limit 2*sqrt(3) is finite: confirmed by doubling probes
    ev = HEvaluator(spec, 1)
    v = tail_limit(ev.value_at_upper, r0=2.0)
    assert v.finite
    assert v.value == pytest.approx(2 * math.sqrt(3.0), rel=1e-4)


def test_h_requires_positive_mass():
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ONE, p2=ONE,
        f1=IDENT, f2=IDENT, h1=ZERO, h2=IDENT, w1=IDENT, w2=IDENT,
    )
    with pytest.raises(ValueError, match="degenerate inner mass"):
        eval_H(spec, 1, upper=4.0)


def test_h_upper_must_exceed_lower():
    with pytest.raises(ValueError, match="upper"):
        eval_H(unit_spec(), 1, upper=1.0)


def test_h_inverse_identity_profile():
    from koradial.quadrature import cumulative_integral

    g = make_grid(1.0, 1, 1.0, 17)
    prof = cumulative_integral(np.ones(len(g)), g)  # H(r) = r on [0, 1]
    assert h_inverse(prof, 0.7) == pytest.approx(0.7, rel=1e-9)


def test_h_inverse_log_profile():
    # agreement with the analytic inverse is interpolation-limited (~1e-7);
    # the 1e-9 contract is for the roundtrip on the same interpolant below
    prof = eval_H(unit_spec(), 1, upper=2.0 * math.e)
    assert h_inverse(prof, SQRT2) == pytest.approx(math.e, rel=1e-6)


def test_h_inverse_zero_returns_lower():
    prof = eval_H(unit_spec(), 1, upper=3.0)
    assert h_inverse(prof, 0.0) == 1.0


def test_h_inverse_out_of_range():
    prof = eval_H(unit_spec(), 1, upper=2.0)
    with pytest.raises(HRangeError) as exc:
        h_inverse(prof, 100.0)
    assert exc.value.h_sup == pytest.approx(prof.final)


def test_h_inverse_roundtrip():
    prof = eval_H(unit_spec(), 1, upper=6.0)
    for r in np.linspace(1.05, 5.9, 17):
        y = float(prof(r))
        assert h_inverse(prof, y) == pytest.approx(r, rel=1e-9)


def test_h_forward_of_inverse_roundtrip():
    prof = eval_H(unit_spec(), 1, upper=6.0)
    for y in np.linspace(0.05, 0.95 * prof.final, 13):
        assert float(prof(h_inverse(prof, float(y)))) == pytest.approx(float(y), rel=1e-8)


def test_h_evaluator_extends_on_demand():
    ev = HEvaluator(unit_spec(), 1)  # profile is sqrt(2) log r
    r = ev.inverse(SQRT2 * math.log(500.0))
    assert r == pytest.approx(500.0, rel=1e-6)
    assert ev.upper >= 500.0
    # forward evaluation agrees with the closed form
    assert ev.value(123.0) == pytest.approx(SQRT2 * math.log(123.0), rel=1e-6)


def test_h_evaluator_saturation():
    sq = power_fn(2.0)
    spec = ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ONE, p2=ONE,
        f1=sq, f2=sq, h1=sq, h2=sq, w1=sq, w2=sq,
    )
    ev = HEvaluator(spec, 1)  # limit 2*sqrt(5)/3 ~ 1.49
    with pytest.raises(HRangeError) as exc:
        ev.inverse(10.0)
    assert exc.value.h_sup == pytest.approx(2 * math.sqrt(5.0) / 3.0, rel=1e-3)
    ys = ev.inverse_many(np.array([0.0, 1.0, 10.0]))
    assert ys[0] == 1.0 and np.isfinite(ys[1]) and np.isnan(ys[2])


# ---------------------------------------------------------------------------
# equation-swap symmetry


def test_swap_symmetry_bit_exact():
    spec = manufactured_spec()
    swapped = spec.swapped()
    g = make_grid(5.0)
    p1, q1 = eval_P1_Q1(spec, g)
    p1s, q1s = eval_P1_Q1(swapped, g)
    assert np.array_equal(p1.values, q1s.values)
    assert np.array_equal(q1.values, p1s.values)
    p2, q2 = eval_P2_Q2(spec, g)
    p2s, q2s = eval_P2_Q2(swapped, g)
    assert np.array_equal(p2.values, q2s.values)
    assert np.array_equal(q2.values, p2s.values)
    p3, q3 = eval_P3_Q3(spec, g)
    p3s, q3s = eval_P3_Q3(swapped, g)
    assert np.array_equal(p3.values, q3s.values)
    assert np.array_equal(q3.values, p3s.values)
    assert np.array_equal(eval_G(spec, 1, g).values, eval_G(swapped, 2, g).values)


# ---------------------------------------------------------------------------
# all-profile invariants


def test_all_profiles_nondecreasing_and_anchored():
    spec = manufactured_spec()
    g = make_grid(4.0)
    profs = evaluate_radial_functionals(spec, g)
    assert set(profs) == {"G1", "G2", "P1", "Q1", "P2", "Q2", "P3", "Q3"}
    fp = spec.fingerprint()
    for tag, f in profs.items():
        assert f.spec_fingerprint == fp
        assert f.profile.values[0] == 0.0
        assert f.profile.is_nondecreasing(slack=1e-10), tag
    h1 = eval_H(spec, 1, upper=7.0)
    h2 = eval_H(spec, 2, upper=7.0)
    assert h1.values[0] == 0.0 and h2.values[0] == 0.0
    assert np.all(np.diff(h1.values) > 0) and np.all(np.diff(h2.values) > 0)


# ---------------------------------------------------------------------------
# classic single-equation criterion


def test_ko_linear_divergent():
    assert ko_classic(IDENT).divergent


def test_ko_cubic_finite():
    assert ko_classic(power_fn(3.0)).finite


def test_ko_exponential_finite():
    f = ScalarFn(lambda s: s * math.exp(s), True, True, "x*exp(x)")
    assert ko_classic(f).finite


def test_ko_degenerate_mass_indeterminate():
    assert ko_classic(ZERO).indeterminate


# ---------------------------------------------------------------------------
# power-pair growth limits


@pytest.mark.parametrize("alpha,beta", [(1.0, 1.0), (0.5, 2.0), (0.5, 0.5)])
def test_h_divergent_for_subcritical_powers(alpha, beta):
    spec = power_spec(alpha=alpha, beta=beta)
    for which in (1, 2):
        ev = HEvaluator(spec, which)
        assert tail_limit(ev.value_at_upper, r0=2.0).divergent


def test_h_finite_for_supercritical_powers():
    spec = power_spec(alpha=2.0, beta=2.0)
    for which in (1, 2):
        ev = HEvaluator(spec, which)
        assert tail_limit(ev.value_at_upper, r0=2.0).finite
