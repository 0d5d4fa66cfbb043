import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from wstarhom.ap_core import NullFunction
from wstarhom.corrector import (
    DEFAULT_DELTAS,
    EffectiveTable,
    auto_length,
    effective_ellipticity_check,
    estimate_effective,
    extrapolate_limit,
    make_estimator,
    omega_independence_check,
    shift_covariance_check,
    solve_delta_corrector,
)
from wstarhom.errors import (
    EllipticityViolation,
    NonConvergent,
    TableRangeExceeded,
    TruncationWarning,
    ValidationError,
)
from wstarhom.fields import Phase, QuasiPeriodicEnsemble
from wstarhom.ap_core import TrigPolynomial
from wstarhom.operators import EllipticOperator, pucci

SQ3 = math.sqrt(3.0)
PUCCI_1D = EllipticOperator.pucci("plus", 1, 1.0, 2.0)


def test_auto_length():
    assert auto_length(3.0, 1e-2, 1e-8) == pytest.approx(math.sqrt(300) * math.log(1e8))
    assert auto_length(1.0, 1.0, 0.9) == 1.0


@pytest.mark.parametrize("m", [-2.0, 0.5, 3.0])
def test_y_independent_identity(m):
    run = solve_delta_corrector(PUCCI_1D, None, [m], 1e-2)
    # the constant F(M)/delta solves the equation away from the boundary
    assert abs(run.scaled_center - pucci("plus", 1, 2, [m])) < 1e-6
    assert run.grid.node_index(0.0) == ((run.v_values.size - 1) // 2,)


def test_corrector_approaches_harmonic_mean(sin_operator, phase0):
    run = solve_delta_corrector(sin_operator, phase0, [1.0], 1e-2, h=1e-2)
    assert abs(run.scaled_center - SQ3) < 0.05 * SQ3
    assert run.boundary_influence <= 10 * 1e-8


def test_raw_values_contract(sin_operator, phase0):
    est = estimate_effective(sin_operator, phase0, [1.0], (8e-2, 4e-2, 2e-2, 1e-2), h=1e-2)
    gaps = np.abs(np.diff(est.raw))
    assert np.all(np.diff(gaps) < 0)
    assert abs(est.value - oracles.HARMONIC_MEAN_2_SIN) < 0.02 * SQ3


def test_truncation_warning(sin_operator, phase0):
    with pytest.warns(TruncationWarning):
        solve_delta_corrector(sin_operator, phase0, [1.0], 1e-2, L=3.0, h=1e-2)


def test_corrector_argument_checks(sin_operator, phase0):
    with pytest.raises(ValidationError):
        solve_delta_corrector(sin_operator, phase0, [1.0], 0.0)
    with pytest.raises(ValidationError):
        solve_delta_corrector(sin_operator, phase0, [1.0], 1e-2, L=0.5)
    with pytest.raises(ValidationError):
        estimate_effective(sin_operator, phase0, [1.0], (1e-2, 2e-2, 4e-2))
    with pytest.raises(ValidationError):
        estimate_effective(sin_operator, phase0, [1.0], (2e-2, 1e-2))


@pytest.mark.parametrize("M", [[[1.0, 0.5], [0.5, -1.0]], [[-2.0, 0.0], [0.0, 3.0]],
                               [[0.3, -1.2], [-1.2, 0.4]]])
def test_frozen_coefficient_2d(M):
    op = EllipticOperator.pucci("minus", 2, 1.0, 2.0)
    est = estimate_effective(op, None, M, h=lambda L: L / 10)
    assert abs(est.value - pucci("minus", 1, 2, M)) < 1e-6


def test_zero_matrix_gives_zero(sin_operator, phase0):
    est = estimate_effective(sin_operator, phase0, [0.0], h=1e-2)
    assert est.value == 0.0 and all(v == 0.0 for v in est.raw)


@pytest.mark.parametrize("t", [2.0, 10.0])
def test_linear_homogeneity(sin_operator, phase0, t):
    a = estimate_effective(sin_operator, phase0, [1.5], h=1e-2)
    b = estimate_effective(sin_operator, phase0, [1.5 * t], h=1e-2)
    assert abs(b.value - t * a.value) <= 2 * max(b.residual, t * a.residual)


@pytest.mark.parametrize("m", [-2.0, 0.5, 3.0])
def test_null_invariance(sin_ensemble, sin_operator, phase0, m):
    base = estimate_effective(sin_operator, phase0, [m], h=1e-2)
    bumped = sin_operator.with_ensemble(
        sin_ensemble.with_null({"a": NullFunction.gaussian_bumps([0.5], [3.0], [1.0])}))
    est = estimate_effective(bumped, phase0, [m], h=1e-2)
    assert abs(est.value - base.value) < est.residual + est.truncation


# -- extrapolation -------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 3.0))
def test_extrapolation_recovers_power_law(x0, C, p):
    assume(abs(C) > 1e-2)
    ds = np.array(DEFAULT_DELTAS)
    xs = x0 + C * ds ** p
    assume(abs(xs[1] - xs[2]) > 1e-6)
    limit, res, order = extrapolate_limit(ds, xs, tol=1e-12)
    assert abs(limit - x0) < 1e-8 * (1 + abs(x0) + abs(C))
    assert abs(order - p) < 1e-6


def test_extrapolation_rejects_slow_contraction():
    with pytest.raises(NonConvergent):
        extrapolate_limit([0.04, 0.02, 0.01], [1.0, 2.0, 3.5])
    with pytest.raises(NonConvergent):
        extrapolate_limit([0.04, 0.02, 0.01], [1.0, 1.1, 1.19])


def test_extrapolation_noise_floor():
    xs = [2.0, 2.0 + 3e-9, 2.0 - 2e-9]
    limit, res, order = extrapolate_limit([0.04, 0.02, 0.01], xs, tol=1e-8)
    assert limit == xs[-1] and res == pytest.approx(2e-7) and math.isnan(order)
    limit, res, _ = extrapolate_limit([0.04, 0.02, 0.01], xs, tol=1e-12, noise=1e-6)
    assert res == 1e-6


# -- shift covariance and phase independence ---------------------------------

def test_shift_zero(sin_operator, phase0):
    gap = shift_covariance_check(sin_operator, phase0, [1.0], 1e-2, 0.0, L=40.0)
    assert gap <= 1e-8


def test_shift_quasi_periodic():
    prof = TrigPolynomial(2, [((1, 0), 0.0, 0.6), ((0, 1), 0.3, 0.0)], 2.0)
    ens = QuasiPeriodicEnsemble([[1.0], [math.sqrt(2)]], prof)
    op = EllipticOperator.linear("a", 1.0, 3.0, ensemble=ens)
    om = Phase([0.2, 1.1])
    gap = shift_covariance_check(op, om, [1.0], 2e-2, 1.0, L=40.0, h=0.02)
    assert gap <= 1e-7
    with pytest.raises(ValidationError):
        shift_covariance_check(op, om, [1.0], 2e-2, 20.0, L=40.0)


def test_omega_independence_y_independent():
    assert omega_independence_check(PUCCI_1D, [1.5], n_phases=3) <= 1e-6


def test_omega_independence_with_null(sin_ensemble):
    bumped = QuasiPeriodicEnsemble([1.0], sin_ensemble.profiles,
                                   {"a": NullFunction.gaussian_bumps([0.5], [0.0], [1.0])})
    op = EllipticOperator.linear("a", 1, 3, ensemble=bumped)
    spread = omega_independence_check(op, [1.0], n_phases=3, seed=11, h=1e-2)
    assert spread < 0.01 * SQ3


# -- tables ------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_table():
    ens = QuasiPeriodicEnsemble([1.0], TrigPolynomial(1, [((1,), 0.0, 1.0)], 2.0))
    op = EllipticOperator.linear("a", 1, 3, ensemble=ens)
    return EffectiveTable.build(op, [np.linspace(-2, 2, 5)], Phase([0.0]), h=1e-2)


def test_table_values(small_table):
    for e in small_table.entries:
        assert abs(e.value - SQ3 * e.M[0]) < 0.02 * SQ3 * max(1.0, abs(e.M[0]))
        assert e.delta_min == min(DEFAULT_DELTAS)
    assert small_table(0.5) == pytest.approx(0.5 * (small_table(0.0) + small_table(1.0)))
    with pytest.raises(TableRangeExceeded):
        small_table.interpolate([2.5])


def test_table_round_trip(small_table, tmp_path):
    path = tmp_path / "t.csv"
    small_table.save(path)
    back = EffectiveTable.load(path)
    assert len(back) == len(small_table)
    np.testing.assert_array_equal(back.axes[0], small_table.axes[0])
    for a, b in zip(back.entries, small_table.entries):
        assert a == b
    back.save(tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_bytes() == path.read_bytes()
    with pytest.raises(TableRangeExceeded):
        back.lookup([0.3])


def test_table_2d_on_demand():
    est = make_estimator(EllipticOperator.pucci("plus", 2, 1.0, 2.0), None,
                         h=lambda L: L / 10)
    t = EffectiveTable(2, axes=[[-1, 1], [-1, 1], [-1, 1]], estimator=est)
    M = [[0.4, -0.2], [-0.2, 0.1]]
    v, r = t.evaluate(M)
    assert len(t) == 8
    assert r >= 0
    # pucci is convex, so interpolation over the cell overestimates it
    assert v >= pucci("plus", 1, 2, M) - 1e-6
    assert t.lookup(M)[0] == pytest.approx(pucci("plus", 1, 2, M), abs=1e-6)


def test_effective_ellipticity(small_table):
    lo, up = effective_ellipticity_check(small_table, 1.0, 3.0, n_samples=300, seed=1)
    res = small_table.max_residual
    assert lo >= -3 * res and up >= -3 * res
    with pytest.raises(EllipticityViolation):
        effective_ellipticity_check(small_table, 2.0, 3.0, n_samples=300, seed=1)
    est = make_estimator(PUCCI_1D)
    lo, up = effective_ellipticity_check(est, 1.0, 2.0, n_samples=20, seed=2)
    assert lo >= -1e-6 and up >= -1e-6
