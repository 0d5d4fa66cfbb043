import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from wstarhom.ap_core import NullFunction, TrigPolynomial, extract_ap_component
from wstarhom.errors import ErgodicityViolation, ValidationError
from wstarhom.fields import (
    Phase,
    QuasiPeriodicEnsemble,
    birkhoff_compare,
    ergodicity_residual,
    realization,
    sample_phase,
    shift,
)

SQ2 = math.sqrt(2.0)
TWO_PI = 2 * math.pi


@pytest.fixture
def torus2():
    prof = TrigPolynomial(2, [((1, 0), 1.0, 0.0), ((0, 1), 0.0, 0.5), ((1, -1), 0.3, 0.2)], 2.0)
    return QuasiPeriodicEnsemble([[1.0], [SQ2]], prof)


def test_phase_wraps():
    p = Phase([-0.5, 7.0, TWO_PI])
    assert np.all((p.angles >= 0) & (p.angles < TWO_PI))
    np.testing.assert_allclose(p.angles, [TWO_PI - 0.5, 7.0 - TWO_PI, 0.0])


def test_sample_phase_deterministic(torus2, sin_ensemble):
    assert sample_phase(torus2, 0) == sample_phase(torus2, 0)
    assert sample_phase(torus2, 0) != sample_phase(torus2, 1)
    assert sample_phase(torus2, 0, 0) != sample_phase(torus2, 0, 1)
    a = sample_phase(sin_ensemble, 3).angles
    assert a.shape == (1,) and 0 <= a[0] < TWO_PI


def test_sample_phase_uniform(torus2):
    A = np.array([sample_phase(torus2, 17, i).angles for i in range(10 ** 4)])
    for col in A.T:
        counts, _ = np.histogram(col, bins=20, range=(0, TWO_PI))
        assert chisquare(counts).pvalue > 0.01


def test_shift_examples(sin_ensemble):
    om = Phase([0.0])
    assert shift(sin_ensemble, om, [0.0]) == om
    assert abs(shift(sin_ensemble, om, [math.pi]).angles[0] - math.pi) < 1e-15
    with pytest.raises(ValidationError):
        shift(sin_ensemble, om, [1.0, 2.0])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, TWO_PI), st.floats(0, TWO_PI), st.floats(-50, 50), st.floats(-50, 50))
def test_shift_group_law(a1, a2, y, z):
    ens = QuasiPeriodicEnsemble([[1.0], [SQ2]], TrigPolynomial(2, [((1, 1), 1.0, 0.0)]))
    om = Phase([a1, a2])
    lhs = shift(ens, shift(ens, om, [y]), [z]).angles
    rhs = shift(ens, om, [y + z]).angles
    d = np.abs(lhs - rhs)
    assert np.all(np.minimum(d, TWO_PI - d) < 1e-9)


def test_realization_example(sin_ensemble):
    f = realization(sin_ensemble, Phase([0.0]))
    y = np.linspace(-10, 10, 101)
    np.testing.assert_allclose(f(y), 2 + np.sin(y), atol=1e-14)


def test_stationarity(torus2):
    rng = np.random.default_rng(4)
    for i in range(20):
        om = sample_phase(torus2, 4, i)
        y0 = rng.uniform(-100, 100)
        y = rng.uniform(-100, 100, 30)
        lhs = realization(torus2, shift(torus2, om, [y0]))(y)
        rhs = realization(torus2, om)(y + y0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_measure_invariance(torus2):
    prof = torus2.profiles["a"]
    q = 16
    ax = (np.arange(q) + 0.5) * TWO_PI / q
    T = np.column_stack([g.ravel() for g in np.meshgrid(ax, ax, indexing="ij")])
    base = prof(T).mean()
    for y in (0.3, 17.0, -250.5):
        moved = prof(T + torus2.freq_matrix @ np.array([y])).mean()
        assert abs(moved - base) < 1e-10


def test_null_realization_recovered(sin_ensemble):
    bump = NullFunction.gaussian_bumps([1.0], [0.5], [0.7])
    ens = sin_ensemble.with_null({"a": bump})
    om = sample_phase(ens, 1)
    f = realization(ens, om)
    grid = np.linspace(-20, 20, 2001)
    ap = extract_ap_component(lambda y: f(y), [1.0], sup_grid=grid, dim=1)
    want = realization(ens, om, include_null=False)(grid)
    assert np.max(np.abs(ap(grid) - want)) < 1e-2
    assert np.max(np.abs(f(grid) - want - bump(grid))) < 1e-14


def test_certificate_rejects_resonance():
    prof = TrigPolynomial(2, [((1, -1), 1.0, 0.0)])
    with pytest.raises(ErgodicityViolation):
        QuasiPeriodicEnsemble([[1.0], [1.0]], prof)
    ens = QuasiPeriodicEnsemble([[1.0], [1.0]], prof, certify=False)
    assert ens.resonance == (1, -1)
    with pytest.raises(ErgodicityViolation):
        birkhoff_compare(ens)


def test_profile_checks():
    with pytest.raises(ValidationError):
        QuasiPeriodicEnsemble([1.0], TrigPolynomial(1, [((0.5,), 1.0, 0.0)]))
    with pytest.raises(ValidationError):
        QuasiPeriodicEnsemble([[1.0], [SQ2]], TrigPolynomial(1, [((1,), 1.0, 0.0)]))


def test_birkhoff_examples(sin_ensemble):
    ens = QuasiPeriodicEnsemble([1.0], TrigPolynomial(1, [((1,), 0.0, 1.0)]))
    r = birkhoff_compare(ens, n_phases=3, R=1e3)
    assert abs(r.ensemble_mean) < 1e-15 and r.max_gap < 1e-2
    prod = TrigPolynomial(2, [((1, 1), 0.5, 0.0), ((1, -1), 0.5, 0.0)])
    ens2 = QuasiPeriodicEnsemble([[1.0], [SQ2]], prod)
    r2 = birkhoff_compare(ens2, n_phases=5, R=1e3)
    assert abs(r2.ensemble_mean) < 1e-15 and r2.max_gap < 1e-2
    assert len(r2.spatial_means) == 5


def test_birkhoff_gap_shrinks(torus2):
    gaps = [birkhoff_compare(torus2, n_phases=4, R=R, seed=2, tol=1.0).max_gap
            for R in (1e1, 1e2, 1e3)]
    assert gaps[2] < gaps[0]
    assert gaps[2] < 1e-2


def test_ergodicity_residual_constant(sin_ensemble):
    assert ergodicity_residual(sin_ensemble, TrigPolynomial(1, (), 3.0), [10, 100]) == 0.0


def test_ergodicity_residual_closed_form():
    ens = QuasiPeriodicEnsemble([1.0], TrigPolynomial(1, [((1,), 1.0, 0.0)]))
    f = ens.profiles["a"]
    res, hist = ergodicity_residual(ens, f, [10.0, 100.0], full_output=True)
    # the ball average of cos(x + y) over [-t, t] is cos(y) sin(t) / t
    for t, r in zip((10.0, 100.0), hist):
        assert abs(r - 0.5 * (math.sin(t) / t) ** 2) < 1e-5
    assert res <= (2 / 100) ** 2


def test_ergodicity_residual_resonant():
    prof = TrigPolynomial(2, [((1, -1), 0.8, 0.0)])
    ens = QuasiPeriodicEnsemble([[1.0], [1.0]], prof, certify=False)
    assert abs(ergodicity_residual(ens, prof, [10.0, 100.0]) - 0.8 ** 2 / 2) < 1e-10
    om = Phase([0.3, 1.0])
    r = ergodicity_residual(ens, prof, [50.0], omega=om)
    assert abs(r - (0.8 * math.cos(-0.7)) ** 2) < 1e-10


def test_ergodicity_residual_2d():
    ens = QuasiPeriodicEnsemble([[1.0, 0.0], [0.0, SQ2]],
                                TrigPolynomial(2, [((1, 0), 1.0, 0.0), ((0, 1), 0.0, 1.0)]))
    _, hist = ergodicity_residual(ens, ens.profiles["a"], [2.0, 8.0], full_output=True)
    assert hist[1] < hist[0] < 0.5
