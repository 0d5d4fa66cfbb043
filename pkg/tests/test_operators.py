import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wstarhom.ap_core import TrigPolynomial
from wstarhom.errors import (
    EllipticityViolation,
    ModulusViolation,
    NonMonotoneDecomposition,
    ValidationError,
)
from wstarhom.fields import Phase, QuasiPeriodicEnsemble, sample_phase, shift
from wstarhom.operators import (
    PUCCI_RATIO_LIMIT,
    EllipticOperator,
    Modulus,
    _decompose,
    as_sym,
    ellipticity_audit,
    eval_operator,
    matrix_norm,
    modulus_audit,
    pucci,
    sym_eigvals,
)
from wstarhom.solver import directions


def random_sym(rng, n, d, scale=3.0):
    G = rng.normal(0, scale, (n, d, d))
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def random_psd(rng, n, d):
    B = rng.normal(size=(n, d, d))
    return np.einsum("nki,nkj->nij", B, B)


def test_pucci_examples():
    assert pucci("plus", 1, 2, np.zeros((2, 2))) == 0
    assert pucci("plus", 1, 2, [-3.0]) == -3.0
    assert pucci("minus", 1, 2, [-3.0]) == -6.0
    assert pucci("plus", 1, 2, np.diag([1.0, -1.0])) == 1.0
    assert pucci("minus", 1, 2, np.diag([1.0, -1.0])) == -1.0


def test_pucci_against_eigensolver(rng):
    M = random_sym(rng, 500, 2)
    e = np.linalg.eigvalsh(M)
    want = 2.5 * np.clip(e, 0, None).sum(1) + 0.5 * np.clip(e, None, 0).sum(1)
    np.testing.assert_allclose(pucci("plus", 0.5, 2.5, M), want, atol=1e-12)
    np.testing.assert_allclose(sym_eigvals(M)[:, ::-1], e, atol=1e-12)


def test_pucci_monotone(rng):
    for d in (1, 2):
        M = random_sym(rng, 10 ** 4, d)
        Mp = M + random_psd(rng, 10 ** 4, d)
        for kind in ("plus", "minus"):
            assert np.all(pucci(kind, 1, 3, M) <= pucci(kind, 1, 3, Mp) + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(1e-3, 1e3),
       st.sampled_from(["plus", "minus"]))
def test_pucci_homogeneous(m, t, kind):
    M = np.array([[m[0], m[1]], [m[1], m[2]]])
    a = pucci(kind, 1.0, 2.0, t * M)
    b = t * pucci(kind, 1.0, 2.0, M)
    assert abs(a - b) <= 1e-12 * (1 + abs(b))


def test_as_sym_forms():
    np.testing.assert_array_equal(as_sym((1, 2, 3), 2), [[1, 2], [2, 3]])
    assert as_sym(2.0, 1).shape == (1, 1)
    with pytest.raises(ValidationError):
        as_sym([[1, 2], [0, 1]], 2)
    assert matrix_norm(np.diag([1.0, -2.0]), "trace") == 3.0
    assert matrix_norm(np.diag([1.0, -2.0]), "spectral") == 2.0


def test_eval_examples(sin_operator):
    ident = EllipticOperator.linear(1.0, 1, 1, dim=2)
    M = np.array([[1.5, 0.3], [0.3, -4.0]])
    assert ident.eval(None, [0.2, 0.1], M) == pytest.approx(-2.5, abs=1e-15)
    assert sin_operator.eval(Phase([0.0]), math.pi / 2, [1.0]) == pytest.approx(3.0, abs=1e-15)
    bell = EllipticOperator.bellman_min([(1.0, 0.0), (2.0, 0.0)], 1, 2)
    assert bell.eval(None, 0.0, [-1.0]) == -2.0
    assert bell.eval(None, 0.0, [1.0]) == 1.0
    assert eval_operator(bell, None, 0.0, [-1.0]) == -2.0


def test_eval_broadcasts(sin_operator):
    ys = np.linspace(0, 5, 7)
    out = sin_operator.eval(Phase([0.0]), ys, [2.0])
    np.testing.assert_allclose(out, 2 * (2 + np.sin(ys)))
    with pytest.raises(ValidationError):
        sin_operator.eval(Phase([0.0]), ys, np.ones((3, 1, 1)))


def test_eval_stationary():
    ens = QuasiPeriodicEnsemble([[1.0, 0.0], [0.0, math.sqrt(2)]],
                                {"a": TrigPolynomial(2, [((1, 0), 0.0, 0.5)], 2.0),
                                 "c": TrigPolynomial(2, [((1, 1), 0.3, 0.1)], 0.0)})
    op = EllipticOperator.linear(("a", "c", "a"), 1.0, 3.0, ensemble=ens)
    rng = np.random.default_rng(5)
    for i in range(20):
        om = sample_phase(ens, 5, i)
        y0 = rng.uniform(-30, 30, 2)
        y = rng.uniform(-30, 30, 2)
        M = random_sym(rng, 1, 2)[0]
        a = op.eval(shift(ens, om, y0), y, M)
        b = op.eval(om, y + y0, M)
        assert abs(a - b) < 1e-12


def test_constructor_checks(sin_ensemble):
    with pytest.raises(ValidationError):
        EllipticOperator.linear("a", 2, 1, ensemble=sin_ensemble)
    with pytest.raises(ValidationError):
        EllipticOperator.linear("b", 1, 3, ensemble=sin_ensemble)
    with pytest.raises(ValidationError):
        EllipticOperator.linear("a", 1, 3)
    with pytest.raises(ValidationError):
        EllipticOperator.pucci("plus", 3, 1, 2)
    with pytest.raises(ValidationError):
        Modulus(gamma=0.5)


def test_audit_pucci_and_linear(sin_operator):
    for kind in ("plus", "minus"):
        lo, up = ellipticity_audit(EllipticOperator.pucci(kind, 2, 1.0, 2.0))
        assert lo >= -1e-9 and up >= -1e-9
    lo, up = ellipticity_audit(sin_operator, Phase([0.3]), n_samples=2000)
    assert lo >= 0 and up >= 0


def test_audit_linear_2d_trace_inequality():
    ens = QuasiPeriodicEnsemble([1.0], TrigPolynomial(1, [((1,), 0.0, 0.5)], 1.5))
    op = EllipticOperator.linear("a", 1.0, 2.0, ensemble=ens, dim=1)
    assert min(ellipticity_audit(op, Phase([0.0]))) >= 0


def test_audit_flags_overstated_lambda():
    op = EllipticOperator.linear(1.0, 3.0, 3.0, dim=2)
    with pytest.raises(EllipticityViolation) as info:
        ellipticity_audit(op)
    assert info.value.margins[0] < -1e-9


def test_modulus_audit(sin_operator):
    assert modulus_audit(EllipticOperator.pucci("plus", 2, 1, 2)) == 0.0
    assert modulus_audit(sin_operator, Phase([0.0])) <= 1.0
    half = EllipticOperator.linear("a", 1, 3, ensemble=sin_operator.ensemble,
                                   modulus=Modulus(scale=0.5))
    with pytest.raises(ModulusViolation):
        modulus_audit(half, Phase([0.0]))


@settings(max_examples=80, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(-1, 1))
def test_decomposition_reconstructs(a11, a22, r):
    a12 = r * min(a11, a22)
    A = np.array([[[a11, a12], [a12, a22]]])
    W = _decompose(A)
    assert np.all(W >= 0)
    V = np.array(directions(2), dtype=float)
    rebuilt = np.einsum("v,vi,vj->ij", W[:, 0] / (V ** 2).sum(1), V, V)
    np.testing.assert_allclose(rebuilt, A[0], atol=1e-12)


def test_decomposition_rejects_non_dominant():
    op = EllipticOperator.linear((1.0, 1.2, 2.0), 0.1, 3.0, dim=2)
    with pytest.raises(NonMonotoneDecomposition):
        op.local_rule(None, np.zeros((3, 2)))
    wide = EllipticOperator.pucci("plus", 2, 1.0, PUCCI_RATIO_LIMIT * 1.01)
    with pytest.raises(NonMonotoneDecomposition):
        wide.local_rule(None, np.zeros((3, 2)))
    EllipticOperator.pucci("plus", 2, 1.0, PUCCI_RATIO_LIMIT).local_rule(None, np.zeros((3, 2)))


def test_local_rule_weights_nonnegative(rng):
    op = EllipticOperator.pucci("minus", 2, 1.0, 4.0)
    rule = op.local_rule(None, np.zeros((400, 2)))
    D = rng.normal(size=(4, 400))
    val, W = rule(D)
    assert np.all(W >= 0)
    np.testing.assert_allclose(np.einsum("vn,vn->n", W, D), val, atol=1e-12)
