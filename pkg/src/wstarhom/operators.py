"""Uniformly elliptic operators F(omega, y, M) and their structure audits.

Supported forms are linear non-divergence operators ``tr(a(omega, y) M) - f``,
the Pucci extremal operators and concave Bellman minima of finitely many
linear branches. Coefficients are constants or channels of a
:class:`~wstarhom.fields.QuasiPeriodicEnsemble`.

Every operator also exposes a *local rule* for the solver: given the
normalised directional second differences ``D_v`` at a set of nodes it
returns the scheme value and the nonnegative stencil weights
``dS/dD_v``. In two dimensions the stencil is (1,0), (0,1), (1,1), (1,-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    EllipticityViolation,
    ModulusViolation,
    NonMonotoneDecomposition,
    ValidationError,
)

__all__ = [
    "Modulus",
    "Branch",
    "EllipticOperator",
    "as_sym",
    "sym_eigvals",
    "matrix_norm",
    "pucci",
    "eval_operator",
    "ellipticity_audit",
    "modulus_audit",
    "PUCCI_RATIO_LIMIT",
]

# largest Lambda/lambda for which every matrix with spectrum in [lambda, Lambda]
# has a nonnegative decomposition on the four-direction stencil
PUCCI_RATIO_LIMIT = 3.0 + 2.0 * math.sqrt(2.0)


def as_sym(M, dim):
    """Symmetric (..., d, d) array from a scalar, upper triangle or full matrix.

    For ``d = 2`` a length-3 sequence is read as ``(m11, m12, m22)``.
    """
    M = np.asarray(M, dtype=float)
    if dim == 1:
        if M.shape == (1,):
            return M.reshape(1, 1)
        if M.shape[-2:] == (1, 1):
            return M
        return M.reshape(M.shape + (1, 1)) if M.ndim == 0 else M[..., None, None]
    if M.shape[-2:] == (dim, dim):
        if not np.allclose(M, np.swapaxes(M, -1, -2), rtol=0, atol=1e-14 * (1 + np.abs(M).max())):
            raise ValidationError("matrix is not symmetric")
        return 0.5 * (M + np.swapaxes(M, -1, -2))
    if dim == 2 and M.shape[-1:] == (3,):
        out = np.empty(M.shape[:-1] + (2, 2))
        out[..., 0, 0] = M[..., 0]
        out[..., 0, 1] = out[..., 1, 0] = M[..., 1]
        out[..., 1, 1] = M[..., 2]
        return out
    raise ValidationError(f"cannot read a symmetric {dim}x{dim} matrix from shape {M.shape}")


def sym_eigvals(M):
    """Eigenvalues (descending) of a stack of symmetric matrices.

    Closed form for d <= 2, LAPACK otherwise.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[-1]
    if d == 1:
        return M[..., 0, :]
    if d == 2:
        a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
        mid = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return np.stack([mid + rad, mid - rad], axis=-1)
    return np.linalg.eigvalsh(M)[..., ::-1]


def matrix_norm(M, kind="trace"):
    """Trace (nuclear), spectral or Frobenius norm of symmetric matrices."""
    e = sym_eigvals(M)
    if kind == "trace":
        return np.abs(e).sum(axis=-1)
    if kind == "spectral":
        return np.abs(e).max(axis=-1)
    if kind == "frobenius":
        return np.sqrt((e ** 2).sum(axis=-1))
    raise ValidationError(f"unknown norm {kind!r}")


def _sym_dim(M):
    M = np.asarray(M)
    if M.ndim == 0 or M.shape == (1,):
        return 1
    if M.ndim >= 2 and M.shape[-1] == M.shape[-2]:
        return M.shape[-1]
    if M.shape[-1] == 3:
        return 2
    raise ValidationError(f"cannot infer the dimension of a matrix of shape {M.shape}; pass dim")


def pucci(kind, lam, Lam, M, dim=None):
    """Pucci extremal operator.

    ``plus``: ``Lam * sum(e+) - lam * sum(e-)``; ``minus``:
    ``lam * sum(e+) - Lam * sum(e-)`` over the eigenvalues ``e`` of ``M``.
    A single matrix gives a float; stacks give arrays.
    """
    if lam > Lam or lam <= 0:
        raise ValidationError("need 0 < lam <= Lam")
    dim = _sym_dim(M) if dim is None else int(dim)
    S = as_sym(M, dim)
    e = sym_eigvals(S)
    pos = np.maximum(e, 0).sum(axis=-1)
    neg = np.minimum(e, 0).sum(axis=-1)
    if kind == "plus":
        out = Lam * pos + lam * neg
    elif kind == "minus":
        out = lam * pos + Lam * neg
    else:
        raise ValidationError(f"unknown Pucci kind {kind!r}")
    return float(out) if S.ndim == 2 else out


@dataclass(frozen=True)
class Modulus:
    """Modulus of continuity ``rho`` with exponent ``gamma``.

    ``kind="linear"``: ``rho(s) = scale * s``; ``kind="power"``:
    ``rho(s) = scale * s**exponent``.
    """

    kind: str = "linear"
    scale: float = 1.0
    exponent: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "power"):
            raise ValidationError(f"unknown modulus kind {self.kind!r}")
        if not self.gamma > 0.5:
            raise ValidationError("modulus exponent gamma must exceed 1/2")
        if not (self.scale > 0 and self.exponent > 0):
            raise ValidationError("modulus scale and exponent must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return self.scale * s
        return self.scale * s ** self.exponent


@dataclass(frozen=True)
class Branch:
    """A linear branch ``tr(a M) - f``.

    ``coefficient`` is a number (``a = c I``), a channel name (``a = a(y) I``),
    a constant d x d matrix, or for ``d = 2`` a triple ``(a11, a12, a22)``
    whose entries are numbers or channel names. ``forcing`` is a number or a
    channel name.
    """

    coefficient: object = 1.0
    forcing: object = 0.0


def _channels_of(obj):
    if isinstance(obj, str):
        return {obj}
    if isinstance(obj, (tuple, list)) and obj and any(isinstance(v, str) for v in obj):
        return {v for v in obj if isinstance(v, str)}
    return set()


class EllipticOperator:
    """Evaluator for ``F(omega, y, M)``.

    Build instances with :meth:`linear`, :meth:`pucci` or
    :meth:`bellman_min`.

    Attributes
    ----------
    form : str
        ``linear_nondiv``, ``pucci_plus``, ``pucci_minus`` or ``bellman_min``.
    dim : int
    lambda_min, lambda_max : float
        Declared ellipticity constants.
    branches : tuple of Branch
    ensemble : QuasiPeriodicEnsemble or None
    modulus : Modulus
    """

    FORMS = ("linear_nondiv", "pucci_plus", "pucci_minus", "bellman_min")

    def __init__(self, form, dim, lambda_min, lambda_max, branches=(), ensemble=None,
                 modulus=None):
        if form not in self.FORMS:
            raise ValidationError(f"unknown operator form {form!r}")
        if int(dim) not in (1, 2):
            raise ValidationError("only d = 1 and d = 2 are supported")
        lam, Lam = float(lambda_min), float(lambda_max)
        if not (0 < lam <= Lam):
            raise ValidationError("need 0 < lambda_min <= lambda_max")
        self.form = form
        self.dim = int(dim)
        self.lambda_min = lam
        self.lambda_max = Lam
        self.branches = tuple(branches)
        self.ensemble = ensemble
        self.modulus = modulus if modulus is not None else Modulus()
        if form in ("linear_nondiv", "bellman_min") and not self.branches:
            raise ValidationError(f"{form} needs at least one branch")
        if form == "linear_nondiv" and len(self.branches) != 1:
            raise ValidationError("linear_nondiv takes exactly one branch")
        needed = set()
        for br in self.branches:
            needed |= _channels_of(br.coefficient) | _channels_of(br.forcing)
            if isinstance(br.coefficient, (tuple, list)) and self.dim != 2:
                raise ValidationError("entry-wise coefficients need d = 2")
        if needed:
            if ensemble is None:
                raise ValidationError("channel coefficients need an ensemble")
            missing = needed - set(ensemble.channels)
            if missing:
                raise ValidationError(f"ensemble lacks channels {sorted(missing)}")
            if ensemble.dim != self.dim:
                raise ValidationError("ensemble dimension does not match the operator")
        self._channels = needed

    # -- constructors --------------------------------------------------
    @classmethod
    def linear(cls, coefficient, lambda_min, lambda_max, ensemble=None, dim=None,
               forcing=0.0, modulus=None):
        dim = dim or (ensemble.dim if ensemble is not None else 1)
        return cls("linear_nondiv", dim, lambda_min, lambda_max,
                   (Branch(coefficient, forcing),), ensemble, modulus)

    @classmethod
    def pucci(cls, kind, dim, lambda_min, lambda_max):
        return cls(f"pucci_{kind}", dim, lambda_min, lambda_max)

    @classmethod
    def bellman_min(cls, branches, lambda_min, lambda_max, ensemble=None, dim=None,
                    modulus=None):
        branches = tuple(b if isinstance(b, Branch) else Branch(*b) for b in branches)
        dim = dim or (ensemble.dim if ensemble is not None else 1)
        return cls("bellman_min", dim, lambda_min, lambda_max, branches, ensemble, modulus)

    def with_ensemble(self, ensemble):
        """Same operator over another ensemble (e.g. with a null part attached)."""
        return EllipticOperator(self.form, self.dim, self.lambda_min, self.lambda_max,
                                self.branches, ensemble, self.modulus)

    # -- properties ----------------------------------------------------
    @property
    def is_linear(self):
        return self.form == "linear_nondiv"

    @property
    def y_independent(self):
        return not self._channels

    def __repr__(self):
        return (f"EllipticOperator({self.form!r}, dim={self.dim}, "
                f"lambda=({self.lambda_min:g}, {self.lambda_max:g}), branches={len(self.branches)})")

    # -- coefficients --------------------------------------------------
    def _field(self, value, omega, ys, cache):
        if isinstance(value, str):
            if value not in cache:
                if omega is None:
                    raise ValidationError("a phase is required for channel coefficients")
                cache[value] = self.ensemble.realization(omega, value)(
                    ys[:, 0] if self.dim == 1 else ys)
            return cache[value]
        return np.full(ys.shape[0], float(value))

    def branch_arrays(self, omega, ys):
        """Per-branch coefficient matrices (N, d, d) and forcing (N,)."""
        ys = _pts(ys, self.dim)
        N = ys.shape[0]
        cache = {}
        out = []
        for br in self.branches:
            c = br.coefficient
            A = np.zeros((N, self.dim, self.dim))
            if isinstance(c, (tuple, list)):
                a11, a12, a22 = (self._field(v, omega, ys, cache) for v in c)
                A[:, 0, 0], A[:, 0, 1], A[:, 1, 0], A[:, 1, 1] = a11, a12, a12, a22
            elif isinstance(c, str) or np.ndim(c) == 0:
                A[:] = self._field(c, omega, ys, cache)[:, None, None] * np.eye(self.dim)
            else:
                A[:] = as_sym(c, self.dim)
            out.append((A, self._field(br.forcing, omega, ys, cache)))
        return out

    # -- evaluation ----------------------------------------------------
    def eval(self, omega, y, M):
        """``F(omega, y, M)``; points and matrices broadcast along one axis.

        A single point with a single matrix gives a float.
        """
        d = self.dim
        S = as_sym(M, d)
        single = np.ndim(y) <= (0 if d == 1 else 1) and S.ndim == 2
        ys = _pts(y, d)
        Ms = S.reshape(-1, d, d)
        n = max(ys.shape[0], Ms.shape[0])
        if ys.shape[0] != n:
            if ys.shape[0] != 1:
                raise ValidationError("points and matrices do not broadcast")
            ys = np.repeat(ys, n, axis=0)
        if Ms.shape[0] != n:
            if Ms.shape[0] != 1:
                raise ValidationError("points and matrices do not broadcast")
            Ms = np.repeat(Ms, n, axis=0)
        if self.form in ("pucci_plus", "pucci_minus"):
            out = pucci(self.form[6:], self.lambda_min, self.lambda_max, Ms, d)
        else:
            vals = [np.einsum("nij,nji->n", A, Ms) - f for A, f in self.branch_arrays(omega, ys)]
            out = np.min(vals, axis=0)
        return float(out[0]) if single else out

    def local_rule(self, omega, ys):
        """Monotone scheme rule at nodes with coordinates ``ys`` (already scaled)."""
        return LocalRule(self, omega, _pts(ys, self.dim))


def _pts(y, dim):
    y = np.asarray(y, dtype=float)
    if dim == 1:
        return y.reshape(-1, 1)
    return y.reshape(-1, dim)


def _decompose(A):
    """Nonnegative four-direction weights for a stack of 2x2 matrices."""
    a11, a12, a22 = A[:, 0, 0], A[:, 0, 1], A[:, 1, 1]
    W = np.empty((4, A.shape[0]))
    W[0] = a11 - np.abs(a12)
    W[1] = a22 - np.abs(a12)
    W[2] = 2 * np.maximum(a12, 0)
    W[3] = 2 * np.maximum(-a12, 0)
    tol = 1e-12 * (1 + np.abs(A).max(initial=0))
    if np.any(W[:2] < -tol):
        i = int(np.argmin(np.minimum(W[0], W[1])))
        raise NonMonotoneDecomposition(
            f"coefficient matrix {A[i].tolist()} is not diagonally dominant; "
            "the four-direction stencil must be widened")
    return np.maximum(W, 0.0)


class LocalRule:
    """Scheme value and stencil weights at a fixed set of nodes.

    Call with ``D`` of shape (n_dir, N); returns ``(value, W)`` with
    ``value = S(D)`` and ``W = dS/dD >= 0`` (for piecewise linear rules the
    weights of the active piece).
    """

    def __init__(self, op, omega, ys):
        self.op = op
        self.dim = op.dim
        self.n = ys.shape[0]
        self.linear = op.is_linear
        self._pieces = None
        if op.form in ("linear_nondiv", "bellman_min"):
            pieces = []
            for A, f in op.branch_arrays(omega, ys):
                W = A[:, 0, 0][None, :].copy() if op.dim == 1 else _decompose(A)
                pieces.append((W, f))
            self._pieces = pieces
        elif op.dim == 2 and op.lambda_max > PUCCI_RATIO_LIMIT * op.lambda_min:
            raise NonMonotoneDecomposition(
                f"Lambda/lambda = {op.lambda_max / op.lambda_min:.4g} exceeds "
                f"{PUCCI_RATIO_LIMIT:.4g}; the four-direction stencil must be widened")

    def __call__(self, D):
        op = self.op
        if self._pieces is not None:
            if len(self._pieces) == 1:
                W, f = self._pieces[0]
                return np.einsum("vn,vn->n", W, D) - f, W
            vals = np.stack([np.einsum("vn,vn->n", W, D) - f for W, f in self._pieces])
            k = np.argmin(vals, axis=0)
            Ws = np.stack([W for W, _ in self._pieces])
            return vals[k, np.arange(D.shape[1])], Ws[k, :, np.arange(D.shape[1])].T
        lam, Lam = op.lambda_min, op.lambda_max
        sgn = 1.0 if op.form == "pucci_plus" else -1.0
        if self.dim == 1:
            Dp = sgn * D[0]
            w = np.where(Dp > 0, Lam, lam)
            return sgn * w * Dp, w[None, :]
        v, W = kernels.pucci_weights_2d(sgn * D, lam, Lam)
        return sgn * v, W


def eval_operator(op, omega, y, M):
    """Module-level form of :meth:`EllipticOperator.eval`."""
    return op.eval(omega, y, M)


eval = eval_operator  # noqa: A001  (public name used in the documentation)


def _samples(op, n, rng, y_box, M_scale):
    d = op.dim
    ys = rng.uniform(-y_box, y_box, (n, d))
    G = rng.normal(0.0, M_scale, (n, d, d))
    M = 0.5 * (G + np.swapaxes(G, 1, 2))
    ranks = rng.integers(1, d + 1, n)
    B = rng.normal(size=(n, d, d))
    B[np.arange(d)[None, :] >= ranks[:, None]] = 0.0
    N = np.einsum("nki,nkj->nij", B, B)
    return ys, M, N


def ellipticity_audit(op, omega=None, n_samples=10_000, seed=0, y_box=50.0, M_scale=3.0,
                      norm="trace", tol=1e-9):
    """Sampled uniform-ellipticity margins.

    Returns ``(min_lower, min_upper)`` with ``lower = F(M+N) - F(M) - lam |N|``
    and ``upper = Lam |N| - (F(M+N) - F(M))`` over random ``(y, M, N >= 0)``.

    Raises
    ------
    EllipticityViolation
        If either margin is below ``-tol``.
    """
    if int(n_samples) < 1:
        raise ValidationError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    ys, M, N = _samples(op, int(n_samples), rng, y_box, M_scale)
    diff = op.eval(omega, ys, M + N) - op.eval(omega, ys, M)
    nN = matrix_norm(N, norm)
    lower = float(np.min(diff - op.lambda_min * nN))
    upper = float(np.min(op.lambda_max * nN - diff))
    if lower < -tol or upper < -tol:
        raise EllipticityViolation(
            f"ellipticity margins ({lower:.3g}, {upper:.3g}) below -{tol:g}",
            margins=(lower, upper))
    return lower, upper


def modulus_audit(op, omega=None, n_samples=10_000, seed=0, y_box=50.0, norm="trace",
                  tol=1e-6):
    """Worst ratio ``|F(y,M) - F(z,M)| / rho((1 + |M|) |y - z|^gamma)``.

    Raises
    ------
    ModulusViolation
        If the worst ratio exceeds ``1 + tol``.
    """
    rng = np.random.default_rng(seed)
    n, d = int(n_samples), op.dim
    ys = rng.uniform(-y_box, y_box, (n, d))
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = 10.0 ** rng.uniform(-4, 0.7, n)
    zs = ys + r[:, None] * u
    G = rng.normal(size=(n, d, d)) * (10.0 ** rng.uniform(-2, 3, n))[:, None, None]
    M = 0.5 * (G + np.swapaxes(G, 1, 2))
    num = np.abs(op.eval(omega, ys, M) - op.eval(omega, zs, M))
    dist = np.linalg.norm(ys - zs, axis=1)
    den = op.modulus((1 + matrix_norm(M, norm)) * dist ** op.modulus.gamma)
    worst = float(np.max(num / den))
    if worst > 1 + tol:
        raise ModulusViolation(f"modulus exceeded: worst ratio {worst:.4g}", worst_ratio=worst)
    return worst
