"""Damped correctors and the effective operator.

For a fixed matrix ``M`` the damped corrector ``v`` solves

    delta v - F(omega, y, M + D^2 v) = 0   in [-L, L]^d,   v = 0 on the boundary,

with the monotone scheme of :mod:`wstarhom.solver` (``delta`` sits on the
diagonal). ``delta v`` tends to a constant as ``delta -> 0``; that constant is
the effective operator ``Fbar(M)``. The damping localises the influence of the
artificial boundary to the length ``sqrt(Lambda / delta)``, which sets the
default box size.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import brentq

from .errors import (
    EllipticityViolation,
    NonConvergent,
    TableRangeExceeded,
    TruncationWarning,
    ValidationError,
)
from .fields import sample_phase, shift
from .operators import as_sym, matrix_norm
from .solver import Grid, solve_dirichlet

__all__ = [
    "CorrectorRun",
    "EffectiveEstimate",
    "TableEntry",
    "EffectiveTable",
    "DEFAULT_DELTAS",
    "auto_length",
    "solve_delta_corrector",
    "extrapolate_limit",
    "estimate_effective",
    "make_estimator",
    "shift_covariance_check",
    "omega_independence_check",
    "effective_ellipticity_check",
]

DEFAULT_DELTAS = (4e-2, 2e-2, 1e-2)
_MIN_RATIO = 1.2


def auto_length(lambda_max, delta, tol):
    """``sqrt(Lambda / delta) * ln(1 / tol)``, at least 1."""
    return max(1.0, float(np.sqrt(lambda_max / delta) * np.log(1.0 / tol)))


@dataclass(frozen=True, eq=False)
class CorrectorRun:
    """One damped corrector solve.

    Attributes
    ----------
    M : ndarray
        The (d, d) matrix.
    delta, L, h : float
    v_values : ndarray
        Nodal values on ``[-L, L]^d`` (shifted by ``center``).
    center_value : float
        ``v`` at the central node; ``delta * center_value`` estimates
        ``Fbar(M)``.
    boundary_influence : float
        Truncation diagnostic: ``delta`` times the largest deviation of ``v``
        on the outer 10% shell from the interior median, damped by the
        slowest discrete decay factor over the distance from the boundary to
        the centre.
    iterations : int
    grid : Grid
    """

    M: np.ndarray
    delta: float
    L: float
    h: float
    v_values: np.ndarray
    center_value: float
    boundary_influence: float
    iterations: int = 1
    grid: Grid = field(default=None, repr=False)

    @property
    def scaled_center(self):
        return self.delta * self.center_value


@dataclass(frozen=True)
class EffectiveEstimate:
    """Extrapolated ``Fbar(M)``; unpacks as ``(value, residual)``.

    ``raw`` holds ``delta * v(center)`` for each ``delta`` in ``deltas``;
    ``order`` is the fitted convergence rate in ``delta``; ``truncation`` is
    the largest boundary diagnostic across the runs.
    """

    value: float
    residual: float
    raw: tuple
    deltas: tuple
    order: float
    truncation: float

    def __iter__(self):
        return iter((self.value, self.residual))

    def __float__(self):
        return float(self.value)


def _check_delta(delta):
    delta = float(delta)
    if not 0 < delta <= 1:
        raise ValidationError("delta must lie in (0, 1]")
    return delta


def _default_h(dim, L):
    return 1e-2 if dim == 1 else L / 20.0


def solve_delta_corrector(op, omega, M, delta, L=None, h=None, tol=1e-8, center=0.0,
                          scheme="auto"):
    """Solve the damped corrector equation on a box around ``center``.

    Parameters
    ----------
    op : EllipticOperator
    omega : Phase or None
    M : array_like
        Symmetric matrix (a scalar or ``[m]`` in one dimension).
    delta : float
        Damping in (0, 1].
    L : float, optional
        Box half-length; default :func:`auto_length`. Snapped up to a
        multiple of ``h`` so that the centre is a node.
    h : float or callable, optional
        Spacing, or a function of the box half-length returning it; default
        1e-2 in one dimension and ``L / 20`` in two.
    tol : float
        Solver residual tolerance; also enters the automatic length.
    center : float or array_like
        Centre of the box in ``y``.

    Returns
    -------
    CorrectorRun

    Warns
    -----
    TruncationWarning
        If the boundary diagnostic exceeds ``10 * tol``.
    """
    d = op.dim
    delta = _check_delta(delta)
    if not tol > 0:
        raise ValidationError("tol must be positive")
    M = as_sym(M, d)
    if M.ndim != 2:
        raise ValidationError("M must be a single matrix")
    if L is None:
        L = auto_length(op.lambda_max, delta, tol)
    L = float(L)
    if L < 1:
        raise ValidationError("box half-length must be at least 1")
    h = float(h(L) if callable(h) else h) if h is not None else _default_h(d, L)
    n = int(np.ceil(L / h - 1e-9))
    L = n * h
    c = np.broadcast_to(np.asarray(center, dtype=float), (d,))
    grid = Grid(c - L, c + L, h)
    sol = solve_dirichlet(op, omega, 1.0, grid, 0.0, tol=tol, scheme=scheme, M_shift=M,
                          delta=delta)
    v = sol.values
    mid = (n,) * d
    center_value = float(v[mid])
    shell_w = max(1, int(np.ceil(0.1 * n)))
    shell = np.zeros(grid.shape, dtype=bool)
    for ax in range(d):
        idx = np.arange(grid.shape[ax])
        far = (idx < shell_w) | (idx > 2 * n - shell_w)
        shell |= far.reshape([-1 if k == ax else 1 for k in range(d)])
    interior_median = float(np.median(v[~shell])) if np.any(~shell) else center_value
    dev = float(np.max(np.abs(v[shell] - interior_median)))
    # slowest discrete decay rate of the damped equation, per node
    kappa = float(np.arccosh(1.0 + delta * h * h / (2.0 * op.lambda_max)))
    influence = delta * dev * float(np.exp(-kappa * n))
    if influence > 10 * tol:
        warnings.warn(f"corrector boundary influence {influence:.3g} exceeds 10*tol; "
                      "enlarge L", TruncationWarning, stacklevel=2)
    return CorrectorRun(M, delta, L, h, v, center_value, influence, sol.iterations, grid)


def extrapolate_limit(deltas, values, tol=1e-8, noise=0.0):
    """Extrapolate ``values(delta)`` to ``delta = 0`` from the last three points.

    The model is ``x(delta) = x0 + C delta**p`` with the rate ``p`` fitted to
    the ratio of successive differences; for a geometric schedule with
    ratio ``q`` this is ``p = log(r) / log(q)``. When the differences are at
    the noise level (``<= 10 tol max(1, |x|)``, or ``<= noise`` when larger)
    the last value is returned and the floor itself is reported as residual,
    since nothing below it is resolved.

    Returns
    -------
    limit, residual, order : float

    Raises
    ------
    NonConvergent
        If successive differences do not shrink by a factor of at least 1.2.
    """
    ds = np.asarray(deltas, dtype=float)
    xs = np.asarray(values, dtype=float)
    if ds.size < 3 or ds.size != xs.size:
        raise ValidationError("need at least three (delta, value) pairs")
    if np.any(np.diff(ds) >= 0) or np.any(ds <= 0):
        raise ValidationError("delta schedule must be positive and strictly decreasing")
    (d1_, d2_, d3_), (x1, x2, x3) = ds[-3:], xs[-3:]
    a, b = x1 - x2, x2 - x3
    floor = max(10 * tol * max(1.0, abs(x3)), float(noise))
    if max(abs(a), abs(b)) <= floor:
        return float(x3), float(max(abs(a), abs(b), floor)), float("nan")
    r = a / b if b != 0 else np.inf
    if not (np.isfinite(r) and r >= _MIN_RATIO):
        raise NonConvergent(f"successive differences contract by {r:.3g} < {_MIN_RATIO}")

    def ratio(p):
        return (d1_ ** p - d2_ ** p) / (d2_ ** p - d3_ ** p) - r

    lo, hi = 1e-6, 60.0
    if ratio(lo) * ratio(hi) > 0:
        raise NonConvergent(f"no convergence rate fits the contraction ratio {r:.3g}")
    p = brentq(ratio, lo, hi, xtol=1e-12)
    limit = x3 - b * d3_ ** p / (d2_ ** p - d3_ ** p)
    return float(limit), float(abs(x3 - limit)), float(p)


def _lengths(L_rule, op, deltas, tol):
    if L_rule is None or L_rule == "auto":
        return [auto_length(op.lambda_max, dl, tol) for dl in deltas]
    if callable(L_rule):
        return [float(L_rule(dl)) for dl in deltas]
    return [float(L_rule)] * len(deltas)


def estimate_effective(op, omega, M, delta_schedule=DEFAULT_DELTAS, L_rule=None, h=None,
                       tol=1e-8):
    """Estimate ``Fbar(M)`` by extrapolating ``delta * v(center)`` to zero.

    Parameters
    ----------
    op, omega, M
        As in :func:`solve_delta_corrector`.
    delta_schedule : sequence of float
        Strictly decreasing, at least three values.
    L_rule : None, float or callable
        Box half-length: automatic, fixed, or a function of ``delta``.
    h : float, optional
    tol : float

    Differences between raw values below ten times the largest truncation
    diagnostic are treated as noise (see :func:`extrapolate_limit`).

    Returns
    -------
    EffectiveEstimate
        Iterable as ``(value, residual)``.

    Raises
    ------
    NonConvergent
        When the schedule does not contract; the raw values are attached.
    """
    deltas = tuple(float(x) for x in delta_schedule)
    if len(deltas) < 3:
        raise ValidationError("delta schedule needs at least three values")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("delta schedule must be strictly decreasing")
    raw, trunc = [], 0.0
    for dl, L in zip(deltas, _lengths(L_rule, op, deltas, tol)):
        run = solve_delta_corrector(op, omega, M, dl, L=L, h=h, tol=tol)
        raw.append(run.scaled_center)
        trunc = max(trunc, run.boundary_influence)
    try:
        value, residual, order = extrapolate_limit(deltas, raw, tol, noise=10 * trunc)
    except NonConvergent as exc:
        raise NonConvergent(str(exc), estimate=tuple(raw)) from None
    return EffectiveEstimate(value, residual, tuple(raw), deltas, order, trunc)


def make_estimator(op, omega=None, delta_schedule=DEFAULT_DELTAS, L_rule=None, h=None,
                   tol=1e-8):
    """Return ``M -> EffectiveEstimate`` with the settings frozen."""

    def estimator(M):
        return estimate_effective(op, omega, M, delta_schedule, L_rule, h, tol)

    estimator.operator = op
    estimator.omega = omega
    return estimator


def shift_covariance_check(op, omega, M, delta, y0, L=None, h=None, tol=1e-8):
    """Largest gap between ``v(T(y0) omega, y)`` and ``v(omega, y + y0)``.

    The second corrector is solved on the box translated by ``y0`` so that
    both discrete problems cover corresponding points; ``h`` is adjusted
    (downwards) to make ``y0`` a whole number of grid steps. The gap is
    reported in the units of ``delta * v``.
    """
    d = op.dim
    delta = _check_delta(delta)
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), (d,)).copy()
    if L is None:
        L = auto_length(op.lambda_max, delta, tol)
    h = float(h(L) if callable(h) else h) if h is not None else _default_h(d, L)
    if np.abs(y0).max() > L / 4:
        raise ValidationError("|y0| must not exceed L/4")
    steps = np.abs(y0) / h
    nz = steps > 0
    if np.any(nz):
        k = int(np.ceil(steps[nz].max() - 1e-9))
        h = float(np.abs(y0).max() / k)
        if np.any(np.abs(np.abs(y0) / h - np.round(np.abs(y0) / h)) > 1e-9):
            raise ValidationError("y0 components must share a common grid step")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        shifted = shift(op.ensemble, omega, y0) if op.ensemble is not None else omega
        a = solve_delta_corrector(op, shifted, M, delta, L=L, h=h, tol=tol)
        b = solve_delta_corrector(op, omega, M, delta, L=L, h=h, tol=tol, center=y0)
    return float(delta * np.max(np.abs(a.v_values - b.v_values)))


def omega_independence_check(op, M, delta_schedule=DEFAULT_DELTAS, n_phases=5, seed=0,
                             L_rule=None, h=None, tol=1e-8, full_output=False):
    """Spread (max minus min) of ``Fbar(M)`` over sampled phases."""
    if n_phases < 2:
        raise ValidationError("n_phases must be at least 2")
    vals, ests = [], []
    for i in range(n_phases):
        om = sample_phase(op.ensemble, seed, i) if op.ensemble is not None else None
        est = estimate_effective(op, om, M, delta_schedule, L_rule, h, tol)
        vals.append(est.value)
        ests.append(est)
    spread = float(max(vals) - min(vals))
    return (spread, ests) if full_output else spread


# ---------------------------------------------------------------------------
# effective table

@dataclass(frozen=True)
class TableEntry:
    M: tuple
    value: float
    delta_min: float
    residual: float


def _entries_of(M, d):
    S = as_sym(M, d)
    return (float(S[0, 0]),) if d == 1 else (float(S[0, 0]), float(S[0, 1]), float(S[1, 1]))


def _matrix_of(e, d):
    if d == 1:
        return np.array([[e[0]]])
    return np.array([[e[0], e[1]], [e[1], e[2]]])


def _key(e):
    return tuple(float(f"{v:.12g}") + 0.0 for v in e)


class EffectiveTable:
    """Tabulated ``Fbar`` on symmetric matrices.

    Parameters
    ----------
    dim : int
    axes : sequence of 1-D arrays, optional
        Lattice for multilinear interpolation: one axis (``m``) in one
        dimension, three (``m11, m12, m22``) in two.
    estimator : callable, optional
        ``M -> EffectiveEstimate`` used to fill missing entries on demand.
    operator_id : str
    omega_label : str
        The phase the entries were computed at, or ``"omega-independent"``.
    """

    def __init__(self, dim, axes=None, estimator=None, operator_id="",
                 omega_label="omega-independent"):
        self.dim = int(dim)
        if self.dim not in (1, 2):
            raise ValidationError("tables support d = 1 and d = 2")
        n_ax = 1 if self.dim == 1 else 3
        if axes is not None:
            axes = [np.unique(np.asarray(a, dtype=float)) for a in axes]
            if len(axes) != n_ax or any(a.size < 2 for a in axes):
                raise ValidationError(f"need {n_ax} lattice axes with at least two points")
        self.axes = axes
        self.estimator = estimator
        self.operator_id = str(operator_id)
        self.omega_label = str(omega_label)
        self._entries = {}

    # -- entries -------------------------------------------------------
    @property
    def entries(self):
        return [self._entries[k] for k in sorted(self._entries)]

    def __len__(self):
        return len(self._entries)

    def add(self, M, value, delta_min, residual):
        e = _entries_of(M, self.dim)
        entry = TableEntry(_key(e), float(value), float(delta_min), float(residual))
        self._entries[entry.M] = entry
        return entry

    def entry(self, M):
        """Stored entry at ``M``, computing it with the estimator if needed."""
        k = _key(_entries_of(M, self.dim))
        hit = self._entries.get(k)
        if hit is not None:
            return hit
        if self.estimator is None:
            raise TableRangeExceeded(f"no entry at M = {k} and no estimator attached")
        est = self.estimator(_matrix_of(k, self.dim))
        return self.add(_matrix_of(k, self.dim), est.value, min(est.deltas), est.residual)

    def lookup(self, M):
        """``(Fbar(M), residual)`` at an exact entry or via the estimator."""
        e = self.entry(M)
        return e.value, e.residual

    def fill(self):
        """Compute every lattice point (requires an estimator)."""
        if self.axes is None:
            raise ValidationError("table has no lattice")
        for e in product(*self.axes):
            self.entry(_matrix_of(e, self.dim))
        return self

    # -- interpolation -------------------------------------------------
    def _corner(self, e):
        k = _key(e)
        hit = self._entries.get(k)
        if hit is None:
            hit = self.entry(_matrix_of(k, self.dim))
        return hit

    def interpolate(self, M, with_residual=False):
        """Multilinear interpolation at one matrix; extrapolation is refused.

        Returns the value (and the largest residual of the cell corners).

        Raises
        ------
        TableRangeExceeded
            If ``M`` lies outside the lattice.
        """
        v, r = self.interpolate_entries(np.array([_entries_of(M, self.dim)]))
        return (float(v[0]), float(r[0])) if with_residual else float(v[0])

    def interpolate_entries(self, pts):
        """Vectorised interpolation at rows of matrix entries.

        ``pts`` has shape (N, n_entries) with entries ``m11`` or
        ``(m11, m12, m22)``. Returns ``(values, residuals)``.
        """
        if self.axes is None:
            raise ValidationError("table has no lattice")
        n_ax = len(self.axes)
        pts = np.asarray(pts, dtype=float).reshape(-1, n_ax)
        vals = np.zeros(len(pts))
        res = np.zeros(len(pts))
        lo_idx, frac = [], []
        for j, ax in enumerate(self.axes):
            x = pts[:, j]
            tol = 1e-12 * max(1.0, np.abs(ax).max())
            out = (x < ax[0] - tol) | (x > ax[-1] + tol)
            if np.any(out):
                raise TableRangeExceeded(
                    f"entry {j} = {x[out][0]:.6g} outside [{ax[0]:g}, {ax[-1]:g}]; "
                    "widen the table")
            i = np.clip(np.searchsorted(ax, x, side="right") - 1, 0, ax.size - 2)
            lo_idx.append(i)
            frac.append(np.clip((x - ax[i]) / (ax[i + 1] - ax[i]), 0.0, 1.0))
        for bits in product((0, 1), repeat=n_ax):
            w = np.ones(len(pts))
            for j, bit in enumerate(bits):
                w = w * (frac[j] if bit else 1 - frac[j])
            corner = np.stack([lo_idx[j] + bit for j, bit in enumerate(bits)], axis=1)
            for n in np.flatnonzero(w > 0):
                c = self._corner(tuple(self.axes[j][corner[n, j]] for j in range(n_ax)))
                vals[n] += w[n] * c.value
                res[n] = max(res[n], c.residual)
        return vals, res

    def __call__(self, M):
        """``Fbar(M)``: lattice interpolation when available, else lookup."""
        if self.axes is not None:
            return self.interpolate(M)
        return self.lookup(M)[0]

    def evaluate(self, M):
        """``(Fbar(M), residual)`` preferring interpolation on a lattice."""
        if self.axes is not None:
            return self.interpolate(M, with_residual=True)
        return self.lookup(M)

    @property
    def max_residual(self):
        return max((e.residual for e in self._entries.values()), default=0.0)

    # -- persistence ---------------------------------------------------
    def columns(self):
        ent = ["m11"] if self.dim == 1 else ["m11", "m12", "m22"]
        return ent + ["Fbar", "delta_min", "residual"]

    def save(self, path):
        """Write the entries as CSV (``M-entries..., Fbar, delta_min, residual``)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for e in self.entries:
                w.writerow([repr(v) for v in e.M] + [repr(e.value), repr(e.delta_min),
                                                     repr(e.residual)])
        return path

    @classmethod
    def load(cls, path, estimator=None, operator_id="", omega_label="omega-independent"):
        """Read a saved table; a complete lattice is reconstructed as axes."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValidationError(f"{path} is empty")
        head = rows[0]
        if head[-3:] != ["Fbar", "delta_min", "residual"] or len(head) not in (4, 6):
            raise ValidationError(f"{path} does not have the table columns")
        dim = 1 if len(head) == 4 else 2
        n_ax = len(head) - 3
        table = cls(dim, None, estimator, operator_id, omega_label)
        for r in rows[1:]:
            if not r:
                continue
            e = [float(v) for v in r[:n_ax]]
            table.add(_matrix_of(e, dim), float(r[n_ax]), float(r[n_ax + 1]),
                      float(r[n_ax + 2]))
        keys = np.array(list(table._entries)) if table._entries else np.zeros((0, n_ax))
        axes = [np.unique(keys[:, j]) for j in range(n_ax)]
        if all(a.size >= 2 for a in axes) and len(keys) == int(np.prod([a.size for a in axes])):
            table.axes = axes
        return table

    @classmethod
    def build(cls, op, axes, omega=None, delta_schedule=DEFAULT_DELTAS, L_rule=None, h=None,
              tol=1e-8, eager=True):
        """Table for ``op`` on a lattice, with an on-demand estimator attached."""
        est = make_estimator(op, omega, delta_schedule, L_rule, h, tol)
        label = "omega-independent" if omega is None else repr(omega)
        table = cls(op.dim, axes, est, operator_id=repr(op), omega_label=label)
        return table.fill() if eager else table


def effective_ellipticity_check(table, lam, Lam, n_samples=1000, seed=0, M_scale=3.0,
                                norm="trace", slack_factor=3.0, on_demand=None):
    """Sampled ellipticity of ``Fbar``: ``lam|N| <= Fbar(M+N) - Fbar(M) <= Lam|N|``.

    Parameters
    ----------
    table : EffectiveTable or callable
        A table, or an estimator ``M -> EffectiveEstimate``.
    lam, Lam : float
    n_samples : int
    seed : int
    M_scale : float
        Entries of ``M`` and ``N`` are drawn with this scale; when the table
        has a lattice, ``M`` and ``M + N`` are drawn inside it.
    norm : str
        Norm of ``N`` (see :func:`wstarhom.operators.matrix_norm`).
    slack_factor : float
        Each sample may fall short by ``slack_factor`` times the larger
        residual of its two evaluations.
    on_demand : bool, optional
        Force estimator evaluation instead of lattice interpolation; the
        default uses the lattice when there is one.

    Returns
    -------
    (lower_margin, upper_margin) : tuple of float
        Minima over samples of ``D - lam|N|`` and ``Lam|N| - D``.

    Raises
    ------
    EllipticityViolation
        If some sample violates a bound by more than its slack.
    """
    if isinstance(table, EffectiveTable):
        d = table.dim
        lattice = table.axes is not None and on_demand is not True

        def evaluate(M):
            return table.interpolate(M, with_residual=True) if lattice else table.lookup(M)
    else:
        lattice = False
        d = table.operator.dim

        def evaluate(M):
            est = table(M)
            return est.value, est.residual
    rng = np.random.default_rng(seed)
    lo_m, up_m = np.inf, np.inf
    worst = 0.0
    for _ in range(int(n_samples)):
        if lattice:
            M, N = _sample_in_lattice(table, rng)
        else:
            B = rng.standard_normal((d, d)) * M_scale / 2
            M = (B + B.T) / 2
            k = int(rng.integers(0, d + 1))
            G = rng.standard_normal((d, k)) * np.sqrt(M_scale / max(k, 1))
            N = G @ G.T
        f0, r0 = evaluate(M)
        f1, r1 = evaluate(M + N)
        nn = float(matrix_norm(N, norm))
        diff = f1 - f0
        slack = slack_factor * max(r0, r1)
        lo, up = diff - lam * nn, Lam * nn - diff
        lo_m, up_m = min(lo_m, lo), min(up_m, up)
        worst = min(worst, lo + slack, up + slack)
    if worst < 0:
        raise EllipticityViolation(
            f"effective ellipticity margins ({lo_m:.3g}, {up_m:.3g}) exceed the "
            f"extrapolation slack", margins=(lo_m, up_m))
    return float(lo_m), float(up_m)


def _sample_in_lattice(table, rng):
    """Draw ``M`` and PSD ``N`` with ``M`` and ``M + N`` in the lattice box."""
    lo = np.array([a[0] for a in table.axes])
    hi = np.array([a[-1] for a in table.axes])
    d = table.dim
    for _ in range(1000):
        e = lo + (hi - lo) * rng.random(lo.size)
        M = _matrix_of(e, d)
        k = int(rng.integers(0, d + 1))
        G = rng.standard_normal((d, k))
        N = G @ G.T
        room = np.min(np.where(np.array(_entries_of(N, d)) > 0,
                               (hi - e) / np.maximum(np.array(_entries_of(N, d)), 1e-300),
                               np.where(np.array(_entries_of(N, d)) < 0,
                                        (lo - e) / np.minimum(np.array(_entries_of(N, d)),
                                                              -1e-300),
                                        np.inf)))
        if not np.isfinite(room):
            return M, N
        if room > 0:
            return M, N * min(1.0, room) * rng.random()
    raise ValidationError("could not sample inside the table lattice")
