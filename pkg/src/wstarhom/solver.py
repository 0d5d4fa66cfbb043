"""Monotone finite-difference solver for Dirichlet problems on boxes.

The scheme at an interior node ``x`` is ``S(u)(x) = rule(x/eps, D)`` where
``D_v = c_v + (u(x+hv) - 2u(x) + u(x-hv)) / (h^2 |v|^2)`` are directional
second differences along the stencil directions and ``c_v = v.M v / |v|^2``
is an optional constant Hessian shift (used by the corrector). The discrete
equation is ``S(u) - delta u = 0`` in the interior with ``u = g`` on the
boundary.

Three solution paths are available:

``direct``
    one sparse solve, for linear operators;
``newton``
    policy iteration (Howard's algorithm) on the piecewise linear rule;
``iterative``
    explicit pseudo-time steps ``u <- u + tau (S(u) - delta u)`` with the
    monotone step ``tau = 1 / (delta + 2 d Lambda C / h^2)``, ``C`` being the
    number of stencil directions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from . import kernels
from .errors import GridMismatch, MaxIterExceeded, StabilityViolation, ValidationError

__all__ = [
    "Grid",
    "DiscreteSolution",
    "directions",
    "shift_terms",
    "directional_differences",
    "discrete_hessian",
    "apply_scheme",
    "solve_dirichlet",
    "sup_distance",
]

_DIRS = {1: ((1,),), 2: ((1, 0), (0, 1), (1, 1), (1, -1))}


def directions(dim):
    """Unsigned stencil directions; the stencil uses each with both signs."""
    return _DIRS[int(dim)]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on the box ``[lower, upper]`` with spacing ``h``.

    The box sides must be integer multiples of ``h`` (to 1e-9 relative).
    """

    lower: tuple
    upper: tuple
    h: float
    shape: tuple = field(init=False)

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        h = float(self.h)
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ValidationError("box corners must have 1 or 2 matching components")
        if not h > 0:
            raise ValidationError("grid spacing must be positive")
        shape = []
        for a, b in zip(lo, hi):
            if not b > a:
                raise ValidationError("box is degenerate")
            n = (b - a) / h
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise ValidationError(f"side {b - a:g} is not a multiple of h = {h:g}")
            if round(n) < 2:
                raise ValidationError("grid needs at least one interior node per axis")
            shape.append(int(round(n)) + 1)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "shape", tuple(shape))

    @property
    def dim(self):
        return len(self.shape)

    @property
    def directions(self):
        return directions(self.dim)

    @property
    def stencil(self):
        """All signed stencil offsets."""
        out = []
        for v in self.directions:
            out.append(v)
            out.append(tuple(-c for c in v))
        return out

    @property
    def axes(self):
        return [a + self.h * np.arange(n) for a, n in zip(self.lower, self.shape)]

    @property
    def interior_shape(self):
        return tuple(n - 2 for n in self.shape)

    def nodes(self):
        """Coordinates of all nodes, shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def interior_nodes(self):
        """Coordinates of interior nodes, shape (N_int, d)."""
        sl = (slice(1, -1),) * self.dim
        return self.nodes()[sl].reshape(-1, self.dim)

    def boundary_mask(self):
        m = np.ones(self.shape, dtype=bool)
        m[(slice(1, -1),) * self.dim] = False
        return m

    def same_as(self, other):
        return (self.shape == other.shape
                and np.allclose(self.lower, other.lower, rtol=0, atol=1e-12 * max(1, self.h))
                and abs(self.h - other.h) <= 1e-12 * self.h)

    def node_index(self, x):
        """Integer index of the node at coordinates ``x`` (must be a node)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = (x - np.asarray(self.lower)) / self.h
        r = np.round(idx)
        if np.any(np.abs(idx - r) > 1e-6) or np.any(r < 0) or np.any(r >= self.shape):
            raise ValidationError(f"{x.tolist()} is not a grid node")
        return tuple(int(v) for v in r)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """Nodal values of a discrete Dirichlet solution.

    Attributes
    ----------
    grid : Grid
    values : ndarray
        Shape ``grid.shape``; boundary nodes carry the data exactly.
    boundary_trace : ndarray
        Values at boundary nodes (``values[grid.boundary_mask()]``).
    residual_norm : float
        Max-norm of ``S(u) - delta u`` on interior nodes at exit.
    iterations : int
    converged : bool
    scheme : str
    """

    grid: Grid
    values: np.ndarray
    boundary_trace: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool = True
    scheme: str = "direct"

    def __call__(self, x):
        """Multilinear interpolation of the nodal values."""
        interp = RegularGridInterpolator(self.grid.axes, self.values)
        x = np.asarray(x, dtype=float)
        if self.grid.dim == 1:
            return interp(x.reshape(-1, 1)).reshape(x.shape)
        return interp(x.reshape(-1, 2)).reshape(x.shape[:-1])

    def to_csv(self, path):
        """Write ``x[,y],value`` rows."""
        nodes = self.grid.nodes().reshape(-1, self.grid.dim)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"] if self.grid.dim == 1 else ["x", "y", "value"])
            for p, v in zip(nodes, self.values.ravel()):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def shift_terms(M, dim):
    """``c_v = v.M v / |v|^2`` for each stencil direction."""
    if M is None:
        return np.zeros(len(directions(dim)))
    M = np.asarray(M, dtype=float).reshape(dim, dim)
    out = []
    for v in directions(dim):
        v = np.asarray(v, dtype=float)
        out.append(float(v @ M @ v) / float(v @ v))
    return np.array(out)


def directional_differences(grid, u, M_shift=None):
    """Normalised directional second differences at interior nodes.

    Returns an array of shape (n_dir, N_int) whose row ``v`` holds
    ``c_v + (u(x+hv) - 2u(x) + u(x-hv)) / (h^2 |v|^2)``.
    """
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    c = shift_terms(M_shift, grid.dim)
    h2 = grid.h * grid.h
    if grid.dim == 1:
        D = (u[2:] - 2 * u[1:-1] + u[:-2]) / h2 + c[0]
        return D[None, :]
    uc = u[1:-1, 1:-1]
    D = np.empty((4, uc.size))
    D[0] = ((u[2:, 1:-1] - 2 * uc + u[:-2, 1:-1]) / h2 + c[0]).ravel()
    D[1] = ((u[1:-1, 2:] - 2 * uc + u[1:-1, :-2]) / h2 + c[1]).ravel()
    D[2] = ((u[2:, 2:] - 2 * uc + u[:-2, :-2]) / (2 * h2) + c[2]).ravel()
    D[3] = ((u[2:, :-2] - 2 * uc + u[:-2, 2:]) / (2 * h2) + c[3]).ravel()
    return D


def discrete_hessian(grid, values, node, epsilon_scale=1.0):
    """Directional second differences at one interior node.

    Parameters
    ----------
    grid : Grid
    values : ndarray
    node : tuple of int
        Index of an interior node.
    epsilon_scale : float
        Differences are multiplied by ``epsilon_scale**2``, i.e. expressed
        in the fast variable ``y = x / epsilon_scale``.

    Returns
    -------
    D : dict
        Direction tuple -> normalised second difference.
    M_hat : ndarray, shape (d, d)
        Surrogate Hessian: axis differences on the diagonal and, for d = 2,
        ``(D_(1,1) - D_(1,-1)) / 2`` off the diagonal.
    """
    node = tuple(int(i) for i in np.atleast_1d(node))
    if len(node) != grid.dim or any(i < 1 or i > n - 2 for i, n in zip(node, grid.shape)):
        raise ValidationError("node must be an interior index")
    u = np.asarray(values, dtype=float).reshape(grid.shape)
    s = float(epsilon_scale) ** 2
    out = {}
    for v in grid.directions:
        p = tuple(i + c for i, c in zip(node, v))
        m = tuple(i - c for i, c in zip(node, v))
        out[v] = s * (u[p] - 2 * u[node] + u[m]) / (grid.h ** 2 * sum(c * c for c in v))
    if grid.dim == 1:
        return out, np.array([[out[(1,)]]])
    off = 0.5 * (out[(1, 1)] - out[(1, -1)])
    return out, np.array([[out[(1, 0)], off], [off, out[(0, 1)]]])


def _make_grid(box, h):
    if isinstance(box, Grid):
        return box
    lo, hi = box
    return Grid(lo, hi, h)


def _scaled(grid, eps):
    if not eps > 0:
        raise ValidationError("epsilon must be positive")
    return grid.interior_nodes() / float(eps)


def apply_scheme(op, omega, eps, grid, values, M_shift=None, delta=0.0, rule=None):
    """Scheme residual ``S(u) - delta u`` on interior nodes (interior shape)."""
    rule = rule or op.local_rule(omega, _scaled(grid, eps))
    u = np.asarray(values, dtype=float).reshape(grid.shape)
    val, _ = rule(directional_differences(grid, u, M_shift))
    inner = u[(slice(1, -1),) * grid.dim].ravel()
    return (val - delta * inner).reshape(grid.interior_shape)


def _assemble(grid, W, delta):
    """Sparse ``delta I - sum_v W_v Delta_v`` on interior unknowns."""
    d = grid.dim
    ishape = grid.interior_shape
    N = int(np.prod(ishape))
    idx = -np.ones(grid.shape, dtype=np.int64)
    idx[(slice(1, -1),) * d] = np.arange(N).reshape(ishape)
    h2 = grid.h ** 2
    rows = [np.arange(N)]
    cols = [np.arange(N)]
    diag = np.full(N, float(delta))
    vals = [diag]
    for v, Wv in zip(grid.directions, W):
        s = Wv / (h2 * sum(c * c for c in v))
        diag += 2 * s
        for sg in (1, -1):
            sl = tuple(slice(1 + sg * c, n - 1 + sg * c) for c, n in zip(v, grid.shape))
            nb = idx[sl].ravel()
            ok = nb >= 0
            rows.append(np.flatnonzero(ok))
            cols.append(nb[ok])
            vals.append(-s[ok])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(N, N))


def _boundary_values(grid, g):
    nodes = grid.nodes()
    if callable(g):
        pts = nodes[..., 0] if grid.dim == 1 else nodes.reshape(-1, grid.dim)
        vals = np.asarray(g(pts), dtype=float).reshape(grid.shape)
    else:
        vals = np.full(grid.shape, float(g))
    return vals


def solve_dirichlet(op, omega, eps, box, g, h=None, tol=None, max_iter=None, scheme="auto",
                    M_shift=None, delta=0.0, initial=None):
    """Solve ``S(u) - delta u = 0`` in the box with ``u = g`` on its boundary.

    Parameters
    ----------
    op : EllipticOperator or compatible
        Anything with ``dim``, ``lambda_max``, ``is_linear`` and
        ``local_rule(omega, ys)``.
    omega : Phase or None
    eps : float
        Coefficients are evaluated at ``x / eps``.
    box : Grid or (lower, upper)
    g : callable or float
        Boundary data; callables receive node coordinates ((N,) in 1-D,
        (N, d) otherwise) and are sampled at every node to seed the iteration.
    h : float
        Grid spacing (ignored when ``box`` is a Grid).
    tol : float, optional
        Residual tolerance; default 1e-8 for linear and 1e-6 otherwise.
    max_iter : int, optional
        Newton iterations (default 50) or explicit steps (default 200000).
    scheme : {"auto", "direct", "newton", "iterative"}
    M_shift : array_like, optional
        Constant matrix added to the discrete Hessian.
    delta : float
        Zeroth-order damping.
    initial : ndarray, optional
        Interior starting values (boundary values are overwritten by ``g``).

    Returns
    -------
    DiscreteSolution

    Raises
    ------
    MaxIterExceeded
        With the best iterate attached as ``solution``.
    StabilityViolation
        If explicit steps stop being nonexpansive.
    NonMonotoneDecomposition
        Propagated from the operator rule.
    """
    grid = _make_grid(box, h)
    if op.dim != grid.dim:
        raise ValidationError("operator and grid dimensions differ")
    if scheme not in ("auto", "direct", "newton", "iterative"):
        raise ValidationError(f"unknown scheme {scheme!r}")
    linear = bool(getattr(op, "is_linear", False))
    if scheme == "auto":
        scheme = "direct" if linear else "newton"
    if scheme == "direct" and not linear:
        raise ValidationError("the direct path needs a linear operator")
    if tol is None:
        tol = 1e-8 if linear else 1e-6
    if not tol > 0:
        raise ValidationError("tol must be positive")
    delta = float(delta)
    u = _boundary_values(grid, g)
    bmask = grid.boundary_mask()
    if initial is not None:
        u[~bmask] = np.asarray(initial, dtype=float).reshape(grid.shape)[~bmask]
    rule = op.local_rule(omega, _scaled(grid, eps))
    inner = (slice(1, -1),) * grid.dim

    def residual(u):
        val, W = rule(directional_differences(grid, u, M_shift))
        return val - delta * u[inner].ravel(), W

    def done(u, res, it, ok, name):
        u = u.copy()
        u.setflags(write=False)
        return DiscreteSolution(grid, u, u[bmask].copy(), float(res), int(it), ok, name)

    if scheme in ("direct", "newton"):
        limit = 1 if scheme == "direct" else int(max_iter or 50)
        R, W = residual(u)
        rn = float(np.abs(R).max(initial=0.0))
        best = (rn, u.copy())
        it = 0
        while rn >= tol and it < limit:
            J = _assemble(grid, W, delta)
            du = spsolve(J.tocsc(), R)
            u[inner] += du.reshape(grid.interior_shape)
            it += 1
            R, W = residual(u)
            rn = float(np.abs(R).max(initial=0.0))
            if rn < best[0]:
                best = (rn, u.copy())
        if scheme == "direct":
            return done(u, rn, max(it, 1), rn < max(tol, 1e3 * np.finfo(float).eps), "direct")
        if rn >= tol:
            sol = done(best[1], best[0], it, False, "newton")
            raise MaxIterExceeded(
                f"policy iteration stopped at residual {best[0]:.3g} after {it} iterations",
                solution=sol)
        return done(u, rn, it, True, "newton")
    return _explicit(op, rule, grid, u, residual, delta, tol, int(max_iter or 200_000),
                     M_shift, done)


def _explicit(op, rule, grid, u, residual, delta, tol, max_steps, M_shift, done):
    d = grid.dim
    C = len(grid.directions)
    tau = 1.0 / (delta + 2 * d * op.lambda_max * C / grid.h ** 2)
    c = shift_terms(M_shift, d)
    form = getattr(op, "form", "")
    fused = None
    if form in ("pucci_plus", "pucci_minus"):
        sgn = 1.0 if form == "pucci_plus" else -1.0
        sweep = kernels.sweep_pucci_1d if d == 1 else kernels.sweep_pucci_2d
        fused = lambda u, n: sweep(u, grid.h, tau, op.lambda_min, op.lambda_max, sgn, c,
                                   delta, n)
    elif getattr(rule, "linear", False):
        _, W = rule(np.zeros((C, int(np.prod(grid.interior_shape)))))
        f0, _ = rule(np.tile(c[:, None], (1, W.shape[1])))
        Wi = W.reshape((C,) + grid.interior_shape)
        src = f0.reshape(grid.interior_shape)
        fused = lambda u, n: kernels.sweep_weighted(u, Wi, src, grid.h, tau, delta, n)
    inner = (slice(1, -1),) * d
    chunk = 256
    steps = 0
    last = np.inf
    R, _ = residual(u)
    rn = float(np.abs(R).max(initial=0.0))
    while rn >= tol and steps < max_steps:
        n = min(chunk, max_steps - steps)
        # increments below the rounding level of u carry no stability signal
        floor = 16 * np.finfo(float).eps * (1.0 + float(np.abs(u).max(initial=0.0)))
        if fused is not None:
            u, incs = fused(u, n)
        else:
            incs = np.empty(n)
            for k in range(n):
                R, _ = residual(u)
                du = tau * R
                u[inner] += du.reshape(grid.interior_shape)
                incs[k] = np.abs(du).max(initial=0.0)
        seq = np.concatenate([[last], incs])
        grow = seq[1:] > seq[:-1] * (1 + 1e-9) + floor
        if steps == 0:
            grow[0] = False
        if np.any(grow) or not np.all(np.isfinite(incs)):
            raise StabilityViolation("explicit iteration is not nonexpansive in max-norm")
        last = incs[-1]
        steps += n
        R, _ = residual(u)
        rn = float(np.abs(R).max(initial=0.0))
    if rn >= tol:
        sol = done(u, rn, steps, False, "iterative")
        raise MaxIterExceeded(f"explicit iteration stopped at residual {rn:.3g} after {steps} steps",
                              solution=sol)
    return done(u, rn, steps, True, "iterative")


def sup_distance(u1, u2):
    """Max-norm distance over the nodes of ``u1``.

    ``u2`` may be a DiscreteSolution on the same grid, a callable (sampled at
    the nodes) or a number.

    Raises
    ------
    GridMismatch
        If two solutions live on different grids.
    """
    if isinstance(u2, DiscreteSolution):
        if not u1.grid.same_as(u2.grid):
            raise GridMismatch("solutions are defined on different grids")
        return float(np.max(np.abs(u1.values - u2.values)))
    if callable(u2):
        nodes = u1.grid.nodes()
        pts = nodes[..., 0] if u1.grid.dim == 1 else nodes.reshape(-1, u1.grid.dim)
        ref = np.asarray(u2(pts), dtype=float).reshape(u1.grid.shape)
        return float(np.max(np.abs(u1.values - ref)))
    return float(np.max(np.abs(u1.values - float(u2))))
