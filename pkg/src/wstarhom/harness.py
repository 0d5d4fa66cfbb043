"""End-to-end experiments: homogenized solves, configuration and studies.

Configuration files are INI files (:mod:`configparser`). Numbers may be
written as plain literals or simple expressions such as ``1/80``,
``sqrt(2)`` or ``2*pi``. A typical study file::

    [ensemble]
    frequencies = 1
    a.constant = 2
    a.terms = 1 : 0 : 1
    f.constant = 1
    f.null = gaussian_bumps amplitudes=2 centers=0 widths=1

    [operator]
    form = bellman_min
    lambda_min = 1
    lambda_max = 3
    branches = a : f

    [domain]
    lower = -1
    upper = 1
    h = 1/2000
    boundary = zero

    [study]
    eps = 1/10, 1/20, 1/40, 1/80
    delta = 0.04, 0.02, 0.01
    table_axes = -3 : 3 : 7
    phase = 0
    output = out
"""

from __future__ import annotations

import ast
import configparser
import csv
import math
import operator as _op
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ap_core import NullFunction, TrigPolynomial, WStarAPFunction
from .corrector import DEFAULT_DELTAS, EffectiveTable
from .errors import (
    ArtifactError,
    ProvenanceError,
    TableRangeExceeded,
    ValidationError,
)
from .fields import Phase, QuasiPeriodicEnsemble, sample_phase
from .operators import EllipticOperator
from .solver import Grid, solve_dirichlet, sup_distance

__all__ = [
    "EffectiveOperator",
    "solve_homogenized",
    "parse_number",
    "parse_list",
    "ExperimentConfig",
    "read_ini",
    "load_config",
    "build_function",
    "build_ensemble",
    "build_operator",
    "build_boundary",
    "ConvergenceReport",
    "run_convergence_study",
]


# ---------------------------------------------------------------------------
# tabulated effective operator

class EffectiveOperator:
    """Solver-compatible wrapper of an :class:`EffectiveTable`.

    The effective operator does not depend on ``y``; the scheme interpolates
    the table multilinearly. In two dimensions the off-diagonal entry is
    read from the diagonal direction whose weight stays nonnegative, chosen
    by the sign of ``dFbar/dm12``.
    """

    form = "tabulated"
    y_independent = True
    is_linear = False
    ensemble = None

    def __init__(self, table, lambda_min, lambda_max):
        if table.axes is None:
            raise ValidationError("the homogenized solve needs a table lattice")
        self.table = table
        self.dim = table.dim
        self.lambda_min = float(lambda_min)
        self.lambda_max = float(lambda_max)

    def local_rule(self, omega, ys):
        return _TableRule(self)

    def __repr__(self):
        return f"EffectiveOperator(dim={self.dim}, entries={len(self.table)})"


class _TableRule:
    linear = False

    def __init__(self, op):
        self.table = op.table
        self.dim = op.dim

    def __call__(self, D):
        t = self.table
        if self.dim == 1:
            m = D[0]
            val, _ = t.interpolate_entries(m[:, None])
            ax = t.axes[0]
            i = np.clip(np.searchsorted(ax, m, side="right") - 1, 0, ax.size - 2)
            lo, _ = t.interpolate_entries(ax[i][:, None])
            hi, _ = t.interpolate_entries(ax[i + 1][:, None])
            slope = np.maximum((hi - lo) / (ax[i + 1] - ax[i]), 0.0)
            return val, slope[None, :]
        D1, D2, D3, D4 = D
        mid = 0.5 * (D1 + D2)
        m12 = 0.5 * (D3 - D4)
        step = 1e-4 * min(float(np.min(np.diff(a))) for a in t.axes)

        def f(e11, e12, e22):
            return t.interpolate_entries(np.column_stack([e11, e12, e22]))[0]

        def grad(e11, e12, e22):
            g = []
            for k in range(3):
                e = [e11, e12, e22]
                lo = list(e)
                hi = list(e)
                hi[k] = e[k] + step
                lo[k] = e[k] - step
                try:
                    g.append((f(*hi) - f(*lo)) / (2 * step))
                except TableRangeExceeded:
                    # one-sided at the lattice boundary
                    try:
                        g.append((f(*hi) - f(*e)) / step)
                    except TableRangeExceeded:
                        g.append((f(*e) - f(*lo)) / step)
            return g

        _, g12c, _ = grad(D1, m12, D2)
        plus = g12c >= 0
        b = np.where(plus, D3 - mid, mid - D4)
        val = f(D1, b, D2)
        g11, g12, g22 = grad(D1, b, D2)
        W = np.zeros((4, D.shape[1]))
        W[0] = np.maximum(g11 - np.where(plus, 0.5, -0.5) * g12, 0.0)
        W[1] = np.maximum(g22 - np.where(plus, 0.5, -0.5) * g12, 0.0)
        W[2] = np.where(plus, np.maximum(g12, 0.0), 0.0)
        W[3] = np.where(plus, 0.0, np.maximum(-g12, 0.0))
        return val, W


def solve_homogenized(table, U, g, h, tol=1e-8, lambda_min=None, lambda_max=None,
                      max_iter=50, scheme="newton"):
    """Solve ``Fbar(D^2 u) = 0`` in the box ``U`` with ``u = g`` on its boundary.

    Parameters
    ----------
    table : EffectiveTable
        Must carry a lattice; missing corners are computed by the attached
        estimator.
    U : Grid or (lower, upper)
    g : callable or float
    h : float
    tol : float
    lambda_min, lambda_max : float, optional
        Ellipticity constants of ``Fbar``; only used for the explicit path.

    Raises
    ------
    TableRangeExceeded
        If the scheme queries a Hessian outside the lattice.
    """
    lam = 1.0 if lambda_min is None else lambda_min
    Lam = 1.0 if lambda_max is None else lambda_max
    op = EffectiveOperator(table, lam, Lam)
    return solve_dirichlet(op, None, 1.0, U, g, h=h, tol=tol, max_iter=max_iter,
                           scheme=scheme)


# ---------------------------------------------------------------------------
# configuration

_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv,
           ast.Pow: _op.pow}
_UNARY = {ast.UAdd: _op.pos, ast.USub: _op.neg}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin,
          "cos": math.cos}
_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf}


def parse_number(text):
    """Evaluate a numeric literal or a small arithmetic expression safely."""
    text = str(text).strip()
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        raise ValidationError(f"cannot parse number {text!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name) and node.id in _CONSTS:
            return _CONSTS[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValidationError(f"unsupported expression {text!r}")

    try:
        return float(ev(tree))
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise ValidationError(f"cannot evaluate {text!r}: {exc}") from None


def parse_list(text, sep=","):
    """Comma-separated numbers."""
    parts = [p for p in str(text).split(sep) if p.strip()]
    return [parse_number(p) for p in parts]


def _parse_rows(text):
    """Rows separated by ';', entries by ','."""
    return [parse_list(r) for r in str(text).split(";") if r.strip()]


def _parse_terms(text, dim):
    """``freq : a : b`` terms separated by ';' (freq entries by ',')."""
    terms = []
    for chunk in str(text).split(";"):
        if not chunk.strip():
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ValidationError(f"term {chunk.strip()!r} must read 'freq : a : b'")
        freq = parse_list(parts[0])
        if len(freq) != dim:
            raise ValidationError(f"term frequency {freq} has the wrong dimension")
        terms.append((tuple(freq), parse_number(parts[1]), parse_number(parts[2])))
    return terms


def _parse_null(text, dim):
    """``kind key=v1,v2 key=...`` into a :class:`NullFunction`."""
    tokens = str(text).split()
    if not tokens:
        raise ValidationError("empty null specification")
    kind, params = tokens[0], {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValidationError(f"null parameter {tok!r} must read key=value")
        k, v = tok.split("=", 1)
        vals = parse_list(v)
        params[k] = vals if len(vals) > 1 else vals[0]
    try:
        if kind == "gaussian_bumps":
            return NullFunction.gaussian_bumps(params["amplitudes"], params["centers"],
                                               params["widths"], dim=dim)
        if kind == "exponential_envelope":
            return NullFunction.exponential_envelope(
                params["amplitude"], params.get("center", 0.0), params["width"],
                params.get("wavenumber"), dim=dim)
    except KeyError as exc:
        raise ValidationError(f"null profile {kind!r} misses parameter {exc}") from None
    raise ValidationError(f"unknown null kind {kind!r}")


def build_function(sec):
    """W*AP function from a ``[function]`` section (``dim``, ``constant``,
    ``terms`` and optionally ``null``)."""
    if sec is None:
        raise ValidationError("config needs a [function] section")
    dim = int(parse_number(sec.get("dim", "1")))
    ap = _poly_from_section(sec, "", dim)
    null = _parse_null(sec["null"], dim) if "null" in sec else None
    return WStarAPFunction(ap, null)


def _poly_from_section(sec, prefix, dim):
    const = parse_number(sec.get(f"{prefix}constant", "0"))
    terms = _parse_terms(sec.get(f"{prefix}terms", ""), dim)
    return TrigPolynomial(dim, terms, const)


def build_ensemble(sec):
    """Ensemble from an ``[ensemble]`` section (or None when absent)."""
    if sec is None:
        return None
    rows = _parse_rows(sec.get("frequencies", "1"))
    if len({len(r) for r in rows}) != 1:
        raise ValidationError("frequency rows must have equal length")
    L = np.array(rows, dtype=float)
    k = L.shape[0]
    channels = sorted({key.split(".", 1)[0] for key in sec if "." in key})
    if not channels:
        raise ValidationError("[ensemble] defines no channels")
    profiles, nulls = {}, {}
    for ch in channels:
        profiles[ch] = _poly_from_section(sec, f"{ch}.", k)
        if f"{ch}.null" in sec:
            nulls[ch] = _parse_null(sec[f"{ch}.null"], L.shape[1])
    m_max = int(parse_number(sec.get("m_max", "8")))
    return QuasiPeriodicEnsemble(L, profiles, nulls or None, m_max=m_max)


def _coef(text):
    text = text.strip()
    try:
        return parse_number(text)
    except ValidationError:
        return text


def build_operator(sec, ensemble=None):
    """Operator from an ``[operator]`` section."""
    if sec is None:
        raise ValidationError("config needs an [operator] section")
    form = sec.get("form", "linear_nondiv").strip()
    lam = parse_number(sec.get("lambda_min", "1"))
    Lam = parse_number(sec.get("lambda_max", "1"))
    dim = int(parse_number(sec.get("dim", str(ensemble.dim if ensemble else 1))))
    if form in ("pucci_plus", "pucci_minus"):
        return EllipticOperator.pucci(form[6:], dim, lam, Lam)
    if form == "linear_nondiv":
        coef = sec.get("coefficient", "1")
        c = [_coef(p) for p in coef.split(",")] if "," in coef else _coef(coef)
        return EllipticOperator.linear(tuple(c) if isinstance(c, list) else c, lam, Lam,
                                       ensemble=ensemble, dim=dim,
                                       forcing=_coef(sec.get("forcing", "0")))
    if form == "bellman_min":
        branches = []
        for chunk in sec.get("branches", "").split(";"):
            if not chunk.strip():
                continue
            parts = chunk.split(":")
            coef = parts[0]
            c = tuple(_coef(p) for p in coef.split(",")) if "," in coef else _coef(coef)
            branches.append((c, _coef(parts[1]) if len(parts) > 1 else 0.0))
        if not branches:
            raise ValidationError("bellman_min needs at least one branch")
        return EllipticOperator.bellman_min(branches, lam, Lam, ensemble=ensemble, dim=dim)
    raise ValidationError(f"unknown operator form {form!r}")


def build_boundary(sec, dim):
    """Boundary data from the ``boundary`` tag of a ``[domain]`` section.

    Tags: ``zero``, ``constant value=c``, ``affine c0=.. grad=..`` and
    ``quadratic m=m11[,m12,m22] c0=..`` (``g = c0 + x.M x / 2``).
    """
    tokens = sec.get("boundary", "zero").split()
    tag, params = tokens[0], {}
    for tok in tokens[1:]:
        k, _, v = tok.partition("=")
        params[k] = parse_list(v)
    c0 = params.get("c0", [0.0])[0]
    if tag == "zero":
        return lambda x: np.zeros(np.shape(x)[:1])
    if tag == "constant":
        val = params.get("value", [0.0])[0]
        return lambda x: np.full(np.shape(x)[:1], val)
    if tag == "affine":
        grad = np.array(params.get("grad", [0.0] * dim), dtype=float)
        if dim == 1:
            return lambda x: c0 + grad[0] * np.asarray(x)
        return lambda x: c0 + np.asarray(x) @ grad
    if tag == "quadratic":
        m = params.get("m", [0.0])
        if dim == 1:
            return lambda x: c0 + 0.5 * m[0] * np.asarray(x) ** 2
        if len(m) != 3:
            raise ValidationError("quadratic boundary data needs m = m11, m12, m22")
        M = np.array([[m[0], m[1]], [m[1], m[2]]])
        return lambda x: c0 + 0.5 * np.einsum("ni,ij,nj->n", x, M, x)
    raise ValidationError(f"unknown boundary tag {tag!r}")


@dataclass
class ExperimentConfig:
    """Parsed experiment configuration.

    Attributes mirror the config sections; ``raw`` keeps the parser for
    subcommand-specific sections.
    """

    ensemble: Optional[QuasiPeriodicEnsemble]
    operator: EllipticOperator
    lower: tuple
    upper: tuple
    h: float
    boundary: object
    boundary_tag: str
    eps_schedule: tuple
    delta_schedule: tuple
    corrector_h: Optional[float]
    corrector_tol: float
    solver_tol: float
    table_axes: Optional[list]
    table_path: Optional[str]
    claimed_tol: float
    table_null: bool
    seed: int
    phase: Optional[tuple]
    phase_index: int
    output: str
    raw: configparser.ConfigParser = field(repr=False, default=None)

    def omega(self):
        """The phase of the study: explicit angles, or sampled from the seed."""
        if self.ensemble is None:
            return None
        if self.phase is not None:
            return Phase(self.phase)
        return sample_phase(self.ensemble, self.seed, self.phase_index)


def _axes_from(text, dim):
    groups = [g for g in str(text).split(";") if g.strip()]
    axes = []
    for g in groups:
        parts = g.split(":")
        if len(parts) == 3:
            axes.append(np.linspace(parse_number(parts[0]), parse_number(parts[1]),
                                    int(parse_number(parts[2]))))
        else:
            axes.append(np.array(parse_list(g)))
    need = 1 if dim == 1 else 3
    if len(axes) == 1 and need == 3:
        axes = axes * 3
    if len(axes) != need:
        raise ValidationError(f"table_axes needs {need} axis specifications")
    return axes


def read_ini(path):
    """Parse an INI file with case-preserving keys and ``#`` comments."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from None
    return cp


def load_config(path, seed=None, output=None):
    """Read an INI experiment file into an :class:`ExperimentConfig`.

    Raises
    ------
    ValidationError
        On missing sections, unparsable values or a schedule that is not
        strictly decreasing and positive.
    """
    cp = read_ini(path)
    get = (lambda s: cp[s] if cp.has_section(s) else None)
    ens = build_ensemble(get("ensemble"))
    op = build_operator(get("operator"), ens)
    dom = get("domain") or {}
    dim = op.dim
    lower = tuple(parse_list(dom.get("lower", ",".join(["-1"] * dim))))
    upper = tuple(parse_list(dom.get("upper", ",".join(["1"] * dim))))
    if len(lower) != dim or len(upper) != dim:
        raise ValidationError("domain corners do not match the operator dimension")
    h = parse_number(dom.get("h", "0.01"))
    boundary = build_boundary(dom if dom else {"boundary": "zero"}, dim)
    st = get("study") or {}
    eps = tuple(parse_list(st.get("eps", "0.1")))
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValidationError("eps schedule must be positive and strictly decreasing")
    deltas = tuple(parse_list(st["delta"])) if "delta" in st else DEFAULT_DELTAS
    if len(deltas) < 3 or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("delta schedule must be strictly decreasing with >= 3 values")
    ch = parse_number(st["corrector_h"]) if "corrector_h" in st else None
    axes = _axes_from(st["table_axes"], dim) if "table_axes" in st else None
    phase = tuple(parse_list(st["phase"])) if "phase" in st else None
    return ExperimentConfig(
        ensemble=ens, operator=op, lower=lower, upper=upper, h=h, boundary=boundary,
        boundary_tag=(dom.get("boundary", "zero") if dom else "zero"),
        eps_schedule=eps, delta_schedule=deltas, corrector_h=ch,
        corrector_tol=parse_number(st.get("corrector_tol", "1e-8")),
        solver_tol=parse_number(st.get("tol", "1e-8")),
        table_axes=axes, table_path=st.get("table"),
        claimed_tol=parse_number(st.get("claimed_tol", "0.05")),
        table_null=st.get("table_null", "exclude").strip() == "include",
        seed=int(seed if seed is not None else parse_number(st.get("seed", "0"))),
        phase=phase, phase_index=int(parse_number(st.get("phase_index", "0"))),
        output=output or st.get("output", "out"), raw=cp)


# ---------------------------------------------------------------------------
# convergence study

@dataclass
class ConvergenceReport:
    """Errors ``sup |u_eps - u_hom|`` per ``eps`` with table provenance.

    ``rows`` holds ``(eps, error, iterations, wall_time)``.
    """

    rows: list
    table_path: Optional[str]
    table_residuals: tuple
    homogenized: object = field(repr=False, default=None)
    solutions: list = field(repr=False, default_factory=list)

    @property
    def errors(self):
        return np.array([r[1] for r in self.rows])

    @property
    def ratios(self):
        e = self.errors
        return e[:-1] / e[1:]

    def write(self, outdir):
        """Write ``report.csv``, ``loglog.csv``, ``provenance.csv`` and ``timing.csv``.

        All but ``timing.csv`` are deterministic for a fixed configuration.
        """
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "sup_error", "iterations"])
            for eps, err, it, _ in self.rows:
                w.writerow([repr(eps), repr(err), it])
        with open(os.path.join(outdir, "loglog.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["log10_eps", "log10_error"])
            for eps, err, _, _ in self.rows:
                w.writerow([repr(math.log10(eps)), repr(math.log10(err) if err > 0 else -math.inf)])
        with open(os.path.join(outdir, "provenance.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["table", "max_residual", "n_entries"])
            # relative, so that reports do not depend on where they were written
            ref = os.path.relpath(self.table_path, outdir) if self.table_path else ""
            w.writerow([ref, repr(max(self.table_residuals, default=0.0)),
                        len(self.table_residuals)])
        with open(os.path.join(outdir, "timing.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "wall_seconds"])
            for eps, _, _, t in self.rows:
                w.writerow([repr(eps), f"{t:.3f}"])
        return outdir


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, et, exc, tb):
        if exc is not None and isinstance(exc, ArtifactError) and not getattr(
                exc, "_staged", False):
            exc.args = (f"[{self.name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
            exc._staged = True
        return False


def run_convergence_study(config, write=True):
    """Run the study described by ``config`` (an ExperimentConfig or a path).

    Builds (or loads) the effective table at the study phase (from the
    almost periodic part unless ``table_null = include``), solves the
    homogenized problem once and the oscillating problem for every ``eps``,
    and records sup-norm distances. Errors are re-raised with the failing
    stage prefixed to the message.
    """
    cfg = load_config(config) if isinstance(config, (str, os.PathLike)) else config
    op = cfg.operator
    omega = cfg.omega()
    box = Grid(cfg.lower, cfg.upper, cfg.h)
    with _Stage("table"):
        if cfg.table_path and os.path.exists(cfg.table_path):
            table = EffectiveTable.load(cfg.table_path)
        else:
            if cfg.table_axes is None:
                raise ValidationError("study needs table_axes or an existing table file")
            # Fbar only sees the almost periodic part; null parts near the
            # readout point merely slow the delta-limit down
            top = op
            if op.ensemble is not None and not cfg.table_null:
                top = op.with_ensemble(op.ensemble.with_null(None))
            table = EffectiveTable.build(top, cfg.table_axes, omega, cfg.delta_schedule,
                                         h=cfg.corrector_h, tol=cfg.corrector_tol)
        residuals = tuple(e.residual for e in table.entries)
        if max(residuals, default=0.0) > cfg.claimed_tol:
            raise ProvenanceError(
                f"table residual {max(residuals):.3g} exceeds the claimed tolerance "
                f"{cfg.claimed_tol:g}")
    table_path = None
    if write:
        os.makedirs(cfg.output, exist_ok=True)
        table_path = os.path.join(cfg.output, "table.csv")
        table.save(table_path)
    with _Stage("homogenized"):
        u_hom = solve_homogenized(table, box, cfg.boundary, cfg.h, tol=cfg.solver_tol,
                                  lambda_min=op.lambda_min, lambda_max=op.lambda_max)
    rows, sols = [], []
    for eps in cfg.eps_schedule:
        with _Stage(f"eps={eps:g}"):
            t0 = time.perf_counter()
            u = solve_dirichlet(op, omega, eps, box, cfg.boundary, tol=cfg.solver_tol)
            wall = time.perf_counter() - t0
            rows.append((float(eps), sup_distance(u, u_hom), int(u.iterations), wall))
            sols.append(u)
    report = ConvergenceReport(rows, table_path, residuals, u_hom, sols)
    if write:
        report.write(cfg.output)
    return report
