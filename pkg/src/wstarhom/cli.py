"""Command-line interface: ``wstarhom <subcommand> --config FILE``.

Every subcommand reads an INI file, writes CSV files to the output
directory (``--out``, else ``output`` in ``[study]``, else ``out``) and prints
one summary line. Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import harness as H
from .ap_core import besicovitch_seminorm, extract_ap_component, mean_value_numeric
from .corrector import (
    EffectiveTable,
    estimate_effective,
    omega_independence_check,
)
from .errors import NumericalFailure, ValidationError
from .fields import birkhoff_compare, ergodicity_residual
from .operators import ellipticity_audit, modulus_audit
from .solver import solve_dirichlet

CONTRACTS = {
    "meanvalue": "[function] + [meanvalue] radii, tol -> meanvalue.csv (radius, average)",
    "seminorm": "[function] + [seminorm] p, lengths, tol[, subtract = extracted with "
                "[decompose] settings] -> seminorm.csv (length, average)",
    "decompose": "[function] + [decompose] base, orders, tol, sup_lower, sup_upper, "
                 "sup_points -> coefficients.csv (frequency..., cos, sin), ap_part.txt",
    "birkhoff": "[ensemble] + [birkhoff] channel, n_phases, R, tol -> birkhoff.csv "
                "(phase, spatial_mean, ensemble_mean)",
    "ergodicity": "[ensemble] + [ergodicity] channel, t -> ergodicity.csv (t, residual)",
    "audit": "[ensemble] [operator] + [audit] n_samples, y_box, norm -> audit.csv "
             "(check, value)",
    "solve": "[ensemble] [operator] [domain] + [solve] eps, scheme -> solution.csv",
    "effective": "[ensemble] [operator] [study] + [effective] M, h, tol -> effective.csv "
                 "(table columns)",
    "omega-check": "[ensemble] [operator] [study] + [omega] M, n_phases, h -> "
                   "omega_check.csv (phase_index, Fbar, residual)",
    "study": "[ensemble] [operator] [domain] [study] -> report.csv, loglog.csv, "
             "provenance.csv, timing.csv, table.csv",
}


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def _num(sec, key, default):
    return H.parse_number(sec.get(key, str(default)))


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _short(x):
    """``3e-3`` style for residuals."""
    mant, _, exp = f"{x:.0e}".partition("e")
    return f"{mant}e{int(exp)}"


def _omega(cfg):
    return cfg.omega()


def _bases(sec):
    return np.array(H._parse_rows(sec.get("base", "1")), dtype=float)


def cmd_meanvalue(cp, out, seed):
    f = H.build_function(_section(cp, "function"))
    sec = _section(cp, "meanvalue")
    est = mean_value_numeric(f, H.parse_list(sec.get("radii", "1e3, 1e4, 1e5")),
                             tol=_num(sec, "tol", 1e-3))
    _write(os.path.join(out, "meanvalue.csv"), ["radius", "average"],
           zip(est.radii_used, est.averages))
    return f"mean = {est.value:.6g} (tail spread {est.tail_spread:.2g})"


def _extracted(cp, f):
    sec = _section(cp, "decompose")
    orders = [int(v) for v in H.parse_list(sec.get("orders", "16, 32, 64, 128, 256"))]
    lo, hi = _num(sec, "sup_lower", -20), _num(sec, "sup_upper", 20)
    grid = np.linspace(lo, hi, int(_num(sec, "sup_points", 4001)))
    return extract_ap_component(f, _bases(sec), orders, sup_grid=grid,
                                tol=_num(sec, "tol", 1e-2), full_output=True)


def cmd_seminorm(cp, out, seed):
    f = H.build_function(_section(cp, "function"))
    sec = _section(cp, "seminorm")
    g = f
    if sec.get("subtract", "none").strip() == "extracted":
        ap, _ = _extracted(cp, f)
        g = lambda y: f(y) - ap(y)  # noqa: E731
    p = _num(sec, "p", 2)
    lengths = H.parse_list(sec.get("lengths", "250, 500, 1000"))
    tol = sec.get("tol", "none").strip()
    est = besicovitch_seminorm(g, p, lengths, tol=None if tol == "none" else H.parse_number(tol),
                               dim=f.dim)
    _write(os.path.join(out, "seminorm.csv"), ["length", "average"],
           zip(est.radii_used, est.averages))
    return f"seminorm(p={p:g}) = {est.value:.4g} at L = {lengths[-1]:g}"


def cmd_decompose(cp, out, seed):
    f = H.build_function(_section(cp, "function"))
    ap, info = _extracted(cp, f)
    rows = [list(fr) + [a, b] for fr, a, b in zip(ap.frequencies.tolist(),
                                                  ap.cos_coeffs.tolist(), ap.sin_coeffs.tolist())]
    header = [f"freq{i + 1}" for i in range(ap.dim)] + ["cos", "sin"]
    _write(os.path.join(out, "coefficients.csv"), header,
           [[0.0] * ap.dim + [ap.constant, 0.0]] + rows)
    with open(os.path.join(out, "ap_part.txt"), "w") as fh:
        fh.write(ap.to_text())
    return (f"extracted {ap.n_terms} terms at order {info['order']} "
            f"(last deviation {info['deviations'][-1]:.2g})")


def cmd_birkhoff(cp, out, seed):
    ens = H.build_ensemble(_section(cp, "ensemble") or None)
    if ens is None:
        raise ValidationError("birkhoff needs an [ensemble] section")
    sec = _section(cp, "birkhoff")
    res = birkhoff_compare(ens, sec.get("channel", "a").strip(),
                           int(_num(sec, "n_phases", 5)), _num(sec, "R", 1e3), seed=seed,
                           tol=_num(sec, "tol", 1e-2))
    _write(os.path.join(out, "birkhoff.csv"), ["phase", "spatial_mean", "ensemble_mean"],
           [(i, float(m), float(res.ensemble_mean)) for i, m in enumerate(res.spatial_means)])
    return f"max gap = {res.max_gap:.3g} (ensemble mean {res.ensemble_mean:.6g})"


def cmd_ergodicity(cp, out, seed):
    ens = H.build_ensemble(_section(cp, "ensemble") or None)
    if ens is None:
        raise ValidationError("ergodicity needs an [ensemble] section")
    sec = _section(cp, "ergodicity")
    ch = sec.get("channel", "a").strip()
    if ch not in ens.profiles:
        raise ValidationError(f"unknown channel {ch!r}")
    ts = H.parse_list(sec.get("t", "10, 30, 100"))
    last, res = ergodicity_residual(ens, ens.profiles[ch], ts, full_output=True)
    _write(os.path.join(out, "ergodicity.csv"), ["t", "residual"], zip(ts, res))
    return f"ergodicity residual = {last:.3g} at t = {ts[-1]:g}"


def cmd_audit(cp, out, seed, cfg):
    sec = _section(cp, "audit")
    kw = dict(n_samples=int(_num(sec, "n_samples", 10000)), seed=seed,
              y_box=_num(sec, "y_box", 50), norm=sec.get("norm", "trace").strip())
    om = _omega(cfg)
    lo, up = ellipticity_audit(cfg.operator, om, **kw)
    worst = modulus_audit(cfg.operator, om, **kw)
    _write(os.path.join(out, "audit.csv"), ["check", "value"],
           [("lower_margin", lo), ("upper_margin", up), ("modulus_ratio", worst)])
    return f"ellipticity margins ({lo:.3g}, {up:.3g}); modulus ratio {worst:.3g}"


def cmd_solve(cp, out, seed, cfg):
    sec = _section(cp, "solve")
    eps = _num(sec, "eps", cfg.eps_schedule[-1])
    sol = solve_dirichlet(cfg.operator, _omega(cfg), eps, (cfg.lower, cfg.upper),
                          cfg.boundary, h=cfg.h, tol=cfg.solver_tol,
                          scheme=sec.get("scheme", "auto").strip())
    sol.to_csv(os.path.join(out, "solution.csv"))
    return (f"solved on {'x'.join(map(str, sol.grid.shape))} nodes in {sol.iterations} "
            f"iterations (residual {sol.residual_norm:.2g}, {sol.scheme})")


def _matrix(sec, dim):
    e = H.parse_list(sec.get("M", "1"))
    if dim == 1:
        return np.array([[e[0]]]), f"{e[0]:g}"
    if len(e) != 3:
        raise ValidationError("M needs three entries m11, m12, m22 in two dimensions")
    return np.array([[e[0], e[1]], [e[1], e[2]]]), ",".join(f"{v:g}" for v in e)


def cmd_effective(cp, out, seed, cfg):
    sec = _section(cp, "effective")
    M, label = _matrix(sec, cfg.operator.dim)
    h = _num(sec, "h", cfg.corrector_h) if (sec.get("h") or cfg.corrector_h) else None
    tol = _num(sec, "tol", cfg.corrector_tol)
    om = _omega(cfg)
    est = estimate_effective(cfg.operator, om, M, cfg.delta_schedule, h=h, tol=tol)
    table = EffectiveTable(cfg.operator.dim, operator_id=repr(cfg.operator),
                           omega_label=repr(om))
    table.add(M, est.value, min(est.deltas), est.residual)
    table.save(os.path.join(out, "effective.csv"))
    return f"Fbar({label}) = {est.value:.4f} (residual {_short(est.residual)})"


def cmd_omega_check(cp, out, seed, cfg):
    sec = _section(cp, "omega")
    M, label = _matrix(sec, cfg.operator.dim)
    h = _num(sec, "h", cfg.corrector_h) if (sec.get("h") or cfg.corrector_h) else None
    spread, ests = omega_independence_check(
        cfg.operator, M, cfg.delta_schedule, int(_num(sec, "n_phases", 5)), seed, h=h,
        tol=cfg.corrector_tol, full_output=True)
    _write(os.path.join(out, "omega_check.csv"), ["phase_index", "Fbar", "residual"],
           [(i, e.value, e.residual) for i, e in enumerate(ests)])
    return f"spread of Fbar({label}) over {len(ests)} phases = {spread:.3g}"


def cmd_study(cp, out, seed, cfg):
    cfg.output = out
    rep = H.run_convergence_study(cfg)
    ratios = ", ".join(f"{r:.3g}" for r in rep.ratios)
    return f"errors {', '.join(f'{e:.4g}' for e in rep.errors)}; ratios [{ratios}]"


_PLAIN = {"meanvalue": cmd_meanvalue, "seminorm": cmd_seminorm, "decompose": cmd_decompose,
          "birkhoff": cmd_birkhoff, "ergodicity": cmd_ergodicity}
_FULL = {"audit": cmd_audit, "solve": cmd_solve, "effective": cmd_effective,
         "omega-check": cmd_omega_check, "study": cmd_study}


def build_parser():
    p = _Parser(prog="wstarhom", description="Numerical homogenization laboratory.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, contract in CONTRACTS.items():
        s = sub.add_parser(name, help=contract, description=contract)
        s.add_argument("--config", required=True, help="INI experiment file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="overrides the configured seed")
        s.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return p


def main(argv=None):
    """Run the CLI; returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        cmd = next((a for a in argv if a in CONTRACTS), None)
        print(f"usage error: {exc}", file=sys.stderr)
        if cmd:
            print(f"{cmd}: {CONTRACTS[cmd]}", file=sys.stderr)
        else:
            print("subcommands: " + ", ".join(CONTRACTS), file=sys.stderr)
        return 1
    if args.command is None:
        print("subcommands: " + ", ".join(CONTRACTS), file=sys.stderr)
        return 1
    try:
        cp = H.read_ini(args.config)
        study = _section(cp, "study")
        seed = args.seed if args.seed is not None else int(H.parse_number(study.get("seed", "0")))
        out = args.out or study.get("output", "out")
        if args.command in _PLAIN:
            os.makedirs(out, exist_ok=True)
            line = _PLAIN[args.command](cp, out, seed)
        else:
            cfg = H.load_config(args.config, seed=seed, output=out)
            os.makedirs(out, exist_ok=True)
            line = _FULL[args.command](cp, out, seed, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
