import os
import re
import subprocess
import sys

import numpy as np
import pytest

from conftest import ROOT
from wstarhom.ap_core import TrigPolynomial
from wstarhom.cli import main
from wstarhom.corrector import EffectiveTable, make_estimator
from wstarhom.errors import ProvenanceError, TableRangeExceeded, ValidationError
from wstarhom.harness import (
    EffectiveOperator,
    load_config,
    parse_list,
    parse_number,
    run_convergence_study,
    solve_homogenized,
)
from wstarhom.operators import EllipticOperator, pucci
from wstarhom.solver import Grid, apply_scheme

SQ3 = np.sqrt(3.0)


def write_cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


Y_INDEPENDENT = """
[operator]
form = linear_nondiv
lambda_min = 2
lambda_max = 2
coefficient = 2
forcing = 1
[domain]
lower = -1
upper = 1
h = 1/100
boundary = zero
[study]
eps = {eps}
table_axes = -2 : 2 : 5
output = {out}
"""

SIN_STUDY = """
[ensemble]
frequencies = 1
a.constant = 2
a.terms = 1 : 0 : 1
[operator]
form = linear_nondiv
lambda_min = 1
lambda_max = 3
coefficient = a
[domain]
lower = -1
upper = 1
h = 1/100
boundary = affine c0=0 grad=1
[study]
eps = 1/10
corrector_h = 0.01
table_axes = -1 : 1 : 3
claimed_tol = {claimed}
phase = 0
output = {out}
"""


# -- parsing -------------------------------------------------------------------

def test_parse_number():
    assert parse_number("1/80") == 1 / 80
    assert parse_number(" sqrt(2) ") == np.sqrt(2)
    assert parse_number("2*pi") == 2 * np.pi
    assert parse_number("-1e-3") == -1e-3
    for bad in ("__import__('os')", "a + 1", "", "2 ** (", "[1]"):
        with pytest.raises(ValidationError):
            parse_number(bad)
    assert parse_list("1, 1/2, sqrt(4)") == [1.0, 0.5, 2.0]


def test_config_validation(tmp_path):
    with pytest.raises(ValidationError):
        load_config(write_cfg(tmp_path, Y_INDEPENDENT.format(eps="1/10, 1/5", out=tmp_path)))
    with pytest.raises(ValidationError):
        load_config(write_cfg(tmp_path, "[domain]\nh = 0.1\n"))
    with pytest.raises(ValidationError):
        load_config(str(tmp_path / "missing.cfg"))
    bad_bc = Y_INDEPENDENT.format(eps="1/10", out=tmp_path).replace("boundary = zero",
                                                                    "boundary = spline")
    with pytest.raises(ValidationError):
        load_config(write_cfg(tmp_path, bad_bc))


def test_shipped_configs_load():
    for name in ("study_1d.cfg", "effective_1d.cfg", "pucci_2d.cfg"):
        cfg = load_config(os.path.join(ROOT, "configs", name))
        assert cfg.operator.dim in (1, 2)
    cfg = load_config(os.path.join(ROOT, "configs", "study_1d.cfg"))
    assert cfg.eps_schedule == (0.1, 0.05, 0.025, 0.0125)
    assert cfg.operator.form == "bellman_min" and not cfg.table_null


# -- homogenized solves -------------------------------------------------------

def linear_table(slope, axis):
    t = EffectiveTable(1, axes=[axis])
    for m in axis:
        t.add([m], slope * m, 1e-2, 0.0)
    return t


def test_homogenized_linear_kernel():
    t = linear_table(SQ3, np.linspace(-1, 1, 3))
    u = solve_homogenized(t, ((0,), (1,)), lambda x: x, h=0.01)
    assert np.max(np.abs(u.values - u.grid.axes[0])) < 1e-10


def test_homogenized_range_guard():
    t = linear_table(SQ3, np.linspace(-1, 1, 3))
    with pytest.raises(TableRangeExceeded):
        solve_homogenized(t, ((0,), (1,)), lambda x: 5 * x ** 2, h=0.1)


@pytest.fixture(scope="module")
def pucci_table():
    ax = np.linspace(-3, 3, 7)
    t = EffectiveTable(2, axes=[ax, ax, ax])
    for a in ax:
        for b in ax:
            for c in ax:
                t.add([[a, b], [b, c]], pucci("plus", 1, 2, [[a, b], [b, c]]), 1e-2, 0.0)
    return t


def test_homogenized_pucci_quadratic(pucci_table):
    # D^2 q = diag(1, -2): 2 * 1 - 1 * 2 = 0
    q = lambda p: 0.5 * p[:, 0] ** 2 - p[:, 1] ** 2  # noqa: E731
    g = Grid((-1, -1), (1, 1), 0.125)
    op = EffectiveOperator(pucci_table, 1.0, 2.0)
    X = g.nodes().reshape(-1, 2)
    assert np.max(np.abs(apply_scheme(op, None, 1.0, g, q(X)))) < 1e-12
    u = solve_homogenized(pucci_table, g, q, h=None, lambda_min=1, lambda_max=2,
                          scheme="newton", tol=1e-10)
    assert np.max(np.abs(u.values.ravel() - q(X))) < 1e-9


def test_estimator_matches_precomputed():
    op = EllipticOperator.pucci("minus", 1, 1.0, 2.0)
    ax = np.linspace(-3, 3, 7)
    full = EffectiveTable.build(op, [ax])
    lazy = EffectiveTable(1, axes=[ax], estimator=make_estimator(op))
    g = lambda x: 0.8 * x ** 2 - x  # noqa: E731
    a = solve_homogenized(full, ((-1,), (1,)), g, h=0.05)
    b = solve_homogenized(lazy, ((-1,), (1,)), g, h=0.05)
    assert np.max(np.abs(a.values - b.values)) < 1e-6
    assert len(lazy) <= len(full)


# -- studies -------------------------------------------------------------------

def test_y_independent_study(tmp_path):
    cfg = load_config(write_cfg(tmp_path, Y_INDEPENDENT.format(eps="1/10, 1/20",
                                                               out=tmp_path / "o")))
    rep = run_convergence_study(cfg)
    assert np.all(rep.errors <= 2 * cfg.solver_tol)


def test_single_eps_report(tmp_path):
    cfg = load_config(write_cfg(tmp_path, Y_INDEPENDENT.format(eps="1/10", out=tmp_path / "o")))
    rep = run_convergence_study(cfg)
    assert len(rep.rows) == 1 and rep.ratios.size == 0
    rows = (tmp_path / "o" / "report.csv").read_text().splitlines()
    assert rows[0] == "eps,sup_error,iterations" and len(rows) == 2


def test_study_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        run_convergence_study(load_config(write_cfg(
            tmp_path, SIN_STUDY.format(claimed=0.05, out=out), f"c{k}.cfg")))
        outs.append(out)
    for name in ("report.csv", "loglog.csv", "provenance.csv", "table.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert (outs[0] / "timing.csv").exists()


def test_study_reuses_saved_table(tmp_path):
    out = tmp_path / "a"
    rep = run_convergence_study(load_config(write_cfg(
        tmp_path, SIN_STUDY.format(claimed=0.05, out=out))))
    text = SIN_STUDY.format(claimed=0.05, out=tmp_path / "b") + f"table = {out}/table.csv\n"
    again = run_convergence_study(load_config(write_cfg(tmp_path, text, "d.cfg")))
    np.testing.assert_array_equal(rep.errors, again.errors)
    prov = (out / "provenance.csv").read_text().splitlines()
    assert prov[0] == "table,max_residual,n_entries" and prov[1].endswith(",3")


def test_provenance_refused(tmp_path):
    cfg = load_config(write_cfg(tmp_path, SIN_STUDY.format(claimed=1e-12, out=tmp_path)))
    with pytest.raises(ProvenanceError, match=r"^\[table\]"):
        run_convergence_study(cfg, write=False)


# -- command line ----------------------------------------------------------------

def test_cli_effective(tmp_path, capsys):
    code = main(["effective", "--config", os.path.join(ROOT, "configs", "effective_1d.cfg"),
                 "--out", str(tmp_path)])
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert code == 0
    m = re.fullmatch(r"Fbar\(1\) = (\d\.\d{4}) \(residual (\S+)\)", line)
    assert m, line
    assert abs(float(m.group(1)) - SQ3) < 0.02 * SQ3


def test_cli_errors(tmp_path, capsys):
    assert main(["frobnicate", "--config", "x.cfg"]) == 1
    assert main(["effective"]) == 1
    bad = write_cfg(tmp_path, Y_INDEPENDENT.format(eps="1/10, 1/5", out=tmp_path))
    assert main(["study", "--config", bad]) == 1
    err = capsys.readouterr().err
    assert "eps schedule" in err
    slow = write_cfg(tmp_path, "[function]\ndim = 1\nterms = 1 : 1 : 0\n"
                               "[meanvalue]\nradii = 1, 2, 3\ntol = 1e-12\n", "m.cfg")
    assert main(["meanvalue", "--config", slow, "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("cmd", ["meanvalue", "seminorm", "decompose"])
def test_cli_function_commands(tmp_path, cmd):
    cfg = os.path.join(ROOT, "configs", "function_1d.cfg")
    assert main([cmd, "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    assert any(p.suffix == ".csv" for p in tmp_path.iterdir())
    if cmd == "decompose":
        ap = TrigPolynomial.from_text((tmp_path / "ap_part.txt").read_text())
        assert ap.n_terms == 2 and abs(ap.constant) < 1e-2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "wstarhom", "birkhoff", "--config",
                        os.path.join(ROOT, "configs", "effective_1d.cfg"), "--out",
                        str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "birkhoff.csv").exists()
