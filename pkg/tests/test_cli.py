import csv
import io
import json
import math

import numpy as np
import pytest

from kahlerqch import scalar as sf
from kahlerqch.cli import SAMPLES_ENV, parse_expr
from kahlerqch.errors import ConfigError

from conftest import CONFIGS


def write_config(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- alpha -----------------------------------------------------------------------------


def test_alpha_tan_branch(cli):
    code, out, _ = cli("alpha", "--D", 2, "--branch", "tan")
    assert code == 0
    assert "2*tan(z)" in out
    fields = dict(line.split(None, 1) for line in out.splitlines() if line.startswith(("a ", "variant")))
    assert fields["variant"].strip() == "tan" and fields["a"].strip() == "1"


def test_alpha_semi_note(cli):
    code, out, _ = cli("alpha", "--D", 0)
    assert code == 0 and "semi" in out and "note" in out


def test_alpha_branch_mismatch(cli):
    code, _, err = cli("alpha", "--D", 2, "--branch", "coth")
    assert code == 2 and "coth" in err


def test_missing_subcommand(cli):
    assert cli()[0] == 2


# -- build-verify ----------------------------------------------------------------------


def test_build_verify_passes(cli, tmp_path):
    rep = tmp_path / "r.json"
    code, out, _ = cli("build-verify", CONFIGS / "tan_const.ini", "--samples", 20, "--report", rep)
    assert code == 0
    d = json.loads(rep.read_text())
    assert d["pass"] is True and d["samples"] == 20
    assert "PASS  kahler" in out


def test_sign_flipped_config_fails(cli):
    code, out, err = cli("build-verify", CONFIGS / "tan_l2n2_flipped.ini", "--samples", 20)
    assert code == 1
    d = json.loads(out)
    failing = {c["name"] for c in d["checks"] if not c["pass"]}
    assert "structure_eq_dtheta3" in failing
    assert "FAIL  structure_eq_dtheta3" in err


def test_mutation_flag_fails(cli):
    code, out, _ = cli("build-verify", CONFIGS / "tan_const.ini", "--samples", 10, "--mutate", "dy")
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_missing_field_is_config_error(cli, tmp_path):
    cfg = write_config(tmp_path, "[surface]\nfamily = tan\na = 1\nh = 1\n")
    code, _, err = cli("build-verify", cfg)
    assert code == 2 and "'H'" in err


def test_rejection_exit_code(cli, tmp_path):
    cfg = write_config(tmp_path, "[surface]\nfamily = tan\na = 1\nh = 1\nH = 1/sqrt(2)\nz = -0.2, 0.5\n")
    code, _, err = cli("build-verify", cfg)
    assert code == 3 and "rejected" in err


def test_unreadable_config(cli, tmp_path):
    assert cli("build-verify", tmp_path / "nope.ini")[0] == 2


def test_reports_are_byte_identical(cli, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli("build-verify", CONFIGS / "coth_manufactured.ini", "--samples", 15, "--report", a)
    cli("build-verify", CONFIGS / "coth_manufactured.ini", "--samples", 15, "--report", b)
    assert a.read_bytes() == b.read_bytes()


def test_samples_env_var(cli, monkeypatch, tmp_path):
    cfg = write_config(tmp_path, "[surface]\nfamily = tan\na = 1\nh = 1\nH = 1/sqrt(2)\nz = 0.1, 0.7\n")
    monkeypatch.setenv(SAMPLES_ENV, "7")
    code, out, _ = cli("build-verify", cfg)
    assert code == 0 and json.loads(out)["samples"] == 7
    # the command-line flag and an explicit [verify] samples both win over the environment
    assert json.loads(cli("build-verify", cfg, "--samples", 4)[1])["samples"] == 4
    assert json.loads(cli("build-verify", CONFIGS / "tan_const.ini")[1])["samples"] == 100


# -- pde -------------------------------------------------------------------------------


def test_pde_constant_root(cli, tmp_path):
    sol, rep = tmp_path / "u.csv", tmp_path / "r.json"
    code, out, _ = cli("pde", CONFIGS / "tan_const.ini", "--csv", sol, "--report", rep)
    assert code == 0 and "constant root" in out
    d = json.loads(rep.read_text())
    assert d["iterations"] <= 2 and d["residual"] <= 1e-12
    u = np.array([float(r["u"]) for r in rows(sol.read_text())])
    np.testing.assert_allclose(u, math.log(1 / math.sqrt(2)), atol=1e-12)


def test_pde_divergence(cli, tmp_path):
    rep = tmp_path / "r.json"
    code, _, err = cli("pde", CONFIGS / "pde_stiff_coth.ini", "--report", rep)
    assert code == 4 and "solver failed" in err
    assert len(json.loads(rep.read_text())["residual_history"]) >= 2


def test_pde_manufactured(cli, tmp_path):
    cfg = write_config(tmp_path, "[surface]\nfamily = tanh\na = 1\n[pde]\nx = 0, pi\ny = 0, pi\n"
                                 "manufactured = sin(x)*sin(y)\nsizes = 17, 33\n")
    rep = tmp_path / "r.json"
    code, out, _ = cli("pde", cfg, "--manufactured", "--report", rep)
    assert code == 0 and "order:" in out
    (order,) = json.loads(rep.read_text())["convergence"]["orders"]
    assert abs(order - 2.0) < 0.1


def test_pde_manufactured_requires_expression(cli):
    assert cli("pde", CONFIGS / "tan_const.ini", "--manufactured")[0] == 2


# -- sample ----------------------------------------------------------------------------


def test_sample_calabi_scalar_curvature(cli):
    # constant alpha = c over a flat base: tau = -6 c^2
    code, out, _ = cli("sample", CONFIGS / "calabi.ini", "--fields", "tau", "--grid", 2)
    assert code == 0
    r = rows(out)
    assert len(r) == 16
    np.testing.assert_allclose([float(x["tau"]) for x in r], -6.0, atol=1e-10)


def test_sample_tan_alpha(cli, tmp_path):
    out_path = tmp_path / "s.csv"
    code, _, _ = cli("sample", CONFIGS / "tan_const.ini", "--fields", "alpha,beta", "--grid", "1,1,5,1",
                     "--out", out_path)
    assert code == 0
    r = rows(out_path.read_text())
    z = np.array([float(x["z"]) for x in r])
    np.testing.assert_allclose([float(x["alpha"]) for x in r], 2 * np.tan(z), rtol=1e-14)
    np.testing.assert_allclose([float(x["beta"]) for x in r], np.sin(2 * z), rtol=1e-14)


def test_sample_unknown_field(cli):
    code, _, err = cli("sample", CONFIGS / "tan_const.ini", "--fields", "gamma5")
    assert code == 2 and "gamma5" in err and "available:" in err and "tau" in err


def test_sample_bad_grid(cli):
    assert cli("sample", CONFIGS / "tan_const.ini", "--fields", "alpha", "--grid", "1,2")[0] == 2


# -- expressions -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, want",
    [
        ("x^2 + 1", lambda x, y: x**2 + 1),
        ("2*x**3 - y", lambda x, y: 2 * x**3 - y),
        ("exp(-(x^2+y^2)/10)", lambda x, y: np.exp(-(x**2 + y**2) / 10)),
        ("sqrt(2)*sin(pi*x)", lambda x, y: np.sqrt(2) * np.sin(np.pi * x)),
    ],
)
def test_parse_expr(text, want):
    pts = sf.ChartPoint(np.array([0.3, -0.7]), np.array([0.1, 0.4]))
    np.testing.assert_allclose(sf.evaluate(parse_expr(text), pts), want(pts.x, pts.y), rtol=1e-14)


def test_parse_expr_params():
    f = parse_expr("k*x", {"k": 3.0})
    assert float(sf.evaluate(f, sf.ChartPoint(2.0))) == 6.0


@pytest.mark.parametrize("text", ["__import__('os')", "x.real", "foo(x)", "x +", "[x]"])
def test_parse_expr_rejects(text):
    with pytest.raises(ConfigError):
        parse_expr(text)
