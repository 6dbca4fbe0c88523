import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pdmho.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_SKIPPED, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(c) for c in r] for r in body])


# ----------------------------------------------------------------- spectrum


def test_spectrum_constant(capsys):
    code, out, _ = run(["spectrum", "--builtin", "constant", "--omega", "1", "--grid", "-12", "12", "2400",
                        "--levels", "5"], capsys)
    assert code == EXIT_OK
    header, rows = table(out)
    assert header == ["n", "E_numeric", "E_analytic", "abs_err"]
    np.testing.assert_allclose(rows[:, 1], [0.5, 1.5, 2.5, 3.5, 4.5], atol=1.5e-4)
    np.testing.assert_allclose(rows[:, 3], np.abs(rows[:, 1] - rows[:, 2]), rtol=0, atol=0)


@pytest.mark.parametrize("hamiltonian", ["h1", "h2q", "vonroos"])
def test_spectrum_asinh_log(capsys, hamiltonian):
    code, out, _ = run(["spectrum", "--builtin", "asinh_log", "--param", "alpha=0.1", "--omega", "1",
                        "--hamiltonian", hamiltonian], capsys)
    assert code == EXIT_OK
    _, rows = table(out)
    assert rows.shape == (6, 4)
    assert np.max(rows[:, 3]) <= 1e-3


def test_spectrum_wrong_ordering_shifts_levels(capsys):
    code, out, _ = run(["spectrum", "--builtin", "asinh_log", "--param", "alpha=0.5", "--hamiltonian",
                        "vonroos", "--ordering", "0", "--grid", "-20", "20", "2000"], capsys)
    assert code == EXIT_OK
    _, rows = table(out)
    assert np.max(rows[:, 3]) > 1e-2


def test_spectrum_bounded_range_is_skipped(capsys):
    code, out, _ = run(["spectrum", "--builtin", "rational_cubic", "--param", "lambda=1", "--hamiltonian", "h1",
                        "--grid", "-20", "20", "1000"], capsys)
    assert code == EXIT_SKIPPED
    assert any(ln.startswith("# SKIPPED: q-range") for ln in out.splitlines())
    _, rows = table(out)
    assert np.all(np.isnan(rows[:, 3]))


def test_spectrum_json(capsys):
    code, out, _ = run(["spectrum", "--builtin", "rational_cubic", "--grid", "-20", "20", "500", "--format",
                        "json"], capsys)
    assert code == EXIT_SKIPPED
    payload = json.loads(out)
    assert payload["status"] == "skipped" and "note" in payload
    assert payload["levels"][0]["abs_err"] is None


# ------------------------------------------------------------------- derive


def test_derive_from_Q(capsys):
    code, out, _ = run(["derive", "--from-Q", "1/(1+x^2)"], capsys)
    assert code == EXIT_OK
    header, rows = table(out)
    assert header == ["x", "m", "Q", "q", "V"]
    assert rows.shape == (101, 5)
    x = rows[:, 0]
    np.testing.assert_allclose(rows[:, 1], (1 + x**2) ** -3, rtol=1e-10)
    np.testing.assert_allclose(rows[:, 3], x / np.sqrt(1 + x**2), atol=1e-9)


def test_derive_from_constant_mass(capsys):
    code, out, _ = run(["derive", "--from-m", "1", "--grid", "-3", "3", "13"], capsys)
    assert code == EXIT_OK
    _, rows = table(out)
    np.testing.assert_allclose(rows[:, 2], 1.0, atol=1e-12)
    np.testing.assert_allclose(rows[:, 3], rows[:, 0], atol=1e-12)


def test_derive_from_m_gives_asinh_squared(capsys):
    code, out, _ = run(["derive", "--from-m", "1/(1+x^2)"], capsys)
    assert code == EXIT_OK
    _, rows = table(out)
    i = int(np.argmin(np.abs(rows[:, 0] - 1.0)))
    assert rows[i, 2] == pytest.approx(math.asinh(1.0) ** 2, abs=1e-9)


def test_derive_builtin_prints_closed_forms(capsys):
    code, out, _ = run(["derive", "--builtin", "rational_cubic", "--param", "lambda=1"], capsys)
    assert code == EXIT_OK
    assert "# closed form m(x) = " in out and "# closed form q(x) = " in out


def test_derive_positivity_violation_reports_x(capsys):
    code, _, err = run(["derive", "--from-m", "x"], capsys)
    assert code == EXIT_NUMERIC
    assert "x=" in err


# ------------------------------------------------------------------- verify


def test_verify_all_constant(capsys):
    code, out, _ = run(["verify", "--suite", "all", "--builtin", "constant"], capsys)
    assert code == EXIT_OK
    reports = json.loads(out)
    assert len(reports) == 6 and all(r["passed"] for r in reports)


def test_verify_ladder_asinh_log(capsys):
    code, out, _ = run(["verify", "--suite", "ladder", "--builtin", "asinh_log", "--param", "alpha=0.1"], capsys)
    assert code == EXIT_OK
    (r,) = json.loads(out)
    assert r["estimated_order"] == pytest.approx(2.0, abs=0.1)


def test_verify_wrong_ordering_fails(capsys):
    code, out, err = run(["verify", "--suite", "ladder", "--builtin", "asinh_log", "--param", "alpha=0.1",
                          "--ordering", "0"], capsys)
    assert code == EXIT_NUMERIC
    assert "ladder" in err
    assert json.loads(out)[0]["passed"] is False


def test_verify_skipped_does_not_fail(capsys):
    code, out, _ = run(["verify", "--suite", "isospectral", "--builtin", "rational_cubic", "--sizes", "500",
                        "1000"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)[0]["status"] == "skipped"


def test_verify_table_format(capsys):
    code, out, _ = run(["verify", "--suite", "canonical", "--builtin", "constant", "--format", "table"], capsys)
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("check")


# ------------------------------------------------------------ eigenfunction


def test_eigenfunction_constant(capsys):
    code, out, err = run(["eigenfunction", "--n", "0", "--builtin", "constant"], capsys)
    assert code == EXIT_OK
    header, rows = table(out)
    assert header == ["x", "phi_0_analytic", "phi_0_grid"]
    assert float(err.strip().split("=")[1]) >= 0.99999


def test_eigenfunction_asinh_log(capsys):
    code, _, err = run(["eigenfunction", "--n", "2", "--builtin", "asinh_log", "--param", "alpha=0.1"], capsys)
    assert code == EXIT_OK
    assert float(err.strip().split("=")[1]) >= 0.999


def test_eigenfunction_bounded_is_skipped(capsys):
    code, out, _ = run(["eigenfunction", "--builtin", "rational_cubic", "--grid", "-20", "20", "400"], capsys)
    assert code == EXIT_SKIPPED
    assert "# SKIPPED" in out


# ---------------------------------------------------------------- classical


def test_classical_energy_drift(capsys):
    code, out, _ = run(["classical", "--builtin", "rational_cubic", "--param", "lambda=0.1", "--V", "oscillator",
                        "--x0", "1", "--v0", "0"], capsys)
    assert code == EXIT_OK
    header, rows = table(out)
    assert header == ["t", "x", "v", "energy", "pseudo_momentum"]
    e = rows[:, 3]
    assert np.max(np.abs(e - e[0])) / abs(e[0]) <= 1e-8
    assert rows[-1, 0] == pytest.approx(50.0)


def test_classical_leaving_domain(capsys):
    code, out, err = run(["classical", "--builtin", "power_law", "--x0", "1", "--v0", "-1", "--dt", "0.01",
                          "--T", "5"], capsys)
    assert code == EXIT_NUMERIC
    assert "left the domain" in err
    assert "complete=False" in out


def test_classical_expression_potential(capsys):
    code, out, _ = run(["classical", "--m-expr", "1", "--V-expr", "x^2/2", "--x0", "1", "--v0", "0",
                        "--dt", "0.001", "--steps", "6284", "--format", "json"], capsys)
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["trajectory"][-1]["x"] == pytest.approx(1.0, abs=1e-6)


# -------------------------------------------------------------- exit codes


@pytest.mark.parametrize("argv", [
    [],
    ["spectrum"],
    ["spectrum", "--builtin", "nope"],
    ["spectrum", "--builtin", "constant", "--m-expr", "1"],
    ["spectrum", "--builtin", "constant", "--grid", "1", "-1", "100"],
    ["spectrum", "--builtin", "constant", "--grid", "-1", "1", "8"],
    ["spectrum", "--builtin", "constant", "--param", "lambda"],
    ["spectrum", "--builtin", "constant", "--omega", "-1"],
    ["spectrum", "--m-expr", "1+", "--grid", "-1", "1", "100"],
    ["derive", "--from-Q", "1", "--from-m", "1"],
    ["verify", "--builtin", "constant", "--sizes", "100"],
    ["classical", "--builtin", "constant", "--x0", "0", "--v0", "1", "--dt", "0"],
])
def test_config_errors_exit_1(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    capsys.readouterr()
    assert code == EXIT_CONFIG


def test_output_file_and_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["spectrum", "--builtin", "asinh_log", "--param", "alpha=0.1", "--grid", "-20", "20",
                     "1000", "--output", str(p)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_csv_uses_round_trip_formatting(capsys):
    _, out, _ = run(["derive", "--from-m", "2", "--grid", "0", "1", "4"], capsys)
    line = [ln for ln in out.splitlines() if not ln.startswith("#")][2]
    field = line.split(",")[0]
    assert field == "%.17g" % (1 / 3)
    assert float(field) == 1 / 3


def test_console_entry_points():
    env = dict(os.environ)
    for cmd in (["pdmho"], [sys.executable, "-m", "pdmho"]):
        res = subprocess.run(cmd + ["derive", "--from-m", "1", "--grid", "0", "1", "3"], capture_output=True,
                             text=True, env=env, check=False)
        assert res.returncode == 0, res.stderr
        assert "x,m,Q,q,V" in res.stdout
