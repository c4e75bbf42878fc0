"""The certify command: exit codes, reports, tables and config handling."""
import csv
import json
import os
import subprocess
import sys

import pytest

from conftest import CONFIGS
from ulamcert.certify import parse_certificate
from ulamcert.cli import (EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USER, TABLE_COLUMNS, load_config, main,
                          parse_delta, read_table)
from ulamcert.errors import ConfigError, ParseError
from ulamcert.rigor.expr import parse_expr

LANFORD = os.path.join(CONFIGS, "lanford.ini")
ESCAPE = os.path.join(CONFIGS, "escape.ini")


def write(tmp_path, text, name="job.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def lanford_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("lanford")
    out, table = d / "report.json", d / "table.csv"
    code = main(["mixing", "--config", LANFORD, "--delta", "2^-10", "--out", str(out), "--table", str(table)])
    return code, out.read_text(), table


def test_mixing_conclusive(lanford_run):
    code, text, _ = lanford_run
    assert code == EXIT_OK
    doc = parse_certificate(text)
    assert doc["conclusive"] and doc["mode"] == "mixing"
    assert doc["rho"].hi < 1
    assert doc["ly_provenance"] == "user_supplied"
    assert doc["provenance"]["tool"] == "ulamcert"
    assert float(doc["density"]["l1_error"][1]) > 0
    assert [t["h"] for t in doc["tables"]] == [2 * doc["n1"], 4 * doc["n1"], 6 * doc["n1"], 8 * doc["n1"]]


def test_table_csv(lanford_run):
    _, text, table = lanford_run
    rows = read_table(table)
    doc = json.loads(text)
    assert len(rows) == 4
    for row, t in zip(rows, doc["tables"]):
        assert row[0] == t["h"]
        assert row[1] == float(t["strong"][0][1]) and row[4] == float(t["weak"][1][1])


def test_table_json(tmp_path, capsys):
    path = tmp_path / "t.json"
    code, out, _ = run(capsys, "escape", "--config", ESCAPE, "--delta", "2^-10", "--table", str(path))
    assert code == EXIT_OK
    assert json.loads(path.read_text())["tables"] == json.loads(out)["tables"]


def test_escape_report(capsys):
    code, out, err = run(capsys, "escape", "--config", ESCAPE, "--delta", "2^-10")
    assert code == EXIT_OK
    doc = parse_certificate(out)
    assert doc["escape_rate"].lo > 0
    assert doc["hole"] == ["0.4375", "0.5625"]
    assert "escape rate >=" in err and "wall time" in err
    assert "wall" not in out


def test_inconclusive_exit_2(capsys):
    code, out, err = run(capsys, "mixing", "--config", LANFORD, "--delta", "2^-8")
    assert code == EXIT_INCONCLUSIVE
    doc = json.loads(out)
    assert doc["conclusive"] is False
    assert err.startswith("inconclusive")


def test_mode_hole_rules(capsys):
    assert run(capsys, "mixing", "--config", ESCAPE, "--delta", "2^-6")[0] == EXIT_USER
    assert run(capsys, "escape", "--config", LANFORD, "--delta", "2^-6")[0] == EXIT_USER


def test_misaligned_hole(tmp_path, capsys):
    text = open(ESCAPE).read().replace("hole = 7/16, 9/16", "hole = 1/3, 2/3")
    code, _, err = run(capsys, "escape", "--config", write(tmp_path, text), "--delta", "2^-4")
    assert code == EXIT_USER
    assert "nearest aligned hole" in err


def test_full_hole(tmp_path, capsys):
    text = open(ESCAPE).read().replace("hole = 7/16, 9/16", "hole = 0, 1")
    code, out, _ = run(capsys, "escape", "--config", write(tmp_path, text), "--delta", "2^-10")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["n1"] == 1 and float(doc["lambda2"][1]) == 0.0


def test_identity_map_inconclusive(tmp_path, capsys):
    text = "[map]\nmod1 = x\n[discretization]\ndelta = 2^-6\n"
    code, out, _ = run(capsys, "mixing", "--config", write(tmp_path, text))
    assert code == EXIT_INCONCLUSIVE
    assert json.loads(out)["reason"].startswith(("NotExpandingError", "ExpansionTooWeak"))


def test_parse_error_caret(tmp_path, capsys):
    formula = "2*x + )"
    with pytest.raises(ParseError) as info:
        parse_expr(formula)
    pos = info.value.position
    code, _, err = run(capsys, "mixing", "--config", write(tmp_path, f"[map]\nmod1 = {formula}\n"))
    assert code == EXIT_USER
    lines = err.splitlines()
    caret = next(i for i, line in enumerate(lines) if line.strip() == "^")
    assert lines[caret - 1].strip() == formula
    assert lines[caret].index("^") - lines[caret - 1].index(formula[0]) == pos - 1
    assert f"position {pos}" in err


def test_empty_steps_header_only(tmp_path, capsys):
    text = open(ESCAPE).read().replace("table_steps = 2, 4, 6, 8", "table_steps =")
    table = tmp_path / "t.csv"
    code, _, _ = run(capsys, "escape", "--config", write(tmp_path, text), "--delta", "2^-10",
                     "--table", str(table))
    assert code == EXIT_OK
    assert table.read_text() == ",".join(TABLE_COLUMNS) + "\n"


def test_trace_and_density_files(tmp_path, capsys):
    trace, dens = tmp_path / "trace.csv", tmp_path / "f.csv"
    text = open(LANFORD).read().replace("density = yes", f"density = {dens}\ntrace = {trace}")
    code, _, _ = run(capsys, "mixing", "--config", write(tmp_path, text), "--delta", "2^-10")
    assert code == EXIT_OK
    with open(trace) as fh:
        assert next(csv.reader(fh)) == ["n", "lambda2_upper", "err_component"]
    with open(dens) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x_mid", "density"] and len(rows) == 1025


def test_missing_config(capsys, tmp_path):
    assert run(capsys, "mixing", "--config", str(tmp_path / "nope.ini"))[0] == EXIT_USER


@pytest.mark.parametrize("bad", ["1/3", "0", "2^-0", "abc"])
def test_bad_delta(bad):
    with pytest.raises(ConfigError):
        parse_delta(bad)


def test_parse_delta_forms():
    assert parse_delta("2^-13") == 8192
    assert parse_delta("1/1024") == 1024


@pytest.mark.parametrize("text", [
    "[map]\n",
    "[map]\nmod1 = 2*x\nlinear_mod1 = 2\n",
    "[map]\nmod1 = 2*x\n[bogus]\n",
    "[map]\nmod1 = 2*x\n[certification]\nly = guess\n",
    "[map]\nmod1 = 2*x\n[certification]\nly = user\nly_A = 1\n",
    "[map]\nmod1 = 2*x\n[certification]\nlambda2_target = 1.5\n",
    "[map]\nbranches = 0 1/2 2*x\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        load_config(text)


def test_overrides_recorded():
    cfg = load_config(open(LANFORD).read(), {"delta": "2^-9", "n_max": 12, "lambda2_target": None})
    assert cfg.k == 512 and cfg.n_max == 12
    assert cfg.overrides == {"delta": "2^-9", "n_max": "12"}


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "ulamcert", "escape", "--config", ESCAPE, "--delta", "2^-10"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["conclusive"] is True


def test_published_table_export(tmp_path):
    import published as P
    from ulamcert.certify import certificate_dict, power_table
    from ulamcert.cli import Report, export_table

    ly, _, dc = P.build("lanford")
    rep = Report(certificate_dict(dc, ly, power_table(dc.M, (2, 4, 6, 8), dc.n1)), EXIT_OK)
    export_table(rep, "csv", tmp_path / "t.csv")
    rows = read_table(tmp_path / "t.csv")
    assert [r[0] for r in rows] == [36, 72, 108, 144]
    for row in rows:
        assert all(P.sig3(g, x) for g, x in zip(row[1:], P.TABLES["lanford"][row[0]]))
    export_table(rep, "json", tmp_path / "t.json")
    assert json.loads((tmp_path / "t.json").read_text())["tables"] == rep.doc["tables"]
    with pytest.raises(OSError) as info:
        export_table(rep, "csv", tmp_path / "missing" / "t.csv")
    assert "missing" in str(info.value)
