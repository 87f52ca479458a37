import json
import math
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaction import cli
from qaction.errors import ConfigError


def _cfg(**entries):
    return cli.RunConfig.from_mapping({k.replace("__", "."): str(v) for k, v in entries.items()})


def test_config_grammar():
    text = '# comment\npotential = "builtin:harmonic_1d"\n\nparams.omega = 2\nn_max = 3\n'
    entries = cli.parse_config_text(text)
    assert entries == {"potential": "builtin:harmonic_1d", "params.omega": "2", "n_max": "3"}
    cfg = cli.RunConfig.from_mapping(entries)
    assert cfg.params == (("omega", 2.0),) and cfg.n_max == 3


@pytest.mark.parametrize("text, key", [
    ("layercount = 5", "layercount"),
    ("potential = builtin:harmonic_1d\nn_max = two", "n_max"),
    ("engine = shooting", "engine"),
    ("params.k = abc", "params.k"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        cli.RunConfig.from_mapping(cli.parse_config_text(text))
    assert err.value.key == key
    assert key in str(err.value)


def test_config_structure_errors():
    with pytest.raises(ConfigError):
        cli.parse_config_text("no equals sign")
    with pytest.raises(ConfigError):
        cli.parse_config_text("l = 1\nl = 2")


def test_solve_harmonic():
    report, code = cli.cmd_solve(_cfg(potential="builtin:harmonic_1d", n_max=3))
    assert code == 0
    col = report.columns.index("E_present")
    assert [r[col] for r in report.rows] == pytest.approx([0.5, 1.5, 2.5, 3.5], abs=1e-10)
    i, j, k = (report.columns.index(c) for c in ("E_present", "E_oracle", "abs_delta"))
    for r in report.rows:
        assert r[k] == abs(r[i] - r[j])
    assert [r[0] for r in report.rows] == sorted(r[0] for r in report.rows)


def test_solve_both_engines_and_partial_failure():
    cfg = _cfg(potential="builtin:woods_saxon", params__V0=1, params__r0=2, params__a=0.5, l=0,
               n_max=1, engine="both", oracle="none")
    report, code = cli.cmd_solve(cfg)
    assert code == 2
    engines = [r[2] for r in report.rows]
    assert engines == ["tmatrix", "riccati", "tmatrix", "riccati"]
    status = report.columns.index("status")
    assert report.rows[0][status] == "ok" and report.rows[3][status].startswith("failed")


def test_scan_examples():
    report, code = cli.cmd_scan(_cfg(potential="builtin:harmonic_1d"), [0.5, 1.0, 1.5])
    J = [r[2] for r in report.rows]
    assert code == 0
    assert J[0] == pytest.approx(1, abs=1e-9) and J[2] == pytest.approx(2, abs=1e-9)
    assert 1 < J[1] < 2
    assert report.metadata["monotone"] == {"riccati": True}
    well, _ = cli.cmd_scan(_cfg(potential="builtin:infinite_well"), [2.25 * math.pi**2 / 2])
    assert well.rows[0][2] == pytest.approx(1.5, abs=1e-9)


def test_scan_grid_from_config():
    cfg = _cfg(potential="builtin:harmonic_1d", scan__e_min=0.2, scan__e_max=3.0, scan__count=5)
    report, _ = cli.cmd_scan(cfg)
    assert [r[0] for r in report.rows] == pytest.approx([0.2, 0.9, 1.6, 2.3, 3.0])
    with pytest.raises(ConfigError):
        cli.cmd_scan(_cfg(potential="builtin:harmonic_1d"))


def test_wavefunction_report():
    cfg = _cfg(potential="builtin:harmonic_1d", wavefunction__n=1, wavefunction__points=101)
    report, code = cli.cmd_wavefunction(cfg)
    assert code == 0 and len(report.rows) == 101
    assert report.metadata["node_count"] == 1
    assert report.metadata["E"] == pytest.approx(1.5, abs=1e-10)


def test_compare_report():
    report, code = cli.cmd_compare(_cfg(potential="builtin:coulomb_radial", l=1, n_max=1))
    assert code == 0
    row = report.rows[0]
    assert row[1] == pytest.approx(-0.125, rel=1e-9)
    assert row[3] == pytest.approx(-0.125, rel=1e-9)
    assert row[5] > 1e-3 > row[6]


CELL = st.one_of(st.none(), st.integers(-10**6, 10**6),
                 st.floats(allow_nan=False, allow_infinity=False), st.text(max_size=8), st.booleans())


@given(st.lists(st.tuples(CELL, CELL, CELL), max_size=6),
       st.dictionaries(st.text(max_size=5), st.floats(allow_nan=False, allow_infinity=False), max_size=3))
def test_json_round_trip(rows, meta):
    report = cli.Report("solve", ("a", "b", "c"), rows, {"timings": meta})
    assert cli.Report.from_json(report.to_json()) == report


def test_csv_layout():
    report = cli.Report("solve", ("n", "E"), [(0, 0.1), (1, None)], {"timings": {"x": 1.0}})
    lines = report.to_csv().splitlines()
    assert lines[0] == f"# {cli.SCHEMA} kind=solve"
    assert lines[1] == "n,E"
    assert lines[2] == "0,0.10000000000000001"
    assert lines[3] == "1,"


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("potential = builtin:harmonic_1d\nlayercount = 5\n")
    assert cli.main(["solve", "--config", str(bad)]) == 1
    assert "layercount" in capsys.readouterr().err
    assert cli.main(["bench", "table9"]) == 1
    assert "unknown table" in capsys.readouterr().err
    good = tmp_path / "good.conf"
    good.write_text("potential = builtin:harmonic_1d\nn_max = 1\n")
    out = tmp_path / "out.json"
    assert cli.main(["solve", "--config", str(good), "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == cli.SCHEMA and len(doc["rows"]) == 2


def test_bench_missing_fixture(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("QACTION_FIXTURES", str(tmp_path))
    assert cli.main(["bench", "table1"]) == 1
    assert "fixture missing" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("potential = builtin:harmonic_1d\nengine = riccati\nn_max = 0\n")
    cfg = cli.load_config(conf, ["engine=tmatrix", "layer_count=2000"])
    assert cfg.engine == "tmatrix" and cfg.layer_count == 2000


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "qaction", "solve", "--set", "potential=builtin:harmonic_1d",
                          "--set", "n_max=0"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith(f"# {cli.SCHEMA}")
