import hashlib
import json
import subprocess
import sys

import pytest

from magnls.cli import main
from magnls.concentration import ReducedTable
from magnls.io import read_csv, read_pgm
from magnls.radial import radial_groundstate

from conftest import strip_timestamps


def run(*argv):
    return main([str(a) for a in argv])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- limiting ---------------------------------------------------------------------


def test_limiting_writes_table(tmp_path, capsys):
    assert run("limiting", "--vstar", 1, "--b", "0,0.25,0.5", "--p", 4, "--out", tmp_path) == 0
    header, rows = read_csv(tmp_path / "table.csv")
    assert rows.shape[0] == 3
    energy = rows[:, header.index("energy")]
    # zero-field row against the shooting oracle
    assert energy[0] == pytest.approx(radial_groundstate().energy, rel=0.01)
    assert energy[1] > energy[0] and energy[2] > energy[1]
    table = ReducedTable.load(tmp_path / "table.json")
    assert table.b.tolist() == [0.0, 0.25, 0.5]
    assert json.loads((tmp_path / "limiting.json").read_text())["failed_nodes"] == []
    assert "3 rows" in capsys.readouterr().out


def test_limiting_rejects_p_two(tmp_path, capsys):
    assert run("limiting", "--p", 2, "--out", tmp_path) == 2
    assert "p > 2" in capsys.readouterr().err
    assert not (tmp_path / "table.csv").exists()


def test_limiting_names_failing_node(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[limiting]\nmax_iter = 1\nrestarts = 1\nn = 32\n")
    assert run("limiting", "--config", cfg, "--b", "0.5", "--out", tmp_path) == 1
    assert "b = 0.5" in capsys.readouterr().err
    assert not (tmp_path / "table.json").exists()


def test_parser_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        run("limiting", "--b", "zero")
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        run("teleport")
    assert info.value.code == 2


def test_missing_config_exits_two(tmp_path):
    assert run("verify", "--config", tmp_path / "nope.toml") == 2


# -- map ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_table(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    assert run("limiting", "--b", "0,0.25,0.5", "--n", 64, "--out", d) == 0
    return d / "table.json"


def test_map_constant_is_flat(tmp_path, small_table, capsys):
    assert run("map", "--preset", "constant", "--table", small_table, "--resolution", 11, "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "map.json").read_text())["map"]
    assert rec["boundary_hypothesis"] is False
    header, rows = read_csv(tmp_path / "cmap.csv")
    c = rows[:, header.index("C")]
    assert c.max() == c.min()
    assert read_pgm(tmp_path / "cmap.pgm").shape == (11, 11)
    assert "fails" in capsys.readouterr().out


def test_map_quadratic_argmin_at_center(tmp_path, quadratic_table_file):
    before = digest(quadratic_table_file)
    assert run("map", "--preset", "quadratic-B", "--table", quadratic_table_file, "--resolution", 41,
               "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "map.json").read_text())["map"]
    assert rec["argmin_point"] == [0.0, 0.0]
    assert rec["boundary_hypothesis"] is True
    assert digest(quadratic_table_file) == before


def test_map_missing_range_exits_one(tmp_path, small_table, capsys):
    assert run("map", "--preset", "quadratic-B", "--table", small_table, "--resolution", 9, "--out", tmp_path) == 1
    err = capsys.readouterr().err
    assert "needs [0.1, 8.1]" in err
    assert not (tmp_path / "map.json").exists()


def test_map_bad_table_file_is_config_error(tmp_path, capsys):
    assert run("map", "--preset", "constant", "--table", tmp_path / "none.json", "--out", tmp_path) == 2
    assert "cannot read table" in capsys.readouterr().err
    (tmp_path / "junk.json").write_text("[1, 2]")
    assert run("map", "--preset", "constant", "--table", tmp_path / "junk.json", "--out", tmp_path) == 2


def test_map_table_exponent_must_match(tmp_path, capsys):
    ReducedTable(3.0, [0.0, 1.0], [1.0, 2.0]).save(tmp_path / "p3.json")
    assert run("map", "--preset", "constant", "--table", tmp_path / "p3.json", "--out", tmp_path) == 2
    assert "p = 3" in capsys.readouterr().err


def test_map_low_resolution_is_config_error(tmp_path, small_table):
    assert run("map", "--preset", "constant", "--table", small_table, "--resolution", 5, "--out", tmp_path) == 2


# -- sweep --------------------------------------------------------------------------


def test_sweep_report(tmp_path, quadratic_table_file):
    assert run("sweep", "--preset", "quadratic-B", "--eps", "0.1,0.07,0.05", "--table", quadratic_table_file,
               "--out", tmp_path) == 0
    data = json.loads((tmp_path / "sweep.json").read_text())
    rep = data["report"]
    assert len(rep["eps_values"]) == 3 and len(rep["energies_scaled"]) == 3
    cmap_min = rep["target_inf_C"]
    assert abs(rep["energies_scaled"][-1] / cmap_min - 1) <= 0.10
    for eps in ("0.1", "0.07", "0.05"):
        assert (tmp_path / f"field_eps{eps}.csv").exists() and (tmp_path / f"field_eps{eps}.pgm").exists()


def test_sweep_rerun_is_identical(tmp_path, quadratic_table_file):
    argv = ("sweep", "--preset", "quadratic-B", "--eps", "0.25,0.2", "--table", quadratic_table_file,
            "--out", tmp_path)
    assert run(*argv) == 0
    first = (tmp_path / "sweep.json").read_text()
    field = digest(tmp_path / "field_eps0.2.csv")
    assert run(*argv) == 0
    assert strip_timestamps((tmp_path / "sweep.json").read_text()) == strip_timestamps(first)
    assert digest(tmp_path / "field_eps0.2.csv") == field


def test_sweep_partial_failure_still_writes_report(tmp_path, quadratic_table_file):
    assert run("sweep", "--preset", "quadratic-B", "--eps", "1,0.25", "--table", quadratic_table_file,
               "--out", tmp_path) == 1
    rep = json.loads((tmp_path / "sweep.json").read_text())["report"]
    assert rep["failures"][0]["eps"] == 1.0
    assert rep["energies_scaled"][0] is None and rep["converged"] == [False, True]


def test_sweep_rejects_increasing_eps(tmp_path, quadratic_table_file):
    assert run("sweep", "--eps", "0.1,0.2", "--table", quadratic_table_file, "--out", tmp_path) == 2


# -- verify -------------------------------------------------------------------------


def test_verify_default_passes(capsys):
    assert run("verify") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "scaling_law" in out


def test_verify_bad_tolerance(capsys):
    assert run("verify", "--tol", "scaling_law=0") == 1
    assert "violated: scaling_law" in capsys.readouterr().out


def test_verify_unknown_tolerance_is_config_error():
    assert run("verify", "--tol", "telepathy=1") == 2


def test_verify_json(capsys, tmp_path):
    assert run("verify", "--json", "--out", tmp_path) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["all_passed"] is True
    assert {e["name"] for e in report["invariants"]} >= {"nehari_identity", "coercivity"}
    assert strip_timestamps((tmp_path / "verify.json").read_text()) == strip_timestamps(json.dumps(report))


def test_config_file_is_not_modified(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 1\n[verify]\nsamples = 200\n")
    before = digest(cfg)
    assert run("verify", "--config", cfg) == 0
    assert digest(cfg) == before


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "magnls.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("limiting", "map", "sweep", "verify"):
        assert sub in res.stdout
