import csv
import io
import json
import textwrap

import pytest

from fwl.cli import CSV_HEADER, fitted_order, main
from fwl.scenarios import ConfigError, Overrides, load_config, run_scenario, standard_suite

SMALL = textwrap.dedent("""
    seed: 0
    scenarios:
      - name: ind_norm
        kind: variation
        verifies: [boundary term]
        u: {kind: indicator, interval: [-1, 1]}
        zeta: {kind: norm}
        expected: 2.0
      - name: ind_const
        kind: variation
        verifies: [bulk term]
        u: {kind: indicator, interval: [-1, 1]}
        zeta: {kind: constant, value: 1.0}
""")


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return p


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_standard_suite_metadata():
    suite = standard_suite()
    names = [s.name for s in suite]
    assert len(names) == len(set(names)) >= 40
    assert all(s.verifies for s in suite)
    assert {"grid_square_2d", "grid_disk_2d", "weighted_aleksandrov_translated"} <= set(names)


def test_strict_unknown_keys(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(SMALL.replace("expected: 2.0", "expectd: 2.0"))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(p)
    assert main(["run", "--config", str(p)]) == 2


def test_exact_track_rejects_2d(tmp_path):
    p = tmp_path / "bad2.yaml"
    text = SMALL.replace("u: {kind: indicator, interval: [-1, 1]}", "u: {kind: indicator, box: [[-1, -1], [1, 1]]}")
    assert text != SMALL
    p.write_text(text)
    with pytest.raises(ConfigError, match="one-dimensional"):
        run_scenario(load_config(p)[0])
    assert main(["run", "--config", str(p)]) == 2


def test_unknown_scenario(capsys):
    assert main(["run", "--scenario", "missing"]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_run_csv(small_cfg, capsys):
    assert main(["run", "--config", str(small_cfg)]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == CSV_HEADER
    assert [r[0] for r in rows[1:]] == ["ind_norm", "ind_const"]
    assert all(r[10] == "true" and r[11] == "" for r in rows[1:])
    assert float(rows[1][4]) == pytest.approx(2.0, abs=1e-9)


def test_determinism_and_out(small_cfg, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        assert main(["run", "--config", str(small_cfg), "--out", str(d)]) == 0
        outs.append((d / "results.csv").read_bytes())
        assert (d / "results.json").exists()
    assert outs[0] == outs[1]


def test_json_like(small_cfg, capsys):
    assert main(["run", "--config", str(small_cfg), "--format", "json-like", "--timing"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and doc["seed"] == 0
    assert doc["reports"][0]["rhs_boundary"] == pytest.approx(2.0)
    assert "runtimes" in doc["reports"][0]


def test_timing_column(small_cfg, capsys):
    main(["run", "--config", str(small_cfg), "--timing"])
    rows = _rows(capsys.readouterr().out)
    assert all(float(r[11]) >= 0 for r in rows[1:])


def test_tolerance_failure(small_cfg, capsys):
    assert main(["run", "--config", str(small_cfg), "--tol", "0", "--steps", "2"]) == 1
    assert "FAIL" in capsys.readouterr().err


def test_threads_env(small_cfg, monkeypatch, capsys):
    monkeypatch.setenv("FWL_THREADS", "1")
    main(["run", "--config", str(small_cfg)])
    one = capsys.readouterr().out
    monkeypatch.setenv("FWL_THREADS", "4")
    main(["run", "--config", str(small_cfg)])
    assert capsys.readouterr().out == one
    monkeypatch.setenv("FWL_THREADS", "many")
    assert main(["run", "--config", str(small_cfg)]) == 2


def test_list(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(standard_suite())


def test_convergence_exact_single_row(capsys):
    assert main(["convergence", "--scenario", "variation_indicator_norm"]) == 0
    out = capsys.readouterr().out
    rows = [r for r in _rows(out) if r and not r[0].startswith("#")]
    assert len(rows) == 2 and float(rows[1][3]) <= 1e-9
    assert "# fitted order: n/a" in out


def test_convergence_single_grid(capsys, tmp_path):
    assert main(["convergence", "--scenario", "grid_quadratic_norm_1d", "--grids", "128",
                 "--out", str(tmp_path)]) == 0
    assert "# fitted order: n/a" in capsys.readouterr().out
    assert (tmp_path / "convergence_grid_quadratic_norm_1d.csv").exists()


@pytest.mark.slow
def test_convergence_disk(capsys):
    assert main(["convergence", "--scenario", "grid_disk_2d"]) == 0
    out = capsys.readouterr().out
    order = float(out.split("# fitted order: ")[1].split()[0])
    assert order >= 0.9 and "# monotone decay: yes" in out


def test_fitted_order():
    assert fitted_order([64, 128, 256], [1e-2, 2.5e-3, 6.25e-4]) == pytest.approx(2.0)
    assert fitted_order([64], [1e-2]) is None


def test_overrides_grid():
    sc = {s.name: s for s in standard_suite()}["grid_quadratic_norm_1d"]
    assert run_scenario(sc, Overrides(grid=128)).grid == 128


@pytest.mark.slow
def test_run_standard_suite(tmp_path):
    assert main(["run", "--suite", "standard", "--format", "csv", "--out", str(tmp_path)]) == 0
    assert _rows((tmp_path / "results.csv").read_text())[0] == CSV_HEADER
