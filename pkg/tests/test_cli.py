import csv
import json

import pytest

from eistwist.cli import (
    DEFAULT_TOLERANCES,
    RunConfig,
    emit_tables,
    main,
    parse_complex,
    parse_grid,
    run_suite,
)
from eistwist.errors import ConfigError


def write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_parse_complex():
    assert parse_complex("1.2+0.8i") == 1.2 + 0.8j
    assert parse_complex(" -2 ") == -2
    assert parse_complex(3) == 3
    with pytest.raises(ConfigError):
        parse_complex("abc")


def test_parse_grid():
    assert parse_grid("0.5, 1+1j") == (0.5, 1 + 1j)
    assert parse_grid("0.5,1;0,2") == (0.5, 0.5 + 2j, 1, 1 + 2j)
    assert parse_grid("  ") == ()


def test_config_defaults():
    c = RunConfig()
    assert c.level == 37 and len(c.s_grid) == 9
    assert c.tolerances == DEFAULT_TOLERANCES


def test_config_from_toml(tmp_path):
    path = write_config(tmp_path, """
level = 1
[tolerances]
psi = 1e-8
[truncation]
c_max = 4096
n_max = 500
[grid]
re_s = [0.5, 1.0, 1.5]
im_s = [0.0, 1.0]
w = ["2.6", "3+0.5i"]
[output]
dir = "out"
""")
    c = RunConfig.load(path, level=37)
    assert c.level == 37  # flags override the file
    assert c.tolerances["psi"] == 1e-8 and c.tolerances["lambda"] == DEFAULT_TOLERANCES["lambda"]
    assert c.c_max == 4096 and c.n_max == 500
    assert len(c.s_grid) == 6 and c.w_grid == (2.6, 3 + 0.5j)
    assert str(c.out_dir) == "out"


@pytest.mark.parametrize("text", [
    "level = 4",
    "[tolerances]\npsi = 0",
    "[tolerances]\nbogus = 1e-3",
    "[grid]\ns = []",
    "[grid]\nw = [1.5]",
    "[truncation]\nc_max = -1",
    "level = [",
])
def test_config_rejects(tmp_path, text):
    with pytest.raises(ConfigError):
        RunConfig.load(write_config(tmp_path, text))


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "nope.toml")


def test_newform_source(tmp_path):
    assert RunConfig(level=1).newform_data().degenerate
    with pytest.raises(ConfigError):
        RunConfig(level=11).newform_data()
    with pytest.raises(ConfigError):
        RunConfig(newform=str(tmp_path / "missing.json")).newform_data()
    bad = tmp_path / "bad.json"
    bad.write_text('{"level": 37, "fricke_eigenvalue": 1, "coefficients": [1, -2, -3, 3]}')
    with pytest.raises(ConfigError):
        RunConfig(newform=str(bad)).newform_data()


def test_run_group_level_one(tmp_path):
    report = run_suite("group", RunConfig(level=1, out_dir=tmp_path))
    assert report.passed
    data = json.loads((tmp_path / "group.json").read_text())
    assert data["pass"] and data["suite"] == "group"
    assert all(set(c) >= {"identity", "grid_point", "lhs", "rhs", "residual", "tolerance", "pass"}
               for c in data["checks"])
    timing = json.loads((tmp_path / "group.timing.json").read_text())
    assert timing["wall_time"] >= 0 and "cache" in timing


def test_run_suite_rejects():
    with pytest.raises(ConfigError):
        run_suite("everything", RunConfig(level=1))
    with pytest.raises(ConfigError):
        run_suite("all", RunConfig(level=1))


def test_degenerate_suites(tmp_path):
    config = RunConfig(level=1, out_dir=tmp_path)
    for name in ("psi", "lambda"):
        assert run_suite(name, config).passed


def test_errors_become_failed_records(tmp_path):
    # a multi-cusp level has no Lambda~; the suite records the failure instead of crashing
    config = RunConfig(level=6, newform=str(tmp_path / "f.json"), out_dir=tmp_path)
    (tmp_path / "f.json").write_text(json.dumps({"level": 6, "fricke_eigenvalue": 1, "coefficients": [1]}))
    report = run_suite("lambda", config)
    assert not report.passed
    assert any(r.error and "ContinuationUnavailable" in r.error for r in report.records)


def test_determinism_and_cache(tmp_path):
    out, cache = tmp_path / "out", tmp_path / "cache"
    args = ["run", "psi", "--out", str(out), "--cache", str(cache)]
    assert main(args) == 0
    first = (out / "psi.json").read_bytes()
    cache_files = list(cache.glob("psi-37-*.bin"))
    assert len(cache_files) == 1
    assert main(args) == 0
    assert (out / "psi.json").read_bytes() == first
    assert json.loads((out / "psi.timing.json").read_text())["cache"]["loaded_from_disk"]
    # a corrupted cache is detected and recomputed, and the report is unchanged
    raw = bytearray(cache_files[0].read_bytes())
    raw[-3] ^= 0x5A
    cache_files[0].write_bytes(bytes(raw))
    assert main(args) == 0
    assert (out / "psi.json").read_bytes() == first
    assert not json.loads((out / "psi.timing.json").read_text())["cache"]["loaded_from_disk"]
    assert main(args) == 0
    assert json.loads((out / "psi.timing.json").read_text())["cache"]["loaded_from_disk"]


def test_exit_codes(tmp_path, capsys):
    assert main(["cusps", "--level", "6"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2
    assert main(["cusps", "--level", "12"]) == 2
    assert main(["run", "group", "--level", "1", "--out", str(tmp_path)]) == 0
    assert main(["emit", "lambda-grid", "--level", "1", "--grid", "", "--out", str(tmp_path)]) == 2
    # an impossible tolerance makes the suite fail
    assert main(["run", "psi", "--level", "37", "--tolerance", "1e-30", "--out", str(tmp_path)]) == 1


def test_emit_lambda_grid(tmp_path):
    config = RunConfig(level=1, out_dir=tmp_path, s_grid=parse_grid("0.5,1,1.5;0,1,2"))
    paths = emit_tables("lambda-grid", config)
    rows = list(csv.DictReader(paths[0].open()))
    assert len(rows) == 9
    assert all("residual" in r and r["pass"] == "True" for r in rows)
    xyz = list(csv.reader(paths[1].open()))
    assert xyz[0] == ["x", "y", "value"] and len(xyz) == 10


def test_emit_empty_grid(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(level=1, out_dir=tmp_path, s_grid=())
    with pytest.raises(ConfigError):
        emit_tables("nothing", RunConfig(level=1, out_dir=tmp_path))


def test_emit_fourier_level_one(tmp_path):
    paths = emit_tables("fourier", RunConfig(level=1, out_dir=tmp_path))
    rows = list(csv.DictReader(paths[0].open()))
    assert len(rows) >= 4
    assert {r["method"] for r in rows} == {"kloosterman-series", "quadrature"}
    assert all(float(r["error_estimate"]) >= 0 for r in rows)


@pytest.mark.slow
def test_emit_fourier_level_37(tmp_path):
    paths = emit_tables("fourier", RunConfig(out_dir=tmp_path))
    rows = list(csv.DictReader(paths[0].open()))
    assert len(rows) == 8
    assert all(float(r["error_estimate"]) >= 0 for r in rows)
