import json
import subprocess
import sys

import pytest

from bosecone.cli import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_OK,
    EXIT_RESOURCE,
    PLOT_SCRIPT,
    emit_plots,
    load_json,
    main,
    parse_config,
)
from bosecone.experiments import ConfigError, THEOREMS


def run_cli(*args):
    return main([str(a) for a in args])


def test_parse_config_empty_file_echoes_all_defaults(tmp_path):
    f = tmp_path / "empty.cfg"
    f.write_text("")
    cfg = parse_config(f, "mvb")
    assert cfg["coupling.alpha"] == 3.5 and cfg["sector.n"] == 2
    assert "velocity.factor = 1.25" in cfg.echo()


def test_parse_config_missing_file_and_overrides(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(tmp_path / "nope.cfg", "mvb")
    f = tmp_path / "c.cfg"
    f.write_text("seed = 5\n")
    assert parse_config(f, "mvb", {"seed": 9})["seed"] == 9


def test_moments_writes_only_the_moment_report(tmp_path, capsys):
    out = tmp_path / "m"
    assert run_cli("moments", "--out", out) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["moments.json"]
    first = (out / "moments.json").read_text().splitlines()[0]
    assert first.startswith("# config_hash=")
    data = load_json(out / "moments.json")
    assert data["kappa"] == pytest.approx(json.loads(capsys.readouterr().out)["kappa"])


def test_smoke_exits_zero_and_headers_every_file(tmp_path):
    out = tmp_path / "s"
    assert run_cli("smoke", "--out", out) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    for t in THEOREMS:
        assert f"smoke-{t}.csv" in names and f"smoke-{t}.json" in names
    assert PLOT_SCRIPT in names
    for p in out.iterdir():
        assert p.read_text().startswith("# config_hash="), p.name


def test_mvb_with_config_file(tmp_path):
    cfgf = tmp_path / "c.cfg"
    cfgf.write_text("# pilot ladder\nscales.eta = [2, 3]\ntime.points = 10\n")
    out = tmp_path / "o"
    assert run_cli("mvb", "--config", cfgf, "--out", out, "--seed", 2) == EXIT_OK
    echo = (out / "mvb.config").read_text()
    assert "scales.eta = [2.0, 3.0]" in echo and "seed = 2" in echo
    rep = load_json(out / "mvb.json")
    assert rep["status"] == "pass" and set(rep["constants"]["C"]) == {"2.0", "3.0"}
    assert (out / "mvb_heatmap.csv").is_file()


@pytest.mark.parametrize(
    "body, code",
    [
        ("p = 2\n", EXIT_CONFIG),
        ("bogus.key = 1\n", EXIT_CONFIG),
        ("velocity.v = 0.3\n", EXIT_CONFIG),
        ("dim_cap = 10\n", EXIT_RESOURCE),
        ("state.kind = random\n", EXIT_FAIL),
    ],
)
def test_exit_codes(tmp_path, body, code, capsys):
    cfgf = tmp_path / "c.cfg"
    cfgf.write_text(body)
    theorem = "lc" if "state.kind" in body else "mvb"
    assert run_cli(theorem, "--config", cfgf, "--out", tmp_path / "o") == code
    assert capsys.readouterr().err


def test_failed_inequality_exits_one(tmp_path):
    # stability 1 demands identical constants across the eta ladder, which the data do not give
    cfgf = tmp_path / "c.cfg"
    cfgf.write_text("tolerance.stability = 1.0\n")
    assert run_cli("mvb", "--config", cfgf, "--out", tmp_path / "o") == EXIT_FAIL
    assert load_json(tmp_path / "o" / "mvb.json")["status"] == "fail"


def test_cli_rejects_bad_seed_and_all_with_config(tmp_path):
    assert run_cli("mvb", "--seed", -1, "--out", tmp_path / "o") == EXIT_CONFIG
    cfgf = tmp_path / "c.cfg"
    cfgf.write_text("")
    assert run_cli("all", "--config", cfgf, "--out", tmp_path / "o") == EXIT_CONFIG


def test_emit_plots_empty_directory(tmp_path):
    script = emit_plots(tmp_path)
    text = script.read_text()
    assert text.startswith("# no reports in this directory\n")
    assert "HEATMAPS = []" in text and "LADDERS = []" in text
    assert "urllib" not in text and "socket" not in text
    compile(text, str(script), "exec")


def test_emit_plots_lists_heatmaps_with_kappa(tmp_path):
    out = tmp_path / "o"
    assert run_cli("mvb", "--out", out) == EXIT_OK
    text = (out / PLOT_SCRIPT).read_text()
    kappa = load_json(out / "mvb.json")["extras"]["kappa"]
    assert f"('mvb_heatmap.csv', {kappa!r})" in text
    assert f"('mvb.csv', {kappa!r})" in text
    assert text.startswith("# config_hash=")


def test_emit_plots_missing_columns(tmp_path):
    (tmp_path / "bad.csv").write_text("# config_hash=x code_version=y seed=0\ntheorem,scale,t\n")
    with pytest.raises(ValueError, match="missing CSV columns"):
        emit_plots(tmp_path)
    (tmp_path / "bad.csv").unlink()
    (tmp_path / "x_heatmap.csv").write_text("site,t\n")
    with pytest.raises(ValueError, match="expectation"):
        emit_plots(tmp_path)


def test_deterministic_runs_are_byte_identical(tmp_path):
    for tag in ("a", "b"):
        assert run_cli("mvb", "--seed", 7, "--deterministic", "--out", tmp_path / tag) == EXIT_OK
    for name in ("mvb.csv", "mvb_heatmap.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_all_matches_sequential(tmp_path):
    assert run_cli("all", "--jobs", 2, "--out", tmp_path / "par") == EXIT_OK
    assert run_cli("all", "--out", tmp_path / "seq") == EXIT_OK
    for t in THEOREMS:
        assert (tmp_path / "par" / f"{t}.csv").read_bytes() == (tmp_path / "seq" / f"{t}.csv").read_bytes()


def test_console_entry_point_runs(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "bosecone.cli", "moments", "--out", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and '"kappa"' in res.stdout
