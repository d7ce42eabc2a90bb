import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from capsule_bim.cli import main
from capsule_bim.harness import (
    OUTPUT_ROOT_ENV,
    SCHEMA,
    ConfigError,
    converge,
    diagnose,
    load_config,
    output_directory,
    parse_config,
    simulate,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

STATIONARY = """\
grid.n = 32
membrane.tension_mode = constant
flow.lambda = 0.5
integrator.dt = 0.01
integrator.t_end = 0.2
output.snapshot_interval = 0.1
"""

STRAIN = """\
grid.n = 32
shape.kind = fourier
shape.modes = 2:0.1:0.0; 3:0.02:0.01
membrane.kappa_b = 0.05
membrane.s0 = 1.0
flow.q = 1.0
integrator.scheme = imex_bending
integrator.dt = 0.005
integrator.t_end = 0.05
"""


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    return tmp_path


def test_defaults_cover_schema():
    cfg = parse_config("")
    assert set(cfg.values) == set(SCHEMA)
    assert parse_config(cfg.to_text()).values == cfg.values


@pytest.mark.parametrize(
    "text,line,key",
    [
        ("grid.n = 64\nbogus.key = 1\n", 2, "bogus.key"),
        ("grid.n = 64\ngrid.n = 32\n", 2, "grid.n"),
        ("\n\ngrid.n = -4\n", 3, "grid.n"),
        ("grid.n = 33\n", 1, "grid.n"),
        ("flow.lambda = -1\n", 1, "flow.lambda"),
        ("filter.mu = 1.5\n", 1, "filter.mu"),
        ("shape.modes = 2:0.1\n", 1, "shape.modes"),
        ("integrator.scheme = euler\n", 1, "integrator.scheme"),
        ("just some words\n", 1, None),
    ],
)
def test_parse_errors_name_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert info.value.key == key
    assert f"line {line}" in str(info.value)


def test_invalid_shape_is_config_error(out_root):
    cfg = parse_config("shape.kind = fourier\nshape.modes = 3:1.2:0\n")
    with pytest.raises(ConfigError):
        simulate(cfg)
    assert not any(out_root.iterdir())


def test_explicit_step_above_gate_is_config_error(out_root):
    cfg = parse_config("grid.n = 64\nmembrane.kappa_b = 1\nintegrator.dt = 0.1\n")
    with pytest.raises(ConfigError):
        simulate(cfg)
    assert not any(out_root.iterdir())


def test_output_root_env(tmp_path, monkeypatch):
    cfg = parse_config("output.directory = /somewhere/else/run7\n")
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
    assert output_directory(cfg) == Path("/somewhere/else/run7")
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert output_directory(cfg, "_x") == tmp_path / "run7_x"
    assert output_directory(parse_config("output.directory = a/b\n")) == tmp_path / "a" / "b"


def test_simulate_writes_complete_outputs(out_root):
    res = simulate(parse_config(STATIONARY, source="stationary"))
    assert res.exit_code == 0
    d = res.directory
    man = json.loads((d / "manifest.json").read_text())
    assert man["status"] == "completed" and man["failure"] is None
    assert man["snapshot_times"] == [0.0, 0.1, 0.2]
    assert set(man["files"]) == {p.name for p in d.iterdir()}
    for key in SCHEMA:
        assert key in man["parameters"]
    for key in ("derived.beta", "derived.sigma0", "derived.dt", "derived.filter.regular"):
        assert key in man["parameters"]
    assert man["tool"]["name"] == "capsule-bim"
    with open(d / "snapshot_0002.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 32 and set(rows[0]) == {"t", "j", "x", "y", "theta", "tension", "alpha0"}
    r = np.hypot([float(r["x"]) for r in rows], [float(r["y"]) for r in rows])
    assert np.max(np.abs(r - 1)) < 1e-12
    with open(d / "diagnostics.csv") as fh:
        diag = list(csv.DictReader(fh))
    assert len(diag) == 21


def test_rerun_is_bit_identical(out_root):
    cfg = parse_config(STRAIN)
    a = simulate(cfg, out_root / "a")
    b = simulate(cfg, out_root / "b")
    for name in a.manifest["files"]:
        if name != "manifest.json":
            assert (a.directory / name).read_bytes() == (b.directory / name).read_bytes()


def test_runtime_failure_is_recorded(out_root):
    cfg = parse_config(
        "grid.n = 32\nshape.kind = ellipse\nshape.a = 1.2\nshape.b = 0.8\n"
        "membrane.kappa_b = 1\nmembrane.tension_mode = constant\nmembrane.tension = 0\n"
        "integrator.dt = 0.05\nintegrator.t_end = 2\nintegrator.enforce_gate = off\n"
    )
    res = simulate(cfg)
    assert res.exit_code == 3
    man = json.loads((res.directory / "manifest.json").read_text())
    assert man["status"] == "failed" and man["failure"]
    assert 0 <= man["last_good_time"] < 2


def test_converge_on_resting_circle_is_at_rounding(out_root):
    rep = converge(parse_config(STATIONARY), [16, 32, 64], out_root / "conv")
    assert rep.complete and len(rep.rows) == 2
    assert max(rep.differences("theta")) < 1e-12
    assert (out_root / "conv" / "convergence.csv").exists()


def test_converge_strain_differences_decrease(out_root):
    rep = converge(parse_config(STRAIN), [16, 32, 64])
    d = rep.differences("theta")
    assert d[1] < 1e-2 * d[0]


def test_converge_requires_doubling():
    with pytest.raises(ConfigError):
        converge(parse_config(STATIONARY), [16, 48])
    with pytest.raises(ConfigError):
        converge(parse_config(STATIONARY), [32])


def test_diagnose_flags_non_analyzed_hilbert_filtering(out_root):
    rep = diagnose(parse_config(STRAIN + "filter.hilbert = on\n"))
    assert not rep.analyzed
    assert any("hilbert" in n for n in rep.notes)
    assert set(rep.tails) == {"configured", "disabled"}
    rep = diagnose(parse_config(STRAIN))
    assert rep.analyzed and not rep.notes
    assert rep.failure["configured"] is None


def test_cli_exit_codes(out_root, tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text(STATIONARY + "output.directory = good\n")
    assert main(["simulate", str(good)]) == 0
    assert (out_root / "good" / "manifest.json").exists()

    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.n = -4\noutput.directory = bad\n")
    assert main(["simulate", str(bad)]) == 2
    assert not (out_root / "bad").exists()
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == 2
    assert main(["converge", str(good), "--resolutions", "16,32"]) == 0
    assert (out_root / "good_converge" / "convergence.csv").exists()
    assert main(["converge", str(good), "--resolutions", "16,40"]) == 2
    assert main(["diagnose", str(good)]) == 0
    assert (out_root / "good_diagnose").exists()

    failing = tmp_path / "failing.cfg"
    failing.write_text(
        "grid.n = 32\nshape.kind = ellipse\nshape.a = 1.2\nshape.b = 0.8\n"
        "membrane.kappa_b = 1\nmembrane.tension_mode = constant\nmembrane.tension = 0\n"
        "integrator.dt = 0.05\nintegrator.t_end = 2\nintegrator.enforce_gate = off\n"
    )
    assert main(["simulate", str(failing)]) == 3


def test_cli_entry_point(out_root):
    cfg = CONFIGS / "stationary_drop.cfg"
    env = {**os.environ, OUTPUT_ROOT_ENV: str(out_root)}
    proc = subprocess.run([sys.executable, "-m", "capsule_bim.cli", "simulate", str(cfg)], env=env, capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert (out_root / load_config(cfg)["output.directory"] / "manifest.json").exists()


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    cfg = load_config(path)
    cfg.build()
