import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from beqt.evolution import StepperConfig
from beqt.harness.checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    decode,
    encode,
    read_checkpoint,
    write_checkpoint,
)
from beqt.harness.cli import CSV_COLUMNS, EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, main
from beqt.harness.config import ConfigError, dump_config, load_config, parse_config
from beqt.harness.suites import SUITES, run_suites
from beqt.harness.twin import EmbeddingError, restrict_state, twin_run
from beqt.initial_data import random_band_limited
from beqt.spectral import SpectralGrid
from beqt.tensor_core import ModelParams

BASE = """\
[grid]
N = 32
[params]
xi = 0.5
[stepper]
dt = 1e-3
[initial]
seed = 7
kmax = 5.0
[run]
T = 0.01
cadence = 2
"""


# --- config --------------------------------------------------------------------------

def test_parse_defaults():
    cfg = parse_config(BASE)
    assert cfg.N == 32 and cfg.params.xi == 0.5 and cfg.stepper.scheme == "imex_sbdf2"
    assert cfg.initial.seed == 7 and cfg.T == 0.01 and cfg.cadence == 2
    assert cfg.galerkin_n is None


def test_unknown_key_reports_line():
    text = BASE.replace("xi = 0.5", "xi = 0.5\nzeta = 1.0")
    with pytest.raises(ConfigError) as ei:
        parse_config(text, path="run.toml")
    assert ei.value.line == 5 and ei.value.key == "params.zeta"
    assert "run.toml:5:" in str(ei.value)


def test_unknown_section():
    with pytest.raises(ConfigError) as ei:
        parse_config(BASE + "[extras]\nx = 1\n")
    assert ei.value.line == 13


@pytest.mark.parametrize("drop, key", [("seed = 7\n", "initial.seed"), ("dt = 1e-3\n", "stepper.dt"),
                                       ("T = 0.01\n", "run.T")])
def test_missing_required(drop, key):
    with pytest.raises(ConfigError) as ei:
        parse_config(BASE.replace(drop, ""))
    assert ei.value.key == key


def test_dotted_keys_equivalent():
    dotted = ("grid.N = 32\nparams.xi = 0.5\nstepper.dt = 1e-3\ninitial.seed = 7\n"
              "initial.kmax = 5.0\nrun.T = 0.01\nrun.cadence = 2\n")
    assert parse_config(dotted) == parse_config(BASE)


@pytest.mark.parametrize("bad", [
    BASE.replace("N = 32", "N = 48"),
    BASE.replace("dt = 1e-3", "dt = -1.0"),
    BASE.replace("seed = 7", "seed = -3"),
    BASE.replace("seed = 7", 'seed = "7"'),
    BASE.replace("xi = 0.5", "xi = true"),
    BASE.replace("[run]", '[run]\ngalerkin_n = -2'),
    BASE + '[stepper.x]\n',
    "[grid\nN = 3",
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_dump_round_trip(tmp_path):
    cfg = parse_config(BASE.replace("[run]", "[run]\ngalerkin_n = 6"))
    again = parse_config(dump_config(cfg))
    assert again == cfg
    f = tmp_path / "c.toml"
    f.write_text(dump_config(cfg))
    assert load_config(f) == cfg
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


# --- checkpoint ----------------------------------------------------------------------

@pytest.fixture
def state():
    return random_band_limited(SpectralGrid(32), ModelParams(a=-0.4, xi=0.3, nu=0.7), 11,
                               galerkin_n=6)


def test_checkpoint_round_trip_bit_exact(state, tmp_path):
    path = write_checkpoint(state, tmp_path / "s.beqt")
    back = read_checkpoint(path)
    assert np.array_equal(back.Q.hat, state.Q.hat) and np.array_equal(back.u.hat, state.u.hat)
    assert back.params == state.params and back.t == state.t and back.galerkin_n == 6
    assert encode(back) == path.read_bytes()
    assert not list(tmp_path.glob("*.tmp"))


def test_checkpoint_bad_magic(state):
    data = bytearray(encode(state))
    data[:4] = b"XXXX"
    with pytest.raises(CheckpointError, match="magic"):
        decode(bytes(data))


def test_checkpoint_future_version(state):
    data = bytearray(encode(state))
    data[4:8] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    with pytest.raises(CheckpointError, match="version"):
        decode(bytes(data))


@pytest.mark.parametrize("cut", [3, 20, 100, -1])
def test_checkpoint_truncated(state, cut):
    data = encode(state)
    with pytest.raises(CheckpointError, match="truncated"):
        decode(data[:cut])


def test_checkpoint_trailing_bytes(state):
    with pytest.raises(CheckpointError, match="trailing"):
        decode(encode(state) + b"\0")


# --- twin ----------------------------------------------------------------------------

def test_twin_same_resolution_is_zero():
    s = random_band_limited(SpectralGrid(32), ModelParams(), 3, kmax=5.0)
    rep = twin_run(s, 32, 32, StepperConfig(1e-3), 0.01, cadence=5)
    assert rep.sup_delta_energy == 0.0


def test_twin_initial_delta_zero(tmp_path):
    s = random_band_limited(SpectralGrid(64), ModelParams(), 3, kmax=6.0)
    rep = twin_run(s, 32, 64, StepperConfig(1e-3), 0.02, cadence=10)
    assert rep.delta_energy[0] == 0.0
    assert len(rep.times) == 3 and rep.sup_delta_energy >= 0
    rows = list(csv.reader(open(rep.write_csv(tmp_path / "t.csv"))))
    assert rows[0] == ["t", "dQ_L2", "grad_dQ_L2", "du_L2", "delta_energy"] and len(rows) == 4


def test_twin_embedding_error():
    s = random_band_limited(SpectralGrid(64), ModelParams(), 3, kmax=20.0)
    with pytest.raises(EmbeddingError):
        restrict_state(s, SpectralGrid(32))
    with pytest.raises(ValueError):
        twin_run(s, 64, 32, StepperConfig(1e-3), 0.01)


# --- suites --------------------------------------------------------------------------

def test_suite_determinism():
    a = run_suites(["lemma1", "bernstein"], seed=5)
    b = run_suites(["lemma1", "bernstein"], seed=5)
    assert [r.details for r in a] == [r.details for r in b]
    assert all(r.passed for r in a)
    c = run_suites(["lemma1"], seed=6)
    assert c[0].details != a[0].details


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suites(["nope"])


def test_all_suites_registered():
    assert set(SUITES) == {"lemma1", "trace-inequality", "partition", "bernstein", "commutator",
                           "interpolation", "variational", "mollifier"}


# --- CLI -----------------------------------------------------------------------------

def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_cli_simulate_T0(tmp_path):
    cfg = _write(tmp_path, BASE.replace("T = 0.01", "T = 0.0"))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "run.csv")))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 2
    assert (tmp_path / "run_final.beqt").exists()


def test_cli_simulate_and_reports(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "run.csv")))
    assert len(rows) == 6 and rows[0]["lyap_residual"] == "nan"
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["status"] == "ok" and summary["energy_monotone"]
    ck = tmp_path / "run_final.beqt"
    capsys.readouterr()
    assert main(["energy", str(ck)]) == EXIT_OK
    e = json.loads(capsys.readouterr().out)
    assert e["E_total"] == pytest.approx(float(rows[-1]["E_total"]), rel=1e-12)
    assert main(["spectrum", str(ck), "--out", str(tmp_path)]) == EXIT_OK
    shells = list(csv.reader(open(tmp_path / "run_final_shells.csv")))
    assert shells[0] == ["field", "t", "q", "shell_norm"] and len(shells) > 2


def test_cli_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, BASE.replace("T = 0.01", "T = 0.0"))
    outs = []
    for seed in ("1", "2", "1"):
        d = tmp_path / seed
        main(["simulate", "--config", str(cfg), "--out", str(d), "--seed", seed, "--quiet"])
        outs.append((d / "run.csv").read_text())
    assert outs[0] == outs[2] != outs[1]


def test_cli_blowup(tmp_path):
    text = BASE.replace("dt = 1e-3", "dt = 0.5").replace("kmax = 5.0", "kmax = 5.0\nq_h1 = 1e4") \
        .replace("T = 0.01", "T = 50.0")
    cfg = _write(tmp_path, text)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_BLOWUP
    forensic = json.loads((tmp_path / "run_blowup.json").read_text())
    assert forensic["status"] == "blowup" and "record" in forensic


def test_cli_config_errors(tmp_path):
    cfg = _write(tmp_path, BASE + "bogus = 1\n")
    assert main(["simulate", "--config", str(cfg), "--quiet"]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "none.toml"), "--quiet"]) == EXIT_CONFIG
    good = _write(tmp_path, BASE, "g.toml")
    assert main(["twin", "--config", str(good), "--n-coarse", "64", "--quiet"]) == EXIT_CONFIG
    bad = tmp_path / "x.beqt"
    bad.write_bytes(b"nope")
    assert main(["energy", str(bad)]) == EXIT_CONFIG


def test_cli_verify_selector(tmp_path, capsys):
    assert main(["verify", "--suite", "lemma1", "--suite", "partition", "--out", str(tmp_path),
                 "--quiet"]) == EXIT_OK
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [x["suite"] for x in lines] == ["lemma1", "partition"]
    assert all(x["passed"] for x in lines)
    assert len(json.loads((tmp_path / "verify.json").read_text())) == 2
    assert main(["verify", "--suite", "nope", "--quiet"]) == EXIT_CONFIG


def test_cli_twin(tmp_path):
    text = BASE.replace("N = 32", "N = 64")
    cfg = _write(tmp_path, text)
    assert main(["twin", "--config", str(cfg), "--n-coarse", "32", "--out", str(tmp_path),
                 "--quiet"]) == EXIT_OK
    meta = json.loads((tmp_path / "run_twin_32_64.json").read_text())
    assert meta["samples"] == 6


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "beqt.harness.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "simulate" in out.stdout


@pytest.mark.parametrize("name", ["desk.toml", "twin.toml"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / name)
    assert cfg.initial.seed == 20240611
