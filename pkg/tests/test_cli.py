import csv
import hashlib
import io
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_pinning.cli import main
from renewal_pinning.config import ConfigError, ExperimentConfig, Grid
from renewal_pinning.runner import classify_cell, conjectured_cell


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text(encoding="utf-8"))))


# --- config ------------------------------------------------------------------------------

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(alpha=finite, alpha_hat=finite, n=st.integers(2, 10**6), seed=st.integers(0, 2**64 - 1),
       betas=st.lists(finite, min_size=1, max_size=5))
def test_config_round_trip(alpha, alpha_hat, n, seed, betas):
    text = (f"alpha={alpha!r}\nalpha_hat={alpha_hat!r}\nn={n}\nseed={seed}\n"
            f"beta_grid={','.join(repr(b) for b in betas)}\n")
    cfg = ExperimentConfig.from_text(text, "quenched-mc")
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()
    assert again.digest() == cfg.digest()
    assert cfg["beta_grid"].values == tuple(betas)


@pytest.mark.parametrize("text", ["lin:0.0:2.0:21", "log:0.0001:0.01:10", "0.1,0.5,2.0"])
def test_grid_text_round_trip(text):
    g = Grid.parse(text)
    assert Grid.parse(g.text()) == g


@pytest.mark.parametrize("bad", ["log:0:1:5", "lin:0:1", "lin:0:1:0", "", "1,x"])
def test_grid_rejects(bad):
    with pytest.raises(ValueError):
        Grid.parse(bad)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("alpah=0.5\n", "annealed-curve")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("alpha=0.5\nalpha=0.6\n", "annealed-curve")


@pytest.mark.parametrize("command", ["quenched-mc", "verify"])
def test_seed_mandatory(command):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("", command)


@pytest.mark.parametrize("seed", ["-1", str(2**64), "abc"])
def test_seed_range(seed):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(f"seed={seed}\n", "verify")


def test_command_mismatch():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("command=verify\nseed=1\n", "quenched-mc")


# --- command line ----------------------------------------------------------------------------


def test_missing_seed_exits_two(tmp_path, capsys):
    code, _ = _run(tmp_path, "a", "quenched-mc")
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_key_exits_two(tmp_path):
    code, _ = _run(tmp_path, "a", "annealed-curve", "--set", "gamma=1")
    assert code == 2


def test_manifest_hashes(tmp_path):
    code, out = _run(tmp_path, "a", "spectral-check", "--set", "n=200", "--set", "horizon=1024")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    data = (out / "spectral_check.csv").read_bytes()
    assert manifest["outputs"] == {"spectral_check.csv": hashlib.sha256(data).hexdigest()}
    assert manifest["config_sha256"] == hashlib.sha256(manifest["config"].encode()).hexdigest()
    assert b"\r" not in data
    assert manifest["results"]["within_1e-8"] is True


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\ncommand=annealed-curve\nalpha=0.7\nalpha_hat=0.7\nbeta_grid=0.0,0.5,1.0\n")
    code, out = _run(tmp_path, "a", "annealed-curve", "--config", str(cfg), "--set", "alpha=0.6")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert "alpha=0.6\n" in manifest["config"] and "alpha_hat=0.7\n" in manifest["config"]
    rows = _rows(out / "annealed_curve.csv")
    assert [r["beta"] for r in rows] == ["0.0", "0.5", "1.0"]
    assert float(rows[0]["h_c_a"]) == 0.0


@pytest.mark.parametrize("command,args", [
    ("quenched-mc", ["--seed", "12345", "--set", "n=300", "--set", "beta_grid=0.2,0.5",
                     "--set", "h_grid=-0.1,0.0"]),
    ("verify", ["--seed", "7", "--set", "suite=oracles"]),
])
def test_byte_identical_across_threads(tmp_path, command, args):
    blobs = []
    for i, threads in enumerate((1, 4, 1)):
        code, out = _run(tmp_path, f"r{i}", command, *args, "--threads", str(threads))
        assert code == 0
        blobs.append(sorted((p.name, p.read_bytes()) for p in out.iterdir()))
    assert blobs[0] == blobs[1] == blobs[2]


def test_different_seed_changes_output(tmp_path):
    base = ["--set", "n=300"]
    _, a = _run(tmp_path, "a", "quenched-mc", "--seed", "1", *base)
    _, b = _run(tmp_path, "b", "quenched-mc", "--seed", "2", *base)
    assert (a / "quenched_mc.csv").read_bytes() != (b / "quenched_mc.csv").read_bytes()


def test_verify_fault_injection(tmp_path, capsys):
    code, out = _run(tmp_path, "a", "verify", "--seed", "7", "--set", "suite=inequalities",
                     "--set", "inject_fault=uhat")
    assert code == 1
    report = json.loads((out / "verify_report.json").read_text())
    failed = [c for c in report["checks"] if c["status"] != "pass"]
    assert [c["name"] for c in failed] == ["decoupling_fuzz"]
    witness = failed[0]["witness"]
    assert witness["lhs"] > witness["rhs"]
    assert {"alpha_hat", "I", "J"} <= set(witness)
    assert "decoupling_fuzz" in capsys.readouterr().err


def test_verify_clean_inequalities(tmp_path):
    code, out = _run(tmp_path, "a", "verify", "--seed", "7", "--set", "suite=inequalities")
    assert code == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["passed"] and {c["name"] for c in report["checks"]} == {
        "decoupling_fuzz", "gap_identity", "monotonicity", "jensen"}


def test_verify_unknown_suite(tmp_path):
    code, _ = _run(tmp_path, "a", "verify", "--seed", "7", "--set", "suite=everything")
    assert code == 2


def test_bad_threads(tmp_path):
    code, _ = _run(tmp_path, "a", "spectral-check", "--threads", "0")
    assert code == 2


# --- phase portrait ------------------------------------------------------------------------------


@pytest.mark.parametrize("a,ah,cls,conj", [
    (0.7, 2.5, "relevant", "relevant"),
    (0.3, 2.5, "irrelevant", "irrelevant"),
    (0.6, 1.5, "unknown", "relevant"),
    (0.8, 1.5, "relevant", "relevant"),
    (0.2, 1.5, "unknown", "irrelevant"),
    (0.7, 0.5, "trivially-relevant", "n/a"),
    (0.2, 0.5, "irrelevant", "n/a"),
    (0.5, 2.5, "boundary", "boundary"),
    (0.5, 2.0, "boundary", "boundary"),
])
def test_classification(a, ah, cls, conj):
    assert classify_cell(a, ah) == cls
    assert conjectured_cell(a, ah) == conj


def test_phase_portrait_command(tmp_path):
    code, out = _run(tmp_path, "a", "phase-portrait", "--set", "alpha_grid=0.3,0.7",
                     "--set", "alpha_hat_grid=0.5,2.5")
    assert code == 0
    rows = {(r["alpha"], r["alpha_hat"]): r["classification"] for r in _rows(out / "phase_portrait.csv")}
    assert rows == {("0.3", "0.5"): "irrelevant", ("0.3", "2.5"): "irrelevant",
                    ("0.7", "0.5"): "trivially-relevant", ("0.7", "2.5"): "relevant"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "renewal_pinning", "spectral-check", "--set", "n=50",
                           "--set", "horizon=512", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "manifest.json").exists()
