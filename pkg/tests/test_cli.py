import csv
import subprocess
import sys

import pytest

from frictionid.cli import EXIT_CHECK, EXIT_OK, EXIT_USAGE, main

SHORT = "scenario:\n  name: slippery\n  duration: {duration}\n"


def _config(tmp_path, duration=0.6, extra=""):
    path = tmp_path / "cfg.yaml"
    path.write_text(SHORT.format(duration=duration) + extra)
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_hashed_stream_and_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", _config(tmp_path), "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "stream.csv")
    assert len(rows) == 61  # 0.0 .. 0.6 s at the 10 ms buffer period
    h = rows[0]["config_hash"]
    assert len(h) > 8 and all(r["config_hash"] == h for r in rows)
    assert (out / "config.yaml").read_text().startswith(f"# config_hash: {h}")
    (entry,) = _rows(out / "manifest.csv")
    assert entry["command"] == "simulate" and entry["file"] == "stream.csv" and entry["config_hash"] == h


def test_same_config_and_seed_give_identical_bytes(tmp_path):
    cfg = _config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", "3"]) == EXIT_OK
    for name in ("stream.csv", "manifest.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    # the config echo names its own output directory; the hash line excludes it
    first = [(d / "config.yaml").read_text().splitlines()[0] for d in (a, b)]
    assert first[0] == first[1]
    assert main(["simulate", "--config", cfg, "--out", str(a), "--seed", "4"]) == EXIT_OK
    assert (a / "stream.csv").read_bytes() != (b / "stream.csv").read_bytes()


def test_identify_is_deterministic_apart_from_timing(tmp_path):
    cfg = _config(tmp_path)
    runs = []
    for out in (tmp_path / "a", tmp_path / "b"):
        assert main(["identify", "--config", cfg, "--out", str(out), "--seed", "3"]) == EXIT_OK
        runs.append([{k: v for k, v in r.items() if k != "wall_ms"} for r in _rows(out / "estimates.csv")])
    assert runs[0] == runs[1]


def test_identify_default_slippery_converges(tmp_path):
    out = tmp_path / "out"
    assert main(["identify", "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "estimates.csv")
    assert abs(float(rows[-1]["mu_hat"]) - 0.19) < 0.05
    assert all(float(r["wall_ms"]) >= 0 for r in rows)


def test_identify_method_override_and_replay(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert main(["identify", "--config", cfg, "--out", str(out), "--method", "nonsmooth"]) == EXIT_OK
    live = _rows(out / "estimates.csv")
    assert {r["method"] for r in live} == {"Nonsmooth"}
    assert main(["identify", "--config", cfg, "--out", str(out), "--method", "nonsmooth", "--input", str(out / "stream.csv")]) == EXIT_OK
    replay = _rows(out / "estimates.csv")
    assert [float(r["mu_hat"]) for r in replay] == pytest.approx([float(r["mu_hat"]) for r in live], abs=1e-6)
    # both commands are listed once in the manifest
    assert sorted(r["command"] for r in _rows(out / "manifest.csv")) == ["identify", "simulate"]


def test_malformed_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("identifier:\n  alpha_rje: 0.3\n")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "alpha_rje" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == EXIT_USAGE


def test_bad_replay_file_exits_2(tmp_path):
    bad = tmp_path / "stream.csv"
    bad.write_text("t,px\n0.0,1.0\n")
    assert main(["identify", "--config", _config(tmp_path), "--out", str(tmp_path / "o"), "--input", str(bad)]) == EXIT_USAGE


def test_usage_errors_exit_2(tmp_path):
    for argv in (["sweep", "nonsense"], ["identify", "--method", "adam"], [], ["simulate", "--seed", "x"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_gradcheck_passes_and_detects_sign_flip(tmp_path, capsys):
    out = str(tmp_path / "g")
    assert main(["gradcheck", "--out", out]) == EXIT_OK
    text = capsys.readouterr().out
    assert "cond=" in text and "FAIL" not in text
    rows = _rows(tmp_path / "g" / "gradcheck.csv")
    assert rows and all(r["passed"] == "1" for r in rows)
    assert main(["gradcheck", "--out", out, "--inject-sign-flip"]) == EXIT_CHECK
    assert "FAIL" in capsys.readouterr().out


def test_sweep_row_counts(tmp_path):
    cfg = _config(tmp_path, extra="sweep:\n  initials: [0.1, 0.19, 0.5]\n")
    out = tmp_path / "s"
    assert main(["sweep", "rho", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "sweep_rho.csv")
    assert [float(r["rho_t"]) for r in rows] == [1e-6, 1e-3, 0.05, 1.0, 10.0]
    assert main(["sweep", "initials", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "sweep_initials.csv")
    assert [float(r["mu_init"]) for r in rows] == [0.1, 0.19, 0.5]


def test_bench_rows(tmp_path):
    cfg = _config(tmp_path, duration=0.4, extra="bench:\n  n_trials: 2\n")
    out = tmp_path / "b"
    assert main(["bench", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "bench.csv")
    assert len(rows) == 8
    assert {r["method"] for r in rows} == {"Nonsmooth", "Smoothed", "RandZeroth", "RandFirst"}
    assert all(float(r["wall_ms"]) >= 0 for r in rows)


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "frictionid.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for command in ("simulate", "identify", "gradcheck", "sweep", "bench"):
        assert command in res.stdout
