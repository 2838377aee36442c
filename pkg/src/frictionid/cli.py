"""``frictionid`` command line: simulate, identify, gradcheck, sweep, bench.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .gradcheck import run_gradcheck
from .harness import (
    CONVERGENCE_TOL,
    ScenarioStream,
    TerrainSchedule,
    bench_methods,
    build_model,
    config_hash,
    estimate_rows,
    run_identification_experiment,
    run_scenario,
    stream_rows,
    sweep_initials,
    sweep_rho,
    write_csv,
)
from .identifier import METHODS, BufferEntry
from .rotations import quat_to_matrix

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

MANIFEST_HEADER = ["command", "file", "config_hash", "seed", "summary"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 already; keep the message on stderr
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML experiment config (defaults when omitted)")
    common.add_argument("--method", choices=sorted(METHODS), help="gradient method, overrides the config")
    common.add_argument("--seed", type=int, help="seed, overrides the config")
    common.add_argument("--out", metavar="DIR", help="output directory, overrides the config")

    parser = _Parser(prog="frictionid", description="Friction-coefficient identification experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="simulate the scenario and write the sampled stream")
    p = sub.add_parser("identify", parents=[common], help="run the online identifier and write the estimate series")
    p.add_argument("--input", metavar="CSV", help="replay a stream written by 'simulate' instead of simulating")
    p = sub.add_parser("gradcheck", parents=[common], help="check analytic gradients against finite differences")
    p.add_argument("--inject-sign-flip", action="store_true", help=argparse.SUPPRESS)
    p = sub.add_parser("sweep", parents=[common], help="initial-estimate or smoothing-parameter sweep")
    p.add_argument("kind", choices=["initials", "rho"])
    sub.add_parser("bench", parents=[common], help="per-method timing and estimate spread over seeded trials")
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.method is not None:
        updates["gradient"] = cfg.gradient.model_copy(update={"method": args.method})
    if args.out is not None:
        updates["output"] = cfg.output.model_copy(update={"dir": args.out})
    return cfg.model_copy(update=updates) if updates else cfg


class _Run:
    """Output directory bookkeeping: config echo, hashed CSVs and the manifest."""

    def __init__(self, cfg: ExperimentConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.dir = cfg.output.dir
        # the output location does not change results, so it stays out of the hash
        self.hash = config_hash(cfg.model_dump(mode="json", exclude={"output"}))
        os.makedirs(self.dir, exist_ok=True)
        with open(os.path.join(self.dir, "config.yaml"), "w") as fh:
            fh.write(f"# config_hash: {self.hash}\n")
            fh.write(cfg.dump())
        self.entries = []

    def write(self, name: str, header, rows, summary: dict) -> str:
        path = write_csv(os.path.join(self.dir, name), header, rows, self.hash)
        self.entries.append([self.command, name, self.hash, self.cfg.seed, json.dumps(summary, sort_keys=True)])
        return path

    def close(self) -> None:
        path = os.path.join(self.dir, "manifest.csv")
        existing = []
        if os.path.exists(path):
            with open(path, newline="") as fh:
                existing = [r for r in csv.reader(fh)][1:]
        names = {(e[0], e[1]) for e in self.entries}
        keep = [r for r in existing if (r[0], r[1]) not in names]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MANIFEST_HEADER)
            w.writerows(keep + self.entries)


def _finite(summary: dict) -> dict:
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in summary.items()}


def read_stream_csv(path: str, cfg: ExperimentConfig) -> ScenarioStream:
    """Buffer entries from a stream CSV written by ``simulate``."""
    scenario = cfg.scenario_config()
    model = build_model(scenario)
    n_j, n_c = model.n_joints, model.n_contacts
    entries, times, mus = [], [], []
    try:
        with open(path, newline="") as fh:
            for line, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    f = lambda k: float(row[k])
                    quat = np.array([f(k) for k in ("qw", "qx", "qy", "qz")])
                    contact = np.array([bool(int(row[f"c{k}"])) for k in range(n_c)])
                    vel = np.array([[f(f"v{k}{a}") for a in "xyz"] for k in range(n_c)])
                    f_ext = None
                    if f("fx_ext") != 0.0:
                        f_ext = np.zeros(model.n_v)
                        f_ext[0] = f("fx_ext")
                    entries.append(
                        BufferEntry(
                            timestamp=f("t"),
                            R=quat_to_matrix(quat / np.linalg.norm(quat)),
                            p=np.array([f("px"), f("py"), f("pz")]),
                            omega=np.array([f("wx"), f("wy"), f("wz")]),
                            p_dot=np.array([f("vx"), f("vy"), f("vz")]),
                            q_jnt=np.array([f(f"q{j}") for j in range(n_j)]),
                            qdot_jnt=np.array([f(f"qd{j}") for j in range(n_j)]),
                            tau=np.array([f(f"tau{j}") for j in range(model.n_a)]),
                            contact=contact,
                            foot_velocity=vel,
                            f_ext=f_ext,
                        )
                    )
                    times.append(f("t"))
                    mus.append(f("mu_true"))
                except (KeyError, ValueError, TypeError) as exc:
                    raise ConfigError(f"{path}: line {line}: bad stream record ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read stream {path}: {exc.strerror or exc}") from exc
    if not entries:
        raise ConfigError(f"{path}: no stream records")
    # rebuild the terrain from the recorded ground truth
    segments, start = [], times[0]
    for i in range(1, len(times) + 1):
        if i == len(times) or mus[i] != mus[i - 1]:
            end = times[i] if i < len(times) else times[-1] + scenario.dt_buffer
            segments.append((start, end, mus[i - 1]))
            start = end
    scenario = replace(scenario, terrain=TerrainSchedule(tuple(segments)), duration=times[-1] - times[0] + 1e-9)
    return ScenarioStream(scenario, model, entries, np.array(times), np.array(mus), [], np.zeros(0), np.zeros(0), np.zeros(0), [])


def cmd_simulate(cfg: ExperimentConfig) -> int:
    run = _Run(cfg, "simulate")
    stream = run_scenario(cfg.scenario_config())
    header, rows = stream_rows(stream)
    path = run.write("stream.csv", header, rows, {"n_entries": len(rows), "duration": float(stream.times[-1])})
    run.close()
    print(f"wrote {path} ({len(rows)} entries)")
    return EXIT_OK


def _mu_init(cfg: ExperimentConfig) -> Optional[float]:
    return cfg.identifier.mu_init


def cmd_identify(cfg: ExperimentConfig, input_csv: Optional[str] = None) -> int:
    run = _Run(cfg, "identify")
    stream = read_stream_csv(input_csv, cfg) if input_csv else run_scenario(cfg.scenario_config())
    metrics = run_identification_experiment(stream, cfg.gradient.method, cfg.identifier_config(), _mu_init(cfg))
    header, rows = estimate_rows(metrics)
    summary = _finite(metrics.summary())
    path = run.write("estimates.csv", header, rows, summary)
    run.close()
    print(f"wrote {path}; final mu_hat = {metrics.final_mu:.4f} ({metrics.method})")
    return EXIT_OK


def cmd_gradcheck(cfg: ExperimentConfig, sign_flip: bool = False) -> int:
    run = _Run(cfg, "gradcheck")
    results = run_gradcheck(cfg.identifier.rho_t, cfg.gradient.fd_step, -1.0 if sign_flip else 1.0)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.kind:16s} {r.name:44s} value={r.value:.3e} tol={r.threshold:.0e} cond={r.condition:.3e} [{r.detail}]")
    rows = [[r.kind, r.name, r.value, r.threshold, r.passed, r.condition, r.detail] for r in results]
    ok = all(r.passed for r in results)
    run.write("gradcheck.csv", ["kind", "case", "value", "threshold", "passed", "condition", "detail"], rows, {"all_passed": ok})
    run.close()
    print("all checks passed" if ok else "gradient check FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_sweep(cfg: ExperimentConfig, kind: str) -> int:
    run = _Run(cfg, f"sweep-{kind}")
    stream = run_scenario(cfg.scenario_config())
    idc = cfg.identifier_config()
    if kind == "initials":
        runs = sweep_initials(stream, cfg.gradient.method, cfg.sweep.initials, idc)
        rows = []
        for m in runs:
            conv = abs(m.final_mu - float(stream.mu_true[-1])) < CONVERGENCE_TOL
            rows.append([m.method, m.mu_init, m.final_mu, conv, m.convergence_time if m.convergence_time is not None else float("nan"), m.average_loss])
        header = ["method", "mu_init", "final_mu", "converged", "convergence_time", "average_loss"]
        summary = {"method": METHODS[cfg.gradient.method], "n_converged": int(sum(r[3] for r in rows)), "n_runs": len(rows)}
        path = run.write("sweep_initials.csv", header, rows, summary)
    else:
        out = sweep_rho(stream, cfg.sweep.rho_values, idc, _mu_init(cfg), cfg.gradient.method)
        header = ["rho_t", "average_loss", "final_mu", "convergence_time"]
        rows = [[r["rho_t"], r["average_loss"], r["final_mu"], r["convergence_time"] if r["convergence_time"] is not None else float("nan")] for r in out]
        best = min(out, key=lambda r: r["average_loss"] if np.isfinite(r["average_loss"]) else np.inf)
        path = run.write("sweep_rho.csv", header, rows, {"best_rho_t": best["rho_t"], "n_values": len(rows)})
    run.close()
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_bench(cfg: ExperimentConfig) -> int:
    run = _Run(cfg, "bench")
    b = cfg.bench
    rows = bench_methods(cfg.scenario_config(), b.methods, b.n_trials, cfg.identifier_config(), tuple(b.init_range))
    header = ["method", "trial", "seed", "mu_init", "final_mu", "wall_ms", "n_solves", "average_loss"]
    summary = {}
    for m in b.methods:
        tag = METHODS[m]
        sel = [r for r in rows if r["method"] == tag]
        summary[tag] = {
            "median_wall_ms": float(np.median([r["wall_ms"] for r in sel])),
            "std_final_mu": float(np.std([r["final_mu"] for r in sel])),
        }
    path = run.write("bench.csv", header, [[r[k] for k in header] for r in rows], summary)
    run.close()
    print(f"wrote {path} ({len(rows)} rows)")
    for tag, s in summary.items():
        print(f"  {tag:10s} median {s['median_wall_ms']:9.1f} ms/solve  std(final mu) {s['std_final_mu']:.4f}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "identify":
            return cmd_identify(cfg, args.input)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args.inject_sign_flip)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.kind)
        return cmd_bench(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
