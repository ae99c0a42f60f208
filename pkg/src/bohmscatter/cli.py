"""Command-line entry point: run / scaling / oracle / fast-check / lln."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .beam import lln_run
from .harness import (
    ConfigError,
    ExperimentConfig,
    PhysicsError,
    oracle_csv,
    run_experiment,
    scaling_study,
    write_outputs,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_GATES = 4


def _common(sub):
    sub.add_argument("--config", required=True, help="experiment config JSON")
    sub.add_argument("--seed", type=int, default=None, help="override sampling.seed")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--workers", type=int, default=1, help="parallel node workers")
    sub.add_argument("--gates", action="store_true", help="enable acceptance gates")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bohmscatter", description=__doc__)
    sp = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "scaling", "oracle", "fast-check", "lln"):
        _common(sp.add_parser(name))
    sp.choices["scaling"].add_argument(
        "--epsilons", default="1.0,0.7,0.5", help="comma-separated epsilon schedule"
    )
    sp.choices["scaling"].add_argument(
        "--radii", default=None, help="comma-separated R schedule (default: detector radii)"
    )
    sp.choices["lln"].add_argument(
        "--from-report", default=None, help="reuse per-node detection from a report.json"
    )
    return ap


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            rep = run_experiment(cfg, workers=args.workers)
            paths = write_outputs(rep, args.out, amp_csv=oracle_csv(cfg))
            print(json.dumps({"outputs": paths, "gates": rep.data["gates"]["passed"]}))
            if args.gates and not rep.data["gates"]["passed"]:
                return EXIT_GATES
            return EXIT_OK

        if args.command == "oracle":
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            p = out / "oracle.csv"
            p.write_text(oracle_csv(cfg))
            print(json.dumps({"outputs": {"oracle": str(p)}}))
            return EXIT_OK

        if args.command == "fast-check":
            rep = run_experiment(cfg, workers=1, with_diagnostics=True, with_lln=False)
            diag = rep.data["diagnostics"]
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            p = out / "fast_report.json"
            p.write_text(json.dumps(rep.data["diagnostics"]["fast"], sort_keys=True, indent=2) + "\n")
            rel = np.asarray(diag["fast"]["rel_diff"], dtype=float)
            cone = np.asarray(diag["fast"]["cone"], dtype=float)
            scored = cone > 0
            print(json.dumps({"outputs": {"fast": str(p)}, "max_rel_diff": float(rel[scored].max()) if scored.any() else 0.0}))
            if args.gates and scored.any() and rel[scored].max() >= cfg.gates()["fast_tol"]:
                return EXIT_GATES
            return EXIT_OK

        if args.command == "lln":
            beam = cfg.beam()
            if args.from_report:
                data = json.loads(Path(args.from_report).read_text())
                nodes = data["sigma"]["nodes"]
                radii = np.array([n["r"] for n in nodes])
                p_scored = np.array([float(np.sum(n["p_det"])) for n in nodes])
            else:
                rep = run_experiment(cfg, workers=args.workers, with_diagnostics=False, with_lln=False)
                nodes = rep.data["sigma"]["nodes"]
                radii = np.array([n["r"] for n in nodes])
                p_scored = np.array([float(np.sum(n["p_det"])) for n in nodes])
            res = lln_run(beam, radii, p_scored, (1e2, 1e3, 1e4), repeats=50)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            payload = {
                "tau": res.tau.tolist(),
                "rms_deviation": res.rms_deviation.tolist(),
                "mean_rate": res.mean_rate.tolist(),
                "gamma_hat": res.gamma_hat,
                "fitted_exponent": res.fitted_exponent,
            }
            p = out / "lln.json"
            p.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
            print(json.dumps({"outputs": {"lln": str(p)}, "fitted_exponent": res.fitted_exponent}))
            return EXIT_OK

        if args.command == "scaling":
            eps = [float(x) for x in args.epsilons.split(",")]
            if args.radii:
                radii = [float(x) for x in args.radii.split(",")]
            else:
                radii = [float(r) for r in cfg.raw["detector"]["radii"]]
            table = scaling_study(cfg, eps, radii, workers=args.workers)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            p = out / "scaling.json"
            p.write_text(json.dumps(table, sort_keys=True, indent=2, default=float) + "\n")
            print(json.dumps({"outputs": {"scaling": str(p)}}))
            return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as e:
        print(f"physics precondition failed: {e}", file=sys.stderr)
        return EXIT_PHYSICS
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
