"""``flowobs`` command-line entry point.

Exit codes: 0 success with every certificate passing, 1 infeasible LMI or
failed verification, 2 configuration or usage error, 3 malformed input
data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..errors import (ConfigError, DimensionMismatchError, IngestionError,
                      IntegrationError, NumericalError, SynthesisError, VerificationError)
from . import config as config_mod
from . import pipeline

log = logging.getLogger("flowobs")

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _load(path, seed=None):
    cfg = config_mod.load(path)
    if seed is not None:
        import dataclasses
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def cmd_synthesize(args) -> int:
    cfg = _load(args.config)
    art = pipeline.run_synthesize(cfg, args.out)
    print(art.certificates.read_text(), end="")
    print(f"gain written to {art.gain}")
    return EXIT_OK


def cmd_twin(args) -> int:
    cfg = _load(args.config, args.seed)
    art = pipeline.run_twin(cfg, args.out, args.gain, make_plots=not args.no_plots)
    print(art.summary.read_text(), end="")
    for p in art.paths():
        print(f"wrote {p}")
    return EXIT_OK


def cmd_observe(args) -> int:
    cfg = _load(args.config)
    art = pipeline.run_observe(cfg, args.measurements, args.out, args.gain,
                               make_plots=not args.no_plots)
    print(art.summary.read_text(), end="")
    for p in art.paths():
        print(f"wrote {p}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.gain is None:
        raise ConfigError("verify needs --gain PATH")
    cfg = _load(args.config)
    text, passed = pipeline.run_verify(cfg, args.gain)
    print(text, end="")
    return EXIT_OK if passed else EXIT_CERT


def _sweep_one(job):
    path, out, seed, no_plots = job
    ns = argparse.Namespace(config=path, out=out, seed=seed, gain=None, no_plots=no_plots)
    return path, _guarded(cmd_twin, ns)


def cmd_sweep(args) -> int:
    configs = args.config
    jobs = []
    for i, path in enumerate(configs):
        sub = Path(args.out) / f"{i:03d}_{Path(path).stem}"
        jobs.append((path, str(sub), args.seed, args.no_plots))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    for path, code in results:
        print(f"{path}: exit {code}")
    return max(code for _, code in results)


def _guarded(fn, args) -> int:
    try:
        return fn(args)
    except (ConfigError, DimensionMismatchError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except IngestionError as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except SynthesisError as exc:
        sol = exc.solution
        margin = "" if sol is None else f" (phase-1 margin t* = {sol.phase1_margin:.3e})"
        log.error("%s%s", exc, margin)
        return EXIT_CERT
    except VerificationError as exc:
        log.error("%s", exc)
        if exc.report is not None:
            print(exc.report.summary())
        return EXIT_CERT
    except (NumericalError, IntegrationError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowobs",
                                 description="Crossover-aware flow battery observer")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, gain=True, plots=False):
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", default="flowobs_out", help="output directory")
        if gain:
            p.add_argument("--gain", help="gain file from 'synthesize'")
        if plots:
            p.add_argument("--no-plots", action="store_true", help="skip SVG output")

    p = sub.add_parser("synthesize", help="solve the LMI program and certify the gain")
    common(p, gain=False)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("twin", help="simulate a plant and run the observer on it")
    common(p, plots=True)
    p.add_argument("--seed", type=int, help="override experiment.seed")
    p.set_defaults(func=cmd_twin)

    p = sub.add_parser("observe", help="run the observer on a measurement CSV")
    common(p, plots=True)
    p.add_argument("measurements", help="CSV with time_min,v_out_V,current_A,flow_L_per_min")
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("verify", help="re-check a stored gain against a config")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run 'twin' for several configs")
    p.add_argument("--config", action="append", required=True,
                   help="TOML file; repeat for several runs")
    p.add_argument("--out", default="flowobs_sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FLOWOBS_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return _guarded(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
