"""Command-line front end: ``oupm check``, ``oupm run`` and ``oupm oracle``."""

from __future__ import annotations

import argparse
import csv
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from .dsl import load
from .errors import (ContractViolation, InitializationError, ModelError, ModelRuntimeError,
                     OracleLimitation)
from .infer.chain import run as run_chain
from .infer.config import SamplerConfig

EXIT_OK, EXIT_MODEL, EXIT_INIT, EXIT_ORACLE = 0, 1, 2, 3

RUN_HEADER = ["run", "step", "elapsed_s", "query", "value", "estimate"]
AGG_HEADER = ["step", "query", "value", "mean", "variance"]
ORACLE_HEADER = ["query", "value", "probability", "bound"]

MODELS_DIR = Path(__file__).resolve().parent / "models"


def resolve_model(path: str) -> Path:
    """A model file path, falling back to the bundled corpus by file name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = MODELS_DIR / p.name
    if bundled.exists():
        return bundled
    return p


def read_model(path: str):
    p = resolve_model(path)
    return load(p.read_text(encoding="utf-8"))


def _report_model_error(e: ModelError, path: str) -> int:
    for d in e.diagnostics:
        print(d.format(path), file=sys.stderr)
    return EXIT_MODEL


def default_checkpoints(steps: int) -> List[int]:
    """Powers of two up to ``steps``, plus ``steps`` itself."""
    out = []
    c = 1
    while c < steps:
        out.append(c)
        c *= 2
    if steps > 0:
        out.append(steps)
    return out


def parse_checkpoints(text: str, steps: int) -> List[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad checkpoint list {text!r}") from None
    if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("checkpoints must be strictly increasing")
    if vals[0] < 1 or vals[-1] > steps:
        raise argparse.ArgumentTypeError(f"checkpoints must lie in 1..{steps}")
    return vals


# -- check -------------------------------------------------------------------

def cmd_check(args) -> int:
    model = read_model(args.model)
    print(f"model: {args.model}")
    for line in model.summary():
        print("  " + line)
    sw = sorted(model.may_switch)
    print("switching functions: " + (", ".join(sw) if sw else "(none)"))
    print(f"evidence: {len(model.evidence)} variables; queries: {len(model.queries)}")
    return EXIT_OK


# -- run ---------------------------------------------------------------------

def _one_run(task):
    path, cfg, checkpoints = task
    model = read_model(path)
    res = run_chain(model, cfg, checkpoints)
    return [(step, elapsed, [(e.text, e.rows()) for e in ests]) for step, elapsed, ests in res.checkpoints]


def _aggregate(per_run) -> List[List[str]]:
    """Mean and variance across runs of every (step, query, value) estimate.

    A value a run never saw counts as estimate 0 for that run.  Runs with no
    samples at a checkpoint are left out.
    """
    rows = []
    n_steps = len(per_run[0])
    for ci in range(n_steps):
        step = per_run[0][ci][0]
        n_queries = len(per_run[0][ci][2])
        for qi in range(n_queries):
            text = per_run[0][ci][2][qi][0]
            runs = [dict(r[ci][2][qi][1]) for r in per_run]
            runs = [r for r in runs if "" not in r]
            if not runs:
                rows.append([str(step), text, "", "no samples", ""])
                continue
            values = sorted(set(v for r in runs for v in r))
            for v in values:
                xs = [float(r.get(v, 0.0)) for r in runs]
                mean = sum(xs) / len(xs)
                var = statistics.variance(xs) if len(xs) > 1 else 0.0
                rows.append([str(step), text, v, repr(mean), repr(var)])
    return rows


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def agg_path(out: str) -> str:
    root, ext = os.path.splitext(out)
    return root + ".agg" + (ext or ".csv")


def cmd_run(args) -> int:
    try:
        cfg0 = SamplerConfig(kind=args.sampler, steps=args.steps, burn_in=args.burnin,
                             init_phase=args.init_phase, birth_death_rate=args.bd_rate,
                             seed=args.seed, debug=args.debug)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODEL
    read_model(args.model)   # fail early on model errors
    checkpoints = (parse_checkpoints(args.checkpoints, args.steps) if args.checkpoints
                   else default_checkpoints(args.steps))
    path = str(resolve_model(args.model))
    tasks = []
    for i in range(args.runs):
        cfg = SamplerConfig(kind=cfg0.kind, steps=cfg0.steps, burn_in=cfg0.burn_in,
                            init_phase=cfg0.init_phase, birth_death_rate=cfg0.birth_death_rate,
                            seed=args.seed + i, debug=cfg0.debug)
        tasks.append((path, cfg, checkpoints))
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            per_run = list(pool.map(_one_run, tasks))
    else:
        per_run = [_one_run(t) for t in tasks]

    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_HEADER)
        for i, snaps in enumerate(per_run):
            for step, elapsed, queries in snaps:
                el = f"{elapsed:.6f}" if args.timing else ""
                for text, rows in queries:
                    for value, est in rows:
                        w.writerow([i, step, el, text, value, est])
        agg = _aggregate(per_run) if per_run and per_run[0] else []
        if close:
            with open(agg_path(args.out), "w", newline="", encoding="utf-8") as ah:
                aw = csv.writer(ah, lineterminator="\n")
                aw.writerow(AGG_HEADER)
                aw.writerows(agg)
        else:
            fh.write("\n")
            w.writerow(AGG_HEADER)
            w.writerows(agg)
    finally:
        if close:
            fh.close()
    return EXIT_OK


# -- oracle ------------------------------------------------------------------

def cmd_oracle(args) -> int:
    from .oracle import enumerate_worlds, exact_posterior
    model = read_model(args.model)
    dist = enumerate_worlds(model, trunc=args.trunc, tail=args.tail, keep_worlds=False)
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORACLE_HEADER)
        for i, q in enumerate(model.queries):
            post = exact_posterior(dist, i)
            for value, p in post.rows():
                w.writerow([q.text, value, repr(p), repr(post.bound)])
    finally:
        if close:
            fh.close()
    print(f"{dist.n_worlds} worlds; truncation bound {dist.truncation_bound:.3g}", file=sys.stderr)
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oupm", description="Open-universe model checking, sampling and exact enumeration.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and validate a model, print a summary")
    c.add_argument("model")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="run repeated seeded chains and write estimates as CSV")
    r.add_argument("model")
    r.add_argument("--sampler", default="gibbs", choices=["mh", "parent-mh", "gibbs", "gibbs-noblock"])
    r.add_argument("--steps", type=int, default=10000)
    r.add_argument("--burnin", type=int, default=0)
    r.add_argument("--init-phase", type=int, default=None,
                   help="steps of relaxed birth/death moves (default: burnin // 10)")
    r.add_argument("--bd-rate", type=float, default=0.2, help="probability of a birth/death move per step")
    r.add_argument("--runs", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--checkpoints", default=None, help="comma-separated step counts (default: powers of two)")
    r.add_argument("--out", default=None, help="CSV path; aggregates go to <out>.agg.csv (default: stdout)")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--timing", action="store_true", help="fill the elapsed_s column")
    r.add_argument("--debug", action="store_true", help="check world invariants after every step")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="exact posterior by enumeration")
    o.add_argument("model")
    o.add_argument("--trunc", type=int, default=None, help="maximum value of every Poisson count")
    o.add_argument("--tail", type=float, default=1e-8, help="tail mass per Poisson when --trunc is absent")
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "runs", 1) < 1 or getattr(args, "jobs", 1) < 1:
        ap.error("--runs and --jobs must be positive")
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as e:
        ap.error(str(e))
    except ModelError as e:
        return _report_model_error(e, args.model)
    except (OSError, ModelRuntimeError) as e:
        print(f"{args.model}: error: {e}", file=sys.stderr)
        return EXIT_MODEL
    except InitializationError as e:
        print(f"{args.model}: {e}", file=sys.stderr)
        return EXIT_INIT
    except OracleLimitation as e:
        print(f"{args.model}: oracle limitation: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except ContractViolation as e:
        if args.command == "oracle":
            print(f"{args.model}: oracle: {e}", file=sys.stderr)
            return EXIT_ORACLE
        raise


if __name__ == "__main__":
    sys.exit(main())
