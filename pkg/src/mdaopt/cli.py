"""Command-line front end: ``mdaopt {run,compare,ablate,verify,rate}``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .analysis import rate_fit
from .config import ConfigError, RunConfig, load_config
from .core import TRACE_COLUMNS, UsageError
from .optimizers import run
from .schedules import ScheduleSpec

log = logging.getLogger("mdaopt")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def fmt(value) -> str:
    """Shortest round-trip text for floats, plain text for everything else."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _schedule_text(spec: ScheduleSpec) -> str:
    parts = [f"lr_shape={spec.lr_shape}", f"base_lr={spec.base_lr!r}", f"c0={spec.c0!r}", f"compensate_momentum={spec.compensate_momentum}"]
    if spec.stages:
        parts.append("stages=" + ",".join(":".join(repr(v) for v in st) for st in spec.stages))
    if spec.warmup_steps:
        parts.append(f"warmup_steps={spec.warmup_steps}")
    return " ".join(parts)


def write_trace_csv(path: Path, trace) -> None:
    m = trace.meta
    lines = [
        f"# problem: {m['problem']}",
        f"# optimizer: {m['optimizer']} {' '.join(f'{k}={v!r}' for k, v in m['hyper'].items())}".rstrip(),
        f"# schedule: {_schedule_text(m['schedule'])}",
        f"# T: {m['T']}",
        f"# seed: {m['seed']}",
        f"# generator: {m['generator']}",
        f"# version: {m['version']}",
        ",".join(TRACE_COLUMNS),
    ]
    for row in trace:
        lines.append(",".join(fmt(v) for v in row.values()))
    if trace.aborted:
        lines.append(f"# abort: step={trace.abort_step} reason={trace.abort_reason}")
    path.write_text("\n".join(lines) + "\n")


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, [(fn, it) for it in items]))


def _star(args):
    fn, it = args
    return fn(*it)


def _one_run(cfg: RunConfig, optimizer_id: str, seed: int):
    return run(
        cfg.build_problem(),
        optimizer_id,
        cfg.schedule,
        cfg.T,
        seed,
        weight_decay=cfg.weight_decay_for(optimizer_id),
        **cfg.hyper_for(optimizer_id),
    )


def _write_table(out: Path, stem: str, header: list[str], rows: list[list], notes: list[str] = ()) -> str:
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    cells = [header] + [[fmt(v) if not isinstance(v, float) else f"{v:.6g}" for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    text = "\n".join("  ".join(c.ljust(wd) for c, wd in zip(row, widths)).rstrip() for row in cells)
    if notes:
        text += "\n" + "\n".join(notes)
    (out / f"{stem}.txt").write_text(text + "\n")
    return text


def _execute_runs(cfg: RunConfig, out: Path, jobs: int):
    out.mkdir(parents=True, exist_ok=True)
    items = [(cfg, oid, seed) for oid in cfg.optimizers for seed in cfg.seeds]
    traces = _pool_map(_one_run, items, jobs)
    for (_, oid, seed), tr in zip(items, traces):
        write_trace_csv(out / f"{oid}_seed{seed}.csv", tr)
        if tr.aborted:
            log.error("%s seed %d aborted at step %d: %s", oid, seed, tr.abort_step, tr.abort_reason)
    return items, traces


def cmd_run(cfg: RunConfig, out: Path, jobs: int) -> int:
    items, traces = _execute_runs(cfg, out, jobs)
    problem = cfg.build_problem()
    rows = []
    for (_, oid, seed), tr in zip(items, traces):
        x = tr.returned_iterate(cfg.return_mode)
        ret_loss = problem.value(x) if x is not None and not tr.aborted else math.nan
        rows.append([oid, seed, tr.final_loss, tr.final_grad_norm_sq, ret_loss, "" if tr.abort_step is None else tr.abort_step])
    print(_write_table(out, "summary", ["optimizer", "seed", "final_loss", "final_grad_norm_sq", f"{cfg.return_mode}_loss", "abort_step"], rows))
    return EXIT_ABORT if any(tr.aborted for tr in traces) else EXIT_OK


def cmd_compare(cfg: RunConfig, out: Path, jobs: int) -> int:
    if len(cfg.optimizers) < 2:
        raise ConfigError("compare needs at least two optimizers in [optimizer] id")
    items, traces = _execute_runs(cfg, out, jobs)
    rows = []
    notes = []
    for oid in cfg.optimizers:
        trs = [tr for (_, o, _), tr in zip(items, traces) if o == oid]
        final = [tr.final_loss for tr in trs]
        min_gn = [float(np.min(tr.column("grad_norm_sq"))) for tr in trs]
        fm, fs = _mean_se(final)
        gm, gs = _mean_se(min_gn)
        flag = "*" if len(trs) < 2 else ""
        rows.append([oid, len(trs), fm, fs, gm, gs, flag])
    if len(cfg.seeds) < 2:
        notes.append("* single seed: standard errors reported as 0")
    print(_write_table(out, "comparison", ["optimizer", "n_seeds", "final_loss_mean", "final_loss_se", "min_grad_norm_sq_mean", "min_grad_norm_sq_se", "flag"], rows, notes))
    return EXIT_ABORT if any(tr.aborted for tr in traces) else EXIT_OK


def cmd_ablate(cfg: RunConfig, out: Path, jobs: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rows = ex.ablation_ladder(cfg.problem_for_seed, cfg.T, cfg.seeds, cfg.ablate_lrs, c=cfg.ablate_c, shapes=cfg.ablate_shapes)
    flags = ex.ladder_monotone(rows)
    table = [[r.rung, r.lr, r.schedule.lr_shape, r.mean, r.stderr, "" if ok else "non-monotone"] for r, ok in zip(rows, flags)]
    notes = []
    if cfg.T < 10:
        notes.append(f"note: T={cfg.T} is too short a horizon for the ladder to be informative")
    if len(cfg.seeds) < 2:
        notes.append("note: single seed, standard errors reported as 0")
    print(_write_table(out, "ablation", ["rung", "lr", "lr_shape", "final_loss_mean", "final_loss_se", "flag"], table, notes))
    return EXIT_OK


def cmd_rate(cfg: RunConfig, out: Path, jobs: int) -> int:
    Ts = cfg.rate_Ts
    if len(Ts) < 3:
        raise ConfigError(f"rate needs at least 3 T values, got {len(Ts)}")
    out.mkdir(parents=True, exist_ok=True)
    problem = cfg.build_problem()
    metrics = _pool_map(ex.rate_metric, [(problem, T, cfg.seeds, cfg.rate_c) for T in Ts], jobs)
    slope = rate_fit(zip(Ts, metrics))
    print(_write_table(out, "rate", ["T", "eta", "metric"], [[T, 1.0 / math.sqrt(T), m] for T, m in zip(Ts, metrics)], [f"slope: {slope!r}"]))
    return EXIT_OK


def cmd_verify(out: Path | None = None, suites=None) -> int:
    from .verify import SUITES, run_suites

    unknown = [name for name in suites or () if name not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {unknown}; choose from {', '.join(SUITES)}")
    results = run_suites(suites)
    failed = None
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<24} {r.seconds:6.2f}s  {r.detail}")
        if not r.passed and failed is None:
            failed = r
    if failed is not None:
        print(f"first failure: {failed.name}: {failed.detail}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "ablate": cmd_ablate, "rate": cmd_rate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--out", type=Path, help="output directory (overrides [run] output_dir)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
    common.add_argument("--suite", action="append", help="verify: run only this suite (repeatable)")
    parser = argparse.ArgumentParser(prog="mdaopt", description="Dual averaging optimizers: runs, comparisons and self-checks.")
    parser.add_argument("--version", action="version", version=f"mdaopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "ablate", "verify", "rate"):
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.out, args.suite)
        if args.config is None:
            raise ConfigError(f"{args.command} requires --config")
        cfg = load_config(args.config)
        if args.seed_offset:
            cfg.seeds = [s + args.seed_offset for s in cfg.seeds]
        out = args.out or cfg.output_dir
        return COMMANDS[args.command](cfg, out, max(1, args.jobs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
