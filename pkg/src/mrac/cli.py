"""Command-line entry point: ``mrac run | compare | trace``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.
``MRAC_OUT`` sets the default output root for ``run``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from .config import RunConfig, load_config
from .errors import ComparisonError, ConfigError
from .sim_runtime import BatchResult, EpisodeMetrics, run_batch

log = logging.getLogger("mrac")

CSV_COLUMNS = ("run_id", "seed", "t", "algo", "epsilon", "action_r", "action_rp", "not_ac", "comms",
               "J_r", "J_rp", "p_r", "p_rp")
SUMMARY_COLUMNS = ("run_id", "seed", "algo", "epsilon", "horizon", "not_ac", "comms", "not_ac_pct", "comms_pct",
                   "mean_J", "evaluated")
COMPARE_COLUMNS = ("run_dir", "algo", "epsilon", "runs", "horizon", "not_ac_mean", "not_ac_pct", "comms_mean",
                   "comms_pct", "mean_J")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([row[c] for c in columns])
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def metric_rows(run_id: str, ep: EpisodeMetrics) -> list[dict]:
    algo = ep.algorithm
    return [
        {
            "run_id": run_id,
            "seed": ep.seed,
            "t": s.t,
            "algo": algo.name.value,
            "epsilon": _num(algo.epsilon),
            "action_r": s.action_r.index,
            "action_rp": s.action_rp.index,
            "not_ac": int(s.not_ac),
            "comms": s.comms,
            "J_r": _num(s.J_r),
            "J_rp": _num(s.J_rp),
            "p_r": s.p_r,
            "p_rp": s.p_rp,
        }
        for s in ep.steps
    ]


def trace_rows(ep: EpisodeMetrics) -> list[dict]:
    return [
        {
            "seed": ep.seed,
            "t": s.t,
            "action_r": str(s.action_r),
            "action_rp": str(s.action_rp),
            "not_ac": s.not_ac,
            "comms": s.comms,
            "p": s.p_r,
            "forced": s.forced,
            "p_ac": s.p_ac,
            "p_not_ac": s.p_not_ac,
            "p_comm": s.p_comm,
            "lb": s.lb,
            "ub": s.ub,
            "deterministic": s.deterministic,
        }
        for s in ep.steps
    ]


def write_run(out: Path, cfg: RunConfig, batch: BatchResult) -> None:
    run_id = cfg.run_id()
    metrics, traces, timing, summary = [], [], [], []
    for ep in batch.episodes:
        metrics += metric_rows(run_id, ep)
        traces += trace_rows(ep)
        timing += [{"seed": ep.seed, "t": s.t, "wall_time_s": repr(s.wall_time)} for s in ep.steps]
        row = ep.summary()
        summary.append({
            "run_id": run_id, "seed": ep.seed, "algo": ep.algorithm.name.value, "epsilon": _num(ep.algorithm.epsilon),
            "horizon": ep.horizon, "not_ac": row["not_ac"], "comms": row["comms"],
            "not_ac_pct": _num(row["not_ac_pct"]), "comms_pct": _num(row["comms_pct"]),
            "mean_J": _num(row["mean_J"]), "evaluated": ep.evaluated_total,
        })
    atomic_write(out / "resolved_config.json", json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
    atomic_write(out / "metrics.csv", _csv(metrics, CSV_COLUMNS))
    atomic_write(out / "summary.csv", _csv(summary, SUMMARY_COLUMNS))
    atomic_write(out / "timing.csv", _csv(timing, ("seed", "t", "wall_time_s")))
    atomic_write(out / "trace.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in traces))


def _output_dir(cfg: RunConfig, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg.execution.out:
        return Path(cfg.execution.out)
    root = Path(os.environ.get("MRAC_OUT", "runs"))
    return root / cfg.run_id()


def _parse_seeds(text: str | None):
    if text is None:
        return None
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--seeds expects comma-separated integers, got {text!r}") from exc


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set or (), _parse_seeds(args.seeds))
    out = _output_dir(cfg, args.out)
    algo = cfg.algorithm.to_spec()
    batch = run_batch([(cfg.scenario.to_scenario(), algo)], cfg.execution.seeds, workers=cfg.execution.parallelism)
    write_run(out, cfg, batch)
    for row in batch.aggregate():
        print(
            f"{row['algo']}: runs={row['runs']} not_ac={row['not_ac_mean']:.2f}±{row['not_ac_std']:.2f} "
            f"({row['not_ac_pct']:.1f}%) comms={row['comms_mean']:.1f}±{row['comms_std']:.1f} "
            f"({row['comms_pct']:.1f}%) mean_J={row['mean_J']:.4f}"
        )
    print(f"wrote {out}")
    return EXIT_OK


def _read_summary(d: Path) -> tuple[dict, list[dict]]:
    cfg_path, summ_path = d / "resolved_config.json", d / "summary.csv"
    if not cfg_path.is_file() or not summ_path.is_file():
        raise ComparisonError(f"{d} is not a completed run directory")
    cfg = json.loads(cfg_path.read_text())
    with summ_path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return cfg, rows


def compare_rows(dirs: Sequence[str | Path]) -> list[dict]:
    if len(dirs) < 2:
        raise ComparisonError("compare needs at least two run directories")
    out, horizons = [], set()
    for d in map(Path, dirs):
        cfg, rows = _read_summary(d)
        horizon = int(cfg["scenario"]["horizon"])
        horizons.add(horizon)
        n = len(rows)
        na = sum(int(r["not_ac"]) for r in rows) / n
        cm = sum(int(r["comms"]) for r in rows) / n
        out.append({
            "run_dir": str(d),
            "algo": cfg["algorithm"]["name"],
            "epsilon": float(cfg["algorithm"]["epsilon"]),
            "runs": n,
            "horizon": horizon,
            "not_ac_mean": na,
            "not_ac_pct": 100.0 * na / horizon,
            "comms_mean": cm,
            "comms_pct": 100.0 * cm / (2 * horizon),
            "mean_J": sum(float(r["mean_J"]) for r in rows) / n,
        })
    if len(horizons) != 1:
        raise ComparisonError(f"runs disagree on the episode length: {sorted(horizons)}")
    order = {"BaselineI": 0, "BaselineII": 1, "EnforceAC": 2, "REnforceAC": 3, "REnforceACSimp": 4}
    out.sort(key=lambda r: (order.get(r["algo"], 9), r["epsilon"], r["run_dir"]))
    return out


def cmd_compare(args) -> int:
    rows = compare_rows(args.dirs)
    text = _csv([{k: (_num(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows], COMPARE_COLUMNS)
    if args.csv:
        atomic_write(Path(args.csv), text)
    if args.format == "csv":
        sys.stdout.write(text)
    else:
        print(f"{'algo':<16}{'eps':>6}{'runs':>6}{'Not-AC':>16}{'comms':>18}{'mean J':>12}")
        for r in rows:
            print(
                f"{r['algo']:<16}{r['epsilon']:>6.2f}{r['runs']:>6}"
                f"{r['not_ac_mean']:>8.1f} ({r['not_ac_pct']:4.1f}%)"
                f"{r['comms_mean']:>9.1f} ({r['comms_pct']:5.1f}%){r['mean_J']:>12.3f}"
            )
    return EXIT_OK


def cmd_trace(args) -> int:
    path = Path(args.dir) / "trace.jsonl"
    if not path.is_file():
        raise ConfigError(f"no trace in {args.dir}")
    lines = [ln for ln in path.read_text().splitlines() if json.loads(ln)["seed"] == args.seed]
    if not lines:
        raise ConfigError(f"seed {args.seed} not in run {args.dir}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrac", description="Action-consistent two-robot planning experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a batch of episodes from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (repeatable)")
    r.add_argument("--seeds", help="comma-separated seed list, overrides execution.seeds")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="aggregate table over completed runs")
    c.add_argument("dirs", nargs="+")
    c.add_argument("--format", choices=("text", "csv"), default="text")
    c.add_argument("--csv", help="also write the table to this CSV file")
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("trace", help="per-step guarantee trace of one seed as JSON lines")
    t.add_argument("dir")
    t.add_argument("--seed", type=int, required=True)
    t.set_defaults(func=cmd_trace)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ComparisonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
