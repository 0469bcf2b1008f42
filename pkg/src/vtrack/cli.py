"""Command-line entry point: ablation runs, fusion, evaluation and synthetic data.

    vtrack run CONFIG.json [--resume] [--run-dir DIR] [--workers N]
    vtrack fuse --method {basic,trajectory,reliability} A.txt B.txt ... [--gt GT.txt] [--out F.txt]
    vtrack eval --pred P.txt --gt GT.txt
    vtrack synth SPEC.json [--seed N] [--out DIR]
    vtrack bench [--frames N]

Environment: VTRACK_OUTPUT_DIR (default ./runs) and VTRACK_WORKERS (default 1).

Exit codes: 0 success, 1 some ablation cells failed, 2 bad input (config, files).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

from .benchmark import (EvalCurves, SynthSpec, aggregate, evaluate, generate_synthetic, list_sequences,
                        load_sequence, read_trajectory, render_synthetic, write_trajectory)
from .benchmark.dataset import atomic_write, format_trajectory
from .ensemble import (DEFAULT_ALPHA, DEFAULT_ITERATIONS, DEFAULT_LAMBDA_C, FUSERS, EnsembleInput, fuse)
from .errors import ConfigParseError, TrackerError
from .pipeline import Tracker, TrackerConfig, track_frames

log = logging.getLogger("vtrack")

CONFIG_VERSION = 1
ENV_OUTPUT_DIR = "VTRACK_OUTPUT_DIR"
ENV_WORKERS = "VTRACK_WORKERS"
EXIT_OK, EXIT_CELL_FAILED, EXIT_BAD_INPUT = 0, 1, 2


# ---------------------------------------------------------------- config

def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigParseError(f"axis {dotted!r} descends into a non-object")
    d[keys[-1]] = value


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigParseError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON ({exc})") from None
    return validate_config(cfg)


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigParseError("config must be a JSON object")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigParseError(f"unsupported config version {cfg.get('version')!r}; expected {CONFIG_VERSION}")
    unknown = set(cfg) - {"version", "name", "base", "axes", "theta_grid", "sequences", "output_dir", "workers"}
    if unknown:
        raise ConfigParseError(f"unknown config keys: {sorted(unknown)}")
    cfg = copy.deepcopy(cfg)
    cfg.setdefault("name", "run")
    cfg.setdefault("base", {})
    cfg.setdefault("axes", {})
    if not isinstance(cfg["axes"], dict) or any(not isinstance(v, list) or not v for v in cfg["axes"].values()):
        raise ConfigParseError("axes must map dotted config paths to non-empty lists")
    if "theta_grid" in cfg:
        if "update.theta" in cfg["axes"]:
            raise ConfigParseError("give theta_grid or an update.theta axis, not both")
        cfg["axes"]["update.theta"] = list(cfg.pop("theta_grid"))  # the echo then reparses
    seqs = cfg.get("sequences")
    if not isinstance(seqs, dict) or not (seqs.get("root") or seqs.get("dirs") or seqs.get("synthetic")):
        raise ConfigParseError("sequences must give a dataset root, dirs or synthetic specs")
    for cell in expand_cells(cfg):  # every cell must parse before anything runs
        try:
            TrackerConfig.from_dict(cell["tracker"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigParseError(f"cell {cell['id']}: {exc}") from None
    return cfg


def expand_cells(cfg: dict) -> list[dict]:
    """Cartesian product of the ablation axes over the base tracker config."""
    names = list(cfg["axes"])
    cells = []
    for i, values in enumerate(itertools.product(*(cfg["axes"][n] for n in names))):
        tracker = copy.deepcopy(cfg["base"])
        for n, v in zip(names, values):
            _set_path(tracker, n, v)
        cells.append({"id": f"cell{i:03d}", "axes": dict(zip(names, values)), "tracker": tracker})
    return cells


def sequence_jobs(cfg: dict) -> list[dict]:
    """Sequence descriptors that workers can load by themselves."""
    seqs = cfg["sequences"]
    jobs = []
    if seqs.get("root"):
        dirs = list_sequences(seqs["root"])
        if seqs.get("names"):
            wanted = set(seqs["names"])
            dirs = [d for d in dirs if d.name in wanted]
            missing = wanted - {d.name for d in dirs}
            if missing:
                raise ConfigParseError(f"sequences not found under {seqs['root']}: {sorted(missing)}")
        jobs += [{"name": d.name, "dir": str(d)} for d in dirs]
    for d in seqs.get("dirs", []):
        jobs.append({"name": Path(d).name, "dir": str(d)})
    for i, s in enumerate(seqs.get("synthetic", [])):
        spec = SynthSpec.from_dict(s.get("spec", {}))
        seed = int(s.get("seed", 0))
        jobs.append({"name": s.get("name", f"{spec.name}-{i}-s{seed}"), "synthetic": spec.to_dict(),
                     "seed": seed})
    names = [j["name"] for j in jobs]
    if len(set(names)) != len(names):
        raise ConfigParseError("sequence names must be unique")
    return jobs


def _load(job: dict):
    if "dir" in job:
        return load_sequence(job["dir"])
    seq = render_synthetic(SynthSpec.from_dict(job["synthetic"]), job["seed"])
    seq.name = job["name"]
    return seq


# ---------------------------------------------------------------- run

def run_task(run_dir: str, cell: dict, job: dict) -> dict:
    """Track one sequence with one cell's config; never raises."""
    cell_dir = Path(run_dir) / "cells" / cell["id"]
    out_json = cell_dir / f"{job['name']}.json"
    t0 = time.perf_counter()
    try:
        seq = _load(job)
        cfg = TrackerConfig.from_dict(cell["tracker"])
        tracker = Tracker(cfg)
        traj = track_frames(cfg, seq.iter_frames(), seq.ground_truth[0], seq.name, tracker)
        curves = evaluate(traj, seq.ground_truth)
        write_trajectory(traj, cell_dir / f"{job['name']}.txt")
        record = {"cell": cell["id"], "sequence": job["name"], "status": "ok",
                  "attributes": sorted(seq.attributes), "n_warnings": len(tracker.warnings),
                  "n_updates": tracker.n_updates, "seconds": time.perf_counter() - t0,
                  "fps": len(seq) / max(1e-9, time.perf_counter() - t0), **curves.to_dict()}
    except Exception as exc:  # one bad cell must not abort the grid
        record = {"cell": cell["id"], "sequence": job["name"], "status": "error",
                  "error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc(),
                  "seconds": time.perf_counter() - t0}
    atomic_write(out_json, json.dumps(record, indent=1) + "\n")
    return record


def _resolve_run_dir(cfg: dict, out_root: Path, run_dir: str | None, resume: bool) -> Path:
    if run_dir:
        return Path(run_dir)
    if resume:
        previous = sorted(out_root.glob(f"{cfg['name']}-*")) if out_root.is_dir() else []
        if previous:
            return previous[-1]
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    path = out_root / f"{cfg['name']}-{stamp}"
    n = 1
    while path.exists():
        path = out_root / f"{cfg['name']}-{stamp}-{n}"
        n += 1
    return path


def summarize(cfg: dict, cells: list[dict], records: list[dict]) -> tuple[dict, str]:
    """Result JSON (config echo, per-sequence metrics, aggregated curves) and flat CSV."""
    by_cell = {c["id"]: [] for c in cells}
    for r in records:
        by_cell[r["cell"]].append(r)
    result = {"config": cfg, "cells": []}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cell", "sequence", "tracker", "metric", "value"])
    for c in cells:
        label = ",".join(f"{k}={v}" for k, v in c["axes"].items()) or "base"
        rows = sorted(by_cell[c["id"]], key=lambda r: r["sequence"])
        ok = [r for r in rows if r["status"] == "ok"]
        entry = {"id": c["id"], "axes": c["axes"], "tracker": c["tracker"],
                 "sequences": {r["sequence"]: ({"auc": r["auc"], "precision_at_20": r["precision_at_20"]}
                                               if r["status"] == "ok" else {"error": r["error"]})
                               for r in rows}}
        if ok:
            agg = aggregate([EvalCurves.from_dict(r) for r in ok])
            entry["aggregate"] = agg.to_dict()
        result["cells"].append(entry)
        for r in rows:
            if r["status"] == "ok":
                writer.writerow([c["id"], r["sequence"], label, "auc", repr(r["auc"])])
                writer.writerow([c["id"], r["sequence"], label, "precision_at_20", repr(r["precision_at_20"])])
            else:
                writer.writerow([c["id"], r["sequence"], label, "error", r["error"]])
    return result, buf.getvalue()


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        cells = expand_cells(cfg)
        jobs = sequence_jobs(cfg)
    except (ConfigParseError, TrackerError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out_root = Path(os.environ.get(ENV_OUTPUT_DIR) or cfg.get("output_dir") or "runs")
    workers = args.workers or int(os.environ.get(ENV_WORKERS) or cfg.get("workers") or 1)
    run_dir = _resolve_run_dir(cfg, out_root, args.run_dir, args.resume)
    run_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(run_dir / "config.json", json.dumps(cfg, indent=2) + "\n")

    records, pending = [], []
    for cell in cells:
        for job in jobs:
            done = run_dir / "cells" / cell["id"] / f"{job['name']}.json"
            if args.resume and done.is_file():
                prev = json.loads(done.read_text())
                if prev.get("status") == "ok":
                    records.append(prev)
                    continue
            pending.append((cell, job))
    log.info("run dir %s: %d tasks to run, %d resumed", run_dir, len(pending), len(records))

    if workers <= 1 or len(pending) <= 1:
        records += [run_task(str(run_dir), c, j) for c, j in pending]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_task, str(run_dir), c, j) for c, j in pending]
            records += [f.result() for f in futures]

    result, table = summarize(cfg, cells, records)
    atomic_write(run_dir / "results.json", json.dumps(result, indent=1) + "\n")
    atomic_write(run_dir / "results.csv", table)
    failed = [r for r in records if r["status"] != "ok"]
    for r in failed:
        print(f"cell {r['cell']} on {r['sequence']} failed: {r['error']}", file=sys.stderr)
    print(str(run_dir))
    return EXIT_CELL_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------- fuse / eval / synth

def cmd_fuse(args) -> int:
    try:
        trajs = [read_trajectory(p) for p in args.files]
        inp = EnsembleInput.of(trajs, [Path(p).stem for p in args.files])
        fused = fuse(inp, args.method, args.lam_c, args.alpha, args.iterations)
        gt = read_trajectory(args.gt) if args.gt else None
        metrics = evaluate(fused, gt).to_dict() if gt is not None else None
    except (TrackerError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.out:
        write_trajectory(fused, args.out)
        if metrics is not None:
            print(json.dumps(metrics))
    else:
        sys.stdout.write(format_trajectory(fused))
        if metrics is not None:
            print(json.dumps(metrics), file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        curves = evaluate(read_trajectory(args.pred), read_trajectory(args.gt))
    except (TrackerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    print(json.dumps(curves.to_dict()))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text())
        spec_dict = doc.get("spec", doc) if isinstance(doc, dict) else None
        if spec_dict is None:
            raise ConfigParseError("spec file must hold a JSON object")
        spec = SynthSpec.from_dict(spec_dict)
        seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    except (OSError, json.JSONDecodeError, TypeError, ValueError, TrackerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.out:
        out = Path(args.out)
    else:
        root = Path(os.environ.get(ENV_OUTPUT_DIR) or "runs")
        out = root / f"synth-{datetime.now().strftime('%Y%m%d-%H%M%S')}" / spec.name
    try:
        generate_synthetic(spec, seed, out)
    except TrackerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    print(str(out))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import basic_model_fps
    print(json.dumps(basic_model_fps(args.frames, args.seed)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vtrack", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an ablation grid over sequences")
    r.add_argument("config")
    r.add_argument("--resume", action="store_true", help="reuse the latest run dir and skip finished cells")
    r.add_argument("--run-dir", help="explicit run directory")
    r.add_argument("--workers", type=int, help=f"worker processes (overrides ${ENV_WORKERS})")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fuse", help="fuse tracker trajectories")
    f.add_argument("--method", choices=FUSERS, required=True)
    f.add_argument("files", nargs="+")
    f.add_argument("--gt")
    f.add_argument("--out")
    f.add_argument("--lam-c", type=float, default=DEFAULT_LAMBDA_C)
    f.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    f.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)
    f.set_defaults(func=cmd_fuse)

    e = sub.add_parser("eval", help="success and precision curves of one trajectory")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic sequence directory")
    s.add_argument("spec")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("bench", help="basic-model throughput micro-benchmark")
    b.add_argument("--frames", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
