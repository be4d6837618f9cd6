"""Command-line entry point: ingest, train, eval, inspect, gradcheck, synth.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__

log = logging.getLogger("dgrec")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class RunManifest:
    """``manifest.json`` under the output directory, written at start and at end."""

    def __init__(self, out_dir: Path, command: str, seed, config: dict, inputs: list[Path]):
        self.path = out_dir / "manifest.json"
        self.data = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": config,
            "inputs": {str(p): sha256(p) for p in inputs if p.is_file()},
            "outputs": {},
            "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "finished": None,
            "status": "running",
        }
        out_dir.mkdir(parents=True, exist_ok=True)
        self._flush()

    def _flush(self) -> None:
        _write_atomic(self.path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    def finish(self, outputs: list[Path], status: str = "ok") -> None:
        self.data["outputs"] = {p.name: sha256(p) for p in sorted(outputs) if p.is_file()}
        self.data["finished"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        self.data["status"] = status
        self._flush()


def _need_file(path: str | None, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{flag}: no such file {p}")
    return p


def _outputs(out: Path) -> list[Path]:
    return [p for p in out.iterdir() if p.is_file() and p.name != "manifest.json"]


# ---------------------------------------------------------------- commands

def cmd_ingest(args) -> int:
    from .ingest import SplitConfig, parse_events, parse_hetrec_delicious
    from .pipeline import build_dataset

    events_path = _need_file(args.events, "--events")
    edges_path = _need_file(args.edges, "--edges") if args.edges else None
    out = Path(args.out)
    seed = _seed_or_env(args.seed)
    split = SplitConfig(args.holdout_days, args.interval, seed)
    manifest = RunManifest(out, "ingest", seed,
                           {"interval": args.interval, "holdout_days": args.holdout_days,
                            "format": args.format, "max_session_len": args.max_session_len},
                           [p for p in (events_path, edges_path) if p])
    with open(events_path, "rb") as fh:
        if args.format == "hetrec-delicious":
            events, errors = parse_hetrec_delicious(fh), []
        else:
            events, errors = parse_events(fh)
    for e in errors[:10]:
        log.warning("events line %d: %s", e.line, e.message)
    if errors:
        log.warning("%d malformed event rows skipped", len(errors))
    edges_fh = open(edges_path, "rb") if edges_path else None
    try:
        ds = build_dataset(events, edges_fh, split, args.max_session_len)
    finally:
        if edges_fh:
            edges_fh.close()
    if len(ds.train) == 0:
        raise RuntimeError("ingest produced an empty training split")
    ds.save(out)
    stats = ds.stats()
    stats["malformed_rows"] = len(errors)
    _write_atomic(out / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    for k in ("users", "items", "events", "links", "avg_friends_per_user", "avg_events_per_user",
              "avg_session_length"):
        v = stats[k]
        print(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}")
    manifest.finish(_outputs(out))
    return EXIT_OK


def _overrides(args) -> dict:
    keys = ("hidden", "embed", "layers", "fanouts", "dropout", "batch", "base_lr", "decay",
            "decay_interval", "mode", "seed", "epochs", "patience", "dtype", "max_session_len")
    out = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_train(args) -> int:
    from .config import resolve_config
    from .pipeline import load_dataset
    from .train import make_context, train

    data = Path(args.data)
    config_path = _need_file(args.config, "--config") if args.config else None
    cfg = resolve_config(str(config_path) if config_path else None, _overrides(args))
    ds = load_dataset(data, need_graph=cfg.mode != "self_only")
    out = Path(args.out)
    inputs = [data / f for f in ("train.dgrs", "valid.dgrs", "test.dgrs", "edges.csv")]
    manifest = RunManifest(out, "train", cfg.seed, _config_dict(cfg),
                           inputs + ([config_path] if config_path else []))
    _write_atomic(out / "config.txt", cfg.to_text())
    ctx = make_context(ds.train, ds.valid, ds.test, strict=cfg.strict_train_context)
    result = train(ds.train, ds.graph, cfg, len(ds.items), len(ds.users), ds.valid, ctx, out,
                   max_steps=args.max_steps)
    print(f"best_epoch={result.best_epoch} valid_recall@{cfg.eval_k}={result.best_recall:.6f}")
    manifest.finish(_outputs(out))
    return EXIT_OK


def _config_dict(cfg) -> dict:
    return dict(line.split("=", 1) for line in cfg.to_text().splitlines() if "=" in line)


def _load_model(checkpoint: Path, config_path: Path | None, n_items: int, n_users: int):
    from .config import resolve_config
    from .model import DGRec
    from .tensorcore import load_checkpoint

    if config_path is None and (checkpoint.parent / "config.txt").is_file():
        config_path = checkpoint.parent / "config.txt"
    cfg = resolve_config(str(config_path) if config_path else None)
    with open(checkpoint, "rb") as fh:
        arrays, _moments, _step = load_checkpoint(fh)
    model = DGRec(cfg, n_items, n_users)
    model.load_arrays(arrays)
    return model


def cmd_eval(args) -> int:
    from .evaluation import evaluate
    from .pipeline import load_dataset
    from .train import make_context

    ckpt = _need_file(args.checkpoint, "--checkpoint")
    config_path = _need_file(args.config, "--config") if args.config else None
    data = Path(args.data)
    ds = load_dataset(data, need_graph=False)
    model = _load_model(ckpt, config_path, len(ds.items), len(ds.users))
    if model.config.mode != "self_only" and not (data / "edges.csv").is_file():
        raise FileNotFoundError(f"{data / 'edges.csv'} missing")
    ctx = make_context(ds.train, ds.valid, ds.test, strict=model.config.strict_train_context)
    res = evaluate(model, ds.split(args.split), ctx, ds.graph, k=model.config.eval_k)
    if args.out:
        out = Path(args.out)
        manifest = RunManifest(out, "eval", model.config.seed, _config_dict(model.config),
                               [ckpt, data / f"{args.split}.dgrs"])
        _write_atomic(out / f"eval_{args.split}.json",
                      json.dumps({"split": args.split, "recall@20": res.recall, "ndcg": res.ndcg,
                                  "loss": res.loss, "positions": len(res.ranks)}, indent=2) + "\n")
        manifest.finish(_outputs(out))
    print(f"positions={len(res.ranks)} loss={res.loss:.6f}")
    print(f"recall@20={res.recall:.6f} ndcg={res.ndcg:.6f}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    from .evaluation.attention import attention_report, write_histogram
    from .gat import write_trace_rows
    from .pipeline import load_dataset
    from .train import make_context

    ckpt = _need_file(args.checkpoint, "--checkpoint")
    config_path = _need_file(args.config, "--config") if args.config else None
    data = Path(args.data)
    ds = load_dataset(data)
    model = _load_model(ckpt, config_path, len(ds.items), len(ds.users))
    out = Path(args.out)
    manifest = RunManifest(out, "inspect", model.config.seed, _config_dict(model.config),
                           [ckpt, data / f"{args.split}.dgrs", data / "edges.csv"])
    ctx = make_context(ds.train, ds.valid, ds.test, strict=model.config.strict_train_context)
    rows, report = attention_report(model, ds.split(args.split), ctx, ds.graph,
                                    args.min_sessions, args.min_friends)
    if not rows:
        raise RuntimeError(f"no user in {args.split} has >= {args.min_sessions} sessions "
                           f"and >= {args.min_friends} friends")
    with open(out / "attention.csv", "w", encoding="utf-8", newline="") as fh:
        write_trace_rows(fh, rows)
    with open(out / "variance_histogram.csv", "w", encoding="utf-8", newline="") as fh:
        write_histogram(fh, report)
    print(f"users={len({r[0] for r in rows})} rows={len(rows)}")
    print(f"mean_intra_variance={report.mean_intra:.6g} mean_inter_variance={report.mean_inter:.6g}")
    manifest.finish(_outputs(out))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .tensorcore import gradient_check
    from .toy import toy_instance

    if args.scale != "toy":
        raise UsageError("only --scale toy is supported")
    toy = toy_instance(seed=args.seed or 0, mode=args.mode)
    t0 = time.perf_counter()
    report = gradient_check(toy.loss_builder(), toy.model.parameters(), eps=1e-5, tolerance=1e-4)
    for line in report.lines():
        print(line)
    print(f"max_rel_error={report.max_rel_error:.3e} seconds={time.perf_counter() - t0:.2f} "
          f"{'PASS' if report.ok else 'FAIL'}")
    if args.out:
        out = Path(args.out)
        manifest = RunManifest(out, "gradcheck", args.seed or 0, {"scale": "toy", "mode": args.mode}, [])
        _write_atomic(out / "gradcheck.txt", "\n".join(report.lines()) + "\n")
        manifest.finish(_outputs(out), "ok" if report.ok else "failed")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_synth(args) -> int:
    from .evaluation.synth import synth_social_data, write_edges_csv, write_events_csv

    if not 0.0 <= args.influence <= 1.0:
        raise UsageError("--influence must lie in [0, 1]")
    seed = _seed_or_env(args.seed)
    out = Path(args.out)
    params = {"users": args.users, "items": args.items, "influence": args.influence,
              "sessions_per_user": args.sessions}
    manifest = RunManifest(out, "synth", seed, params, [])
    events, edges = synth_social_data(args.users, args.items, args.sessions, args.influence, seed)
    with open(out / "events.csv", "w", encoding="utf-8", newline="") as fh:
        write_events_csv(fh, events)
    with open(out / "edges.csv", "w", encoding="utf-8", newline="") as fh:
        write_edges_csv(fh, edges)
    print(f"events={len(events)} edges={len(edges)}")
    manifest.finish(_outputs(out))
    return EXIT_OK


def _seed_or_env(seed: int | None) -> int:
    if seed is not None:
        return seed
    return int(os.environ.get("DGREC_SEED", "0"))


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dgrec", description="Session-based social recommendation with dynamic graph attention.")
    p.add_argument("--version", action="version", version=f"dgrec {__version__}")
    p.add_argument("--threads", type=int, default=1,
                   help="cap on BLAS worker threads (1 = deterministic reference path)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("ingest", help="event log + edges -> train/valid/test stores")
    s.add_argument("--events")
    s.add_argument("--edges")
    s.add_argument("--format", choices=("csv", "hetrec-delicious"), default="csv")
    s.add_argument("--interval", choices=("day", "week", "month", "tag-bundle"), default="week")
    s.add_argument("--holdout-days", type=int, required=True)
    s.add_argument("--max-session-len", type=int, default=20)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="fit a model")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=("full", "self_only", "social_only", "short_only", "long_only"))
    s.add_argument("--hidden", type=int)
    s.add_argument("--embed", type=int)
    s.add_argument("--layers", type=int)
    s.add_argument("--fanouts", help="comma-separated, e.g. 10,15")
    s.add_argument("--dropout", type=float)
    s.add_argument("--batch", type=int)
    s.add_argument("--base-lr", dest="base_lr", type=float)
    s.add_argument("--decay", type=float)
    s.add_argument("--decay-interval", dest="decay_interval", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--patience", type=int)
    s.add_argument("--dtype", choices=("float32", "float64"))
    s.add_argument("--max-session-len", dest="max_session_len", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="any other config key")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a checkpoint on a split")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--split", choices=("valid", "test"), default="test")
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect", help="export attention weights and variance histogram")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--split", choices=("valid", "test"), default="test")
    s.add_argument("--min-sessions", type=int, default=5)
    s.add_argument("--min-friends", type=int, default=5)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    s.add_argument("--scale", choices=("toy",), default="toy")
    s.add_argument("--mode", choices=("full", "self_only", "social_only", "short_only", "long_only"),
                   default="full")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("synth", help="generate a synthetic event log and friendship graph")
    s.add_argument("--users", type=int, required=True)
    s.add_argument("--items", type=int, required=True)
    s.add_argument("--influence", type=float, required=True)
    s.add_argument("--sessions", type=int, default=32)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def _cap_threads(n: int) -> None:
    # numpy is imported lazily by the commands, so BLAS picks these up at load
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (see --help)")
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _cap_threads(args.threads)
    from .config import ConfigError

    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
