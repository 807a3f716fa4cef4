"""Experiment driver (stats / train / sweep / plotdata / alpha-search).

Configuration comes from key=value files (--config) overridden by
command-line flags. Every run writes into its own directory named by a
content hash of the semantically meaningful fields plus a timestamp, so
sweeps are resumable and every table row traces to one run record.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import report
from .data import (DatasetError, FORMATS, compute_stats, load_interactions,
                   stats_csv, stats_kv_lines)
from .diffusion import DiffusionConfig, grid_search_alpha
from .graph import DEFAULT_SCHEME, SCHEMES
from .metrics import evaluate
from .model import save_embeddings
from .train import NumericError, TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

RUN_RECORD = "run.json"
RUN_CONFIG = "config.txt"
RUN_HISTORY = "history.csv"
RUN_REPORT_JSON = "report.json"
RUN_REPORT_CSV = "report.csv"
RUN_EMBEDDINGS = "embeddings.txt"


class CliError(Exception):
    """Usage-level error raised outside argparse."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in str(text).split(",") if tok != ""]


def _parse_alpha_list(text: str) -> list[float | None]:
    out: list[float | None] = []
    for tok in str(text).split(","):
        if tok == "":
            continue
        out.append(None if tok.lower() == "none" else float(tok))
    return out


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True,
                   help="interaction file or dataset directory")
    p.add_argument("--format", default="adjacency-list", choices=FORMATS)


def _add_train_args(p: argparse.ArgumentParser, axes: bool = False,
                    alpha_list: bool = False) -> None:
    if axes:
        p.add_argument("--layers", default="1,2,3,4",
                       help="comma-separated layer counts")
        p.add_argument("--scheme", default=DEFAULT_SCHEME,
                       help="comma-separated scheme names")
        p.add_argument("--diffusion-alpha", default="none",
                       help="comma-separated teleport probabilities; 'none' for no diffusion")
    else:
        p.add_argument("--layers", type=int, default=3)
        p.add_argument("--scheme", default=DEFAULT_SCHEME, choices=sorted(SCHEMES))
        if alpha_list:
            p.add_argument("--diffusion-alpha", default="0.05,0.1,0.2",
                           help="comma-separated candidate teleport probabilities")
        else:
            p.add_argument("--diffusion-alpha", type=float, default=None,
                           help="enable diffusion with this teleport probability")
    p.add_argument("--epochs", type=int, default=None,
                   help="default 1000, or 600 when diffusion is enabled")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lambda", dest="reg", type=float, default=0.0001,
                   help="L2 regularization coefficient")
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--diffusion-steps", type=int, default=10)
    p.add_argument("--diffusion-post-hoc", action="store_true",
                   help="apply diffusion only when evaluating, not in training")
    p.add_argument("--eval-every", type=int, default=20,
                   help="metric cadence in epochs (0 disables)")
    p.add_argument("--cutoff", default="20", help="comma-separated cutoffs")
    p.add_argument("--bins", type=int, default=4,
                   help="fairness bin count")
    p.add_argument("--label", default=None, help="series label for reports")


def _read_config_file(path: str) -> dict[str, str]:
    cfg = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            cfg[key.strip()] = val.strip()
    return cfg


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    """Config file values become parser defaults; explicit flags win."""
    cfg = _read_config_file(path)
    by_flag = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_flag[opt[2:]] = action
    defaults = {}
    for key, val in cfg.items():
        flag = key.replace("_", "-")
        action = by_flag.get(flag)
        if action is None:
            raise CliError(f"{path}: unknown config key {key!r}")
        if action.const is True:  # store_true flag
            value = val.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(val)
            except ValueError as exc:
                raise CliError(f"{path}: bad value for {key!r}: {exc}") from exc
        else:
            value = val
        if action.choices is not None and value not in action.choices:
            raise CliError(
                f"{path}: {key!r} must be one of {sorted(action.choices)}")
        defaults[action.dest] = value
        action.required = False
    parser.set_defaults(**defaults)


def _extract_config_path(argv: list[str]) -> tuple[str | None, list[str]]:
    mini = _Parser(add_help=False, prog="lightrec")
    mini.add_argument("--config", default=None)
    ns, rest = mini.parse_known_args(argv)
    return ns.config, rest


def run_spec(args, layers: int, scheme: str,
             diffusion_alpha: float | None) -> dict:
    """Canonical snapshot of one run's semantically meaningful fields."""
    epochs = args.epochs
    if epochs is None:
        epochs = 600 if diffusion_alpha is not None else 1000
    return {
        "dataset": args.dataset,
        "format": args.format,
        "layers": int(layers),
        "scheme": scheme,
        "epochs": epochs,
        "lr": args.lr,
        "lambda": args.reg,
        "batch-size": args.batch_size,
        "dim": args.dim,
        "seed": args.seed,
        "diffusion-alpha": diffusion_alpha,
        "diffusion-steps": args.diffusion_steps,
        "diffusion-post-hoc": bool(args.diffusion_post_hoc),
        "eval-every": args.eval_every,
        "cutoff": ",".join(str(c) for c in _parse_int_list(args.cutoff)),
        "bins": args.bins,
    }


def config_hash(spec: dict) -> str:
    text = "\n".join(f"{k}={spec[k]}" for k in sorted(spec))
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def default_label(spec: dict) -> str:
    label = f"{spec['scheme']}-K{spec['layers']}"
    if spec["diffusion-alpha"] is not None:
        label += f"-appnp{spec['diffusion-alpha']:g}"
    return label


def _train_config(spec: dict) -> TrainConfig:
    diffusion = None
    if spec["diffusion-alpha"] is not None:
        diffusion = DiffusionConfig(
            alpha=spec["diffusion-alpha"], steps=spec["diffusion-steps"],
            apply_during_training=not spec["diffusion-post-hoc"])
    cutoffs = _parse_int_list(spec["cutoff"])
    return TrainConfig(
        epochs=spec["epochs"], lr=spec["lr"], reg=spec["lambda"],
        batch_size=spec["batch-size"], layers=spec["layers"],
        scheme=spec["scheme"], dim=spec["dim"], seed=spec["seed"],
        eval_every=spec["eval-every"], eval_cutoff=cutoffs[0],
        diffusion=diffusion)


def _make_run_dir(out_root: str, digest: str) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = os.path.join(out_root, f"{digest}-{stamp}")
    run_dir, n = base, 1
    while os.path.exists(run_dir):
        run_dir = f"{base}-{n}"
        n += 1
    os.makedirs(run_dir)
    return run_dir


def run_experiment(spec: dict, out_root: str, label: str | None = None) -> dict:
    """Train, evaluate and persist one run; returns the run record."""
    os.makedirs(out_root, exist_ok=True)
    label = label or default_label(spec)
    digest = config_hash(spec)
    ds = load_interactions(spec["dataset"], spec["format"])
    cfg = _train_config(spec)
    cutoffs = _parse_int_list(spec["cutoff"])

    start = time.perf_counter()
    state, history = train(ds, cfg)
    reports = evaluate(state, ds, cutoffs=cutoffs, num_bins=spec["bins"])
    duration = time.perf_counter() - start

    run_dir = _make_run_dir(out_root, digest)
    with open(os.path.join(run_dir, RUN_CONFIG), "w") as fh:
        for key in sorted(spec):
            fh.write(f"{key}={spec[key]}\n")
    report.write_history_csv(history, os.path.join(run_dir, RUN_HISTORY))
    report.write_report_json(label, reports, os.path.join(run_dir, RUN_REPORT_JSON))
    report.write_report_csv(label, reports, os.path.join(run_dir, RUN_REPORT_CSV))
    save_embeddings(state.layer0, os.path.join(run_dir, RUN_EMBEDDINGS))

    record = {
        "label": label,
        "hash": digest,
        "duration_sec": duration,
        "spec": spec,
        "run_dir": run_dir,
        "files": {
            "history": RUN_HISTORY,
            "report_json": RUN_REPORT_JSON,
            "report_csv": RUN_REPORT_CSV,
            "embeddings": RUN_EMBEDDINGS,
        },
        "metrics": {
            str(k): {"recall": r.recall, "ndcg": r.ndcg, "ild": r.ild,
                     "fairness_gap": r.fairness.gap}
            for k, r in reports.items()
        },
    }
    with open(os.path.join(run_dir, RUN_RECORD), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return record


def _sweep_worker(payload: tuple[dict, str, str | None]) -> dict:
    spec, out_root, label = payload
    return run_experiment(spec, out_root, label)


def cmd_stats(args) -> int:
    ds = load_interactions(args.dataset, args.format)
    stats = compute_stats(ds)
    for line in stats_kv_lines(stats):
        print(line)
    if ds.duplicates_dropped:
        print(f"duplicates_dropped={ds.duplicates_dropped}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "stats.txt"), "w") as fh:
            fh.write("\n".join(stats_kv_lines(stats)) + "\n")
        with open(os.path.join(args.out, "stats.csv"), "w") as fh:
            fh.write(stats_csv(stats))
    return EXIT_OK


def cmd_train(args) -> int:
    spec = run_spec(args, args.layers, args.scheme, args.diffusion_alpha)
    record = run_experiment(spec, args.out, args.label)
    print(f"run written to {record['run_dir']}")
    for cutoff, m in sorted(record["metrics"].items(), key=lambda kv: int(kv[0])):
        print(f"cutoff={cutoff} recall={m['recall']:.5f} ndcg={m['ndcg']:.5f} "
              f"ild={m['ild']:.5f} fairness_gap={m['fairness_gap']:.5f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    layers_axis = _parse_int_list(args.layers)
    scheme_axis = [s for s in str(args.scheme).split(",") if s]
    alpha_axis = _parse_alpha_list(args.diffusion_alpha)
    for s in scheme_axis:
        if s not in SCHEMES:
            raise CliError(f"unknown scheme {s!r}, expected one of {sorted(SCHEMES)}")
    if not layers_axis or not scheme_axis or not alpha_axis:
        raise CliError("sweep axes must be nonempty")

    combos = list(itertools.product(layers_axis, scheme_axis, alpha_axis))
    payloads = [(run_spec(args, k, s, a), args.out, None) for k, s, a in combos]
    records: list[dict | None] = [None] * len(combos)
    failures: list[tuple[str, str]] = []

    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            futures = [pool.submit(_sweep_worker, p) for p in payloads]
            for idx, fut in enumerate(futures):
                try:
                    records[idx] = fut.result()
                except Exception as exc:
                    failures.append((default_label(payloads[idx][0]), str(exc)))
    else:
        for idx, payload in enumerate(payloads):
            try:
                records[idx] = _sweep_worker(payload)
            except Exception as exc:
                failures.append((default_label(payloads[idx][0]), str(exc)))

    done = [r for r in records if r is not None]
    os.makedirs(args.out, exist_ok=True)
    cutoff = str(_parse_int_list(args.cutoff)[0])
    cmp_path = os.path.join(args.out, "comparison.csv")
    with open(cmp_path, "w") as fh:
        fh.write(f"label,layers,scheme,diffusion_alpha,recall@{cutoff},"
                 f"ndcg@{cutoff},ild,fairness_gap,run_dir\n")
        for rec in done:
            spec, m = rec["spec"], rec["metrics"][cutoff]
            alpha = spec["diffusion-alpha"]
            fh.write(",".join([
                rec["label"], str(spec["layers"]), spec["scheme"],
                "" if alpha is None else repr(alpha),
                repr(m["recall"]), repr(m["ndcg"]), repr(m["ild"]),
                repr(m["fairness_gap"]), rec["run_dir"]]) + "\n")
    print(f"comparison table: {cmp_path} ({len(done)} run(s))")
    if failures:
        fail_path = os.path.join(args.out, "failures.csv")
        with open(fail_path, "w") as fh:
            fh.write("label,error\n")
            for label, msg in failures:
                fh.write(f"{label},{msg.replace(chr(10), ' ')}\n")
        print(f"{len(failures)} run(s) failed; see {fail_path}", file=sys.stderr)
    if not done:
        raise DatasetError("every sweep run failed")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    runs = []
    for run_dir in args.runs:
        record_path = os.path.join(run_dir, RUN_RECORD)
        label = os.path.basename(os.path.normpath(run_dir))
        if os.path.isfile(record_path):
            with open(record_path) as fh:
                label = json.load(fh).get("label", label)
        if args.kind == "curves":
            hist_path = os.path.join(run_dir, RUN_HISTORY)
            if not os.path.isfile(hist_path):
                raise DatasetError(f"run {run_dir} has no {RUN_HISTORY}")
            runs.append((label, report.read_history_csv(hist_path)))
        else:
            rep_path = os.path.join(run_dir, RUN_REPORT_JSON)
            if not os.path.isfile(rep_path):
                raise DatasetError(f"run {run_dir} has no {RUN_REPORT_JSON}")
            runs.append((label, report.read_report_json(rep_path)))
    csv_path = report.write_plotdata(args.kind, runs, args.out)
    print(f"plot data: {csv_path}")
    return EXIT_OK


def cmd_alpha_search(args) -> int:
    candidates = _parse_alpha_list(args.diffusion_alpha)
    if any(a is None for a in candidates):
        raise CliError("alpha-search candidates must be numbers")
    cutoff = _parse_int_list(args.cutoff)[0]
    ds = load_interactions(args.dataset, args.format)
    rows: list[tuple[float, float]] = []

    def evaluator(alpha: float) -> float:
        spec = run_spec(args, args.layers, args.scheme, alpha)
        cfg = _train_config(spec)
        state, _ = train(ds, cfg)
        ndcg = evaluate(state, ds, cutoffs=(cutoff,),
                        num_bins=args.bins)[cutoff].ndcg
        rows.append((alpha, ndcg))
        print(f"alpha={alpha:g} ndcg@{cutoff}={ndcg:.5f}")
        return ndcg

    best = grid_search_alpha(candidates, evaluator)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "alpha_search.csv")
        with open(path, "w") as fh:
            fh.write(f"alpha,ndcg@{cutoff}\n")
            for alpha, ndcg in sorted(rows):
                fh.write(f"{alpha!r},{ndcg!r}\n")
        print(f"search table: {path}")
    print(f"best_alpha={best:g}")
    return EXIT_OK


def build_parser(command: str) -> argparse.ArgumentParser:
    p = _Parser(prog=f"lightrec {command}")
    p.add_argument("--config", default=None,
                   help="key=value config file; flags override")
    if command == "stats":
        _add_dataset_args(p)
        p.add_argument("--out", default=None)
    elif command == "train":
        _add_dataset_args(p)
        _add_train_args(p)
        p.add_argument("--out", required=True)
    elif command == "sweep":
        _add_dataset_args(p)
        _add_train_args(p, axes=True)
        p.add_argument("--out", required=True)
        p.add_argument("--parallel", type=int, default=1,
                       help="run up to N sweep configurations in parallel")
    elif command == "plotdata":
        p.add_argument("--kind", required=True, choices=report.PLOT_KINDS)
        p.add_argument("--out", required=True)
        p.add_argument("runs", nargs="+", help="run directories")
    elif command == "alpha-search":
        _add_dataset_args(p)
        _add_train_args(p, alpha_list=True)
        p.add_argument("--out", default=None)
    return p


COMMANDS = {
    "stats": cmd_stats,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "plotdata": cmd_plotdata,
    "alpha-search": cmd_alpha_search,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: lightrec {stats,train,sweep,plotdata,alpha-search} [options]\n"
              "run 'lightrec <command> --help' for command options")
        return EXIT_OK if argv else EXIT_USAGE
    command, rest = argv[0], argv[1:]
    if command not in COMMANDS:
        print(f"lightrec: unknown command {command!r}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser(command)
    try:
        config_path, rest = _extract_config_path(rest)
        if config_path:
            _apply_config(parser, config_path)
        args = parser.parse_args(rest)
        return COMMANDS[command](args)
    except SystemExit as exc:  # argparse error/help paths
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except CliError as exc:
        print(f"lightrec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError, json.JSONDecodeError) as exc:
        print(f"lightrec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"lightrec: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"lightrec: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
