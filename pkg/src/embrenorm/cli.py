"""Command-line entry point.

One binary, nine subcommands: prep-corpus, estimate-mean, apply,
eval, compare, simulate, synth, sweep, report.

Conventions shared by every subcommand:

* outputs land under --out-dir (default: current directory);
* a manifest JSON capturing the resolved configuration is written
  per run; timestamps appear only there and in bias files;
* progress and human-readable summaries go to stderr; stdout stays
  empty unless --json is set, in which case it carries exactly one
  summary JSON document;
* exit 0 on success, 1 on validation/usage errors, 2 when an eval
  suite contains failed tasks.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import io
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import corpus as corpus_mod
from . import report as report_mod
from . import store
from .core import DegeneratePolicy, RenormMethod, apply_matrix, matrix_fingerprint
from .errors import StoreError
from .harness import run_suite
from .mean import MeanAccumulator
from .synth import SynthConfig, generate, split_half_indices, sweep_bias
from .tasks import TaskType
from .theory import SimConfig, run_sim


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _out_path(args, name: str) -> str:
    path = os.path.join(args.out_dir, name)
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path


def _write_manifest(args, subcommand: str, outputs: list[str], started: str) -> None:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in {"func"} and not k.startswith("_")
    }
    doc = {
        "subcommand": subcommand,
        "config": config,
        "outputs": sorted(outputs),
        "startedAtUtc": started,
        "finishedAtUtc": _now(),
    }
    path = _out_path(args, f"manifest-{subcommand}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _emit_json(args, doc: dict) -> None:
    if args.json:
        print(json.dumps(doc, indent=2))


def _parse_methods(text: str) -> list[RenormMethod]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(RenormMethod(part))
        except ValueError:
            raise ValueError(f"unknown method {part!r}; expected identity|r1|r2")
    if not out:
        raise ValueError("no methods given")
    return out


def _parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _cmd_prep_corpus(args) -> int:
    started = _now()
    sentences: list[str] = []
    for path in args.input:
        _progress(f"reading {path}")
        for doc in corpus_mod.read_documents(path):
            sentences.extend(corpus_mod.segment(doc))
    sample = corpus_mod.sample(
        sentences,
        size=args.size,
        min_len=args.min_len,
        max_len=args.max_len,
        seed=args.seed,
        source=",".join(args.input),
    )
    out = _out_path(args, args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for s in sample.sentences:
            fh.write(s + "\n")
    manifest_doc = sample.manifest()
    sample_manifest = _out_path(args, args.out + ".manifest.json")
    with open(sample_manifest, "w", encoding="utf-8") as fh:
        json.dump(manifest_doc, fh, indent=2)
        fh.write("\n")
    _progress(
        f"kept {len(sample.sentences)} of {manifest_doc['rawCount']} sentences"
        f" (fingerprint {sample.fingerprint[:12]})"
    )
    _write_manifest(args, "prep-corpus", [out, sample_manifest], started)
    _emit_json(args, manifest_doc)
    return 0


def _cmd_estimate_mean(args) -> int:
    started = _now()
    matrix = store.read_embeddings(args.embeddings)
    _progress(f"loaded {matrix.count} x {matrix.dim} embeddings")
    acc = MeanAccumulator(matrix.dim)
    acc.absorb_matrix(matrix)
    fingerprint = args.corpus_fingerprint or matrix_fingerprint(matrix)
    bias = acc.finalize(corpus_fingerprint=fingerprint, model_id=args.model_id)
    out = _out_path(args, args.out)
    store.write_bias(bias, out)
    _progress(f"bias norm {bias.norm:.6f} over {bias.sample_count} samples -> {out}")
    _write_manifest(args, "estimate-mean", [out], started)
    _emit_json(
        args,
        {
            "modelId": bias.model_id,
            "dim": bias.dim,
            "count": bias.sample_count,
            "norm": bias.norm,
            "corpusFingerprint": bias.corpus_fingerprint,
            "out": out,
        },
    )
    return 0


def _cmd_apply(args) -> int:
    started = _now()
    matrix = store.read_embeddings(args.embeddings)
    bias = store.read_bias(args.bias)
    method = RenormMethod(args.method)
    policy = DegeneratePolicy(args.policy)
    result, dropped = apply_matrix(matrix, bias, method, policy=policy)
    out = _out_path(args, args.out)
    store.write_embeddings(result, out)
    _progress(f"{method.value}: {result.count} rows out, {len(dropped)} dropped -> {out}")
    _write_manifest(args, "apply", [out], started)
    _emit_json(
        args,
        {"method": method.value, "rows": result.count, "droppedIds": list(dropped), "out": out},
    )
    return 0


def _records_json(records) -> list[dict]:
    out = []
    for r in records:
        doc = {
            "taskId": r.task_id,
            "taskType": r.task_type.value,
            "method": r.method.value,
            "status": r.status,
            "droppedRows": r.dropped_rows,
        }
        if r.score is not None:
            doc["metric"] = r.score.metric
            doc["value"] = r.score.value
            doc["sigma"] = r.score.sigma
        if r.error:
            doc["error"] = r.error
        out.append(doc)
    return out


def _cmd_eval(args) -> int:
    started = _now()
    datasets = [store.read_dataset(p) for p in args.dataset]
    bias = store.read_bias(args.bias)
    methods = _parse_methods(args.methods)
    records = run_suite(
        datasets, bias, methods, seed=args.seed, threads=args.threads
    )
    out = _out_path(args, args.out)
    store.write_records(records, out)
    failures = [r for r in records if r.status != "ok"]
    for r in records:
        if r.status == "ok":
            _progress(
                f"{r.task_id} {r.method.value}: {r.score.metric}={r.score.value:.6f}"
                f" sigma={r.score.sigma:.6f} dropped={r.dropped_rows}"
            )
        else:
            _progress(f"{r.task_id} {r.method.value}: FAILED ({r.error})")
    _progress(f"{len(records) - len(failures)} ok, {len(failures)} failed -> {out}")
    _write_manifest(args, "eval", [out], started)
    _emit_json(args, {"records": _records_json(records), "failed": len(failures), "out": out})
    return 2 if failures else 0


def _split_by_method(records):
    by_method: dict[str, list] = {}
    for r in records:
        by_method.setdefault(r.method.value, []).append(r)
    return by_method


def _comparison_rows(args):
    baseline = store.read_records(_resolve_input(args.baseline))
    treated = store.read_records(_resolve_input(args.treated))
    failed = sum(1 for r in baseline + treated if r.status != "ok")
    rows = report_mod.compare(
        baseline, treated, model_id=args.model_id, combined_sigma=args.combined_sigma
    )
    return rows, failed


def _resolve_input(path: str) -> str:
    return path


def _cmd_compare(args) -> int:
    started = _now()
    rows, failed = _comparison_rows(args)
    csv_text = report_mod.rows_to_csv(rows)
    out = _out_path(args, args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text)
    for row in rows:
        _progress(f"{row.task_id}: {report_mod.format_row(row)}")
    _write_manifest(args, "compare", [out], started)
    _emit_json(
        args,
        {
            "rows": [
                {
                    "taskId": r.task_id,
                    "delta": r.delta,
                    "relDelta": r.rel_delta,
                    "z": r.z,
                    "rendered": report_mod.format_row(r),
                }
                for r in rows
            ],
            "out": out,
        },
    )
    return 2 if failed else 0


def _cmd_report(args) -> int:
    started = _now()
    rows, failed = _comparison_rows(args)
    group_by = report_mod.GroupBy(args.group_by)
    aggregates = report_mod.aggregate(rows, group_by)
    extremes = report_mod.significant_extremes(
        rows, delta_threshold=args.delta_threshold, rel_threshold=args.rel_threshold
    )
    summary = report_mod.summary_json(rows, aggregates, extremes)
    outputs = []
    out = _out_path(args, args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    outputs.append(out)
    if args.sweep:
        pairs = []
        with open(args.sweep, "r", encoding="utf-8", newline="") as fh:
            for rec in csv_mod.DictReader(fh):
                pairs.append((float(rec["biasNorm"]), float(rec["delta"])))
        corr = report_mod.correlation_report(pairs)
        corr_out = _out_path(args, args.correlation_out)
        with open(corr_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(corr.csv)
        outputs.append(corr_out)
        summary["correlation"] = {"spearman": corr.spearman, "n": corr.n}
        _progress(f"bias-norm correlation: spearman {corr.spearman:+.4f} over {corr.n} pairs")
    for agg in aggregates:
        _progress(
            f"{agg.group_key}: n={agg.count} meanDelta={agg.mean_delta:+.6f}"
            f" aggregateZ={agg.aggregate_z:+.2f}"
        )
    _write_manifest(args, "report", outputs, started)
    _emit_json(args, summary)
    return 2 if failed else 0


def _cmd_simulate(args) -> int:
    started = _now()
    config = SimConfig(
        dim=args.dim,
        mu_norm=args.mu_norm,
        eps_norm=args.eps_norm,
        eps_parallel_fraction=args.eps_parallel_fraction,
        signal_norm=args.signal_norm,
        trials=args.trials,
        seed=args.seed,
        orthogonal_draws=not args.relaxed,
    )
    result = run_sim(config, threads=args.threads)
    doc = {
        "dim": config.dim,
        "muNorm": config.mu_norm,
        "epsNorm": config.eps_norm,
        "epsParallelFraction": config.eps_parallel_fraction,
        "trials": config.trials,
        "meanResidualGapR1": result.mean_residual_gap_r1,
        "meanResidualGapR2": result.mean_residual_gap_r2,
        "maxResidualGapR1": result.max_residual_gap_r1,
        "meanAngleR1": result.mean_angle_r1,
        "meanAngleR2": result.mean_angle_r2,
    }
    out = _out_path(args, args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    outputs = [out]
    eps_values = (
        _parse_float_list(args.eps_sweep)
        if args.eps_sweep
        else [args.eps_norm * f for f in (0.25, 0.5, 1.0, 2.0, 4.0)]
    )
    buf = io.StringIO()
    writer = csv_mod.writer(buf)
    writer.writerow(["epsNorm", "meanGapR1", "meanGapR2", "meanAngleR1", "meanAngleR2"])
    for eps in eps_values:
        cfg = SimConfig(
            dim=config.dim,
            mu_norm=config.mu_norm,
            eps_norm=eps,
            eps_parallel_fraction=config.eps_parallel_fraction,
            signal_norm=config.signal_norm,
            trials=config.trials,
            seed=config.seed,
            orthogonal_draws=config.orthogonal_draws,
        )
        res = run_sim(cfg, threads=args.threads)
        writer.writerow(
            [
                f"{eps:.6g}",
                f"{res.mean_residual_gap_r1:.6g}",
                f"{res.mean_residual_gap_r2:.6g}",
                f"{res.mean_angle_r1:.6g}",
                f"{res.mean_angle_r2:.6g}",
            ]
        )
        _progress(f"eps {eps:.4g}: gapR2 {res.mean_residual_gap_r2:.3e}")
    sweep_out = _out_path(args, args.sweep_out)
    with open(sweep_out, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    outputs.append(sweep_out)
    _progress(
        f"angles: R1 {result.mean_angle_r1:.6f}, R2 {result.mean_angle_r2:.6f}"
    )
    _write_manifest(args, "simulate", outputs, started)
    _emit_json(args, doc)
    return 0


def _cmd_synth(args) -> int:
    started = _now()
    config = SynthConfig(
        dim=args.dim,
        num_clusters=args.clusters,
        items_per_cluster=args.items_per_cluster,
        noise_scale=args.noise,
        bias_norm=args.bias_norm,
        seed=args.seed,
        task_type=TaskType(args.task_type),
    )
    bundle = generate(config)
    outputs = []
    for name, ds in (("clean", bundle.clean_dataset), ("biased", bundle.biased_dataset)):
        path = _out_path(args, f"{args.prefix}.{name}.json")
        store.write_dataset(ds, path)
        outputs.append(path)
    true_bias_path = _out_path(args, f"{args.prefix}.true-bias.json")
    with open(true_bias_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "biasNorm": config.bias_norm,
                "vector": [float(f"{v:.9g}") for v in bundle.true_bias.tolist()],
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    outputs.append(true_bias_path)
    _progress(
        f"wrote {config.num_clusters * config.items_per_cluster} items"
        f" ({config.num_clusters} clusters, bias {config.bias_norm}) -> {args.prefix}.*"
    )
    _write_manifest(args, "synth", outputs, started)
    _emit_json(args, {"outputs": outputs})
    return 0


def _cmd_sweep(args) -> int:
    started = _now()
    bias_norms = _parse_float_list(args.bias_norms)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    methods = _parse_methods(args.methods)
    base = SynthConfig(
        dim=args.dim,
        num_clusters=args.clusters,
        items_per_cluster=args.items_per_cluster,
        noise_scale=args.noise,
        bias_norm=0.0,
        seed=0,
        task_type=TaskType(args.task_type),
    )
    rows = sweep_bias(base, bias_norms, methods, seeds=seeds)
    buf = io.StringIO()
    writer = csv_mod.writer(buf)
    writer.writerow(["biasNorm", "seed", "method", "score", "delta"])
    for row in rows:
        writer.writerow(
            [
                f"{row.bias_norm:.6g}",
                row.seed,
                row.method,
                f"{row.score:.6g}",
                f"{row.delta:.6g}",
            ]
        )
    out = _out_path(args, args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    for beta in bias_norms:
        for m in methods:
            deltas = [r.delta for r in rows if r.bias_norm == beta and r.method == m.value]
            if deltas:
                _progress(
                    f"bias {beta:.2g} {m.value}: mean delta {sum(deltas) / len(deltas):+.6f}"
                )
    _write_manifest(args, "sweep", [out], started)
    _emit_json(
        args,
        {
            "rows": [
                {
                    "biasNorm": r.bias_norm,
                    "seed": r.seed,
                    "method": r.method,
                    "score": r.score,
                    "delta": r.delta,
                }
                for r in rows
            ],
            "out": out,
        },
    )
    return 0


def _default_threads() -> int:
    env = os.environ.get("EMBRENORM_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> _Parser:
    parser = _Parser(prog="embrenorm", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="base RNG seed (default 42)")
    common.add_argument(
        "--threads",
        type=int,
        default=_default_threads(),
        help="worker pool size (default: cores, or EMBRENORM_THREADS)",
    )
    common.add_argument("--out-dir", default=".", help="directory for all outputs")
    common.add_argument(
        "--json", action="store_true", help="print the final summary JSON on stdout"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("prep-corpus", parents=[common], help="segment, filter, dedupe, sample")
    p.add_argument("--input", action="append", required=True, help="text or JSONL file")
    p.add_argument("--size", type=int, required=True, help="sample size")
    p.add_argument("--min-len", type=int, default=64)
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument("--out", default="sentences.txt")
    p.set_defaults(func=_cmd_prep_corpus)

    p = sub.add_parser("estimate-mean", parents=[common], help="estimate the corpus mean vector")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model-id", required=True)
    p.add_argument("--corpus-fingerprint", default="", help="default: embeddings fingerprint")
    p.add_argument("--out", default="mu.json")
    p.set_defaults(func=_cmd_estimate_mean)

    p = sub.add_parser("apply", parents=[common], help="renormalize an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--bias", required=True)
    p.add_argument("--method", choices=[m.value for m in RenormMethod], required=True)
    p.add_argument(
        "--policy", choices=[pol.value for pol in DegeneratePolicy], default="drop"
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("eval", parents=[common], help="run tasks under each method")
    p.add_argument("--dataset", action="append", required=True, help="dataset JSON (repeatable)")
    p.add_argument("--bias", required=True)
    p.add_argument("--methods", default="identity,r1,r2")
    p.add_argument("--out", default="records.jsonl")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="per-task deltas between two runs")
    p.add_argument("--baseline", required=True, help="baseline records JSONL")
    p.add_argument("--treated", required=True, help="treated records JSONL")
    p.add_argument("--model-id", default="")
    p.add_argument("--combined-sigma", action="store_true")
    p.add_argument("--out", default="comparison.csv")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", parents=[common], help="aggregates, extremes, correlation")
    p.add_argument("--baseline", required=True)
    p.add_argument("--treated", required=True)
    p.add_argument("--model-id", default="")
    p.add_argument("--combined-sigma", action="store_true")
    p.add_argument("--group-by", choices=[g.value for g in report_mod.GroupBy], default="task-type")
    p.add_argument("--delta-threshold", type=float, default=report_mod.DELTA_THRESHOLD)
    p.add_argument("--rel-threshold", type=float, default=report_mod.REL_DELTA_THRESHOLD)
    p.add_argument("--sweep", default="", help="sweep CSV for the bias-norm correlation")
    p.add_argument("--correlation-out", default="correlation.csv")
    p.add_argument("--out", default="summary.json")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("simulate", parents=[common], help="error-propagation simulation")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--mu-norm", type=float, default=0.8)
    p.add_argument("--eps-norm", type=float, default=0.01)
    p.add_argument("--eps-parallel-fraction", type=float, default=0.7)
    p.add_argument("--signal-norm", type=float, default=0.6)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument(
        "--relaxed",
        action="store_true",
        help="skip the orthogonal construction of the error draws",
    )
    p.add_argument("--eps-sweep", default="", help="comma list of eps values for the CSV")
    p.add_argument("--out", default="sim.json")
    p.add_argument("--sweep-out", default="sim-sweep.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic benchmark bundle")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--items-per-cluster", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--bias-norm", type=float, default=0.4)
    p.add_argument("--task-type", choices=[t.value for t in TaskType], default="retrieval")
    p.add_argument("--prefix", default="synth")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sweep", parents=[common], help="bias-norm grid over synthetic tasks")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--items-per-cluster", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--bias-norms", default="0.0,0.2,0.4,0.6,0.8")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--methods", default="r1,r2")
    p.add_argument("--task-type", choices=[t.value for t in TaskType], default="retrieval")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, StoreError) as exc:
        print(f"embrenorm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
