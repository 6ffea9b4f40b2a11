"""Command-line pipeline: ingest, prompts, score, lr-curve, fusion-check.

Exit codes: 0 success, 1 a requested check failed (--fail-below threshold or
a fusion self-check), 2 I/O or configuration error. All outputs are written
atomically and contain no timestamps, so identical inputs and flags produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import aokvqa, chartqa, fusion, metrics, okvqa, prompts, training
from .errors import CotqaError
from .extraction import extract_for_sample, read_predictions
from .io_utils import atomic_write_text, load_json, write_json_atomic, write_jsonl_atomic
from .report import IngestReport
from .schema import (
    DATASETS,
    SPLITS,
    dumps_samples,
    loads_samples,
    validate_collection,
)

RATIONALE_MODES = ("template", "gold", "empty")


def _ingest_okvqa(args, report: IngestReport):
    questions = load_json(args.questions)
    annotations = load_json(args.annotations)
    return okvqa.load_okvqa(questions, annotations, args.split, report=report)


def _ingest_aokvqa(args, report: IngestReport):
    records = list(aokvqa.iter_aokvqa_records(args.data_dir, args.split))
    samples = aokvqa.convert_aokvqa(records, args.split, report=report)
    if args.captions is None and args.features is None:
        return samples
    captions = (
        aokvqa.load_caption_map(args.captions)
        if args.captions
        else aokvqa.CaptionMap(entries={})
    )
    features = list(aokvqa.iter_vision_features(args.features)) if args.features else []
    samples, side = aokvqa.attach_sidecars(samples, captions, features)
    if args.captions:
        for sid in side.caption_missing:
            report.warn(f"no caption for sample {sid}")
    if args.features:
        for sid in side.feature_missing:
            report.warn(f"no vision feature for sample {sid}")
        for sid in side.duplicate_keys:
            report.warn(f"duplicate vision feature id {sid}")
    return samples


def _ingest_chartqa(args, report: IngestReport):
    if args.tables_dir:
        templates = [t.strip() for t in args.templates.split(",") if t.strip()]
        return chartqa.synthesize_corpus(
            args.tables_dir, templates, args.seed, split=args.split, report=report
        )
    annotations = chartqa.load_native_annotations(args.annotations)
    return chartqa.load_chartqa_native(
        annotations, args.image_dir, split=args.split, report=report
    )


def cmd_ingest(args) -> int:
    if args.dataset == "chartqa":
        if bool(args.tables_dir) == bool(args.annotations):
            print(
                "chartqa needs exactly one of --tables-dir or --annotations",
                file=sys.stderr,
            )
            return 2
        if args.annotations and not args.image_dir:
            print("--annotations requires --image-dir", file=sys.stderr)
            return 2
    if args.dataset == "okvqa" and not (args.questions and args.annotations):
        print("okvqa needs --questions and --annotations", file=sys.stderr)
        return 2
    if args.dataset == "aokvqa" and not args.data_dir:
        print("aokvqa needs --data-dir", file=sys.stderr)
        return 2

    report = IngestReport(dataset=args.dataset, split=args.split)
    loaders = {"okvqa": _ingest_okvqa, "aokvqa": _ingest_aokvqa, "chartqa": _ingest_chartqa}
    samples = loaders[args.dataset](args, report)
    report.n_samples = len(samples)

    violations = validate_collection(samples)
    if violations:
        for v in violations[:20]:
            print(f"invalid sample: {v}", file=sys.stderr)
        return 2

    atomic_write_text(args.out, dumps_samples(samples))
    for line in report.lines():
        print(line)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_prompts(args) -> int:
    samples = loads_samples(Path(args.unified).read_text(encoding="utf-8"))
    rows = []
    for sample in samples:
        pair = prompts.build_prompt_pair(sample)
        stage2 = pair.stage2_input_template
        if args.stage2_rationale == "gold":
            stage2 = prompts.fill_rationale(stage2, " ".join(sample.rationales))
        elif args.stage2_rationale == "empty":
            stage2 = prompts.fill_rationale(stage2, "")
        rows.append(
            {"sample_id": pair.sample_id, "stage1": pair.stage1_input,
             "stage2_template": stage2}
        )
    write_jsonl_atomic(args.out, rows)
    print(f"wrote {len(rows)} prompt pairs to {args.out}")
    return 0


def _parse_fail_below(expr: str) -> tuple[str, float]:
    name, sep, value = expr.partition("=")
    if not sep:
        raise ValueError(f"--fail-below wants METRIC=VALUE, got {expr!r}")
    return name.strip(), float(value)


def cmd_score(args) -> int:
    samples = loads_samples(Path(args.unified).read_text(encoding="utf-8"))
    by_id = {s.sample_id: s for s in samples}
    predictions = read_predictions(args.predictions)

    unresolved = [pid for pid in predictions if pid not in by_id]
    for pid in unresolved:
        print(f"unresolved prediction id: {pid}", file=sys.stderr)
    matched = [(by_id[pid], out) for pid, out in predictions.items() if pid in by_id]
    if not matched:
        print("no prediction matched a sample", file=sys.stderr)
        return 2

    embeddings = (
        metrics.read_embedding_sidecar(args.embeddings) if args.embeddings else None
    )
    config = metrics.MetricConfig(
        epsilon=args.epsilon,
        numeric_mode=args.numeric_mode,
        consensus_cap=args.consensus_cap,
    )

    def one(pair):
        sample, raw = pair
        record = extract_for_sample(sample, raw)
        return metrics.score_sample(sample, record, config, embeddings)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(one, matched))
    rows.sort(key=lambda r: r.sample_id)

    report = metrics.aggregate(rows, config)
    write_json_atomic(args.out_json, metrics.report_to_dict(report))
    groups = {s.sample_id: (s.dataset, s.split) for s in samples}
    table = metrics.format_table(report, groups)
    if args.out_table:
        atomic_write_text(args.out_table, table + "\n")
    print(table)
    print(f"scored {report.n_scored} predictions; report at {args.out_json}")

    failed = False
    for expr in args.fail_below or []:
        name, threshold = _parse_fail_below(expr)
        if name not in report.aggregate:
            print(f"unknown metric {name!r} in --fail-below", file=sys.stderr)
            return 2
        value = report.aggregate[name]
        if value is None or value < threshold:
            shown = "undefined" if value is None else f"{value:.4f}"
            print(f"fail-below: {name} = {shown} < {threshold}", file=sys.stderr)
            failed = True
    return 1 if failed else 0


def cmd_lr_curve(args) -> int:
    warmup = args.warmup_steps or training.warmup_steps(args.total_steps)
    cfg = training.ScheduleConfig(
        lr_max=args.lr_max, total_steps=args.total_steps, warmup_steps=warmup
    )
    points = training.lr_curve(cfg, n_points=args.points)
    lines = [f"{'step':>10}  {'lr':>14}"]
    lines += [f"{t:>10d}  {lr:>14.8e}" for t, lr in points]
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
        print(f"wrote {len(points)} curve points to {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_fusion_check(args) -> int:
    failures = 0
    worst_overall = 0.0
    for i in range(args.instances):
        ok, worst = fusion.gradient_check(
            d=args.dim, seed=args.seed + i, step=args.step, tol=args.tol
        )
        worst_overall = max(worst_overall, worst)
        if not ok:
            failures += 1
            print(f"instance {i}: worst relative error {worst:.3e} > {args.tol}")
    print(
        f"gradient check: {args.instances - failures}/{args.instances} instances "
        f"within {args.tol} (worst {worst_overall:.3e})"
    )

    # zero gate weights halve the image contribution exactly
    rng = np.random.default_rng(args.seed)
    params = fusion.FusionParams(
        d_text=args.dim,
        d_img=args.dim,
        w_gate=np.zeros((args.dim, args.dim)),
        w_proj=np.zeros((args.dim, args.dim)),
    )
    h_text = rng.uniform(-1, 1, size=args.dim)
    h_img = rng.uniform(-1, 1, size=args.dim)
    fused, _ = fusion.gated_fuse_forward(h_text, h_img, params)
    identity_ok = np.array_equal(fused, 0.5 * h_img + h_text)
    print(f"zero-gate identity: {'ok' if identity_ok else 'FAILED'}")

    if args.dump:
        dump_params = fusion.init_params(args.dim, args.dim, args.seed)
        seq = rng.uniform(-1, 1, size=(3, args.dim))
        feats = rng.uniform(-1, 1, size=(2, args.dim))
        mask = np.ones(3, dtype=np.int64)
        fused_seq, out_mask = fusion.project_and_concat(seq, feats, mask, dump_params)
        write_json_atomic(
            args.dump,
            {
                "dim": args.dim,
                "seed": args.seed,
                "gated": fused.tolist(),
                "concat_rows": fused_seq.tolist(),
                "concat_mask": out_mask.tolist(),
            },
        )
        print(f"wrote fusion dump to {args.dump}")
    return 0 if failures == 0 and identity_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cotqa",
        description="Deterministic VQA evaluation pipeline: ingest, prompt, score.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a dataset to the unified schema")
    p.add_argument("--dataset", required=True, choices=DATASETS)
    p.add_argument("--split", required=True, choices=SPLITS)
    p.add_argument("--out", required=True, help="unified JSON output path")
    p.add_argument("--questions", help="okvqa questions JSON")
    p.add_argument("--annotations", help="okvqa annotations JSON / chartqa native JSON")
    p.add_argument("--data-dir", help="aokvqa parquet directory")
    p.add_argument("--captions", help="aokvqa caption sidecar JSON")
    p.add_argument("--features", help="aokvqa vision feature sidecar JSON")
    p.add_argument("--tables-dir", help="chartqa CSV table directory")
    p.add_argument("--image-dir", help="chartqa image directory (native mode)")
    p.add_argument(
        "--templates",
        default=",".join(chartqa.TEMPLATE_ORDER),
        help="comma-separated template ids for chartqa synthesis",
    )
    p.add_argument("--seed", type=int, default=training.DEFAULT_SEED)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("prompts", help="dump two-stage prompts as JSONL")
    p.add_argument("--unified", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage2-rationale", choices=RATIONALE_MODES, default="template")
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("score", help="score a predictions file against a unified file")
    p.add_argument("--unified", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--out-table")
    p.add_argument("--embeddings", help="embedding sidecar JSONL for similarity")
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--numeric-mode", choices=metrics.NUMERIC_MODES, default="absolute")
    p.add_argument("--consensus-cap", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument(
        "--fail-below",
        action="append",
        metavar="METRIC=VALUE",
        help="exit 1 if an aggregate metric falls below VALUE (fraction)",
    )
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("lr-curve", help="print the LR schedule as a table")
    p.add_argument("--lr-max", type=float, required=True)
    p.add_argument("--total-steps", type=int, required=True)
    p.add_argument("--warmup-steps", type=int, default=0,
                   help="default: 10%% of total, minimum 100")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lr_curve)

    p = sub.add_parser("fusion-check", help="verify fusion gradients numerically")
    p.add_argument("--dim", type=int, default=6)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=training.DEFAULT_SEED)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--dump", help="write a fused-sequence JSON for comparison")
    p.set_defaults(func=cmd_fusion_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CotqaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
