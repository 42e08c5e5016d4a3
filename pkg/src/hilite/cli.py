"""Command-line entry point wrapping the library's file-level workflows.

All subcommands exit 0 on success and 1 with a single-line diagnostic on
stderr for any validation failure.
"""

import argparse
import re
import sys
from pathlib import Path

from . import alignment, corpus, extractor, harness, rouge, smoothing
from .errors import HiliteError

_UNIT_NAMES = {"sent": harness.SENTENCE_UNIT, "segm": harness.SEGMENT_UNIT}


def _cmd_annotate(args):
    docs = corpus.load_corpus(args.docs)
    matrices = {m.doc_id: m for m in alignment.load_attention(args.attn)}
    cfg = smoothing.SmoothingConfig(
        gap_threshold=args.gap,
        min_segment_tokens=args.min_len,
        extend_to_boundary=args.extend_to_boundary,
    )
    annotations = []
    for doc in docs:
        attn = matrices.get(doc.doc_id)
        if attn is None:
            raise HiliteError(f"no attention matrix for document {doc.doc_id!r}")
        attn.check_against(doc)
        aligned = alignment.align_argmax(attn)
        annotations.extend(smoothing.annotate_document(doc, aligned, cfg))
    smoothing.save_annotations(annotations, args.out)
    print(f"annotated {len(docs)} documents -> {args.out}")


def _cmd_stats(args):
    docs = corpus.load_corpus(args.docs)
    annotations = smoothing.load_annotations(args.labels)
    stats = harness.corpus_stats(docs, annotations)
    print(f"documents                 {len(docs)}")
    print(f"total_sentences           {stats.total_sentences}")
    print(f"pos_sentence_rate         {stats.pos_sentence_rate:.4f}")
    print(f"mean_gold_sents_per_doc   {stats.mean_gold_sents_per_doc:.4f}")
    print(f"mean_gold_tokens_per_doc  {stats.mean_gold_tokens_per_doc:.4f}")
    print(f"compression_rate          {stats.compression_rate:.4f}")
    print(f"mean_abstract_sents       {stats.mean_abstract_sents_per_doc:.4f}")
    print(f"mean_abstract_tokens      {stats.mean_abstract_tokens_per_doc:.4f}")


def _cmd_oracle(args):
    docs = corpus.load_corpus(args.docs)
    annotations = smoothing.load_annotations(args.labels)
    records = harness.build_oracle(docs, annotations, _UNIT_NAMES[args.unit])
    harness.save_summaries(records, args.out)
    print(f"wrote {len(records)} oracle summaries -> {args.out}")


def _cmd_rouge(args):
    candidates = harness.load_summaries(args.cand)
    references = harness.load_summaries(args.ref)
    metrics = rouge.parse_metrics(args.metrics)
    results = harness.evaluate(candidates, references, metrics)
    for metric in metrics:
        s = results[metric]
        print(
            f"ROUGE-{metric}  P {s.precision:.4f}  R {s.recall:.4f}  F1 {s.f1:.4f}"
        )


def _cmd_train(args):
    records = extractor.load_training_records(args.data)
    cfg = extractor.config_from_records(
        records, span_loss_weight=args.lambda_coef, seed=args.seed
    )
    data = extractor.instances_from_records(records, cfg)
    valid = None
    if args.valid:
        valid = extractor.instances_from_records(
            extractor.load_training_records(args.valid), cfg
        )
    result = extractor.train(
        data, cfg, valid=valid, epochs=args.epochs, learning_rate=args.lr
    )
    extractor.save_model(args.out, result.params, cfg)
    print(
        f"trained on {len(data)} instances for {len(result.train_losses)} epochs; "
        f"best validation loss {min(result.valid_losses):.6f} at epoch "
        f"{result.best_epoch}; model -> {args.out}"
    )


def _cmd_infer(args):
    params, cfg = extractor.load_model(args.model)
    docs = corpus.load_corpus(args.docs)
    predictions = []
    for doc in docs:
        predictions.extend(
            extractor.predict_document(doc, params, cfg, threshold=args.threshold)
        )
    smoothing.save_annotations(predictions, args.out)
    positive = sum(p.label for p in predictions)
    print(
        f"predicted {len(predictions)} sentences ({positive} positive) -> {args.out}"
    )


def _cmd_gradcheck(args):
    report = extractor.gradient_check(seed=args.seed)
    print(
        f"max relative error {report.max_rel_error:.3e} "
        f"(worst parameter: {report.worst_parameter})"
    )
    if report.max_rel_error >= 1e-4:
        raise HiliteError(
            f"gradient check failed: {report.max_rel_error:.3e} >= 1e-4"
        )
    print("gradient check passed (threshold 1e-4)")


def _safe_filename(doc_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", doc_id) or "doc"


def _cmd_render(args):
    docs = corpus.load_corpus(args.docs)
    annotations = smoothing.load_annotations(args.labels)
    by_doc = {}
    for ann in annotations:
        by_doc.setdefault(ann.doc_id, []).append(ann)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        page = harness.render_highlights(doc, by_doc.get(doc.doc_id, []))
        (out_dir / f"{_safe_filename(doc.doc_id)}.html").write_text(
            page, encoding="utf-8"
        )
    print(f"rendered {len(docs)} documents -> {out_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hilite",
        description="Sub-sentence summary highlights: annotate, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="derive gold labels from attention")
    p.add_argument("--docs", required=True)
    p.add_argument("--attn", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gap", type=int, default=5)
    p.add_argument("--min-len", type=int, default=6)
    p.add_argument("--extend-to-boundary", action="store_true")
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("stats", help="corpus statistics over gold labels")
    p.add_argument("--docs", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("oracle", help="build gold summaries")
    p.add_argument("--docs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--unit", choices=sorted(_UNIT_NAMES), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("rouge", help="score candidate summaries against references")
    p.add_argument("--cand", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metrics", default="1,2,L")
    p.set_defaults(func=_cmd_rouge)

    p = sub.add_parser("train", help="train the joint sentence/span extractor")
    p.add_argument("--data", required=True)
    p.add_argument("--valid")
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lambda_coef", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="predict labels and spans for documents")
    p.add_argument("--model", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("gradcheck", help="verify analytic gradients")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("render", help="render highlight overlays as HTML")
    p.add_argument("--docs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (HiliteError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
