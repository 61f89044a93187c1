"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad inputs, malformed files,
bad usage), 2 unexpected runtime failure. Diagnostics go to stderr,
results to stdout or to the requested output files. Input files are never
modified, and every seed-bearing command is reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    MioeError,
    SplitSpec,
    load_corpus,
    save_corpus,
    split_corpus,
    synthesize_corpus,
)
from .fusion import load_mio, save_mio, score_mio, train_mio
from .harness import (
    ExperimentConfig,
    Report,
    render_report,
    run_experiment,
    write_report_outputs,
)
from .metrics import ScoreSet, compute_eer
from .nn import ARCH_MIO, TrainingHyper, read_checkpoint
from .pca import apply_pca, fit_pca, load_pca, save_pca
from .probes import load_probe, save_probe, score, train_probe
from .corpus import align_pair
from .version import ENGINE_VERSION


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fractions(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    return tuple(parts)


def _hyper_from_args(args) -> TrainingHyper:
    return TrainingHyper(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        shuffle_seed=args.shuffle_seed,
        init_seed=args.init_seed,
    )


def _add_hyper_flags(parser):
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--init-seed", type=int, default=0)
    parser.add_argument("--shuffle-seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="miobench",
                     description="Audio-deepfake detection benchmark engine "
                                 "over embedding corpora")
    parser.add_argument("--version", action="version", version=ENGINE_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a two-Gaussian corpus")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="records per class")
    p.add_argument("--sep", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="synthetic")
    p.add_argument("--ptm-id", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="split a corpus into train/val/test")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fractions", type=_fractions, default=(0.7, 0.1, 0.2))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-val", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("validate", help="check a MIOE file and print a summary")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train an FCN or CNN probe")
    p.add_argument("--kind", choices=["fcn", "cnn"], required=True)
    p.add_argument("--train", dest="train_path", required=True)
    p.add_argument("--val", dest="val_path", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history-out", help="write per-epoch history JSON here")
    p.add_argument("--history-figure", help="render the training curves here")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", help="corpus for probe checkpoints")
    p.add_argument("--corpus-a", help="first corpus for fusion checkpoints")
    p.add_argument("--corpus-b", help="second corpus for fusion checkpoints")
    p.add_argument("--out", required=True, help="scores CSV path")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute EER from a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--roc-figure", help="render the ROC curve here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse", help="train the two-branch fusion model")
    p.add_argument("--train-a", required=True)
    p.add_argument("--train-b", required=True)
    p.add_argument("--val-a", required=True)
    p.add_argument("--val-b", required=True)
    p.add_argument("--test-a")
    p.add_argument("--test-b")
    p.add_argument("--scores-out", help="write test-pair scores CSV here")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--proj-dim", type=int, default=120)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("pca", help="fit or apply a PCA transform")
    pca_sub = p.add_subparsers(dest="pca_command", required=True)
    pf = pca_sub.add_parser("fit")
    pf.add_argument("--corpus", required=True)
    pf.add_argument("--k", type=int, required=True)
    pf.add_argument("--out", required=True, help="transform (.miop) path")
    pf.set_defaults(func=cmd_pca_fit)
    pa = pca_sub.add_parser("apply")
    pa.add_argument("--transform", required=True)
    pa.add_argument("--corpus", required=True)
    pa.add_argument("--out", required=True, help="reduced corpus path")
    pa.set_defaults(func=cmd_pca_apply)

    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config output directory")
    p.add_argument("--formats", default=None,
                   help="comma-separated subset of markdown,csv,json")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   default=None, help="render figures next to the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-render a saved report JSON")
    p.add_argument("--report", required=True, dest="report_path")
    p.add_argument("--format", choices=["markdown", "csv", "json"],
                   default="markdown")
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--figures", help="directory for report figures")
    p.set_defaults(func=cmd_report)

    return parser


def cmd_synth(args) -> int:
    corpus = synthesize_corpus(args.dim, args.n, args.sep, args.seed,
                               name=args.name, ptm_id=args.ptm_id)
    save_corpus(corpus, args.out)
    print(f"wrote {args.out}: {len(corpus)} records, dim {corpus.dim}")
    return 0


def cmd_split(args) -> int:
    corpus = load_corpus(args.input)
    train, val, test = split_corpus(corpus, SplitSpec(args.fractions, args.seed))
    for part, path in ((train, args.out_train), (val, args.out_val),
                       (test, args.out_test)):
        save_corpus(part, path)
        print(f"wrote {path}: {len(part)} records ({part.split_tag})")
    return 0


def cmd_validate(args) -> int:
    corpus = load_corpus(args.path)
    counts = corpus.label_counts()
    print(f"{args.path}: OK")
    print(f"name      {corpus.name}")
    print(f"ptm_id    {corpus.ptm_id}")
    print(f"dim       {corpus.dim}")
    print(f"split     {corpus.split_tag}")
    print(f"records   {len(corpus)} ({counts[0]} bonafide, {counts[1]} spoof)")
    if corpus.split_tag == "train" and not corpus.has_both_labels():
        print("warning: train-tagged corpus does not contain both labels",
              file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    train = load_corpus(args.train_path)
    val = load_corpus(args.val_path)
    hyper = _hyper_from_args(args)
    probe, history = train_probe(args.kind, train, val, hyper)
    save_probe(probe, args.out, hyper)
    if args.history_out:
        Path(args.history_out).write_text(
            json.dumps(history.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    if args.history_figure:
        from .figures import save_training_history

        save_training_history(history, args.history_figure,
                              title=f"{args.kind} probe on {train.name}")
    best = history.val_eer[history.best_epoch]
    print(f"wrote {args.out}: best epoch {history.best_epoch + 1} "
          f"(val EER {best * 100:.2f}%)")
    return 0


def _load_any_model(path):
    arch_tag, _, _ = read_checkpoint(path)
    if arch_tag == ARCH_MIO:
        return load_mio(path)
    return load_probe(path)


def cmd_score(args) -> int:
    model = _load_any_model(args.model)
    if hasattr(model, "branch_a"):
        if not (args.corpus_a and args.corpus_b):
            raise ValueError("fusion checkpoints need --corpus-a and --corpus-b")
        pairs = align_pair(load_corpus(args.corpus_a), load_corpus(args.corpus_b))
        scores = score_mio(model, pairs)
    else:
        if not args.corpus:
            raise ValueError("probe checkpoints need --corpus")
        scores = score(model, load_corpus(args.corpus))
    scores.save_csv(args.out)
    print(f"wrote {args.out}: {len(scores)} scores")
    return 0


def cmd_eval(args) -> int:
    scores = ScoreSet.load_csv(args.scores)
    result = compute_eer(scores)
    print(f"EER {result.eer:.4f}")
    print(f"threshold {result.threshold}")
    print(f"FPR {result.fpr_at_threshold:.4f}")
    print(f"FNR {result.fnr_at_threshold:.4f}")
    if args.roc_figure:
        from .figures import save_roc_curve

        save_roc_curve(scores, args.roc_figure)
    return 0


def cmd_fuse(args) -> int:
    hyper = _hyper_from_args(args)
    train_pairs = align_pair(load_corpus(args.train_a), load_corpus(args.train_b))
    val_pairs = align_pair(load_corpus(args.val_a), load_corpus(args.val_b))
    model, history = train_mio(train_pairs, val_pairs, hyper,
                               proj_dim=args.proj_dim)
    save_mio(model, args.out, hyper)
    best = history.val_eer[history.best_epoch]
    print(f"wrote {args.out}: best epoch {history.best_epoch + 1} "
          f"(val EER {best * 100:.2f}%)")
    if args.test_a and args.test_b and args.scores_out:
        test_pairs = align_pair(load_corpus(args.test_a), load_corpus(args.test_b))
        scores = score_mio(model, test_pairs)
        scores.save_csv(args.scores_out)
        result = compute_eer(scores)
        print(f"wrote {args.scores_out}: test EER {result.eer:.4f}")
    return 0


def cmd_pca_fit(args) -> int:
    corpus = load_corpus(args.corpus)
    transform = fit_pca(corpus, args.k)
    save_pca(transform, args.out)
    for warning in transform.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    kept = transform.explained_variance.sum()
    print(f"wrote {args.out}: k={transform.k}, "
          f"explained variance {kept:.4f}")
    return 0


def cmd_pca_apply(args) -> int:
    transform = load_pca(args.transform)
    corpus = load_corpus(args.corpus)
    reduced = apply_pca(transform, corpus)
    save_corpus(reduced, args.out)
    print(f"wrote {args.out}: dim {reduced.dim}, ptm_id {reduced.ptm_id}")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config)
    out_dir = args.out_dir or config.output.get("dir", "out")
    if args.formats is not None:
        formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    else:
        formats = config.output.get("formats", ["markdown", "csv", "json"])
    if args.figures is not None:
        figures = args.figures
    else:
        figures = bool(config.output.get("figures", True))
    written = write_report_outputs(report, out_dir, formats, figures)
    failed = [r for r in report.rows if r["status"] == "failed"]
    for path in written:
        print(f"wrote {path}")
    if failed:
        print(f"{len(failed)} of {len(report.rows)} cells failed; "
              "see the report for details", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    report = Report.from_file(args.report_path)
    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    if args.figures:
        from .harness import write_report_figures

        for path in write_report_figures(report, args.figures):
            print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, MioeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and exit 2, per contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
