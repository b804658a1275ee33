"""Command-line interface.

Subcommands wire corpora, embedding providers, training, redaction and
privacy sweeps together and write CSV/JSONL artifacts.  Every artifact
gets a sidecar <name>.meta.json recording the resolved configuration and
seed, so runs can be reproduced exactly.  Exit codes: 0 success, 1 usage
error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from redactrank import baseline as bl
from redactrank import ranker as rk
from redactrank.corpus import CorpusFormatError, load_corpus, write_redacted
from redactrank.divloss import KdeConfig
from redactrank.embed import BuiltinEmbedder, FileEmbeddingProvider
from redactrank.mask import MaskConfig
from redactrank.privacy import epsilon_curve, redact_corpus, write_sweep_csv
from redactrank.trainer import TrainConfig, loss_trace_export, train_ranker


class UsageError(Exception):
    """Flag combinations the parser alone cannot reject."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_provider_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", metavar="FILE",
                   help="precomputed contextual-embedding JSONL")
    p.add_argument("--dim", type=int, default=None,
                   help="built-in embedder dimension (default 64, or the "
                        "checkpoint's input dimension)")
    p.add_argument("--embed-seed", type=int, default=0,
                   help="built-in embedder seed")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--delta", default="one-over-n",
                   help="'one-over-n' or a fixed value in (0, 1)")
    p.add_argument("--conversion", choices=("zcdp", "rdp"), default="zcdp")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="redactrank",
                     description="Learned word redaction with privacy estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the ranking MLP on a corpus pair")
    p.add_argument("--sensitive", required=True)
    p.add_argument("--safe", required=True)
    _add_provider_flags(p)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--k", type=float, default=10.0, help="redaction percent")
    p.add_argument("--t", type=float, default=100.0, help="mask temperature")
    p.add_argument("--threshold-mode", choices=("midpoint", "paper_exact"),
                   default="midpoint")
    p.add_argument("--bandwidth", choices=("median_heuristic", "fixed"),
                   default="median_heuristic")
    p.add_argument("--fixed-h", type=float, default=1.0)
    p.add_argument("--hidden", default="256,128,64",
                   help="comma-separated hidden layer sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--trace", required=True, help="output loss-trace CSV path")

    p = sub.add_parser("redact", help="redact a corpus at K% with a saved ranker")
    p.add_argument("--input", required=True)
    p.add_argument("--role", choices=("sensitive", "safe"), default="sensitive")
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", dest="baseline_ckpt")
    _add_provider_flags(p)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate",
                       help="divergence and epsilon for a pair at one K")
    p.add_argument("--sensitive", required=True)
    p.add_argument("--safe", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", dest="baseline_ckpt")
    _add_provider_flags(p)
    p.add_argument("--k", type=float, required=True)
    _add_eval_flags(p)
    p.add_argument("--out", help="optional output CSV (default: stdout)")

    p = sub.add_parser("sweep", help="epsilon curve over a K grid")
    p.add_argument("--sensitive", required=True)
    p.add_argument("--safe", required=True)
    p.add_argument("--k-grid", default="0,10,20,30,40,50,60,70,80",
                   help="comma-separated redaction percents")
    p.add_argument("--checkpoint")
    p.add_argument("--out", help="output CSV for the checkpointed ranker")
    p.add_argument("--baseline", dest="baseline_ckpt")
    p.add_argument("--baseline-out", help="output CSV for the baseline ranker")
    _add_provider_flags(p)
    _add_eval_flags(p)

    p = sub.add_parser("baseline", help="fit the TFIDF logistic-regression ranker")
    p.add_argument("--sensitive", required=True)
    p.add_argument("--safe", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    return parser


def _provider(args, default_dim: int | None = None):
    if args.embeddings:
        return FileEmbeddingProvider(args.embeddings)
    dim = args.dim if args.dim is not None else (default_dim or 64)
    return BuiltinEmbedder(dim=dim, seed=args.embed_seed)


def _provider_meta(args, provider) -> dict:
    if args.embeddings:
        return {"embeddings": str(args.embeddings), "dim": provider.dim}
    return {"builtin_dim": provider.dim, "embed_seed": args.embed_seed}


def _load_word_ranker(args):
    """A ranker plus its provider from --checkpoint xor --baseline."""
    if bool(args.checkpoint) == bool(args.baseline_ckpt):
        raise UsageError("exactly one of --checkpoint or --baseline is required")
    if args.checkpoint:
        params, _, _ = rk.load_checkpoint(args.checkpoint)
        provider = _provider(args, default_dim=params.dims[0])
        return rk.make_word_ranker(params, provider), provider
    model = bl.load_baseline(args.baseline_ckpt)
    return bl.make_word_ranker(model), _provider(args)


def _parse_delta(value: str):
    if value == "one-over-n":
        return "one_over_n", None
    try:
        fixed = float(value)
    except ValueError:
        raise UsageError(f"--delta must be 'one-over-n' or a number, got {value!r}")
    return "fixed", fixed


def _write_meta(artifact_path: str | Path, command: str, config: dict) -> None:
    meta = {"artifact": str(artifact_path), "command": command, "config": config}
    Path(f"{artifact_path}.meta.json").write_text(json.dumps(meta, indent=2),
                                                  encoding="utf-8")


def _cmd_train(args) -> int:
    provider = _provider(args)
    corpus0 = load_corpus(args.sensitive, "sensitive")
    corpus1 = load_corpus(args.safe, "safe")
    hidden = tuple(int(x) for x in args.hidden.split(","))
    if len(hidden) != 3:
        raise UsageError("--hidden needs exactly three sizes")
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch,
        mask=MaskConfig(args.k, args.t, args.threshold_mode),
        kde=KdeConfig(bandwidth_rule=args.bandwidth, fixed_h=args.fixed_h),
        lr=args.lr, hidden=hidden, seed=args.seed,
    )
    params, trace = train_ranker(corpus0, corpus1, provider, cfg)
    rk.save_checkpoint(args.checkpoint, params, seed=args.seed)
    if not trace:
        raise ValueError("training produced no full loss-trace window; "
                         "fewer steps than the logging interval")
    loss_trace_export(trace, args.trace)
    config = {
        "sensitive": args.sensitive, "safe": args.safe, "epochs": args.epochs,
        "batch": args.batch, "lr": args.lr, "k": args.k, "t": args.t,
        "threshold_mode": args.threshold_mode, "bandwidth": args.bandwidth,
        "fixed_h": args.fixed_h, "hidden": list(hidden), "seed": args.seed,
        **_provider_meta(args, provider),
    }
    _write_meta(args.checkpoint, "train", config)
    _write_meta(args.trace, "train", config)
    print(f"trained on {len(corpus0)}+{len(corpus1)} sentences; "
          f"checkpoint {args.checkpoint}, trace {args.trace}")
    return 0


def _cmd_redact(args) -> int:
    ranker, _ = _load_word_ranker(args)
    corpus = load_corpus(args.input, args.role)
    redacted, index_sets = redact_corpus(corpus, ranker, args.k)
    write_redacted(args.out, redacted.sentences, index_sets)
    _write_meta(args.out, "redact", {
        "input": args.input, "role": args.role, "k": args.k,
        "checkpoint": args.checkpoint, "baseline": args.baseline_ckpt,
        "skipped_lines": corpus.skipped,
    })
    print(f"redacted {len(redacted)} sentences at K={args.k} into {args.out}")
    return 0


def _eval_config(args) -> dict:
    return {"alpha": args.alpha, "clusters": args.clusters,
            "smoothing": args.smoothing, "delta": args.delta,
            "conversion": args.conversion, "seed": args.seed}


def _cmd_evaluate(args) -> int:
    ranker, provider = _load_word_ranker(args)
    corpus0 = load_corpus(args.sensitive, "sensitive")
    corpus1 = load_corpus(args.safe, "safe")
    delta_rule, fixed_delta = _parse_delta(args.delta)
    rows = epsilon_curve(corpus0, corpus1, ranker, provider, [args.k],
                         alpha=args.alpha, n_clusters=args.clusters,
                         smoothing=args.smoothing, seed=args.seed,
                         delta_rule=delta_rule, fixed_delta=fixed_delta,
                         conversion=args.conversion)
    if args.out:
        write_sweep_csv(rows, args.out)
        _write_meta(args.out, "evaluate", {
            "sensitive": args.sensitive, "safe": args.safe, "k": args.k,
            "checkpoint": args.checkpoint, "baseline": args.baseline_ckpt,
            **_eval_config(args), **_provider_meta(args, provider),
        })
    r = rows[0]
    print("redaction_percent,alpha,divergence,rho,epsilon,delta")
    print(",".join(repr(float(v)) for v in (r.redaction_percent, r.alpha,
                                            r.divergence, r.rho, r.epsilon,
                                            r.delta)))
    return 0


def _cmd_sweep(args) -> int:
    if args.checkpoint and not args.out:
        raise UsageError("--checkpoint requires --out")
    if args.baseline_ckpt and not args.baseline_out:
        raise UsageError("--baseline requires --baseline-out")
    if not args.checkpoint and not args.baseline_ckpt:
        raise UsageError("supply --checkpoint and/or --baseline")
    corpus0 = load_corpus(args.sensitive, "sensitive")
    corpus1 = load_corpus(args.safe, "safe")
    k_grid = [float(x) for x in args.k_grid.split(",") if x != ""]
    delta_rule, fixed_delta = _parse_delta(args.delta)

    common = {"sensitive": args.sensitive, "safe": args.safe,
              "k_grid": k_grid, **_eval_config(args)}

    if args.checkpoint:
        params, _, _ = rk.load_checkpoint(args.checkpoint)
        provider = _provider(args, default_dim=params.dims[0])
        ranker = rk.make_word_ranker(params, provider)
        rows = epsilon_curve(corpus0, corpus1, ranker, provider, k_grid,
                             alpha=args.alpha, n_clusters=args.clusters,
                             smoothing=args.smoothing, seed=args.seed,
                             delta_rule=delta_rule, fixed_delta=fixed_delta,
                             conversion=args.conversion)
        write_sweep_csv(rows, args.out)
        _write_meta(args.out, "sweep", {**common, "checkpoint": args.checkpoint,
                                        **_provider_meta(args, provider)})
        print(f"wrote {len(rows)} rows for the checkpointed ranker to {args.out}")
    if args.baseline_ckpt:
        model = bl.load_baseline(args.baseline_ckpt)
        provider = _provider(args)
        ranker = bl.make_word_ranker(model)
        rows = epsilon_curve(corpus0, corpus1, ranker, provider, k_grid,
                             alpha=args.alpha, n_clusters=args.clusters,
                             smoothing=args.smoothing, seed=args.seed,
                             delta_rule=delta_rule, fixed_delta=fixed_delta,
                             conversion=args.conversion)
        write_sweep_csv(rows, args.baseline_out)
        _write_meta(args.baseline_out, "sweep",
                    {**common, "baseline": args.baseline_ckpt,
                     **_provider_meta(args, provider)})
        print(f"wrote {len(rows)} rows for the baseline ranker to {args.baseline_out}")
    return 0


def _cmd_baseline(args) -> int:
    corpus0 = load_corpus(args.sensitive, "sensitive")
    corpus1 = load_corpus(args.safe, "safe")
    vocab = bl.fit_tfidf(corpus0, corpus1)
    model = bl.train_logreg(corpus0, corpus1, vocab,
                            epochs=args.epochs, lr=args.lr, seed=args.seed)
    bl.save_baseline(args.out, model)
    _write_meta(args.out, "baseline", {
        "sensitive": args.sensitive, "safe": args.safe,
        "epochs": args.epochs, "lr": args.lr, "seed": args.seed,
        "vocab_size": vocab.size,
    })
    print(f"fit baseline on {len(corpus0)}+{len(corpus1)} sentences "
          f"({vocab.size} words) into {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "redact": _cmd_redact,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "baseline": _cmd_baseline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"redactrank: error: {exc}", file=sys.stderr)
        return 1
    except (CorpusFormatError, ValueError, FloatingPointError, OSError) as exc:
        print(f"redactrank: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
