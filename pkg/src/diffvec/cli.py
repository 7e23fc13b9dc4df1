"""Command-line interface: a thin client for the experiment service.

Every subcommand except ``serve`` builds a request, sends it to the service
(an in-process instance by default, or a remote one via ``--server``), and
writes the result locally: the report JSON at ``--out`` plus one CSV per
figure-style series next to it.  The exit code is 0 only when the run
completed and all outputs were written.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

import httpx

from . import __version__
from .reports import write_csv_series, write_report

DEFAULT_SEED_ENV = "DIFFVEC_SEED"

_SERIES_HEADERS = {
    "k_sweep": ["k", "v_measure"],
    "relation_f1": ["relation", "orig_f1", "with_neg_f1"],
    "multiplier_sweep": ["multiplier", "variant", "precision", "recall", "f1"],
}


class _LastWinsAction(argparse.Action):
    """Repeated flags keep the last value and warn about the earlier one."""

    def __call__(self, parser, namespace, values, option_string=None):
        seen = getattr(namespace, f"_seen_{self.dest}", False)
        if seen:
            print(f"warning: {option_string} given more than once; last value wins",
                  file=sys.stderr)
        setattr(namespace, f"_seen_{self.dest}", True)
        setattr(namespace, self.dest, values)


def _default_seed() -> int:
    raw = os.environ.get(DEFAULT_SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        print(f"warning: ignoring non-integer {DEFAULT_SEED_ENV}={raw!r}", file=sys.stderr)
        return 0


def _add_embedding_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--embeddings", required=True, help="embedding file to load")
    parser.add_argument("--format", choices=["text", "binary"], default="text",
                        help="embedding file format")
    parser.add_argument("--lowercase", action="store_true",
                        help="fold words to lowercase at load time")
    parser.add_argument("--no-normalize", action="store_true",
                        help="skip unit-length normalization of the vectors")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, action=_LastWinsAction, default=None,
                        help=f"random seed (default: ${DEFAULT_SEED_ENV} or 0)")
    parser.add_argument("--out", required=True, help="report JSON output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffvec",
        description="Lexical relation learning over word-embedding difference vectors",
    )
    parser.add_argument("--version", action="version", version=f"diffvec {__version__}")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: run in-process)")
    commands = parser.add_subparsers(dest="command", required=True)

    embed = commands.add_parser("embed", help="embedding file utilities")
    embed_sub = embed.add_subparsers(dest="embed_command", required=True)
    inspect = embed_sub.add_parser("inspect", help="print dimension, vocabulary size, norms")
    inspect.add_argument("path", help="embedding file")
    inspect.add_argument("--format", choices=["text", "binary"], default="text")
    inspect.add_argument("--lowercase", action="store_true")

    build = commands.add_parser("build-svd",
                                help="train count-based vectors (PPMI + truncated SVD)")
    build.add_argument("--corpus", required=True, help="plain-text corpus path")
    build.add_argument("--out", required=True, help="output embedding file (text format)")
    build.add_argument("--dim", type=int, default=300)
    build.add_argument("--window", type=int, default=2)
    build.add_argument("--cds", type=float, default=0.75,
                       help="context distribution smoothing exponent")
    build.add_argument("--shift", type=int, default=1, help="PMI shift (log subtracted)")
    build.add_argument("--eig-weight", type=float, default=0.5,
                       help="singular value weighting exponent")
    build.add_argument("--min-count", type=int, default=5, help="word frequency threshold")

    clus = commands.add_parser("cluster", help="spectral clustering experiment")
    _add_embedding_flags(clus)
    clus.add_argument("--triples", required=True, help="relation triple TSV")
    clus.add_argument("--k-sweep", default="10:80:10",
                      help="cluster counts: start:stop:step or comma list")
    clus.add_argument("--dev-frac", type=float, default=0.15,
                      help="held-out fraction for hyperparameter tuning")
    clus.add_argument("--subsample-cap", type=int, default=4000,
                      help="max instances in one affinity matrix")
    _add_run_flags(clus)

    closed = commands.add_parser("classify-closed",
                                 help="closed-world multiclass classification")
    _add_embedding_flags(closed)
    closed.add_argument("--triples", required=True)
    closed.add_argument("--folds", type=int, default=10)
    closed.add_argument("--c", type=float, default=1.0, dest="C",
                        help="SVM regularization strength")
    closed.add_argument("--save-model", default=None,
                        help="also train on all data and save the model JSON here")
    _add_run_flags(closed)

    open_world = commands.add_parser("classify-open",
                                     help="open-world binary classification with random pairs")
    _add_embedding_flags(open_world)
    open_world.add_argument("--triples", required=True)
    open_world.add_argument("--freq", required=True, help="word frequency TSV")
    open_world.add_argument("--neg", action="store_true",
                            help="report the negative-sampling variant")
    open_world.add_argument("--annotations", default=None,
                            help="TSV of human-validated random pairs")
    open_world.add_argument("--c", type=float, default=1.0, dest="C")
    open_world.add_argument("--gamma", type=float, default=None,
                            help="RBF kernel width (default 1/dim)")
    open_world.add_argument("--lexicon-size", type=int, default=500)
    open_world.add_argument("--test-fraction", type=float, default=1.0 / 3.0)
    _add_run_flags(open_world)

    baseline = commands.add_parser("baseline", help="cluster + majority-label baseline")
    _add_embedding_flags(baseline)
    baseline.add_argument("--triples", required=True)
    baseline.add_argument("--clusters", type=int, default=50)
    baseline.add_argument("--folds", type=int, default=10)
    baseline.add_argument("--measure", choices=["rbf", "cosine"], default="rbf")
    baseline.add_argument("--gamma", type=float, default=1.0)
    baseline.add_argument("--subsample-cap", type=int, default=4000)
    _add_run_flags(baseline)

    lexsplit = commands.add_parser("lexsplit-sweep",
                                   help="split-vocabulary sweep over random-pair multipliers")
    _add_embedding_flags(lexsplit)
    lexsplit.add_argument("--triples", required=True)
    lexsplit.add_argument("--freq", required=True)
    lexsplit.add_argument("--multipliers", default="0,1,2,3,4,5",
                          help="comma-separated random-pair multipliers")
    lexsplit.add_argument("--c", type=float, default=1.0, dest="C")
    lexsplit.add_argument("--gamma", type=float, default=None)
    lexsplit.add_argument("--lexicon-size", type=int, default=500)
    lexsplit.add_argument("--test-fraction", type=float, default=1.0 / 3.0)
    _add_run_flags(lexsplit)

    predict = commands.add_parser("predict", help="label word pairs with a saved model")
    _add_embedding_flags(predict)
    predict.add_argument("--model", required=True, help="model JSON from classify-closed")
    predict.add_argument("--pairs", required=True,
                         help="TSV of word pairs (2 columns, or 3 with labels ignored)")
    predict.add_argument("--out", required=True, help="prediction JSON output path")

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


async def _post(server: str | None, route: str, payload: dict) -> dict:
    if server:
        async with httpx.AsyncClient(base_url=server, timeout=None) as client:
            response = await client.post(route, json=payload)
    else:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, timeout=None,
                                     base_url="http://diffvec.local") as client:
            response = await client.post(route, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise RuntimeError(f"{route} failed ({response.status_code}): {detail}")
    return response.json()


def _post_sync(server: str | None, route: str, payload: dict) -> dict:
    return asyncio.run(_post(server, route, payload))


def _resolve_seed(args: argparse.Namespace) -> int:
    return args.seed if getattr(args, "seed", None) is not None else _default_seed()


def _embedding_payload(args: argparse.Namespace) -> dict:
    return {
        "embeddings": args.embeddings,
        "format": args.format,
        "lowercase": args.lowercase,
        "normalize": not args.no_normalize,
    }


def _write_outputs(report: dict, out: str) -> None:
    write_report(report, out)
    stem = Path(out)
    for name, rows in (report.get("series") or {}).items():
        header = _SERIES_HEADERS.get(name, [f"col{i}" for i in range(len(rows[0]))] if rows else [])
        csv_path = stem.with_name(f"{stem.stem}.{name}.csv")
        write_csv_series(rows, header, str(csv_path))
        print(f"wrote {csv_path}")
    print(f"wrote {out}")


def _summarize(report: dict) -> str:
    micro = report.get("micro_average", {})
    pieces = [f"{key}={value:.4f}" for key, value in sorted(micro.items())]
    return ", ".join(pieces)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.command == "embed":
        payload = {"path": args.path, "format": args.format, "lowercase": args.lowercase}
        info = _post_sync(args.server, "/embeddings/inspect", payload)
        print(f"path: {info['path']}")
        print(f"dim: {info['dim']}")
        print(f"vocab: {info['count']}")
        print(f"normalized: {info['normalized']}")
        print(f"duplicates dropped: {info['duplicates_dropped']}")
        print(f"norms: min={info['norm_min']:.6f} mean={info['norm_mean']:.6f} "
              f"max={info['norm_max']:.6f}")
        return 0

    if args.command == "build-svd":
        payload = {
            "corpus": args.corpus,
            "out": args.out,
            "dim": args.dim,
            "window": args.window,
            "cds": args.cds,
            "shift": args.shift,
            "eig_weight": args.eig_weight,
            "min_count": args.min_count,
        }
        info = _post_sync(args.server, "/embeddings/build-svd", payload)
        print(f"wrote {info['out']} (dim={info['dim']}, vocab={info['vocab_size']})")
        return 0

    if args.command == "predict":
        payload = _embedding_payload(args)
        payload.update({"model_path": args.model, "pairs": args.pairs})
        result = _post_sync(args.server, "/models/predict", payload)
        write_report(result, args.out)
        print(f"wrote {args.out} ({len(result['predictions'])} predictions)")
        return 0

    if args.command == "cluster":
        payload = _embedding_payload(args)
        payload.update({
            "triples": args.triples,
            "k_sweep": args.k_sweep,
            "dev_fraction": args.dev_frac,
            "subsample_cap": args.subsample_cap,
            "seed": _resolve_seed(args),
        })
        report = _post_sync(args.server, "/experiments/cluster", payload)
    elif args.command == "classify-closed":
        payload = _embedding_payload(args)
        payload.update({
            "triples": args.triples,
            "folds": args.folds,
            "C": args.C,
            "seed": _resolve_seed(args),
            "save_model": args.save_model,
        })
        report = _post_sync(args.server, "/experiments/closed-world", payload)
    elif args.command == "classify-open":
        payload = _embedding_payload(args)
        payload.update({
            "triples": args.triples,
            "freq": args.freq,
            "with_negatives": args.neg,
            "annotations": args.annotations,
            "C": args.C,
            "gamma": args.gamma,
            "lexicon_size": args.lexicon_size,
            "test_fraction": args.test_fraction,
            "seed": _resolve_seed(args),
        })
        report = _post_sync(args.server, "/experiments/open-world", payload)
    elif args.command == "baseline":
        payload = _embedding_payload(args)
        payload.update({
            "triples": args.triples,
            "clusters": args.clusters,
            "folds": args.folds,
            "measure": args.measure,
            "gamma": args.gamma,
            "subsample_cap": args.subsample_cap,
            "seed": _resolve_seed(args),
        })
        report = _post_sync(args.server, "/experiments/baseline", payload)
    elif args.command == "lexsplit-sweep":
        payload = _embedding_payload(args)
        payload.update({
            "triples": args.triples,
            "freq": args.freq,
            "multipliers": [int(m) for m in args.multipliers.split(",") if m.strip()],
            "C": args.C,
            "gamma": args.gamma,
            "lexicon_size": args.lexicon_size,
            "test_fraction": args.test_fraction,
            "seed": _resolve_seed(args),
        })
        report = _post_sync(args.server, "/experiments/lexical-split", payload)
    else:  # pragma: no cover - argparse enforces the command set
        raise RuntimeError(f"unhandled command {args.command!r}")

    _write_outputs(report, args.out)
    summary = _summarize(report)
    if summary:
        print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
