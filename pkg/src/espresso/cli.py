"""Command-line entry point: train, query, evaluate, onsets, serve.

Every subcommand is a thin wrapper over library calls. Exit codes: 0 on
success, 1 for operational errors (bad data, unknown ids, decode
failures), 2 for usage errors (argparse).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .audio_features import OnsetConfig, decode_wav, onset_density
from .corpus import load_catalog, load_pairs
from .errors import EspressoError
from .evaluation import (
    EvalConfig,
    default_grid,
    random_baseline,
    render_grid_csv,
    render_grid_table,
    run_ablation_grid,
    run_piecewise_cv,
)
from .numerics import TrainConfig, load_model, save_model, train_projection
from .retrieval import build_index, query_piece
from .service import DEFAULT_PORT
from .text_encoder import load_embedding_table

_log = logging.getLogger(__name__)

AUGMENT_SOURCES = ("pitchfork", "musiccaps")


def _parse_pca(value: str):
    """--pca accepts a variance fraction in (0,1], a component count, or off."""
    if value == "off":
        return None
    try:
        if value.isdigit():
            count = int(value)
            if count < 1:
                raise argparse.ArgumentTypeError("component count must be >= 1")
            return count
        fraction = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a fraction, a component count, or 'off', got {value!r}"
        ) from None
    if not (0.0 < fraction <= 1.0):
        raise argparse.ArgumentTypeError("variance fraction must be in (0, 1]")
    return fraction


def _parse_augment(value: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in value.split(",") if p.strip())
    for part in parts:
        if part not in AUGMENT_SOURCES:
            raise argparse.ArgumentTypeError(
                f"unknown augmentation source {part!r}; "
                f"choose from {', '.join(AUGMENT_SOURCES)}"
            )
    return parts


def _env_default(name: str) -> str | None:
    value = os.environ.get(name)
    return value if value else None


def cmd_train(args) -> int:
    catalog = load_catalog(args.catalog)
    sources = {"core", *args.augment}
    pairs = load_pairs(args.pairs, sources, catalog=catalog)
    table = load_embedding_table(args.embeddings)
    config = TrainConfig(
        pca_target=args.pca,
        ridge_lambda=args.ridge,
        standardize=not args.raw_feature_space,
    )
    model = train_projection(table, pairs, config)
    save_model(model, args.out)
    k = model.map.input_dim
    print(
        f"trained on {sum(model.trained_on.values())} pairs "
        f"{dict(sorted(model.trained_on.items()))}, input dim {k}, "
        f"fingerprint {model.config_fingerprint}"
    )
    return 0


def cmd_query(args) -> int:
    catalog = load_catalog(args.catalog)
    model = load_model(args.model)
    table = load_embedding_table(args.embeddings)
    index = build_index(catalog, model)
    document = query_piece(catalog, index, model, table, args.piece, args.text)
    if args.format == "document":
        print(json.dumps(document, indent=2))
        return 0
    oov = document["warnings"]["oov_tokens"]
    if oov:
        print(f"ignored out-of-vocabulary tokens: {', '.join(oov)}", file=sys.stderr)
    print(f"{'rank':>4}  {'score':>7}  {'performance':<24} artist")
    for result in document["results"]:
        print(
            f"{result['rank']:>4}  {result['score']:>7.4f}  "
            f"{result['performance_id']:<24} {result['artist_label']}"
        )
    return 0


def cmd_evaluate(args) -> int:
    catalog = load_catalog(args.catalog)
    pairs = load_pairs(args.pairs, {"core", *AUGMENT_SOURCES}, catalog=catalog)
    table = load_embedding_table(args.embeddings)

    if args.grid:
        grid = default_grid(seed=args.seed, allow_singleton=args.allow_singleton)
        reports = run_ablation_grid(catalog, pairs, table, grid)
    else:
        config = EvalConfig(
            augment_pitchfork="pitchfork" in args.augment,
            augment_musiccaps="musiccaps" in args.augment,
            pca=args.pca is not None,
            pca_target=args.pca if args.pca is not None else 0.95,
            ridge_lambda=args.ridge,
            seed=args.seed,
            allow_singleton=args.allow_singleton,
        )
        reports = [run_piecewise_cv(catalog, pairs, table, config)]

    if args.table2:
        print(render_grid_table(reports), end="")
    else:
        for report in reports:
            agg = report.aggregate
            cfg = report.config
            flags = (
                f"pitchfork={cfg['augment_pitchfork']} "
                f"musiccaps={cfg['augment_musiccaps']} pca={cfg['pca']}"
            )
            print(
                f"{flags}: top1 {agg['top1']:.4f}  top2 {agg['top2']:.4f}  "
                f"mrr {agg['mrr']:.4f}  ({agg['query_count']} queries)"
            )

    baseline = random_baseline(
        catalog, trials=args.trials, seed=args.seed,
        allow_singleton=args.allow_singleton,
    )
    print(
        f"random baseline ({args.trials} trials): "
        f"top1 {baseline['top1']:.4f}  top2 {baseline['top2']:.4f}  "
        f"mrr {baseline['mrr']:.4f}"
    )

    if args.out:
        json_path = Path(f"{args.out}.json")
        csv_path = Path(f"{args.out}.csv")
        if len(reports) == 1:
            json_path.write_text(reports[0].to_json(), encoding="utf-8")
        else:
            json_path.write_text(
                "[\n"
                + ",\n".join(r.to_json().rstrip("\n") for r in reports)
                + "\n]\n",
                encoding="utf-8",
            )
        csv_path.write_text(render_grid_csv(reports), encoding="utf-8")
        print(f"wrote {json_path} and {csv_path}")
    return 0


def cmd_onsets(args) -> int:
    config = OnsetConfig(
        frame_size=args.frame,
        hop_size=args.hop,
        flux_smoothing=args.smoothing,
        peak_threshold_delta=args.delta,
        min_inter_onset_gap=args.min_gap,
    )
    if args.audio:
        clip = decode_wav(args.audio)
        print(onset_density(clip, config))
        return 0

    catalog = load_catalog(args.catalog)
    root = Path(args.catalog).resolve().parent
    entries: dict[str, float] = {}
    for perf in catalog.performances:
        if not perf.audio_path:
            _log.warning("%s has no audio_path; skipped", perf.performance_id)
            continue
        audio_path = Path(perf.audio_path)
        if not audio_path.is_absolute():
            audio_path = root / audio_path
        clip = decode_wav(audio_path)
        entries[perf.performance_id] = onset_density(clip, config)
    patch = {"schema_version": 1, "entries": entries}
    Path(args.patch_out).write_text(
        json.dumps(patch, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote onset densities for {len(entries)} performances to {args.patch_out}")
    return 0


def cmd_serve(args) -> int:
    from . import __version__
    from .service import run_service

    port = args.port
    if port is None:
        port = int(os.environ.get("ESPRESSO_PORT", DEFAULT_PORT))
    run_service(args.catalog, args.model, args.embeddings, port=port,
                version=__version__)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="espresso",
        description="Rank recorded performances of a piece against "
        "free-text expressive descriptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a projection model")
    train.add_argument("--catalog", required=True)
    train.add_argument("--pairs", required=True)
    train.add_argument("--embeddings", required=True)
    train.add_argument("--augment", type=_parse_augment, default=(),
                       help="comma-separated auxiliary sources "
                       "(pitchfork,musiccaps)")
    train.add_argument("--pca", type=_parse_pca, default=0.95,
                       help="variance fraction, component count, or 'off' "
                       "(default 0.95)")
    train.add_argument("--ridge", type=float, default=None,
                       help="ridge strength; defaults to a small value only "
                       "when the problem is underdetermined")
    train.add_argument("--raw-feature-space", action="store_true",
                       help="skip feature standardization")
    train.add_argument("--out", required=True)
    train.set_defaults(func=cmd_train)

    query = sub.add_parser("query", help="rank one piece's performances")
    query.add_argument("--model", required=True)
    query.add_argument("--catalog", required=True)
    query.add_argument("--embeddings", required=True)
    query.add_argument("--piece", required=True)
    query.add_argument("--text", required=True)
    query.add_argument("--format", choices=("table", "document"),
                       default="table")
    query.set_defaults(func=cmd_query)

    evaluate = sub.add_parser("evaluate", help="piece-wise cross-validation")
    evaluate.add_argument("--catalog", required=True)
    evaluate.add_argument("--pairs", required=True)
    evaluate.add_argument("--embeddings", required=True)
    evaluate.add_argument("--grid", action="store_true",
                          help="run all 8 augmentation-by-PCA cells")
    evaluate.add_argument("--table2", action="store_true",
                          help="render results as the 8-row ablation table")
    evaluate.add_argument("--augment", type=_parse_augment, default=(),
                          help="auxiliary sources for a single run")
    evaluate.add_argument("--pca", type=_parse_pca, default=None,
                          help="PCA target for a single run (default off)")
    evaluate.add_argument("--ridge", type=float, default=None)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--trials", type=int, default=10000,
                          help="Monte-Carlo trials for the random baseline")
    evaluate.add_argument("--allow-singleton", action="store_true",
                          help="evaluate single-performance pieces outside "
                          "the aggregate")
    evaluate.add_argument("--out", default=None, metavar="PREFIX",
                          help="write PREFIX.json and PREFIX.csv")
    evaluate.set_defaults(func=cmd_evaluate)

    onsets = sub.add_parser("onsets", help="measure onsets per second")
    target = onsets.add_mutually_exclusive_group(required=True)
    target.add_argument("--audio", help="single WAV file; prints the density")
    target.add_argument("--catalog",
                        help="batch mode over every catalog audio_path")
    onsets.add_argument("--patch-out", default=None,
                        help="output path for the batch patch document")
    onsets.add_argument("--frame", type=int, default=2048)
    onsets.add_argument("--hop", type=int, default=512)
    onsets.add_argument("--smoothing", type=int, default=3)
    onsets.add_argument("--delta", type=float, default=0.07)
    onsets.add_argument("--min-gap", type=float, default=0.05)
    onsets.set_defaults(func=cmd_onsets)

    serve = sub.add_parser("serve", help="run the HTTP query service")
    serve.add_argument("--catalog", default=_env_default("ESPRESSO_CATALOG"))
    serve.add_argument("--model", default=_env_default("ESPRESSO_MODEL"))
    serve.add_argument("--embeddings",
                       default=_env_default("ESPRESSO_EMBEDDINGS"))
    serve.add_argument("--port", type=int, default=None,
                       help=f"default {DEFAULT_PORT}, or ESPRESSO_PORT")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "onsets" and args.catalog and not args.patch_out:
        parser.error("batch mode needs --patch-out")
    if args.command == "serve":
        for name in ("catalog", "model", "embeddings"):
            if getattr(args, name) is None:
                parser.error(
                    f"--{name} (or ESPRESSO_{name.upper()}) is required"
                )
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EspressoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
