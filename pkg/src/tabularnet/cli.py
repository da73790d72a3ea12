"""Command-line entry point: ``tabularnet <subcommand> ...``.

Every subcommand reads and writes plain files (dataset directories, ``.npz`` features, graph
exports, checkpoints, JSON reports, TSV embeddings) and exits non-zero on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .encoder import ModelCheckpoint
from .features import FileEmbedding, HashingEmbedding, extract_features, save_features
from .lexgraph import GRAPH_KINDS, TaxonomyError, build_graph, demo_lexicon, demo_taxonomy, load_lexicon, load_taxonomy
from .synthetic import SyntheticSpec, gen_synthetic
from .table import TableError, load_dataset, load_table, normalize, split_dataset, write_dataset
from .training import TrainConfig, TrainingDiverged, evaluate, export_embeddings, predict, train

logger = logging.getLogger("tabularnet")


def _ratios(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated ratios, e.g. 0.7,0.1,0.2")
    return tuple(parts)


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


def _lexical(args):
    if args.taxonomy is None:
        if args.lexicon is not None:
            raise ValueError("--lexicon needs --taxonomy")
        taxonomy = demo_taxonomy()
        return taxonomy, demo_lexicon(taxonomy)
    taxonomy = load_taxonomy(args.taxonomy)
    lexicon = load_lexicon(args.lexicon, taxonomy) if args.lexicon else demo_lexicon(taxonomy)
    return taxonomy, lexicon


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_synthetic(args) -> None:
    spec = SyntheticSpec(
        n_tables=args.n_tables, data_rows=args.data_rows, header_depth=args.header_depth,
        left_cols=args.left_cols, p_total=args.p_total, style_noise=args.style_noise, seed=args.seed,
    )
    taxonomy, lexicon = _lexical(args)
    tables = gen_synthetic(spec, taxonomy, lexicon)
    write_dataset(args.out, tables)
    logger.info("wrote %d tables to %s", len(tables), args.out)


def cmd_extract_features(args) -> None:
    provider = FileEmbedding(args.embeddings_file) if args.embeddings_file else HashingEmbedding(args.embed_dim)
    matrices = [extract_features(normalize(t), provider) for t in load_dataset(args.data)]
    save_features(args.out, matrices)
    logger.info("wrote features for %d tables to %s", len(matrices), args.out)


def cmd_build_graph(args) -> None:
    taxonomy = lexicon = None
    if args.graph == "wordnet":
        taxonomy, lexicon = _lexical(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        for table in load_dataset(args.data):
            graph = build_graph(args.graph, normalize(table), taxonomy, lexicon, args.eta, args.eps_depth,
                                args.strict_depth)
            fh.write(graph.export())


def _train_config(args) -> TrainConfig:
    encoder = {}
    if args.no_gin:
        encoder["use_gin"] = False
    if args.no_bigru:
        encoder["use_bigru"] = False
    return TrainConfig(
        task=args.task, batch_size=args.batch, max_epochs=args.epochs, patience=args.patience, lr=args.lr,
        weight_decay=args.weight_decay, dropout=args.dropout, seed=args.seed,
        deterministic=args.deterministic, graph=args.graph, eta=args.eta, eps_depth=args.eps_depth,
        strict_depth=args.strict_depth, embed_dim=args.embed_dim, embeddings_file=args.embeddings_file,
        class_weighting=args.class_weighting, encoder=encoder,
    )


def cmd_train(args) -> None:
    cfg = _train_config(args)
    test = []
    if args.train:
        train_tables = load_dataset(args.train)
        val_tables = load_dataset(args.val) if args.val else []
    else:
        train_tables, val_tables, test = split_dataset(load_dataset(args.data), args.split, args.split_seed)
    taxonomy, lexicon = _lexical(args) if cfg.graph == "wordnet" else (None, None)
    checkpoint, report = train(cfg, train_tables, val_tables, taxonomy, lexicon)
    checkpoint.save(args.out)
    payload = {"validation": report.to_dict()}
    if test:
        payload["test"] = evaluate(checkpoint, test).to_dict()
    _write_json(args.report, payload)


def cmd_evaluate(args) -> None:
    checkpoint = ModelCheckpoint.load(args.checkpoint)
    report = evaluate(checkpoint, load_dataset(args.data), args.embeddings_file)
    _write_json(args.report, report.to_dict())


def cmd_predict(args) -> None:
    checkpoint = ModelCheckpoint.load(args.checkpoint)
    tables = [load_table(p) for p in args.tables]
    if args.data:
        tables += load_dataset(args.data)
    if not tables:
        raise ValueError("nothing to predict: pass table files and/or --data")
    preds = [predict(checkpoint, t, args.embeddings_file).to_dict() for t in tables]
    _write_json(args.out, {"predictions": preds})


def cmd_export_embeddings(args) -> None:
    checkpoint = ModelCheckpoint.load(args.checkpoint)
    n = export_embeddings(checkpoint, load_dataset(args.data), args.out, args.embeddings_file)
    logger.info("wrote %d cell records to %s", n, args.out)


# ---------------------------------------------------------------------------
# parser


def _add_lexical(p) -> None:
    p.add_argument("--taxonomy", help="child<TAB>parent file (default: bundled demo taxonomy)")
    p.add_argument("--lexicon", help="word<TAB>node1,node2 file (default: bundled demo lexicon)")


def _add_graph(p) -> None:
    p.add_argument("--graph", choices=GRAPH_KINDS, default="wordnet")
    p.add_argument("--eta", type=int, default=3, help="synonyms kept per word")
    p.add_argument("--eps-depth", type=int, default=2, help="max depth gap to the common ancestor")
    p.add_argument("--strict-depth", action="store_true", help="require a gap strictly below --eps-depth")
    _add_lexical(p)


def _add_embedding(p) -> None:
    p.add_argument("--embed-dim", type=int, default=64, help="hashing embedding width")
    p.add_argument("--embeddings-file", help="precomputed text embeddings (#dim D header)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabularnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    # -v is accepted after the subcommand too; SUPPRESS keeps the top-level value when absent
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("gen-synthetic", parents=[common], help="generate a labeled synthetic dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--n-tables", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-rows", type=_range, default=(3, 9), metavar="LO,HI")
    p.add_argument("--header-depth", type=_range, default=(1, 3), metavar="LO,HI")
    p.add_argument("--left-cols", type=_range, default=(0, 2), metavar="LO,HI")
    p.add_argument("--p-total", type=float, default=0.4)
    p.add_argument("--style-noise", type=float, default=0.15)
    _add_lexical(p)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("extract-features", parents=[common], help="write per-cell feature matrices to .npz")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_embedding(p)
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("build-graph", parents=[common], help="export one cell graph per table")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_graph(p)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", parents=[common], help="train a model and write checkpoint + report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset directory, split with --split")
    src.add_argument("--train", help="training dataset directory (use with --val)")
    p.add_argument("--val", help="validation dataset directory")
    p.add_argument("--split", type=_ratios, default=(0.7, 0.1, 0.2), metavar="TR,VA,TE")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--report", help="JSON metrics report path (default: stdout)")
    p.add_argument("--task", choices=("cell", "region", "multi"), default="cell")
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--weight-decay", type=float, default=5e-5)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=8)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                   help="pin BLAS to one thread so runs are bit-reproducible")
    p.add_argument("--class-weighting", action="store_true", help="inverse-frequency cell loss weights")
    p.add_argument("--no-gin", action="store_true", help="ablation: drop the graph encoder")
    p.add_argument("--no-bigru", action="store_true", help="ablation: drop the row/column Bi-GRUs")
    _add_graph(p)
    _add_embedding(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", help="JSON output path (default: stdout)")
    p.add_argument("--embeddings-file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="predict cell roles and header rows/columns")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("tables", nargs="*", help="table JSON files")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--embeddings-file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-embeddings", parents=[common], help="write per-cell embeddings as TSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings-file")
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (TableError, TaxonomyError, TrainingDiverged, ValueError, KeyError, OSError) as exc:
        print(f"tabularnet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
