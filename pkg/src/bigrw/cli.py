"""Command-line interface: ``bigrw {train,eval,oracle,sweep,convert-linqs}``.

Exit codes: 0 success, 2 invalid arguments, 3 I/O or file-format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path


from . import __version__
from .evaluation import DEFAULT_RATIOS, evaluate_classification, evaluate_clustering
from .io import (
    FormatError, load_dataset, load_linqs, read_attributes, read_edge_list, read_embeddings,
    read_labels, resolve_data_path, write_dataset, write_embeddings,
)
from .kwat import backward_distribution, forward_distribution, kwat_matrix
from .model import BiGRW, TrainConfig, save_checkpoint

logger = logging.getLogger("bigrw")

EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 2, 3, 4
MANIFEST_VERSION = 1

LIBRARY_DEFAULTS = {"alpha": 1.0, "k": 5, "dim": 128}
PRESETS = {
    "cora": {"plain": {"alpha": 1.25, "k": 5, "dim": 256}, "attributed": {"alpha": 0.75, "k": 6, "dim": 256}},
    "citeseer": {"plain": {"alpha": 1.25, "k": 6, "dim": 256}, "attributed": {"alpha": 0.5, "k": 6, "dim": 256}},
    "blogcatalog": {"plain": {"alpha": 0.75, "k": 5, "dim": 128}},
}
SWEEPABLE = {"alpha": float, "dim": int, "k": int}


class UsageError(ValueError):
    pass


def preset_values(preset: str | None, attributed: bool) -> dict:
    if preset is None:
        return dict(LIBRARY_DEFAULTS)
    mode = "attributed" if attributed else "plain"
    try:
        return dict(PRESETS[preset][mode])
    except KeyError:
        raise UsageError(f"preset {preset!r} has no {mode} settings") from None


def _ratio_list(text: str) -> list[float]:
    vals = [float(x) for x in text.split(",") if x]
    for v in vals:
        if not 0 < v < 1:
            raise argparse.ArgumentTypeError(f"ratio {v} not in (0, 1)")
    return vals


def _add_input_args(p, labels=False):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="dataset directory (edges.txt, labels.txt, features.txt)")
    src.add_argument("--edges", help="edge list file")
    p.add_argument("--directed", action="store_true", help="treat edges as directed arcs")
    if labels:
        p.add_argument("--labels", help="label file (default: <data>/labels.txt)")


def _add_train_args(p):
    p.add_argument("--attributes", help="node feature file; switches to the attributed model")
    p.add_argument("--use-features", action="store_true", help="use <data>/features.txt")
    p.add_argument("--feature-format", choices=("auto", "dense", "sparse"), default="auto")
    p.add_argument("--dataset-preset", choices=sorted(PRESETS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--negatives", type=int, default=TrainConfig.negatives)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--beta1", type=float, default=TrainConfig.beta1)
    p.add_argument("--beta2", type=float, default=TrainConfig.beta2)
    p.add_argument("--epsilon", type=float, default=TrainConfig.epsilon)
    p.add_argument("--init-scale", type=float)
    p.add_argument("--noise", choices=("uniform", "unigram"), default="uniform")
    p.add_argument("--normalize-features", action="store_true")
    p.add_argument("--shared-targets", action="store_true",
                   help="ablation: one target table trained on both pair orders")
    p.add_argument("--concat-targets", action="store_true",
                   help="export [S, T_f, T_b] instead of S")
    p.add_argument("--workers", type=int, default=1,
                   help=">1 enables asynchronous (non-reproducible) training")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bigrw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn node embeddings")
    _add_input_args(p)
    _add_train_args(p)
    p.add_argument("--out", help="embedding file to write")
    p.add_argument("--checkpoint", help="model checkpoint (.npz)")
    p.add_argument("--loss-log", help="per-epoch loss TSV")
    p.add_argument("--manifest", help="run manifest JSON (default: <out>.manifest.json)")
    p.add_argument("--from-manifest", help="re-run the training recorded in a manifest")

    p = sub.add_parser("eval", help="evaluate an embedding file")
    esub = p.add_subparsers(dest="task", required=True)
    for task in ("classify", "cluster"):
        q = esub.add_parser(task)
        q.add_argument("--embeddings", required=True)
        q.add_argument("--labels", required=True)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--report", help="write the JSON report here (default stdout)")
        if task == "classify":
            q.add_argument("--ratios", type=_ratio_list, default=list(DEFAULT_RATIOS))
            q.add_argument("--repetitions", type=int, default=10)
            q.add_argument("--reg", type=float, default=1.0)
        else:
            q.add_argument("--clusters", type=int, help="K (default: number of classes)")
            q.add_argument("--restarts", type=int, default=10)

    p = sub.add_parser("oracle", help="exact k-step matrices for small graphs")
    osub = p.add_subparsers(dest="what", required=True)
    q = osub.add_parser("kwat", help="print the k-WAT matrix, a forward row or a backward column")
    _add_input_args(q)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--k", type=int, default=5)
    sel = q.add_mutually_exclusive_group()
    sel.add_argument("--row", help="node id: print its forward distribution")
    sel.add_argument("--col", help="node id: print its backward distribution")

    p = sub.add_parser("sweep", help="train over a grid of one hyper-parameter and score each run")
    _add_input_args(p, labels=True)
    _add_train_args(p)
    p.add_argument("--param", choices=sorted(SWEEPABLE), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.add_argument("--classify", action="store_true", help="also run the classification protocol")
    p.add_argument("--ratios", type=_ratio_list, default=list(DEFAULT_RATIOS))
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--report", help="JSON report path")

    p = sub.add_parser("convert-linqs", help="convert <name>.content/<name>.cites to the dataset layout")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _load_inputs(args, need_labels=False):
    """(graph, features or None, labels or None) from --data/--edges and friends."""
    features = labels = None
    if args.data:
        bundle = load_dataset(args.data, directed=args.directed,
                              feature_format=getattr(args, "feature_format", "auto"))
        g, labels = bundle.graph, bundle.labels
        if getattr(args, "use_features", False):
            if bundle.attributes is None:
                raise FileNotFoundError(f"{args.data}/features.txt not found")
            features = bundle.attributes
    elif args.edges:
        g = read_edge_list(resolve_data_path(args.edges), directed=args.directed)
    else:
        raise UsageError("one of --data or --edges is required")
    if getattr(args, "attributes", None):
        features = read_attributes(resolve_data_path(args.attributes), g, args.feature_format)
    if getattr(args, "labels", None):
        labels = read_labels(resolve_data_path(args.labels), g)
    if need_labels and labels is None:
        raise FileNotFoundError("labels are required (--labels or <data>/labels.txt)")
    return g, features, labels


def _train_config(args, attributed: bool, **override) -> TrainConfig:
    base = preset_values(args.dataset_preset, attributed)
    for name in ("alpha", "k", "dim"):
        if getattr(args, name) is not None:
            base[name] = getattr(args, name)
    base.update(override)
    return TrainConfig(
        dim=base["dim"], epochs=args.epochs, negatives=args.negatives, learning_rate=args.lr,
        beta1=args.beta1, beta2=args.beta2, epsilon=args.epsilon, init_scale=args.init_scale,
        seed=args.seed, alpha=base["alpha"], k=base["k"], noise=args.noise,
        normalize_features=args.normalize_features, shared_targets=args.shared_targets,
        workers=args.workers,
    )


def _estimator(cfg: TrainConfig, concat: bool) -> BiGRW:
    return BiGRW(
        alpha=cfg.alpha, k=cfg.k, dim=cfg.dim, epochs=cfg.epochs, negatives=cfg.negatives,
        learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon,
        init_scale=cfg.init_scale, noise=cfg.noise, normalize_features=cfg.normalize_features,
        shared_targets=cfg.shared_targets, concat_targets=concat, workers=cfg.workers,
        random_state=cfg.seed,
    )


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _emit(report: dict, path) -> None:
    text = json.dumps(report, indent=2)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _progress(epochs):
    step = max(1, epochs // 10)

    def cb(epoch, loss):
        if (epoch + 1) % step == 0:
            logger.info("epoch %d/%d loss %s", epoch + 1, epochs, "n/a" if loss is None else f"{loss:.5f}")
    return cb


def cmd_train(args) -> int:
    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        if manifest.get("manifest_version") != MANIFEST_VERSION:
            raise UsageError("unsupported manifest version")
        outputs = {k: getattr(args, k) for k in ("out", "checkpoint", "loss_log", "manifest")
                   if getattr(args, k)}
        args = argparse.Namespace(**{**vars(args), **manifest["args"], **outputs, "from_manifest": None})
    if not args.out:
        raise UsageError("--out is required")
    g, features, _ = _load_inputs(args)
    cfg = _train_config(args, attributed=features is not None)
    logger.info("training %s model on %d nodes: %s",
                "attributed" if features is not None else "plain", g.node_count, cfg)
    model = _estimator(cfg, args.concat_targets)
    t0 = time.perf_counter()
    model.fit(g, features, callback=_progress(cfg.epochs))
    elapsed = time.perf_counter() - t0

    write_embeddings(args.out, model.embedding_, g.node_ids)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, model.params_, cfg, model.loss_history_)
    if args.loss_log:
        with open(args.loss_log, "w", encoding="utf-8") as fh:
            fh.write("epoch\tloss\n")
            for e, loss in enumerate(model.loss_history_, 1):
                fh.write(f"{e}\t{'nan' if loss is None else repr(loss)}\n")
    recorded = {k: v for k, v in vars(args).items() if k not in ("func", "verbose", "from_manifest")}
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "bigrw_version": __version__,
        "command": "train",
        "args": recorded,
        "effective_config": dataclasses.asdict(cfg),
        "mode": "attributed" if features is not None else "plain",
        "deterministic": cfg.workers == 1,
        "nodes": g.node_count,
        "arcs": g.arc_count,
        "seconds": round(elapsed, 3),
        "final_loss": next((x for x in reversed(model.loss_history_) if x is not None), None),
        "embedding_sha256": _sha256(args.out),
    }
    manifest_path = args.manifest or f"{args.out}.manifest.json"
    Path(manifest_path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s (%d x %d) in %.1fs", args.out, *model.embedding_.shape, elapsed)
    return 0


def _labels_for_embeddings(emb_path, labels_path):
    E, ids = read_embeddings(emb_path)
    return E, read_labels(labels_path, _IdIndex(ids))


class _IdIndex:
    """Minimal id -> row lookup with the same surface ``read_labels`` uses on a Graph."""

    def __init__(self, ids):
        self._index = {nid: i for i, nid in enumerate(ids)}
        self.node_count = len(ids)

    def index_of(self, nid):
        try:
            return self._index[nid]
        except KeyError:
            raise KeyError(nid) from None


def cmd_eval(args) -> int:
    E, labels = _labels_for_embeddings(resolve_data_path(args.embeddings), resolve_data_path(args.labels))
    if args.task == "classify":
        report = evaluate_classification(E, labels, args.ratios, args.repetitions, args.seed, args.reg)
    else:
        report = evaluate_clustering(E, labels, args.clusters, args.restarts, args.seed)
    report["embeddings"] = str(args.embeddings)
    report["labels"] = str(args.labels)
    _emit(report, args.report)
    return 0


def cmd_oracle(args) -> int:
    g, _, _ = _load_inputs(args)
    w = kwat_matrix(g, args.k, args.alpha)
    ids = [str(x) for x in g.node_ids]
    out = sys.stdout
    if args.row is not None or args.col is not None:
        node = g.index_of(args.row if args.row is not None else args.col)
        vec = forward_distribution(w, node) if args.row is not None else backward_distribution(w, node)
        for nid, x in zip(ids, vec):
            out.write(f"{nid}\t{x:.17g}\n")
        return 0
    out.write("\t" + "\t".join(ids) + "\n")
    for nid, row in zip(ids, w.values):
        out.write(nid + "\t" + "\t".join(f"{x:.17g}" for x in row) + "\n")
    return 0


def cmd_sweep(args) -> int:
    cast = SWEEPABLE[args.param]
    try:
        grid = [cast(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid value: {exc}") from None
    if not grid:
        raise UsageError("empty grid")
    g, features, labels = _load_inputs(args, need_labels=True)
    # validate every grid point before any training starts
    configs = [_train_config(args, features is not None, **{args.param: v}) for v in grid]
    rows = []
    for value, cfg in zip(grid, configs):
        logger.info("sweep %s=%s", args.param, value)
        emb = _estimator(cfg, args.concat_targets).fit_transform(g, features)
        row = {args.param: value}
        clus = evaluate_clustering(emb, labels, restarts=args.restarts, seed=cfg.seed)
        row.update(purity=clus["purity"], nmi=clus["nmi"], mcc=clus["mcc"])
        if args.classify:
            cls = evaluate_classification(emb, labels, args.ratios, args.repetitions, cfg.seed)
            row["classification"] = cls["results"]
        rows.append(row)
    print("\t".join([args.param, "purity", "nmi", "mcc"]))
    for r in rows:
        mcc = "nan" if r["mcc"] is None else f"{r['mcc']:.4f}"
        print(f"{r[args.param]}\t{r['purity']:.4f}\t{r['nmi']:.4f}\t{mcc}")
    report = {"task": "sweep", "param": args.param, "grid": grid,
              "configs": [dataclasses.asdict(c) for c in configs], "rows": rows}
    if args.report:
        _emit(report, args.report)
    return 0


def cmd_convert_linqs(args) -> int:
    bundle = load_linqs(args.content, args.cites)
    write_dataset(bundle, args.out)
    logger.info("wrote %s: %d nodes, %d citation records, %d classes, %d features",
                args.out, bundle.graph.node_count, bundle.edge_records,
                bundle.labels.n_classes, bundle.attributes.shape[1])
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "oracle": cmd_oracle, "sweep": cmd_sweep,
            "convert-linqs": cmd_convert_linqs}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FloatingPointError as exc:
        print(f"bigrw: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, OSError) as exc:
        print(f"bigrw: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, MemoryError) as exc:
        print(f"bigrw: invalid argument: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
