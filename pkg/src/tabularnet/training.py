"""Single- and multi-task training, evaluation, prediction and embedding export."""

from __future__ import annotations

import contextlib
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import lexgraph
from .encoder import EncoderConfig, FingerprintMismatch, ModelCheckpoint, TabularNet, adjacency_matrix
from .features import FeatureSchema, FileEmbedding, HashingEmbedding, TextEmbeddingProvider, extract_features
from .lexgraph import Lexicon, Taxonomy
from .metrics import MetricsReport, confusion_matrix
from .nn import autograd as ag
from .nn.optim import BETAS, EPS, LR, WEIGHT_DECAY, AdamW
from .table import CellRole, GridTable, RawTable, normalize

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    task: str = "cell"
    batch_size: int = 10
    max_epochs: int = 50
    patience: int = 8
    lr: float = LR
    betas: tuple[float, float] = BETAS
    eps: float = EPS
    weight_decay: float = WEIGHT_DECAY
    dropout: float = 0.3
    seed: int = 0
    deterministic: bool = True
    graph: str = "wordnet"
    eta: int = lexgraph.DEFAULT_ETA
    eps_depth: int = lexgraph.DEFAULT_EPS_DEPTH
    strict_depth: bool = False
    embed_dim: int = 64
    embeddings_file: str | None = None
    class_weighting: bool = False
    encoder: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("cell", "region", "multi"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValueError("batch_size and patience must be positive, max_epochs non-negative")
        if self.max_epochs and self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.graph not in lexgraph.GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.graph!r}")


# ---------------------------------------------------------------------------
# Inputs


@dataclass
class Example:
    table: GridTable
    features: np.ndarray
    adj: sp.csr_matrix
    cell_labels: np.ndarray  # (n_rows * n_cols,)
    row_labels: np.ndarray  # (n_rows,) 1 = top header
    col_labels: np.ndarray  # (n_cols,) 1 = left header


@dataclass
class InputPipeline:
    """Turns tables into model inputs: normalization, features, graph."""

    provider: TextEmbeddingProvider
    graph: str = "wordnet"
    taxonomy: Taxonomy | None = None
    lexicon: Lexicon | None = None
    eta: int = lexgraph.DEFAULT_ETA
    eps_depth: int = lexgraph.DEFAULT_EPS_DEPTH
    strict_depth: bool = False

    def __post_init__(self):
        if self.graph == "wordnet" and self.taxonomy is None:
            self.taxonomy = lexgraph.demo_taxonomy()
            self.lexicon = lexgraph.demo_lexicon(self.taxonomy)

    @property
    def fingerprint(self) -> str:
        return FeatureSchema.for_provider(self.provider).fingerprint()

    def build_graph(self, grid: GridTable) -> lexgraph.CellGraph:
        return lexgraph.build_graph(self.graph, grid, self.taxonomy, self.lexicon, self.eta,
                                    self.eps_depth, self.strict_depth)

    def prepare(self, table: RawTable | GridTable) -> Example:
        grid = normalize(table) if isinstance(table, RawTable) else table
        fm = extract_features(grid, self.provider)
        labels = np.array(grid.labels(), dtype=np.int64).reshape(-1)
        rows = np.zeros(grid.n_rows, dtype=np.int64)
        rows[list(grid.header_rows)] = 1
        cols = np.zeros(grid.n_cols, dtype=np.int64)
        cols[list(grid.header_cols)] = 1
        return Example(grid, fm.values, adjacency_matrix(self.build_graph(grid)), labels, rows, cols)

    def prepare_all(self, tables: Iterable[RawTable | GridTable]) -> list[Example]:
        return [self.prepare(t) for t in tables]

    def settings(self) -> dict:
        out = {
            "graph": self.graph, "eta": self.eta, "eps_depth": self.eps_depth,
            "strict_depth": self.strict_depth, "provider": self.provider.describe(),
        }
        if self.graph == "wordnet":
            out["taxonomy"] = sorted(self.taxonomy.parent.items())
            out["lexicon"] = {w: list(n) for w, n in sorted(self.lexicon.synsets.items())}
        return out

    @classmethod
    def from_settings(cls, settings: dict, embeddings_file: str | None = None) -> "InputPipeline":
        desc = settings["provider"]
        if embeddings_file is not None:
            provider = FileEmbedding(embeddings_file)
        elif desc["name"] == FileEmbedding.name:
            provider = FileEmbedding(desc["path"])
        else:
            provider = HashingEmbedding(desc["dim"])
        taxonomy = lexicon = None
        if settings["graph"] == "wordnet":
            taxonomy = Taxonomy.from_edges(tuple(e) for e in settings["taxonomy"])
            lexicon = Lexicon({w: tuple(n) for w, n in settings["lexicon"].items()}).validate(taxonomy)
        return cls(provider, settings["graph"], taxonomy, lexicon, settings["eta"],
                   settings["eps_depth"], settings["strict_depth"])


def pipeline_for(cfg: TrainConfig, taxonomy: Taxonomy | None = None,
                 lexicon: Lexicon | None = None) -> InputPipeline:
    provider = FileEmbedding(cfg.embeddings_file) if cfg.embeddings_file else HashingEmbedding(cfg.embed_dim)
    return InputPipeline(provider, cfg.graph, taxonomy, lexicon, cfg.eta, cfg.eps_depth, cfg.strict_depth)


# ---------------------------------------------------------------------------
# Losses


def table_loss(model: TabularNet, ex: Example, training: bool = False, rng=None,
               class_weights: np.ndarray | None = None) -> ag.Tensor:
    """Per-table NLL; the multi-task loss is the plain sum of the cell, row and column terms."""
    emb = model.encode(ex.features, ex.adj, training, rng)
    terms = []
    if model.has_cell_head:
        lp = model.cell_head_forward(emb, training, rng)
        terms.append(ag.nll_loss(ag.reshape(lp, (-1, lp.shape[-1])), ex.cell_labels, class_weights))
    if model.has_region_head:
        row_lp, col_lp = model.region_head_forward(emb, training, rng)
        terms.append(ag.nll_loss(row_lp, ex.row_labels))
        terms.append(ag.nll_loss(col_lp, ex.col_labels))
    loss = terms[0]
    for t in terms[1:]:
        loss = ag.add(loss, t)
    return loss


def inverse_frequency_weights(examples: Sequence[Example]) -> np.ndarray:
    counts = np.bincount(np.concatenate([ex.cell_labels for ex in examples]), minlength=len(CellRole))
    present = counts > 0
    weights = np.zeros(len(CellRole))
    weights[present] = counts.sum() / (present.sum() * counts[present])
    return weights


# ---------------------------------------------------------------------------
# Evaluation


def _blas_single_thread(enabled: bool):
    if not enabled:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1)


def evaluate_examples(model: TabularNet, examples: Sequence[Example]) -> MetricsReport:
    cell_true, cell_pred, row_true, row_pred, col_true, col_pred = [], [], [], [], [], []
    for ex in examples:
        emb = model.encode(ex.features, ex.adj)
        if model.has_cell_head:
            cell_true.append(ex.cell_labels)
            cell_pred.append(model.cell_head_forward(emb).data.argmax(axis=-1).reshape(-1))
        if model.has_region_head:
            row_lp, col_lp = model.region_head_forward(emb)
            row_true.append(ex.row_labels)
            row_pred.append(row_lp.data.argmax(axis=-1))
            col_true.append(ex.col_labels)
            col_pred.append(col_lp.data.argmax(axis=-1))
    report = MetricsReport()
    if model.has_cell_head:
        report.cell_confusion = confusion_matrix(np.concatenate(cell_true), np.concatenate(cell_pred),
                                                 len(CellRole))
    if model.has_region_head:
        report.row_confusion = confusion_matrix(np.concatenate(row_true), np.concatenate(row_pred), 2)
        report.col_confusion = confusion_matrix(np.concatenate(col_true), np.concatenate(col_pred), 2)
    return report


def _checked_pipeline(checkpoint: ModelCheckpoint, embeddings_file: str | None) -> InputPipeline:
    pipeline = InputPipeline.from_settings(checkpoint.settings, embeddings_file)
    if pipeline.fingerprint != checkpoint.fingerprint:
        raise FingerprintMismatch(
            f"feature schema {pipeline.fingerprint} does not match checkpoint {checkpoint.fingerprint}"
        )
    return pipeline


def evaluate(checkpoint: ModelCheckpoint, tables: Sequence[RawTable | GridTable],
             embeddings_file: str | None = None) -> MetricsReport:
    """Dropout-free evaluation; the checkpoint is not modified."""
    pipeline = _checked_pipeline(checkpoint, embeddings_file)
    return evaluate_examples(checkpoint.model, pipeline.prepare_all(tables))


@dataclass
class Prediction:
    table_id: str
    roles: list[list[CellRole]] | None
    header_rows: list[int] | None
    header_cols: list[int] | None

    def to_dict(self) -> dict:
        out = {"id": self.table_id}
        if self.roles is not None:
            out["roles"] = [[r.key for r in row] for row in self.roles]
        if self.header_rows is not None:
            out["header_rows"] = self.header_rows
            out["header_cols"] = self.header_cols
        return out


def predict_example(model: TabularNet, ex: Example) -> Prediction:
    emb = model.encode(ex.features, ex.adj)
    roles = header_rows = header_cols = None
    if model.has_cell_head:
        idx = model.cell_head_forward(emb).data.argmax(axis=-1)
        roles = [[CellRole(int(k)) for k in row] for row in idx]
    if model.has_region_head:
        row_lp, col_lp = model.region_head_forward(emb)
        header_rows = [int(i) for i in np.flatnonzero(row_lp.data.argmax(axis=-1) == 1)]
        header_cols = [int(j) for j in np.flatnonzero(col_lp.data.argmax(axis=-1) == 1)]
    return Prediction(ex.table.id, roles, header_rows, header_cols)


def predict(checkpoint: ModelCheckpoint, table: RawTable | GridTable,
            embeddings_file: str | None = None) -> Prediction:
    pipeline = _checked_pipeline(checkpoint, embeddings_file)
    return predict_example(checkpoint.model, pipeline.prepare(table))


def export_embeddings(checkpoint: ModelCheckpoint, tables: Sequence[RawTable | GridTable],
                      path: str | Path, embeddings_file: str | None = None) -> int:
    """Write one tab-separated record per cell: id, row, col, gold, predicted, vector.

    Returns the number of records written.
    """
    pipeline = _checked_pipeline(checkpoint, embeddings_file)
    model = checkpoint.model
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("table_id\trow\tcol\tgold\tpredicted\tembedding\n")
        for table in tables:
            ex = pipeline.prepare(table)
            emb = model.encode(ex.features, ex.adj)
            pred = model.cell_head_forward(emb).data.argmax(axis=-1) if model.has_cell_head else None
            h = emb.h.data
            for r, c in ex.table.positions():
                gold = ex.table[r, c].label.key
                guess = CellRole(int(pred[r, c])).key if pred is not None else "-"
                vec = ",".join(repr(float(v)) for v in h[r, c])
                fh.write(f"{ex.table.id}\t{r}\t{c}\t{gold}\t{guess}\t{vec}\n")
                n += 1
    return n


# ---------------------------------------------------------------------------
# Training


def train_examples(cfg: TrainConfig, train_set: Sequence[Example], val_set: Sequence[Example],
                   pipeline: InputPipeline, log_every: int = 1) -> tuple[ModelCheckpoint, MetricsReport]:
    if not train_set:
        raise ValueError("training set is empty")
    enc = EncoderConfig(input_dim=train_set[0].features.shape[-1], dropout=cfg.dropout, **cfg.encoder)
    model = TabularNet(enc, cfg.task, cfg.seed)
    params = model.parameters()
    opt = AdamW(params, cfg.lr, cfg.betas, cfg.eps, cfg.weight_decay)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    dropout_rng = np.random.default_rng([cfg.seed, 2])
    weights = inverse_frequency_weights(train_set) if cfg.class_weighting else None
    if not val_set and cfg.max_epochs:
        logger.warning("validation set is empty; early stopping disabled")

    history: list[dict] = []
    best_score = -math.inf
    best_state = model.state_dict()
    best_report = MetricsReport()
    stale = 0
    with _blas_single_thread(cfg.deterministic):
        for epoch in range(1, cfg.max_epochs + 1):
            start = time.perf_counter()
            order = shuffle_rng.permutation(len(train_set))
            losses = []
            for b0 in range(0, len(order), cfg.batch_size):
                batch = order[b0 : b0 + cfg.batch_size]
                total = {p: np.zeros_like(p.data) for p in params}
                for i in batch:
                    with ag.Tape() as tape:
                        loss = table_loss(model, train_set[i], True, dropout_rng, weights)
                    value = float(loss.data)
                    if not math.isfinite(value):
                        raise TrainingDiverged(
                            f"non-finite loss {value} at epoch {epoch}, table {train_set[i].table.id}"
                        )
                    losses.append(value)
                    for p, g in ag.backward(tape, loss, params).items():
                        total[p] += g
                opt.step({p: g / len(batch) for p, g in total.items()})
            entry = {"epoch": epoch, "train_loss": float(np.mean(losses))}
            if val_set:
                report = evaluate_examples(model, val_set)
                score = report.selection_score()
                entry["val_score"] = score
                if score > best_score:
                    best_score, best_state, best_report, stale = score, model.state_dict(), report, 0
                else:
                    stale += 1
            else:
                best_state = model.state_dict()
            history.append(entry)
            if log_every and epoch % log_every == 0:
                # wall time stays out of the history so reports are reproducible byte for byte
                logger.info("epoch %d: %s (%.1fs)", epoch, entry, time.perf_counter() - start)
            if val_set and stale >= cfg.patience:
                logger.info("early stop at epoch %d (best %.4f)", epoch, best_score)
                break
    model.load_state_dict(best_state)
    settings = pipeline.settings()
    settings["train_config"] = {k: v for k, v in asdict(cfg).items()}
    best_report.history = history
    return ModelCheckpoint(model, pipeline.fingerprint, settings), best_report


def train(cfg: TrainConfig, train_tables: Sequence[RawTable | GridTable],
          val_tables: Sequence[RawTable | GridTable] = (), taxonomy: Taxonomy | None = None,
          lexicon: Lexicon | None = None) -> tuple[ModelCheckpoint, MetricsReport]:
    """Train on ``train_tables``; the returned checkpoint is the best on ``val_tables``."""
    pipeline = pipeline_for(cfg, taxonomy, lexicon)
    return train_examples(cfg, pipeline.prepare_all(train_tables), pipeline.prepare_all(val_tables), pipeline)
