"""Structure information mining layers (row/column Bi-GRU, pooling, GIN) and task heads."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .lexgraph import CellGraph
from .nn import autograd as ag
from .nn.autograd import Parameter, Tensor
from .nn.layers import MLP, BiGRU, Linear, Module
from .nn.serialize import load_archive, save_archive
from .table import CellRole

N_ROLES = len(CellRole)
TASKS = ("cell", "region", "multi")


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    gru_hidden: int = 128
    gru_layers: int = 3
    fusion_dim: int = 128
    pool_dim: int = 128
    gin_hidden: int = 128
    gin_layers: int = 2
    n_layers: int = 1
    head_hidden: int = 128
    dropout: float = 0.3
    use_bigru: bool = True
    use_gin: bool = True

    def __post_init__(self):
        for f in ("input_dim", "gru_hidden", "gru_layers", "fusion_dim", "pool_dim", "gin_hidden",
                  "gin_layers", "n_layers", "head_hidden"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def spatial_width(self) -> int:
        return (2 * self.fusion_dim if self.use_bigru else 0) + 2 * self.pool_dim

    @property
    def output_width(self) -> int:
        return self.spatial_width + (self.gin_hidden if self.use_gin else 0)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class CellEmbeddings:
    """Per-cell outputs of one structure layer. ``h_g`` / ``h_rel`` are None when ablated."""

    h_g: Tensor | None
    r: Tensor  # (n_rows, pool_dim)
    c: Tensor  # (n_cols, pool_dim)
    h_s: Tensor
    h_rel: Tensor | None
    h: Tensor  # (n_rows, n_cols, output_width)


def adjacency_matrix(graph: CellGraph) -> sp.csr_matrix:
    """Sparse (N, N) matrix with entry [v, u] = 1 when u sends to v; cells indexed row-major."""
    n = graph.n_rows * graph.n_cols
    rows, cols = [], []
    for (r1, c1), (r2, c2) in graph.edges:
        u, v = r1 * graph.n_cols + c1, r2 * graph.n_cols + c2
        rows.append(v)
        cols.append(u)
        if not graph.directed:
            rows.append(u)
            cols.append(v)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


class StructureLayer(Module):
    _parts = ("row_gru", "col_gru", "fuse_row", "fuse_col", "pool", "gin_in", "gin_out", "gin_eps")

    def __init__(self, name: str, n_in: int, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.n_in = n_in
        if cfg.use_bigru:
            self.row_gru = BiGRU(f"{name}.row_gru", n_in, cfg.gru_hidden, cfg.gru_layers, rng)
            self.col_gru = BiGRU(f"{name}.col_gru", n_in, cfg.gru_hidden, cfg.gru_layers, rng)
            self.fuse_row = Linear(f"{name}.fuse_row", 2 * cfg.gru_hidden, cfg.fusion_dim, rng)
            self.fuse_col = Linear(f"{name}.fuse_col", 2 * cfg.gru_hidden, cfg.fusion_dim, rng)
        else:
            self.row_gru = self.col_gru = self.fuse_row = self.fuse_col = None
        self.pool = MLP(f"{name}.pool", [n_in, cfg.pool_dim], rng, dropout=cfg.dropout)
        if cfg.use_gin:
            self.gin_in = MLP(f"{name}.gin_in", [n_in, cfg.gin_hidden], rng, dropout=cfg.dropout)
            self.gin_out = [
                MLP(f"{name}.gin{k}", [cfg.gin_hidden] * 3, rng, dropout=cfg.dropout)
                for k in range(cfg.gin_layers)
            ]
            self.gin_eps = [Parameter(f"{name}.gin{k}.eps", 0.0) for k in range(cfg.gin_layers)]
        else:
            self.gin_in, self.gin_out, self.gin_eps = None, [], []

    def spatial_encode(self, x: Tensor, training: bool = False, rng=None):
        """Return ``(h_g, r, c, h_s)`` for features ``x`` of shape (n_rows, n_cols, d)."""
        x = ag.as_tensor(x)
        n_rows, n_cols, _ = x.shape
        parts = []
        h_g = None
        if self.cfg.use_bigru:
            left, right = self.row_gru(x)  # rows are sequences over columns
            top, bottom = self.col_gru(ag.transpose(x, (1, 0, 2)))
            top = ag.transpose(top, (1, 0, 2))
            bottom = ag.transpose(bottom, (1, 0, 2))
            h_row = ag.relu(self.fuse_row(ag.concat([left, right])))
            h_col = ag.relu(self.fuse_col(ag.concat([bottom, top])))
            h_g = ag.concat([h_row, h_col])
            parts.append(h_g)
        pooled = self.pool(x, training, rng)
        r = ag.mean(pooled, axis=1)
        c = ag.mean(pooled, axis=0)
        width = pooled.shape[-1]
        parts.append(ag.broadcast_to(ag.reshape(r, (n_rows, 1, width)), (n_rows, n_cols, width)))
        parts.append(ag.broadcast_to(ag.reshape(c, (1, n_cols, width)), (n_rows, n_cols, width)))
        return h_g, r, c, ag.concat(parts)

    def relational_encode(self, x: Tensor, adj: sp.csr_matrix, training: bool = False, rng=None) -> Tensor:
        """GIN over the cell graph: h0 = MLP_e(x), h_{l+1} = MLP_o((1 + eps) h_l + sum of neighbours)."""
        x = ag.as_tensor(x)
        n_rows, n_cols, d = x.shape
        n = n_rows * n_cols
        if adj.shape != (n, n):
            raise ValueError(f"adjacency {adj.shape} does not match a {n_rows}x{n_cols} table")
        h = self.gin_in(ag.reshape(x, (n, d)), training, rng)
        for mlp, eps in zip(self.gin_out, self.gin_eps):
            agg = ag.add(ag.mul(ag.add(1.0, eps), h), ag.spmm(adj, h))
            h = mlp(agg, training, rng)
        return ag.reshape(h, (n_rows, n_cols, h.shape[-1]))

    def __call__(self, x: Tensor, adj: sp.csr_matrix, training: bool = False, rng=None) -> CellEmbeddings:
        h_g, r, c, h_s = self.spatial_encode(x, training, rng)
        h_rel = None
        h = h_s
        if self.cfg.use_gin:
            h_rel = self.relational_encode(x, adj, training, rng)
            h = ag.concat([h_s, h_rel])
        return CellEmbeddings(h_g, r, c, h_s, h_rel, h)


def integrate_rows_cols(emb: CellEmbeddings) -> tuple[Tensor, Tensor]:
    """Mean-pool cell embeddings into row (n_rows, W) and column (n_cols, W) embeddings."""
    return ag.mean(emb.h, axis=1), ag.mean(emb.h, axis=0)


class TabularNet(Module):
    _parts = ("layers", "cell_head", "row_head", "col_head")

    def __init__(self, cfg: EncoderConfig, task: str = "cell", seed: int = 0):
        if task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        self.cfg = cfg
        self.task = task
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.layers = []
        width = cfg.input_dim
        for k in range(cfg.n_layers):
            self.layers.append(StructureLayer(f"layer{k}", width, cfg, rng))
            width = cfg.output_width
        head = [width, cfg.head_hidden, cfg.head_hidden]
        self.cell_head = self.row_head = self.col_head = None
        if task in ("cell", "multi"):
            self.cell_head = MLP("cell_head", head + [N_ROLES], rng, final_relu=False, dropout=cfg.dropout)
        if task in ("region", "multi"):
            self.row_head = MLP("row_head", head + [2], rng, final_relu=False, dropout=cfg.dropout)
            self.col_head = MLP("col_head", head + [2], rng, final_relu=False, dropout=cfg.dropout)
        names = [p.name for p in self.parameters()]
        assert len(names) == len(set(names)), "parameter names must be unique"

    @property
    def has_cell_head(self) -> bool:
        return self.cell_head is not None

    @property
    def has_region_head(self) -> bool:
        return self.row_head is not None

    def encode(self, x, adj: sp.csr_matrix, training: bool = False, rng=None) -> CellEmbeddings:
        h = ag.as_tensor(x)
        emb = None
        for layer in self.layers:
            emb = layer(h, adj, training, rng)
            h = emb.h
        return emb

    def cell_head_forward(self, emb: CellEmbeddings, training: bool = False, rng=None) -> Tensor:
        """Log-probabilities over the five roles, shape (n_rows, n_cols, 5)."""
        return ag.log_softmax(self.cell_head(emb.h, training, rng))

    def region_head_forward(self, emb: CellEmbeddings, training: bool = False, rng=None) -> tuple[Tensor, Tensor]:
        """Header/non-header log-probabilities per row (n_rows, 2) and column (n_cols, 2).

        Class 1 is "header".
        """
        rows, cols = integrate_rows_cols(emb)
        return (ag.log_softmax(self.row_head(rows, training, rng)),
                ag.log_softmax(self.col_head(cols, training, rng)))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.parameters()}
        if set(params) != set(state):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ValueError(f"state mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data[...] = state[name]


# ---------------------------------------------------------------------------
# Checkpoints


class FingerprintMismatch(ValueError):
    pass


@dataclass
class ModelCheckpoint:
    model: TabularNet
    fingerprint: str
    settings: dict  # graph / embedding / training settings needed to rebuild inputs

    def save(self, path: str | Path) -> None:
        meta = {
            "encoder": asdict(self.model.cfg),
            "task": self.model.task,
            "seed": self.model.seed,
            "feature_fingerprint": self.fingerprint,
            "settings": self.settings,
            "parameters": {p.name: list(p.shape) for p in self.model.parameters()},
        }
        save_archive(path, self.model.state_dict(), meta)

    @classmethod
    def load(cls, path: str | Path, expected_fingerprint: str | None = None) -> "ModelCheckpoint":
        arrays, meta = load_archive(path)
        if expected_fingerprint is not None and meta["feature_fingerprint"] != expected_fingerprint:
            raise FingerprintMismatch(
                f"{path}: feature schema {meta['feature_fingerprint']} != expected {expected_fingerprint}"
            )
        model = TabularNet(EncoderConfig.from_dict(meta["encoder"]), meta["task"], meta["seed"])
        model.load_state_dict(arrays)
        return cls(model, meta["feature_fingerprint"], meta["settings"])
