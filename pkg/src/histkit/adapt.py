"""Linear adapter training over frozen base embeddings.

The adapter is an affine map (W, b) initialized to the identity, trained
either with an in-batch contrastive ranking objective (softmax cross-entropy
over scaled cosine similarities, diagonal positives) or by matching a frozen
teacher's vectors under mean squared error. Data mixing follows three
strategies: historical pairs only, modern pairs only, or a shuffled union so
individual batches draw from both sources.

All math runs in float64 and single-threaded batch order, so training is
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedstore import EmbeddingMatrix

STRATEGIES = ("hist", "modern", "mixed")
OBJECTIVES = ("contrastive", "distill")


class AdaptError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss} at step {step}")
        self.step = step


@dataclass
class AdapterModel:
    """Affine map over frozen base embeddings; identity weights are a no-op."""

    W: np.ndarray  # (dim, dim) float64
    b: np.ndarray  # (dim,) float64
    objective: str = "contrastive"
    trained_on: dict = field(default_factory=dict)
    seed: int = 0
    scale: float = 20.0
    learning_rate: float = 2e-5

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise AdaptError(f"W must be square, got {self.W.shape}")
        if self.b.shape != (self.W.shape[0],):
            raise AdaptError(f"b shape {self.b.shape} does not match W {self.W.shape}")

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @classmethod
    def identity(cls, dim: int, **kwargs) -> "AdapterModel":
        return cls(W=np.eye(dim), b=np.zeros(dim), **kwargs)

    def save(self, path: str | Path) -> None:
        header = {
            "format": "hxad",
            "version": 1,
            "dim": self.dim,
            "objective": self.objective,
            "trained_on": self.trained_on,
            "seed": self.seed,
            "scale": self.scale,
            "learning_rate": self.learning_rate,
            "dtype": "<f8",
            "W": base64.b64encode(np.ascontiguousarray(self.W, dtype="<f8").tobytes()).decode("ascii"),
            "b": base64.b64encode(np.ascontiguousarray(self.b, dtype="<f8").tobytes()).decode("ascii"),
        }
        Path(path).write_text(json.dumps(header), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AdapterModel":
        try:
            header = json.loads(Path(path).read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise AdaptError(f"not an adapter file: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != "hxad":
            raise AdaptError("not an adapter file (missing hxad header)")
        if header.get("version") != 1:
            raise AdaptError(f"unsupported adapter version {header.get('version')}")
        try:
            dim = int(header["dim"])
            W = np.frombuffer(base64.b64decode(header["W"]), dtype="<f8").reshape(dim, dim)
            b = np.frombuffer(base64.b64decode(header["b"]), dtype="<f8").reshape(dim)
        except (KeyError, ValueError) as exc:
            raise AdaptError(f"corrupt adapter payload: {exc}") from exc
        return cls(
            W=W.copy(),
            b=b.copy(),
            objective=header.get("objective", "contrastive"),
            trained_on=header.get("trained_on", {}),
            seed=int(header.get("seed", 0)),
            scale=float(header.get("scale", 20.0)),
            learning_rate=float(header.get("learning_rate", 2e-5)),
        )


def apply_adapter(model: AdapterModel, x: np.ndarray) -> np.ndarray:
    """W x + b; accepts a single vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise AdaptError(f"input dim {x.shape[-1]} does not match adapter dim {model.dim}")
    return x @ model.W.T + model.b


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "contrastive"
    strategy: str = "hist"
    batch_size: int = 8
    epochs: int | None = None  # default: 1 contrastive, 5 distill
    learning_rate: float = 2e-5
    scale: float = 20.0
    seed: int = 0
    symmetric: bool = False  # also adapt the target side under the contrastive loss
    distill_both_sides: bool = True  # distill_bidirectional's second MSE term
    oversample_to_balance: bool = False  # mixed: resample the smaller pool up to the larger

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise AdaptError(f"unknown objective {self.objective!r}")
        if self.strategy not in STRATEGIES:
            raise AdaptError(f"unknown strategy {self.strategy!r}")
        if self.objective == "contrastive" and self.batch_size < 2:
            raise AdaptError("contrastive training needs batch_size >= 2 for in-batch negatives")
        if self.batch_size < 1:
            raise AdaptError("batch_size must be >= 1")

    @property
    def effective_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 1 if self.objective == "contrastive" else 5


@dataclass(frozen=True)
class MixedBatchPlan:
    """Ordered batches of (pair_id, source_tag) per epoch."""

    epochs: tuple[tuple[tuple[tuple[str, str], ...], ...], ...]

    def epoch(self, e: int) -> tuple[tuple[tuple[str, str], ...], ...]:
        return self.epochs[e]

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)


def plan_batches(
    hist_pairs: Sequence[str],
    modern_pairs: Sequence[str],
    cfg: TrainConfig,
) -> MixedBatchPlan:
    """Shuffle the strategy's pool into batches, one pass per epoch.

    hist/modern use their own pool only; mixed shuffles the tagged union so
    a batch may contain both sources. Every pair appears exactly once per
    epoch (unless oversample_to_balance duplicates the smaller mixed pool).
    Deterministic per cfg.seed.
    """
    hist = [(pid, "hist") for pid in hist_pairs]
    modern = [(pid, "modern") for pid in modern_pairs]
    if cfg.strategy == "hist":
        if not hist:
            raise AdaptError("strategy 'hist' requires a nonempty hist dataset")
        pool = hist
    elif cfg.strategy == "modern":
        if not modern:
            raise AdaptError("strategy 'modern' requires a nonempty modern dataset")
        pool = modern
    else:
        if not hist or not modern:
            raise AdaptError("strategy 'mixed' requires both datasets nonempty")
        if cfg.oversample_to_balance and len(hist) != len(modern):
            rng_bal = np.random.default_rng(cfg.seed + 1)
            small, large = (hist, modern) if len(hist) < len(modern) else (modern, hist)
            extra = [small[i] for i in rng_bal.integers(0, len(small), size=len(large) - len(small))]
            pool = hist + modern + extra
        else:
            pool = hist + modern

    rng = np.random.default_rng(cfg.seed)
    epochs = []
    for _ in range(cfg.effective_epochs):
        order = rng.permutation(len(pool))
        shuffled = [pool[i] for i in order]
        batches = tuple(
            tuple(shuffled[i : i + cfg.batch_size]) for i in range(0, len(shuffled), cfg.batch_size)
        )
        epochs.append(batches)
    return MixedBatchPlan(epochs=tuple(epochs))


def _softmax_rows(S: np.ndarray) -> np.ndarray:
    shifted = S - S.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _mnrl_full(A: np.ndarray, B: np.ndarray, scale: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus gradients with respect to both input batches."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape != B.shape:
        raise AdaptError(f"batch shapes must match, got {A.shape} and {B.shape}")
    n = A.shape[0]
    if n < 2:
        raise AdaptError("in-batch negatives need n >= 2")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise AdaptError("zero vectors have no cosine similarity")
    Ahat = A / na[:, None]
    Bhat = B / nb[:, None]
    C = Ahat @ Bhat.T
    S = scale * C
    # loss = mean_i( logsumexp(S_i) - S_ii )
    row_max = S.max(axis=1)
    lse = row_max + np.log(np.exp(S - row_max[:, None]).sum(axis=1))
    loss = float(np.mean(lse - np.diag(S)))
    P = _softmax_rows(S)
    G = (P - np.eye(n)) / n  # dL/dS
    # d cos(a_i, b_j) / d a_i = b̂_j / ||a_i|| - C_ij â_i / ||a_i||
    coef_a = np.einsum("ij,ij->i", G, C)
    grad_A = (scale / na)[:, None] * (G @ Bhat - coef_a[:, None] * Ahat)
    coef_b = np.einsum("ij,ij->j", G, C)
    grad_B = (scale / nb)[:, None] * (G.T @ Ahat - coef_b[:, None] * Bhat)
    return loss, grad_A, grad_B


def mnrl_loss(A: np.ndarray, B: np.ndarray, scale: float = 20.0) -> tuple[float, np.ndarray]:
    """In-batch ranking loss over scaled cosine similarities.

    loss = -(1/n) sum_i log softmax_j(scale * cos(A_i, B_j))[j=i]; the
    returned gradients are with respect to the rows of A (B held constant).
    """
    loss, grad_A, _ = _mnrl_full(A, B, scale)
    return loss, grad_A


def distill_loss(S: np.ndarray, T: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error against frozen teacher vectors, with gradients wrt S."""
    S = np.asarray(S, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if S.shape != T.shape:
        raise AdaptError(f"shape mismatch: {S.shape} vs {T.shape}")
    if S.ndim == 1:
        S = S[None, :]
        T = T[None, :]
    n, dim = S.shape
    diff = S - T
    loss = float(np.sum(diff * diff) / (n * dim))
    grad = 2.0 * diff / (n * dim)
    return loss, grad


class _Adam:
    """Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8) for one ndarray."""

    def __init__(self, shape, lr: float):
        self.lr = lr
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        param -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _check_aligned(a: EmbeddingMatrix, b: EmbeddingMatrix, what: str) -> None:
    if a.dim != b.dim:
        raise AdaptError(f"{what}: embedding dims differ ({a.dim} vs {b.dim})")


def _resolve_pools(
    base_src: EmbeddingMatrix,
    cfg: TrainConfig,
    hist_ids: Sequence[str] | None,
    modern_ids: Sequence[str] | None,
) -> tuple[list[str], list[str]]:
    if hist_ids is None and modern_ids is None:
        if cfg.strategy != "hist":
            raise AdaptError(f"strategy {cfg.strategy!r} needs explicit hist/modern id pools")
        hist_ids = list(base_src.ids)
    return list(hist_ids or []), list(modern_ids or [])


def train(
    base_src: EmbeddingMatrix,
    tgt: EmbeddingMatrix,
    cfg: TrainConfig,
    hist_ids: Sequence[str] | None = None,
    modern_ids: Sequence[str] | None = None,
) -> tuple[AdapterModel, list[float]]:
    """Fit the adapter with Adam over planned batches; returns per-step losses.

    Pairs are keyed by id into both matrices. W starts as the identity and b
    as zero, so a zero learning rate returns the identity adapter. With
    objective 'distill', ``tgt`` holds the frozen teacher vectors.
    """
    _check_aligned(base_src, tgt, "train")
    hist_pool, modern_pool = _resolve_pools(base_src, cfg, hist_ids, modern_ids)
    plan = plan_batches(hist_pool, modern_pool, cfg)

    dim = base_src.dim
    W = np.eye(dim)
    b = np.zeros(dim)
    opt_w = _Adam((dim, dim), cfg.learning_rate)
    opt_b = _Adam((dim,), cfg.learning_rate)
    history: list[float] = []
    step = 0
    for e in range(plan.n_epochs):
        for batch in plan.epoch(e):
            if cfg.objective == "contrastive" and len(batch) < 2:
                continue  # leftover single-pair batch has no in-batch negatives
            ids = [pid for pid, _ in batch]
            X = np.stack([base_src.row(pid) for pid in ids]).astype(np.float64)
            Y = np.stack([tgt.row(pid) for pid in ids]).astype(np.float64)
            A = X @ W.T + b
            if cfg.objective == "contrastive":
                if cfg.symmetric:
                    B = Y @ W.T + b
                    loss, gA, gB = _mnrl_full(A, B, cfg.scale)
                    gW = gA.T @ X + gB.T @ Y
                    gb = gA.sum(axis=0) + gB.sum(axis=0)
                else:
                    loss, gA = mnrl_loss(A, Y, cfg.scale)
                    gW = gA.T @ X
                    gb = gA.sum(axis=0)
            else:
                loss, gA = distill_loss(A, Y)
                gW = gA.T @ X
                gb = gA.sum(axis=0)
            if not np.isfinite(loss):
                raise TrainingDiverged(step, loss)
            opt_w.step(W, gW)
            opt_b.step(b, gb)
            history.append(loss)
            step += 1

    model = AdapterModel(
        W=W,
        b=b,
        objective=cfg.objective,
        trained_on={
            "strategy": cfg.strategy,
            "hist_pairs": len(hist_pool),
            "modern_pairs": len(modern_pool),
            "epochs": plan.n_epochs,
            "batch_size": cfg.batch_size,
        },
        seed=cfg.seed,
        scale=cfg.scale,
        learning_rate=cfg.learning_rate,
    )
    return model, history


def distill_bidirectional(
    base_src: EmbeddingMatrix,
    base_tgt: EmbeddingMatrix,
    teacher_tgt: EmbeddingMatrix,
    cfg: TrainConfig,
    hist_ids: Sequence[str] | None = None,
    modern_ids: Sequence[str] | None = None,
) -> tuple[AdapterModel, list[float]]:
    """Distill both bitext sides onto the frozen teacher.

    loss = MSE(adapter(src), teacher) + MSE(adapter(tgt), teacher); with
    cfg.distill_both_sides False the second term is dropped, reproducing
    train() under the distill objective.
    """
    if cfg.objective != "distill":
        cfg = replace(cfg, objective="distill")
    if not cfg.distill_both_sides:
        return train(base_src, teacher_tgt, cfg, hist_ids=hist_ids, modern_ids=modern_ids)

    _check_aligned(base_src, teacher_tgt, "distill_bidirectional")
    _check_aligned(base_tgt, teacher_tgt, "distill_bidirectional")
    hist_pool, modern_pool = _resolve_pools(base_src, cfg, hist_ids, modern_ids)
    plan = plan_batches(hist_pool, modern_pool, cfg)

    dim = base_src.dim
    W = np.eye(dim)
    b = np.zeros(dim)
    opt_w = _Adam((dim, dim), cfg.learning_rate)
    opt_b = _Adam((dim,), cfg.learning_rate)
    history: list[float] = []
    step = 0
    for e in range(plan.n_epochs):
        for batch in plan.epoch(e):
            ids = [pid for pid, _ in batch]
            Xs = np.stack([base_src.row(pid) for pid in ids]).astype(np.float64)
            Xt = np.stack([base_tgt.row(pid) for pid in ids]).astype(np.float64)
            T = np.stack([teacher_tgt.row(pid) for pid in ids]).astype(np.float64)
            loss_s, g_s = distill_loss(Xs @ W.T + b, T)
            loss_t, g_t = distill_loss(Xt @ W.T + b, T)
            loss = loss_s + loss_t
            if not np.isfinite(loss):
                raise TrainingDiverged(step, loss)
            gW = g_s.T @ Xs + g_t.T @ Xt
            gb = g_s.sum(axis=0) + g_t.sum(axis=0)
            opt_w.step(W, gW)
            opt_b.step(b, gb)
            history.append(loss)
            step += 1

    model = AdapterModel(
        W=W,
        b=b,
        objective="distill",
        trained_on={
            "strategy": cfg.strategy,
            "hist_pairs": len(hist_pool),
            "modern_pairs": len(modern_pool),
            "epochs": plan.n_epochs,
            "batch_size": cfg.batch_size,
            "both_sides": True,
        },
        seed=cfg.seed,
        scale=cfg.scale,
        learning_rate=cfg.learning_rate,
    )
    return model, history
