"""Feedforward ReLU network trained with Adam on normalized targets.

All parameters live in one flat float64 buffer; per-layer weight matrices
and bias vectors are views into it, so an Adam step is a few vector ops.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, split
from .numerics import make_rng

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = (64, 64, 64)


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch, self.batch, self.loss = epoch, batch, loss
        super().__init__(f"loss became {loss} at epoch {epoch}, batch {batch}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.epochs >= 1 and self.batch_size >= 1):
            raise ValueError("learning_rate > 0, epochs >= 1 and batch_size >= 1 required")


class MlpModel:
    """ReLU on hidden layers, identity on the output layer."""

    hidden_activation = "relu"
    output_activation = "linear"

    def __init__(self, dims: Sequence[int], params: np.ndarray | None = None, seed: int = 0):
        self.dims = [int(d) for d in dims]
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise ValueError(f"bad layer dims {self.dims}")
        self.seed = seed
        sizes = [(o, i) for i, o in zip(self.dims[:-1], self.dims[1:])]
        total = sum(o * i + o for o, i in sizes)
        if params is None:
            params = self._init_params(sizes, total, seed)
        self.params = np.array(params, dtype=float)
        if self.params.shape != (total,):
            raise ValueError(f"expected {total} parameters, got {self.params.shape}")
        self.weights, self.biases = self._views(self.params)
        self.config: dict = {}
        self.history: list[float] = []

    def _views(self, flat: np.ndarray):
        ws, bs, pos = [], [], 0
        for i, o in zip(self.dims[:-1], self.dims[1:]):
            ws.append(flat[pos : pos + o * i].reshape(o, i))
            pos += o * i
            bs.append(flat[pos : pos + o])
            pos += o
        return ws, bs

    @staticmethod
    def _init_params(sizes, total, seed):
        # He-uniform weights, zero biases
        rng = make_rng(seed)
        flat = np.zeros(total)
        pos = 0
        for o, i in sizes:
            lim = np.sqrt(6.0 / i)
            flat[pos : pos + o * i] = rng.uniform(-lim, lim, size=o * i)
            pos += o * i + o
        return flat

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Predictions for a single input vector or a batch (rows)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Z = np.atleast_2d(X)
        if Z.shape[1] != self.dims[0]:
            raise ValueError(f"input has {Z.shape[1]} features, model expects {self.dims[0]}")
        last = self.n_layers - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            Z = Z @ W.T + b
            if k < last:
                Z = np.maximum(Z, 0.0)
        return Z[0] if single else Z

    __call__ = forward

    def loss_and_grad(self, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean squared error over rows and columns, and its gradient (flat)."""
        acts = [X]
        Z = X
        last = self.n_layers - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            Z = Z @ W.T + b
            if k < last:
                Z = np.maximum(Z, 0.0)
            acts.append(Z)
        err = Z - Y
        loss = float(np.mean(err * err))
        grad = np.empty_like(self.params)
        gw, gb = self._views(grad)
        delta = (2.0 / err.size) * err
        for k in range(last, -1, -1):
            gw[k][...] = delta.T @ acts[k]
            gb[k][...] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k]) * (acts[k] > 0)
        return loss, grad

    # -- persistence -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "seed": self.seed,
            "train_config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        flat = np.concatenate(
            [np.concatenate([np.ravel(W), np.ravel(b)]) for W, b in zip(d["weights"], d["biases"])]
        )
        m = cls(d["dims"], flat, d.get("seed", 0))
        m.config = d.get("train_config", {})
        return m

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return model.forward(x)


def train(
    data: Dataset,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    cfg: TrainConfig | None = None,
) -> MlpModel:
    """Fit an MLP to ``data`` with mini-batch Adam (bias-corrected moments)."""
    cfg = cfg or TrainConfig()
    X, Y = data.inputs, data.outputs
    n = len(X)
    dims = [X.shape[1], *hidden, Y.shape[1]]
    model = MlpModel(dims, seed=cfg.seed)
    model.config = asdict(cfg)
    rng = make_rng(cfg.seed + 1)
    batch = min(cfg.batch_size, n)

    p = model.params
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.eps
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for j, start in enumerate(range(0, n, batch)):
            rows = order[start : start + batch]
            loss, g = model.loss_and_grad(X[rows], Y[rows])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, j, loss)
            step += 1
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            mhat = m / (1.0 - b1**step)
            vhat = v / (1.0 - b2**step)
            p -= lr * mhat / (np.sqrt(vhat) + eps)
            total += loss * len(rows)
        model.history.append(total / n)
        if not np.all(np.isfinite(p)):
            raise TrainingDivergedError(epoch, -1, float("nan"))
    return model


@dataclass
class EvalReport:
    mse_total: float
    mse_coords: float
    mse_forces: float
    mse_freqs: float
    trials: int = 1
    per_trial: list = field(default_factory=list)
    train_s: float = 0.0
    test_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def group_mse(pred: np.ndarray, data: Dataset) -> dict[str, float]:
    err = (pred - data.outputs) ** 2
    out = {"mse_total": float(err.mean())}
    for name, cols in data.groups.items():
        block = err[:, cols]
        out[f"mse_{name}"] = float(block.mean()) if block.size else 0.0
    return out


def evaluate(model: MlpModel, test: Dataset) -> EvalReport:
    if model.dims[-1] != test.outputs.shape[1] or model.dims[0] != test.inputs.shape[1]:
        raise ValueError("model dimensions do not match the dataset layout")
    t0 = time.perf_counter()
    pred = model.forward(test.inputs)
    elapsed = time.perf_counter() - t0
    scores = group_mse(pred, test)
    return EvalReport(**scores, trials=1, per_trial=[scores], test_s=elapsed)


def run_trial(data: Dataset, cfg: TrainConfig, hidden=DEFAULT_HIDDEN, train_fraction=0.8) -> dict:
    """Split, train and evaluate once, seeding everything from ``cfg.seed``."""
    tr, te = split(data, train_fraction, cfg.seed)
    t0 = time.perf_counter()
    model = train(tr, hidden, cfg)
    t1 = time.perf_counter()
    rep = evaluate(model, te)
    t2 = time.perf_counter()
    return {**rep.per_trial[0], "seed": cfg.seed, "train_s": t1 - t0, "test_s": t2 - t1}


def summarize(rows: list[dict]) -> EvalReport:
    keys = ("mse_total", "mse_coords", "mse_forces", "mse_freqs")
    means = {k: float(np.mean([r[k] for r in rows])) for k in keys}
    return EvalReport(
        **means,
        trials=len(rows),
        per_trial=rows,
        train_s=float(np.mean([r["train_s"] for r in rows])),
        test_s=float(np.mean([r["test_s"] for r in rows])),
    )


def run_trials(
    data: Dataset,
    cfg: TrainConfig | None = None,
    trials: int = 20,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    train_fraction: float = 0.8,
    workers: int = 1,
) -> EvalReport:
    """Repeat split/train/evaluate; trial ``t`` is seeded with ``cfg.seed + t``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = cfg or TrainConfig()
    cfgs = [TrainConfig(**{**asdict(cfg), "seed": cfg.seed + t}) for t in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_trial, [data] * trials, cfgs, [tuple(hidden)] * trials,
                                 [train_fraction] * trials))
    else:
        rows = [run_trial(data, c, hidden, train_fraction) for c in cfgs]
    for t, r in enumerate(rows):
        log.info("trial %d: total %.3e coords %.3e forces %.3e freqs %.3e (%.1fs)",
                 t, r["mse_total"], r["mse_coords"], r["mse_forces"], r["mse_freqs"], r["train_s"])
    return summarize(rows)
