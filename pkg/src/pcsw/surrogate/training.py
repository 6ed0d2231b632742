"""Training loop, transfer learning with a frozen trunk, and prediction.

An "epoch" follows the iteration-style counting of the training framework the
defaults were calibrated against: one epoch is one minibatch Adam step. The
sample order is a seeded shuffle, rebuilt whenever the queue empties; batches
that do not divide the dataset evenly keep the remainder as a short final
batch. Loss history is recorded every 100 epochs in scaled-MSE units.

Transfer learning freezes the trunk bitwise: the trunk embeddings of the new
grids are computed once up front and only the branch (and the readout bias)
sees gradient updates. For the single-crystal-response model the number of
time steps may change freely between baseline and transfer data; for the
material-property model it is fixed by the branch architecture.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import nn
from ..nn import Tape, Tensor
from .models import MpDeepONet, ScDeepONet, readout
from .scaling import ScalerPerStep


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 80000
    batch_size: int = 4
    learning_rate: float = 1e-3
    seed: int = 0
    train_fraction: float = 0.8
    mode: str = "baseline"           # "baseline" | "transfer"
    finetune_epochs: int = 20000
    finetune_lr: float = 5e-4
    loss_every: int = 100

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.mode not in ("baseline", "transfer"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.batch_size < 1 or self.epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epochs and batch_size must be non-negative/positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class SurrogateDataset:
    """Scaled training data for one material/load pair."""

    grids: np.ndarray          # (N, H, W), orientation grids normalized to [0, 1]
    targets: np.ndarray        # (N, T), stresses scaled per step
    branch_input: np.ndarray   # sc: (T, 36) scaled basis; mp: (9,) scaled inputs
    kind: str = "sc"
    material_hash: str = ""
    load_hash: str = ""

    def __post_init__(self):
        self.grids = np.asarray(self.grids, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.branch_input = np.asarray(self.branch_input, dtype=np.float64)
        if len(self.grids) != len(self.targets):
            raise ValueError("one target curve per grid required")

    def __len__(self):
        return len(self.grids)

    def subset(self, idx) -> "SurrogateDataset":
        return SurrogateDataset(self.grids[idx], self.targets[idx], self.branch_input,
                                self.kind, self.material_hash, self.load_hash)


def split_indices(n: int, train_fraction: float, seed: int):
    """Seeded shuffled train/test split."""
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * train_fraction))
    n_train = min(max(n_train, 1), n - 1)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


class _BatchQueue:
    """Seeded reshuffling batch sampler keeping short remainder batches."""

    def __init__(self, n: int, batch_size: int, rng):
        self.n = n
        self.batch_size = min(batch_size, n)
        self.rng = rng
        self._order = rng.permutation(n)
        self._cursor = 0

    def next(self) -> np.ndarray:
        if self._cursor >= self.n:
            self._order = self.rng.permutation(self.n)
            self._cursor = 0
        batch = self._order[self._cursor : self._cursor + self.batch_size]
        self._cursor += self.batch_size
        return batch


def _check_kind(model, dataset: SurrogateDataset):
    if dataset.kind != model.kind:
        raise ValueError(f"dataset kind {dataset.kind!r} does not match model {model.kind!r}")
    if model.kind == "mp" and dataset.targets.shape[1] != model.t_steps:
        raise ValueError(
            f"material-property branch is fixed to {model.t_steps} steps, "
            f"dataset has {dataset.targets.shape[1]}")


def train(model, dataset: SurrogateDataset, config: TrainConfig):
    """Minibatch Adam on the scaled MSE; returns [(epoch, mse), ...]."""
    _check_kind(model, dataset)
    rng = np.random.default_rng(config.seed)
    queue = _BatchQueue(len(dataset), config.batch_size, rng)
    params = model.parameters()
    state = nn.init_adam([t for _, t in params], config.learning_rate)
    history = []
    for epoch in range(1, config.epochs + 1):
        idx = queue.next()
        with Tape() as tape:
            pred = model.forward_batch(dataset.grids[idx], dataset.branch_input)
            loss = nn.mse(pred, dataset.targets[idx])
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch}, batch {idx.tolist()}, "
                f"lr {config.learning_rate}")
        tape.backward(loss)
        nn.adam_step([t for _, t in params], state)
        if epoch % config.loss_every == 0 or epoch == config.epochs:
            history.append((epoch, loss_val))
    return history


def transfer_finetune(model, dataset: SurrogateDataset, config: TrainConfig):
    """Fine-tune the branch (and readout bias) on new data; trunk frozen bitwise.

    Trunk embeddings are computed once up front, which both enforces the
    freeze and makes fine-tuning cheap.
    """
    _check_kind(model, dataset)
    if config.finetune_epochs == 0:
        return []
    feats = model.trunk_features(dataset.grids)  # trunk runs outside any tape
    rng = np.random.default_rng(config.seed)
    queue = _BatchQueue(len(dataset), config.batch_size, rng)
    params = model.branch_parameters()
    state = nn.init_adam([t for _, t in params], config.finetune_lr)
    history = []
    for epoch in range(1, config.finetune_epochs + 1):
        idx = queue.next()
        with Tape() as tape:
            branch_out = model.branch_output(dataset.branch_input)
            pred = readout(Tensor(feats[idx]), branch_out, model.beta)
            loss = nn.mse(pred, dataset.targets[idx])
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch}, batch {idx.tolist()}, "
                f"lr {config.finetune_lr}")
        tape.backward(loss)
        nn.adam_step([t for _, t in params], state)
        if epoch % config.loss_every == 0 or epoch == config.finetune_epochs:
            history.append((epoch, loss_val))
    return history


def predict(model, grid, branch_input, scaler: ScalerPerStep):
    """Stresses in MPa for one orientation grid; returns (stresses, seconds)."""
    t0 = time.perf_counter()
    scaled = model.forward_batch(grid, branch_input).data[0]
    elapsed = time.perf_counter() - t0
    return scaler.unscale(scaled), elapsed


def predict_batch(model, grids, branch_input, scaler: ScalerPerStep):
    """Stresses in MPa for many grids; returns (matrix (N, T), mean seconds/case)."""
    grids = np.asarray(grids, dtype=np.float64)
    t0 = time.perf_counter()
    scaled = model.forward_batch(grids, branch_input).data
    elapsed = (time.perf_counter() - t0) / max(len(grids), 1)
    return scaler.unscale(scaled), elapsed


def history_to_csv(history, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,mse\n")
        for epoch, mse in history:
            fh.write(f"{epoch},{mse!r}\n")
