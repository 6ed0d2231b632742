"""Surrogate model definitions: residual U-Net trunk plus two branch variants.

Both models share the readout

    sigma_hat[t] = (1/(H W)) sum_ij sum_k B[t,k] T[i,j,k] + beta

where T is the trunk embedding of the normalized orientation grid, B the
branch embedding, and beta a trainable scalar. The single-crystal-response
model (ScDeepONet) encodes the 36 basis stresses per time step through a
weight-shared feed-forward stack, so its output length follows the input
curves; the material-property model (MpDeepONet) maps 9 scalars through one
dense layer to a fixed number of time steps.
"""

from __future__ import annotations

import numpy as np

from .. import nn
from ..nn import Tensor
from ..nn.container import load_tensors, save_tensors

HIDDEN_DIM = 16
SC_BRANCH_SIZES = (36, 72, 36, 16)
MP_INPUTS = 9


def _he_uniform(rng, fan_in: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class DenseLayer:
    def __init__(self, rng, n_in: int, n_out: int, prefix: str):
        self.w = Tensor(_he_uniform(rng, n_in, (n_in, n_out)), requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True)
        self.prefix = prefix

    def __call__(self, x):
        return nn.dense(x, self.w, self.b)

    def parameters(self):
        return [(f"{self.prefix}.w", self.w), (f"{self.prefix}.b", self.b)]


class Conv:
    def __init__(self, rng, k: int, cin: int, cout: int, prefix: str):
        self.w = Tensor(_he_uniform(rng, k * k * cin, (k, k, cin, cout)), requires_grad=True)
        self.b = Tensor(np.zeros(cout), requires_grad=True)
        self.prefix = prefix

    def __call__(self, x):
        return nn.conv2d(x, self.w, self.b)

    def parameters(self):
        return [(f"{self.prefix}.w", self.w), (f"{self.prefix}.b", self.b)]


class ResBlock:
    """conv-relu-conv with an additive (1x1-projected) shortcut, relu after."""

    def __init__(self, rng, cin: int, cout: int, prefix: str):
        self.conv1 = Conv(rng, 3, cin, cout, f"{prefix}.conv1")
        self.conv2 = Conv(rng, 3, cout, cout, f"{prefix}.conv2")
        self.shortcut = Conv(rng, 1, cin, cout, f"{prefix}.shortcut") if cin != cout else None

    def __call__(self, x):
        y = self.conv2(nn.relu(self.conv1(x)))
        skip = self.shortcut(x) if self.shortcut is not None else x
        return nn.relu(y + skip)

    def parameters(self):
        params = self.conv1.parameters() + self.conv2.parameters()
        if self.shortcut is not None:
            params += self.shortcut.parameters()
        return params


class ResUnet:
    """3-level residual encoder/decoder with additive skips and a 1x1 head.

    Input grids must have spatial dims divisible by 4 (two pooling levels).
    """

    def __init__(self, rng, widths=(8, 16, 25), hidden_dim: int = HIDDEN_DIM,
                 prefix: str = "trunk"):
        w1, w2, w3 = widths
        self.widths = tuple(widths)
        self.hidden_dim = hidden_dim
        self.enc1 = ResBlock(rng, 1, w1, f"{prefix}.enc1")
        self.enc2 = ResBlock(rng, w1, w2, f"{prefix}.enc2")
        self.enc3 = ResBlock(rng, w2, w3, f"{prefix}.enc3")
        self.up2 = Conv(rng, 3, w3, w2, f"{prefix}.up2")
        self.dec2 = ResBlock(rng, w2, w2, f"{prefix}.dec2")
        self.up1 = Conv(rng, 3, w2, w1, f"{prefix}.up1")
        self.dec1 = ResBlock(rng, w1, w1, f"{prefix}.dec1")
        self.head = Conv(rng, 1, w1, hidden_dim, f"{prefix}.head")

    def __call__(self, x):
        s1 = self.enc1(x)
        s2 = self.enc2(nn.max_pool2(s1))
        s3 = self.enc3(nn.max_pool2(s2))
        d2 = self.dec2(self.up2(nn.upsample_nearest2(s3)) + s2)
        d1 = self.dec1(self.up1(nn.upsample_nearest2(d2)) + s1)
        return self.head(d1)

    def parameters(self):
        params = []
        for block in (self.enc1, self.enc2, self.enc3, self.up2, self.dec2,
                      self.up1, self.dec1, self.head):
            params += block.parameters()
        return params


class Fnn:
    """Feed-forward stack with relu on hidden layers and a linear output."""

    def __init__(self, rng, sizes, prefix: str = "branch"):
        self.sizes = tuple(sizes)
        self.layers = [
            DenseLayer(rng, sizes[i], sizes[i + 1], f"{prefix}.fc{i + 1}")
            for i in range(len(sizes) - 1)
        ]

    def __call__(self, x):
        for layer in self.layers[:-1]:
            x = nn.relu(layer(x))
        return self.layers[-1](x)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


def parameter_count(params) -> int:
    return sum(t.size for _, t in params)


def _grids_tensor(grids) -> Tensor:
    grids = np.asarray(grids, dtype=np.float64)
    if grids.ndim == 2:
        grids = grids[None]
    if grids.ndim != 3:
        raise ValueError(f"expected (N, H, W) orientation grids, got shape {grids.shape}")
    if grids.min() < 0.0 or grids.max() > 1.0:
        raise ValueError("orientation grids must be normalized to [0, 1]")
    return Tensor(grids[..., None])


class ScDeepONet:
    """Surrogate whose branch consumes the 36 scaled single-crystal curves."""

    kind = "sc"

    def __init__(self, trunk_widths=(8, 16, 25), hidden_dim: int = HIDDEN_DIM, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.trunk = ResUnet(rng, trunk_widths, hidden_dim)
        self.branch = Fnn(rng, SC_BRANCH_SIZES[:-1] + (hidden_dim,))
        self.beta = Tensor(np.zeros(()), requires_grad=True)

    def parameters(self):
        return self.trunk.parameters() + self.branch_parameters()

    def branch_parameters(self):
        return self.branch.parameters() + [("beta", self.beta)]

    def trunk_features(self, grids) -> np.ndarray:
        """Spatially averaged trunk embedding, (N, HD); inference only."""
        return self.trunk(_grids_tensor(grids)).data.mean(axis=(1, 2))

    def branch_output(self, basis_scaled) -> Tensor:
        basis_scaled = np.asarray(basis_scaled, dtype=np.float64)
        if basis_scaled.ndim != 2 or basis_scaled.shape[1] != SC_BRANCH_SIZES[0]:
            raise ValueError(
                f"branch input must be (T, {SC_BRANCH_SIZES[0]}), got {basis_scaled.shape}")
        return self.branch(Tensor(basis_scaled))

    def forward_batch(self, grids, basis_scaled) -> Tensor:
        """Predicted scaled stresses, (N, T)."""
        emb = self.trunk(_grids_tensor(grids))
        means = nn.mean_(emb, axis=(1, 2))
        return readout(means, self.branch_output(basis_scaled), self.beta)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "hidden_dim": self.trunk.hidden_dim,
            "trunk_widths": list(self.trunk.widths),
            "branch_sizes": list(self.branch.sizes),
            "seed": self.seed,
        }


class MpDeepONet:
    """Baseline surrogate whose branch consumes 9 material/loading scalars."""

    kind = "mp"

    def __init__(self, t_steps: int, trunk_widths=(8, 16, 25), hidden_dim: int = HIDDEN_DIM,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.t_steps = t_steps
        self.trunk = ResUnet(rng, trunk_widths, hidden_dim)
        self.branch = DenseLayer(rng, MP_INPUTS, t_steps * hidden_dim, "branch.fc1")
        self.beta = Tensor(np.zeros(()), requires_grad=True)

    def parameters(self):
        return self.trunk.parameters() + self.branch_parameters()

    def branch_parameters(self):
        return self.branch.parameters() + [("beta", self.beta)]

    def trunk_features(self, grids) -> np.ndarray:
        return self.trunk(_grids_tensor(grids)).data.mean(axis=(1, 2))

    def branch_output(self, inputs9) -> Tensor:
        inputs9 = np.asarray(inputs9, dtype=np.float64)
        if inputs9.shape != (MP_INPUTS,):
            raise ValueError(f"branch input must have length {MP_INPUTS}, got {inputs9.shape}")
        flat = self.branch(Tensor(inputs9[None, :]))
        return nn.reshape(flat, (self.t_steps, self.trunk.hidden_dim))

    def forward_batch(self, grids, inputs9) -> Tensor:
        emb = self.trunk(_grids_tensor(grids))
        means = nn.mean_(emb, axis=(1, 2))
        return readout(means, self.branch_output(inputs9), self.beta)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "hidden_dim": self.trunk.hidden_dim,
            "trunk_widths": list(self.trunk.widths),
            "t_steps": self.t_steps,
            "seed": self.seed,
        }


def readout(trunk_means, branch_out, beta) -> Tensor:
    """Combine embeddings: (N, HD) x (T, HD) -> (N, T), plus the scalar bias."""
    return nn.matmul(nn.as_tensor(trunk_means), nn.transpose(branch_out)) + beta


def save_weights(model, path, extra_meta: dict | None = None) -> None:
    """Persist weights with the architecture descriptor; bit-exact round trip."""
    meta = {"descriptor": model.descriptor()}
    if extra_meta:
        meta.update(extra_meta)
    save_tensors(path, {name: t.data for name, t in model.parameters()}, meta)


def load_weights(path, expected_kind: str | None = None):
    """Rebuild a model from a weight container; returns (model, meta)."""
    tensors, meta = load_tensors(path)
    desc = meta.get("descriptor")
    if not desc or "kind" not in desc:
        raise nn.ContainerError(f"{path}: missing architecture descriptor")
    if expected_kind is not None and desc["kind"] != expected_kind:
        raise nn.ContainerError(
            f"{path}: container holds a {desc['kind']!r} model, expected {expected_kind!r}")
    if desc["kind"] == "sc":
        model = ScDeepONet(tuple(desc["trunk_widths"]), desc["hidden_dim"], desc.get("seed", 0))
    elif desc["kind"] == "mp":
        model = MpDeepONet(desc["t_steps"], tuple(desc["trunk_widths"]),
                           desc["hidden_dim"], desc.get("seed", 0))
    else:
        raise nn.ContainerError(f"{path}: unknown model kind {desc['kind']!r}")
    params = dict(model.parameters())
    missing = set(params) - set(tensors)
    extra = set(tensors) - set(params)
    if missing or extra:
        raise nn.ContainerError(
            f"{path}: tensor names do not match the descriptor "
            f"(missing {sorted(missing)}, extra {sorted(extra)})")
    for name, t in params.items():
        if tensors[name].shape != t.data.shape:
            raise nn.ContainerError(
                f"{path}: shape mismatch for {name}: {tensors[name].shape} vs {t.data.shape}")
        t.data = tensors[name]
    return model, meta
