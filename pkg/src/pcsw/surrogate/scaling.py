"""Per-time-step min-max scaling of stresses, anchored to the basis curves.

The scaler's bounds come from the 36 single-crystal responses at each time
step, never from RVE data: RVE stresses interpolate the single-crystal range,
so this keeps training targets near [0, 1] for every load case. Steps where
all basis stresses coincide (degenerate range) map to 0.5 and unscale back to
the bound value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..basis import BasisSet


@dataclass
class ScalerPerStep:
    """Per-step (min, max) stress bounds in MPa."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if self.mins.shape != self.maxs.shape or self.mins.ndim != 1:
            raise ValueError("mins and maxs must be 1-D arrays of equal length")
        if (self.maxs < self.mins).any():
            raise ValueError("max bound below min bound")

    def __len__(self):
        return len(self.mins)

    @classmethod
    def from_basis(cls, basis: BasisSet) -> "ScalerPerStep":
        S = basis.stresses
        return cls(S.min(axis=1), S.max(axis=1))

    def _check(self, stresses) -> np.ndarray:
        stresses = np.asarray(stresses, dtype=np.float64)
        if stresses.shape[-1] != len(self):
            raise ValueError(
                f"stress series length {stresses.shape[-1]} != scaler length {len(self)}")
        return stresses

    def scale(self, stresses) -> np.ndarray:
        stresses = self._check(stresses)
        span = self.maxs - self.mins
        degenerate = span <= 0.0
        safe = np.where(degenerate, 1.0, span)
        return np.where(degenerate, 0.5, (stresses - self.mins) / safe)

    def unscale(self, scaled) -> np.ndarray:
        scaled = self._check(scaled)
        span = self.maxs - self.mins
        degenerate = span <= 0.0
        return np.where(degenerate, self.mins, scaled * np.where(degenerate, 0.0, span) + self.mins)

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerPerStep":
        return cls(np.asarray(d["mins"]), np.asarray(d["maxs"]))


@dataclass
class VectorScaler:
    """Componentwise min-max scaler for the material-property input vector."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "VectorScaler":
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        return cls(rows.min(axis=0), rows.max(axis=0))

    def scale(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.float64)
        span = self.maxs - self.mins
        degenerate = span <= 0.0
        return np.where(degenerate, 0.5, (vec - self.mins) / np.where(degenerate, 1.0, span))

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "VectorScaler":
        return cls(np.asarray(d["mins"]), np.asarray(d["maxs"]))


def material_inputs9(mat, load) -> np.ndarray:
    """The material-property branch inputs: 8 constitutive constants plus the
    applied strain magnitude."""
    return np.array([
        mat.C11, mat.C12, mat.C44, mat.h0, mat.g0, mat.gmax,
        mat.gamma_dot0, mat.delta_f, load.magnitude,
    ])
