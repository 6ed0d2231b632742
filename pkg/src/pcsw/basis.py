"""Single-crystal basis responses and mixture diagnostics.

36 single-crystal simulations sample the in-plane orientation space at
i * 180/37 degrees (i = 1..36); their stress-strain curves act as response
basis functions for the surrogate models. Tension and cyclic samples run on a
single element; shear needs a 10x10 mesh because a fully prescribed single
element cannot develop the inhomogeneous strain state of a sheared RVE.
Voigt (iso-strain) and Reuss (iso-stress) mixtures and the pointwise envelope
of the 36 curves serve as diagnostics for where RVE responses must lie.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cpfem.material import MaterialParams
from .cpfem.solver import LoadCase, ResponseCurve, SolverSettings, run_simulation
from .manifests import content_hash

N_BASIS = 36

SHEAR_BASIS_MESH = 10  # single crystals under shear need a multi-element mesh


def orientation_samples() -> np.ndarray:
    """The 36 sampled in-plane orientations: i * 180/37 degrees, i = 1..36."""
    return np.arange(1, N_BASIS + 1) * (180.0 / 37.0)


@dataclass
class BasisSet:
    """36 single-crystal response curves sharing one time/strain grid."""

    orientations_deg: np.ndarray
    curves: list[ResponseCurve]
    material_hash: str = ""
    load_hash: str = ""

    def __post_init__(self):
        self.orientations_deg = np.asarray(self.orientations_deg, dtype=np.float64)
        if len(self.curves) != len(self.orientations_deg):
            raise ValueError("one curve per orientation required")
        t0, e0 = self.curves[0].times, self.curves[0].strains
        for c in self.curves[1:]:
            if not (np.array_equal(c.times, t0) and np.array_equal(c.strains, e0)):
                raise ValueError("basis curves must share identical times and strains")

    @property
    def times(self) -> np.ndarray:
        return self.curves[0].times

    @property
    def strains(self) -> np.ndarray:
        return self.curves[0].strains

    @property
    def stresses(self) -> np.ndarray:
        """Stress matrix of shape (T, n_curves)."""
        return np.stack([c.stresses for c in self.curves], axis=1)


def _basis_field(angle: float, load: LoadCase) -> np.ndarray:
    if load.kind == "shear":
        return np.full((SHEAR_BASIS_MESH, SHEAR_BASIS_MESH), angle)
    return np.array([[angle]])


def generate_basis(mat: MaterialParams, load: LoadCase,
                   settings: SolverSettings | None = None, workers: int = 1) -> BasisSet:
    """Run the 36 single-crystal simulations for one material/load pair."""
    angles = orientation_samples()
    fields = [_basis_field(a, load) for a in angles]
    if workers > 1:
        from .parallel import run_simulations

        results = run_simulations(fields, mat, load, settings, workers)
        curves = []
        for a, r in zip(angles, results):
            if isinstance(r, Exception):
                raise RuntimeError(f"basis simulation at {a:.2f} deg failed: {r}") from r
            curves.append(r)
    else:
        curves = []
        for a, f in zip(angles, fields):
            try:
                curves.append(run_simulation(f, mat, load, settings))
            except Exception as exc:
                raise RuntimeError(f"basis simulation at {a:.2f} deg failed: {exc}") from exc
    return BasisSet(angles, curves,
                    material_hash=content_hash(mat.to_dict()),
                    load_hash=content_hash(load.to_dict()))


def voigt_curve(basis: BasisSet) -> ResponseCurve:
    """Iso-strain mixture: pointwise arithmetic mean of the member stresses."""
    return ResponseCurve(basis.times, basis.strains, basis.stresses.mean(axis=1))


def reuss_curve(basis: BasisSet, n_levels: int = 200) -> ResponseCurve:
    """Iso-stress mixture by inverse interpolation of the member curves.

    Only defined for monotone loading: every member stress history must be
    strictly increasing. Strains at common stress levels (up to the softest
    member's final stress) are averaged and the result is resampled back onto
    the shared strain grid, extending the last segment linearly where the
    averaged strain stops short of the grid.
    """
    S = basis.stresses
    if not (np.diff(S, axis=0) > 0).all():
        raise ValueError("reuss mixture requires strictly increasing member stresses")
    # curves all start at (0, 0); include the origin for the inversion, and
    # the member breakpoints in the level grid so kinks are sampled exactly
    strains = np.concatenate([[0.0], basis.strains])
    cap = S[-1].min()
    levels = np.unique(np.concatenate([
        np.linspace(0.0, cap, n_levels), S[S <= cap].reshape(-1)]))
    inv = np.stack(
        [np.interp(levels, np.concatenate([[0.0], S[:, k]]), strains) for k in range(S.shape[1])],
        axis=1,
    )
    mean_strain = inv.mean(axis=1)
    stresses = np.interp(basis.strains, mean_strain, levels)
    beyond = basis.strains > mean_strain[-1]
    if beyond.any() and mean_strain[-1] > mean_strain[-2]:
        slope = (levels[-1] - levels[-2]) / (mean_strain[-1] - mean_strain[-2])
        stresses[beyond] = levels[-1] + slope * (basis.strains[beyond] - mean_strain[-1])
    return ResponseCurve(basis.times, basis.strains, stresses)


def envelope(basis: BasisSet) -> tuple[ResponseCurve, ResponseCurve]:
    """Pointwise (lower, upper) bounds over the member stresses."""
    S = basis.stresses
    return (
        ResponseCurve(basis.times, basis.strains, S.min(axis=1)),
        ResponseCurve(basis.times, basis.strains, S.max(axis=1)),
    )


def envelope_margins(basis: BasisSet, curve: ResponseCurve, tolerance: float = 0.02) -> np.ndarray:
    """Signed violation of the (lower, upper) envelope widened by ``tolerance``.

    Returns, per time step, how far the curve lies outside the widened
    envelope (0 where inside). The widening is ``tolerance`` times the larger
    envelope magnitude at that step.
    """
    lo, up = envelope(basis)
    slack = tolerance * np.maximum(np.abs(lo.stresses), np.abs(up.stresses))
    below = np.maximum(lo.stresses - slack - curve.stresses, 0.0)
    above = np.maximum(curve.stresses - up.stresses - slack, 0.0)
    return below + above


def save_basis(basis: BasisSet, csv_path, sidecar_path=None) -> None:
    """One CSV (time, strain, 36 stress columns named by orientation) plus a
    JSON provenance sidecar."""
    names = ",".join(f"stress_mpa_{a:.4f}deg" for a in basis.orientations_deg)
    with open(csv_path, "w") as fh:
        fh.write(f"time_s,strain,{names}\n")
        S = basis.stresses
        for i, (t, e) in enumerate(zip(basis.times, basis.strains)):
            fh.write(f"{float(t)!r},{float(e)!r}," + ",".join(repr(float(v)) for v in S[i]) + "\n")
    sidecar_path = sidecar_path or str(csv_path) + ".json"
    with open(sidecar_path, "w") as fh:
        json.dump(
            {
                "orientations_deg": [float(a) for a in basis.orientations_deg],
                "material_hash": basis.material_hash,
                "load_hash": basis.load_hash,
            },
            fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_basis(csv_path, sidecar_path=None) -> BasisSet:
    rows = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    sidecar_path = sidecar_path or str(csv_path) + ".json"
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    angles = np.asarray(meta["orientations_deg"])
    times, strains = rows[:, 0], rows[:, 1]
    curves = [ResponseCurve(times, strains, rows[:, 2 + k]) for k in range(len(angles))]
    return BasisSet(angles, curves, meta.get("material_hash", ""), meta.get("load_hash", ""))
