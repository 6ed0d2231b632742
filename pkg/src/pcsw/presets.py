"""Shipped material parameters and load-case presets.

Materials: 2024-T3 aluminum alloy and pure copper, MPa units. Load cases come
in two scales: ``full`` reproduces the source data-generation settings
(64x64 grids, 1000/400 samples, tight step-size bounds); ``desk`` shrinks the
grids, sample counts and step bounds so the whole pipeline runs on a
workstation in minutes. Every preset records all solver-relevant constants in
the manifests it produces.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cpfem.material import MaterialParams
from .cpfem.solver import LoadCase

ALUMINUM = MaterialParams(
    C11=131038.0, C12=80314.0, C44=30942.0,
    h0=1750.0, g0=220.0, gmax=400.0,
    gamma_dot0=1.732e6, delta_f=2.5e-19,
)

COPPER = MaterialParams(
    C11=166957.0, C12=120900.0, C44=75000.0,
    h0=187.0, g0=22.0, gmax=153.0,
    gamma_dot0=1.52e7, delta_f=2.85e-19,
)

MATERIALS = {"aluminum": ALUMINUM, "copper": COPPER}

_DESK_DT_MAX = 5e-2  # larger cap keeps desk-scale runs quick; full scale uses 1e-2


@dataclass(frozen=True)
class ExperimentPreset:
    """One material/loading combination at one scale."""

    name: str
    material_name: str
    load: LoadCase
    grid: tuple[int, int]
    grains: tuple[int, int]      # per-sample grain count range, inclusive
    count: int                   # number of microstructures / simulations
    trunk_widths: tuple[int, int, int]
    epochs: int
    finetune_epochs: int

    @property
    def material(self) -> MaterialParams:
        return MATERIALS[self.material_name]


def _load_cases() -> dict[str, LoadCase]:
    return {
        "al-tension-1pct": LoadCase("tension", 0.01, 1.0, 50),
        "cu-tension-0p125": LoadCase("tension", 0.00125, 1.0, 50),
        "al-shear-2pct": LoadCase("shear", 0.02, 1.0, 50),
        "cu-cyclic": LoadCase("cyclic", 0.00125, 3.0, 240,
                              output_quantity="sigma_y", n_cycles=1.5),
    }


LOAD_CASES = _load_cases()

_MATERIAL_OF = {
    "al-tension-1pct": "aluminum",
    "cu-tension-0p125": "copper",
    "al-shear-2pct": "aluminum",
    "cu-cyclic": "copper",
}

_FULL_COUNT = {
    "al-tension-1pct": 1000,
    "cu-tension-0p125": 400,
    "al-shear-2pct": 400,
    "cu-cyclic": 186,
}

DESK_TRUNK_WIDTHS = (2, 4, 8)
FULL_TRUNK_WIDTHS = (8, 16, 25)

_DESK_COUNT = {
    "al-tension-1pct": 200,
    "cu-tension-0p125": 50,
    "al-shear-2pct": 40,
    "cu-cyclic": 40,
}


def _presets() -> dict[str, ExperimentPreset]:
    out = {}
    for name, load in LOAD_CASES.items():
        out[name] = ExperimentPreset(
            name=name, material_name=_MATERIAL_OF[name], load=load,
            grid=(64, 64), grains=(20, 40), count=_FULL_COUNT[name],
            trunk_widths=FULL_TRUNK_WIDTHS, epochs=80000, finetune_epochs=20000)
        desk = f"desk-{name}"
        out[desk] = ExperimentPreset(
            name=desk, material_name=_MATERIAL_OF[name],
            load=replace(load, dt_max=_DESK_DT_MAX),
            grid=(16, 16), grains=(8, 15), count=_DESK_COUNT[name],
            trunk_widths=DESK_TRUNK_WIDTHS, epochs=10000, finetune_epochs=2000)
    return out


PRESETS = _presets()


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def get_material(name: str) -> MaterialParams:
    try:
        return MATERIALS[name]
    except KeyError:
        raise KeyError(f"unknown material {name!r}; available: {sorted(MATERIALS)}") from None
