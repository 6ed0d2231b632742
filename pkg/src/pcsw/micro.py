"""Synthetic 2D polycrystal microstructures as voxel grids of grain ids.

Grains are generated by a seeded Voronoi tessellation: seed points are drawn
without replacement from the voxel centers and every voxel is assigned to the
nearest seed (Euclidean distance, ties broken toward the lowest grain id).
Each grain carries one in-plane Euler angle in degrees, drawn uniformly from
[-180, 180]. The native ".pmic" text format round-trips bit-exactly; a legacy
structured-points voxel format (integer grain ids per cell plus a sidecar
orientation table) is also importable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ParseError(ValueError):
    """Malformed microstructure file; the message carries the line number."""


@dataclass
class Microstructure:
    height: int
    width: int
    grain_id: np.ndarray          # (H, W) int array of grain indices
    orientation_deg: np.ndarray   # (n_grains,) Euler angle per grain
    physical_size: float = 1.0    # domain edge length in mm

    def __post_init__(self):
        self.grain_id = np.asarray(self.grain_id, dtype=np.int64)
        self.orientation_deg = np.asarray(self.orientation_deg, dtype=np.float64)
        self.validate()

    @property
    def n_grains(self) -> int:
        return len(self.orientation_deg)

    def validate(self) -> None:
        if self.grain_id.shape != (self.height, self.width):
            raise ValueError(
                f"grain grid shape {self.grain_id.shape} != ({self.height}, {self.width})")
        if self.grain_id.min() < 0 or self.grain_id.max() >= self.n_grains:
            raise ValueError("grain id grid references a grain without an orientation entry")
        present = np.bincount(self.grain_id.reshape(-1), minlength=self.n_grains)
        if (present == 0).any():
            missing = int(np.flatnonzero(present == 0)[0])
            raise ValueError(f"grain {missing} owns no voxel")
        if (np.abs(self.orientation_deg) > 180.0).any():
            raise ValueError("orientations must lie in [-180, 180] degrees")
        if self.physical_size <= 0:
            raise ValueError("physical_size must be positive")

    def __eq__(self, other):
        return (
            isinstance(other, Microstructure)
            and self.height == other.height
            and self.width == other.width
            and np.array_equal(self.grain_id, other.grain_id)
            and np.array_equal(self.orientation_deg, other.orientation_deg)
            and self.physical_size == other.physical_size
        )


def generate_microstructure(seed: int, height: int, width: int, n_grains: int) -> Microstructure:
    """Seeded Voronoi tessellation with uniform random grain orientations."""
    if not 1 <= n_grains <= height * width:
        raise ValueError(f"n_grains must be in [1, {height * width}], got {n_grains}")
    rng = np.random.default_rng(seed)
    flat = rng.choice(height * width, size=n_grains, replace=False)
    rows, cols = np.divmod(flat, width)
    yy, xx = np.mgrid[0:height, 0:width]
    d2 = (yy[:, :, None] - rows) ** 2 + (xx[:, :, None] - cols) ** 2
    grain_id = d2.argmin(axis=2)  # argmin keeps the lowest index on ties
    orientation = rng.uniform(-180.0, 180.0, size=n_grains)
    return Microstructure(height, width, grain_id, orientation)


def orientation_field(m: Microstructure) -> np.ndarray:
    """Per-voxel Euler angle (degrees), looked up through the grain map."""
    return m.orientation_deg[m.grain_id]


def normalize_orientations(field: np.ndarray) -> np.ndarray:
    """Affine map from [-180, 180] degrees onto [0, 1]."""
    field = np.asarray(field, dtype=np.float64)
    if (np.abs(field) > 180.0).any():
        raise ValueError("orientation angles must lie in [-180, 180] degrees")
    return (field + 180.0) / 360.0


def denormalize_orientations(unit: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`normalize_orientations`."""
    unit = np.asarray(unit, dtype=np.float64)
    if unit.min() < 0.0 or unit.max() > 1.0:
        raise ValueError("normalized orientations must lie in [0, 1]")
    return unit * 360.0 - 180.0


# ---------------------------------------------------------------------------
# native .pmic serialization
# ---------------------------------------------------------------------------


def save_grid(m: Microstructure, path) -> None:
    lines = [
        "pmic 1",
        f"height {m.height}",
        f"width {m.width}",
        f"grains {m.n_grains}",
        f"size_mm {m.physical_size!r}",
        "orientations",
        " ".join(repr(float(a)) for a in m.orientation_deg),
        "grid",
    ]
    for row in m.grain_id:
        lines.append(" ".join(str(int(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid(path) -> Microstructure:
    """Load a microstructure; dispatches on the file's first line."""
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("pmic"):
        return _load_pmic(path)
    if first.lstrip().startswith("#") and "vtk" in first.lower():
        return load_structured_points(path)
    raise ParseError(f"{path}:1: unrecognized microstructure format: {first.strip()!r}")


def _load_pmic(path) -> Microstructure:
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise ParseError(f"{path}:{lineno}: {msg}")

    def line(idx):
        if idx >= len(lines):
            fail(idx + 1, "unexpected end of file")
        return lines[idx]

    if not lines or lines[0].split() != ["pmic", "1"]:
        fail(1, "expected header 'pmic 1'")
    fields = {}
    i = 1
    for key in ("height", "width", "grains", "size_mm"):
        parts = line(i).split()
        if len(parts) != 2 or parts[0] != key:
            fail(i + 1, f"expected '{key} <value>'")
        fields[key] = parts[1]
        i += 1
    try:
        n_grains = int(fields["grains"])
        height, width = int(fields["height"]), int(fields["width"])
        size_mm = float(fields["size_mm"])
    except ValueError as exc:
        raise ParseError(f"{path}: bad header value: {exc}") from exc
    if line(i) != "orientations":
        fail(i + 1, "expected 'orientations' section")
    i += 1
    orientation = []
    while len(orientation) < n_grains:
        if i >= len(lines) or lines[i] == "grid":
            fail(i + 1, f"expected {n_grains} orientations, found {len(orientation)}")
        try:
            orientation.extend(float(v) for v in lines[i].split())
        except ValueError as exc:
            fail(i + 1, f"bad orientation value: {exc}")
        i += 1
    if len(orientation) != n_grains:
        fail(i, f"expected {n_grains} orientations, found {len(orientation)}")
    if line(i) != "grid":
        fail(i + 1, "expected 'grid' section")
    i += 1
    rows = []
    for r in range(height):
        try:
            row = [int(v) for v in line(i + r).split()]
        except ValueError as exc:
            fail(i + r + 1, f"bad grain id: {exc}")
        if len(row) != width:
            fail(i + r + 1, f"expected {width} grain ids, found {len(row)}")
        rows.append(row)
    try:
        return Microstructure(height, width, np.array(rows), np.array(orientation), size_mm)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# legacy structured-points voxel import
# ---------------------------------------------------------------------------


def load_structured_points(path, orientation_path=None) -> Microstructure:
    """Import a legacy structured-points voxel file with per-cell grain ids.

    The orientation table is read from ``orientation_path`` or, by default,
    from ``<path stem>.orient``: one ``grain_id angle_deg`` pair per line,
    '#' comments allowed.
    """
    import pathlib

    path = pathlib.Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise ParseError(f"{path}:{lineno}: {msg}")

    dims = None
    n_cells = None
    data_start = None
    for i, line in enumerate(lines):
        tokens = line.split()
        if not tokens:
            continue
        key = tokens[0].upper()
        if key == "DIMENSIONS":
            if len(tokens) != 4:
                fail(i + 1, "DIMENSIONS expects three integers")
            try:
                dims = tuple(int(t) for t in tokens[1:])
            except ValueError:
                fail(i + 1, f"bad DIMENSIONS values: {tokens[1:]}")
        elif key == "CELL_DATA":
            n_cells = int(tokens[1])
        elif key == "LOOKUP_TABLE":
            data_start = i + 1
            break
        elif key == "SCALARS":
            data_start = i + 1  # may be followed by LOOKUP_TABLE
    if dims is None:
        raise ParseError(f"{path}: missing DIMENSIONS line")
    if n_cells is None:
        raise ParseError(f"{path}: missing CELL_DATA line")
    if data_start is None:
        raise ParseError(f"{path}: missing SCALARS grain id section")

    nx, ny, nz = dims
    # accept either cell-grid dimensions directly or point dimensions
    if nz == 1 and nx * ny == n_cells:
        width, height = nx, ny
    elif nz in (1, 2) and (nx - 1) * (ny - 1) == n_cells:
        width, height = nx - 1, ny - 1
    elif nz > 2 or (nz == 2 and (nx - 1) * (ny - 1) != n_cells):
        raise ParseError(f"{path}: 2D only: file declares 3D extent {dims}")
    else:
        raise ParseError(f"{path}: DIMENSIONS {dims} inconsistent with CELL_DATA {n_cells}")

    values = []
    for j in range(data_start, len(lines)):
        tokens = lines[j].split()
        if tokens and not tokens[0].isdigit() and not tokens[0].lstrip("-").isdigit():
            continue  # e.g. the LOOKUP_TABLE line following SCALARS
        try:
            values.extend(int(t) for t in tokens)
        except ValueError as exc:
            fail(j + 1, f"bad cell value: {exc}")
    if len(values) != n_cells:
        raise ParseError(f"{path}: expected {n_cells} cell values, found {len(values)}")
    raw = np.array(values).reshape(height, width)

    # renumber grains densely, preserving sorted raw-id order
    raw_ids = np.unique(raw)
    remap = {int(r): k for k, r in enumerate(raw_ids)}
    grid = np.vectorize(remap.get)(raw)

    if orientation_path is None:
        orientation_path = path.with_suffix(".orient")
    table = _load_orientation_table(orientation_path)
    try:
        orientation = np.array([table[int(r)] for r in raw_ids])
    except KeyError as exc:
        raise ParseError(f"{orientation_path}: missing orientation for grain {exc}") from exc
    try:
        return Microstructure(height, width, grid, orientation)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _load_orientation_table(path) -> dict[int, float]:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError as exc:
        raise ParseError(f"{path}: orientation sidecar file not found") from exc
    table = {}
    for i, line in enumerate(lines):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{i + 1}: expected 'grain_id angle_deg'")
        try:
            table[int(parts[0])] = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"{path}:{i + 1}: {exc}") from exc
    return table
