"""Plane-strain crystal-plasticity FE solver on uniform voxel meshes.

One bilinear quadrilateral element per voxel, 2x2 Gauss quadrature, unit
thickness. The out-of-plane stretch is fixed at one and out-of-plane shears
at zero kinematically; the constitutive state stays fully three-dimensional.
Loading is displacement-driven (tension, shear, or sinusoidal cyclic tension)
with a full Newton solve per increment and adaptive time stepping: halve the
increment on non-convergence, grow it by 1.5x after three consecutive
successes, fail when the increment underflows the minimum.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .material import MaterialParams, mean_field, von_mises
from .update import BatchState, GrainFrames, cauchy_stress, constitutive_update, grain_frames

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)

LOAD_KINDS = ("tension", "shear", "cyclic")
OUTPUT_QUANTITIES = ("von_mises", "sigma_y")


class SimulationError(RuntimeError):
    """Adaptive stepping bottomed out or the mesh inverted."""


@dataclass(frozen=True)
class LoadCase:
    """Displacement-controlled loading program and output layout."""

    kind: str
    magnitude: float            # engineering strain at full load
    step_time: float            # s, total ramp (or cyclic window) duration
    n_output_steps: int
    output_quantity: str = "von_mises"
    n_cycles: float = 1.5       # cyclic only
    dt_min: float = 2e-3
    dt_max: float = 1e-2

    def __post_init__(self):
        if self.kind not in LOAD_KINDS:
            raise ValueError(f"unknown load kind {self.kind!r}")
        if self.output_quantity not in OUTPUT_QUANTITIES:
            raise ValueError(f"unknown output quantity {self.output_quantity!r}")
        if self.magnitude <= 0 or self.step_time <= 0:
            raise ValueError("magnitude and step_time must be positive")
        if self.n_output_steps < 1:
            raise ValueError("n_output_steps must be >= 1")
        if not (0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.kind == "cyclic":
            if self.output_quantity != "sigma_y":
                raise ValueError("cyclic loading stores sigma_y")
            if self.n_cycles <= 0:
                raise ValueError("cyclic loading needs n_cycles > 0")

    def applied_strain(self, t):
        """Nominal engineering strain of the imposed displacement at time t."""
        if self.kind == "cyclic":
            return self.magnitude * np.sin(2.0 * np.pi * self.n_cycles * np.asarray(t) / self.step_time)
        return self.magnitude * np.asarray(t) / self.step_time

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LoadCase":
        return cls(**d)


@dataclass
class ResponseCurve:
    """Time-aligned mean response: uniform times, applied strain, mean stress."""

    times: np.ndarray
    strains: np.ndarray
    stresses: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.strains = np.asarray(self.strains, dtype=np.float64)
        self.stresses = np.asarray(self.stresses, dtype=np.float64)
        if not (len(self.times) == len(self.strains) == len(self.stresses)):
            raise ValueError("times, strains, stresses must have equal length")
        if len(self.times) and not (np.diff(self.times) > 0).all():
            raise ValueError("times must be strictly increasing")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time_s,strain,stress_mpa\n")
            for t, e, s in zip(self.times, self.strains, self.stresses):
                fh.write(f"{float(t)!r},{float(e)!r},{float(s)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "ResponseCurve":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2])


@dataclass(frozen=True)
class SolverSettings:
    newton_rtol: float = 1e-8
    newton_max_iter: int = 25
    local_tol: float = 1e-10
    local_max_iter: int = 50
    tangent_step: float = 1e-7
    grow_factor: float = 1.5
    grow_after: int = 3
    dense_dof_limit: int = 2600  # direct dense solve below, sparse above

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class _Mesh:
    height: int
    width: int
    dx: float
    dy: float
    conn: np.ndarray    # (nel, 4) node ids, counterclockwise from lower-left
    coords: np.ndarray  # (nnode, 2)
    grad: np.ndarray    # (4 gp, 4 node, 2) shape-function gradients dN/dX
    w_detj: float

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_elements(self):
        return self.conn.shape[0]


def _build_mesh(height: int, width: int, size_mm: float) -> _Mesh:
    dx, dy = size_mm / width, size_mm / height
    jj, ii = np.meshgrid(np.arange(width + 1), np.arange(height + 1))
    coords = np.stack([jj.reshape(-1) * dx, ii.reshape(-1) * dy], axis=1)
    node = lambda i, j: i * (width + 1) + j
    conn = np.empty((height * width, 4), dtype=np.int64)
    for ei in range(height):
        for ej in range(width):
            conn[ei * width + ej] = (
                node(ei, ej), node(ei, ej + 1), node(ei + 1, ej + 1), node(ei + 1, ej))
    grad = np.empty((4, 4, 2))
    corners = np.array([(-1, -1), (1, -1), (1, 1), (-1, 1)], dtype=np.float64)
    g = 0
    for eta in _GAUSS:
        for xi in _GAUSS:
            for a, (xa, ya) in enumerate(corners):
                dn_dxi = xa * (1 + ya * eta) / 4.0
                dn_deta = ya * (1 + xa * xi) / 4.0
                grad[g, a] = (dn_dxi * 2.0 / dx, dn_deta * 2.0 / dy)
            g += 1
    return _Mesh(height, width, dx, dy, conn, coords, grad, dx * dy / 4.0)


def _boundary_conditions(mesh: _Mesh, load: LoadCase):
    """Fixed dof indices and a callable giving their values at time t."""
    width, height = mesh.width, mesh.height
    node = lambda i, j: i * (width + 1) + j
    size_y = mesh.dy * height
    if load.kind in ("tension", "cyclic"):
        bottom = np.array([node(0, j) for j in range(width + 1)])
        top = np.array([node(height, j) for j in range(width + 1)])
        fixed = np.concatenate([2 * bottom + 1, 2 * top + 1, [2 * node(0, 0)]])

        def values(t):
            v = np.zeros(fixed.shape)
            v[len(bottom) : len(bottom) + len(top)] = load.applied_strain(t) * size_y
            return v

        return fixed, values
    # shear: every boundary node fully prescribed, ux = gamma(t) * y, uy = 0
    on_edge = np.zeros((height + 1, width + 1), dtype=bool)
    on_edge[0, :] = on_edge[-1, :] = on_edge[:, 0] = on_edge[:, -1] = True
    nodes = np.flatnonzero(on_edge.reshape(-1))
    fixed = np.concatenate([2 * nodes, 2 * nodes + 1])
    ys = mesh.coords[nodes, 1]

    def values(t):
        return np.concatenate([load.applied_strain(t) * ys, np.zeros(len(nodes))])

    return fixed, values


def _deformation_gradients(mesh: _Mesh, u: np.ndarray) -> np.ndarray:
    """Full 3x3 deformation gradients at every Gauss point, F33 = 1."""
    ue = u.reshape(-1, 2)[mesh.conn]                       # (nel, 4, 2)
    f2 = np.einsum("eai,gaj->egij", ue, mesh.grad)         # (nel, 4, 2, 2)
    F = np.zeros((mesh.n_elements, 4, 3, 3))
    F[..., 2, 2] = 1.0
    F[..., :2, :2] = f2
    F[..., 0, 0] += 1.0
    F[..., 1, 1] += 1.0
    return F.reshape(-1, 3, 3)


def _internal_force(mesh: _Mesh, p1_inplane: np.ndarray) -> np.ndarray:
    fe = mesh.w_detj * np.einsum("egij,gaj->eai", p1_inplane, mesh.grad)
    f = np.zeros(2 * mesh.n_nodes)
    np.add.at(f, (2 * mesh.conn[:, :, None] + np.arange(2)).reshape(-1), fe.reshape(-1))
    return f


class _Model:
    """Assembled FE model bound to one orientation field, material and load."""

    def __init__(self, field_deg: np.ndarray, mat: MaterialParams, load: LoadCase,
                 settings: SolverSettings, size_mm: float):
        field_deg = np.asarray(field_deg, dtype=np.float64)
        if field_deg.ndim != 2:
            raise ValueError(f"orientation field must be 2-D, got shape {field_deg.shape}")
        if (np.abs(field_deg) > 180.0).any():
            raise ValueError("orientation field angles must lie in [-180, 180] degrees")
        self.mat = mat
        self.load = load
        self.settings = settings
        self.mesh = _build_mesh(*field_deg.shape, size_mm)
        angles_gp = np.repeat(field_deg.reshape(-1), 4)
        self.frames = grain_frames(mat, angles_gp)
        self.n_gp = len(angles_gp)
        self.fixed, self.fixed_values = _boundary_conditions(self.mesh, load)
        free_mask = np.ones(2 * self.mesh.n_nodes, dtype=bool)
        free_mask[self.fixed] = False
        self.free = np.flatnonzero(free_mask)
        self.edof = (2 * self.mesh.conn[:, :, None] + np.arange(2)).reshape(-1, 8)
        self._force_floor = 1e-12 * mat.C44 * size_mm
        self._frames4 = None
        self._states4 = None

    def _update(self, F, states, dt, warm):
        return constitutive_update(
            F, states, dt, self.mat, self.frames,
            dgamma0=warm, tol=self.settings.local_tol, max_iter=self.settings.local_max_iter)

    def _factorize(self, K_ff):
        if 2 * self.mesh.n_nodes <= self.settings.dense_dof_limit:
            return scipy.linalg.lu_factor(K_ff)
        return scipy.sparse.linalg.factorized(K_ff.tocsc())

    def _solve_linear(self, factor, rhs):
        if len(rhs) == 0:
            return rhs
        if isinstance(factor, tuple):
            return scipy.linalg.lu_solve(factor, rhs)
        return factor(rhs)

    def _stiffness(self, F, states, dt, dgamma, p1_base):
        """Global stiffness from forward perturbation of the in-plane F entries."""
        h = self.settings.tangent_step
        n = self.n_gp
        f_stack = np.tile(F, (4, 1, 1))
        for k, (i, j) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
            f_stack[k * n : (k + 1) * n, i, j] += h
        if self._frames4 is None:
            self._frames4 = self.frames.tile(4)
        res = constitutive_update(
            f_stack, self._states4, dt, self.mat, self._frames4,
            dgamma0=np.tile(dgamma, (4, 1)),
            tol=self.settings.local_tol, max_iter=self.settings.local_max_iter)
        if not res.converged.all():
            return None
        p1_pert = (f_stack @ res.pk2)[:, :2, :2].reshape(4, -1, 4, 2, 2)
        A = (p1_pert - p1_base[None]) / h          # (4 pert, nel, 4 gp, 2, 2)
        A = A.transpose(1, 2, 3, 4, 0).reshape(-1, 4, 2, 2, 2, 2)
        ke = self.mesh.w_detj * np.einsum("gaj,egijkl,gbl->eaibk", self.mesh.grad,
                                          A, self.mesh.grad, optimize=True)
        ke = ke.reshape(-1, 8, 8)
        ndof = 2 * self.mesh.n_nodes
        if ndof <= self.settings.dense_dof_limit:
            K = np.zeros((ndof, ndof))
            np.add.at(K, (self.edof[:, :, None], self.edof[:, None, :]), ke)
            return K[np.ix_(self.free, self.free)]
        rows = np.repeat(self.edof, 8, axis=1).reshape(-1)
        cols = np.tile(self.edof, (1, 8)).reshape(-1)
        K = scipy.sparse.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(ndof, ndof)).tocsr()
        return K[self.free][:, self.free]

    def attempt_step(self, u, states, t_new, dt, warm_dgamma, du_predictor=None):
        """One Newton-iterated increment; returns None on non-convergence.

        The stiffness is factorized on the first iteration and reused while
        the residual keeps contracting fast (modified Newton); it is rebuilt
        whenever the contraction stalls.
        """
        u_trial = u.copy()
        if du_predictor is not None:
            u_trial += du_predictor
        u_trial[self.fixed] = self.fixed_values(t_new)
        self._states4 = states.tile(4)
        warm = warm_dgamma
        factor = None
        r_prev = np.inf
        for _ in range(self.settings.newton_max_iter):
            F = _deformation_gradients(self.mesh, u_trial)
            res = self._update(F, states, dt, warm)
            if not res.converged.all():
                return None
            warm = res.dgamma
            p1 = (F @ res.pk2)[:, :2, :2].reshape(-1, 4, 2, 2)
            f_int = _internal_force(self.mesh, p1)
            r_free = f_int[self.free]
            ref = np.linalg.norm(f_int[self.fixed])
            r_norm = np.linalg.norm(r_free)
            if r_norm <= self.settings.newton_rtol * ref + self._force_floor:
                return u_trial, res, F
            if factor is None or r_norm > 0.25 * r_prev:
                K_ff = self._stiffness(F, states, dt, res.dgamma, p1)
                if K_ff is None:
                    return None
                try:
                    factor = self._factorize(K_ff)
                except (np.linalg.LinAlgError, RuntimeError):
                    return None
            r_prev = r_norm
            u_trial[self.free] += self._solve_linear(factor, -r_free)
        return None

    def output_value(self, F, pk2) -> float:
        sigma = cauchy_stress(F, pk2)
        if self.load.output_quantity == "sigma_y":
            return mean_field(sigma[:, 1, 1])
        dev = sigma - np.trace(sigma, axis1=1, axis2=2)[:, None, None] / 3.0 * np.eye(3)
        return mean_field(np.sqrt(1.5 * np.einsum("nij,nij->n", dev, dev)))


def run_simulation(orientation_field, mat: MaterialParams, load: LoadCase,
                   settings: SolverSettings | None = None, size_mm: float = 1.0,
                   monitor=None) -> ResponseCurve:
    """Mean-field response of one orientation field under the given loading.

    ``monitor``, when given, is called as ``monitor(t, states)`` after every
    committed increment with the live Gauss-point :class:`BatchState`.
    """
    settings = settings or SolverSettings()
    model = _Model(orientation_field, mat, load, settings, size_mm)
    states = BatchState.initial(model.n_gp, mat)
    u = np.zeros(2 * model.mesh.n_nodes)
    warm = np.zeros((model.n_gp, states.g.shape[1]))

    t_end = load.step_time
    t = 0.0
    dt = load.dt_max
    consecutive = 0
    hist_t, hist_s = [0.0], [0.0]
    du_last = None
    dt_last = None
    while t < t_end - 1e-12 * t_end:
        dt_eff = min(dt, t_end - t)
        predictor = None if du_last is None else du_last * (dt_eff / dt_last)
        result = model.attempt_step(u, states, t + dt_eff, dt_eff, warm, predictor)
        if result is None:
            consecutive = 0
            du_last = None
            dt = dt_eff / 2.0
            if dt < load.dt_min:
                raise SimulationError(
                    f"time step underflow at t={t:.6g}s: dt={dt:.3g} < dt_min={load.dt_min}")
            continue
        u_new, res, F = result
        states = BatchState(res.fp, res.g, states.accumulated_slip + np.abs(res.dgamma))
        warm = res.dgamma
        du_last, dt_last = u_new - u, dt_eff
        u = u_new
        t += dt_eff
        hist_t.append(t)
        hist_s.append(model.output_value(F, res.pk2))
        if monitor is not None:
            monitor(t, states)
        consecutive += 1
        if consecutive >= settings.grow_after:
            dt = min(dt * settings.grow_factor, load.dt_max)
            consecutive = 0

    times = np.arange(1, load.n_output_steps + 1) * (t_end / load.n_output_steps)
    stresses = np.interp(times, hist_t, hist_s)
    return ResponseCurve(times, load.applied_strain(times), stresses)
