"""Implicit constitutive update for batches of Gauss points.

Unknowns are the slip increments on the 12 systems. Each local Newton
iteration rebuilds the plastic deformation gradient from the increments
(first-order exponential map, renormalized to unit determinant), evaluates
the elastic Green strain and second Piola-Kirchhoff stress in the
intermediate configuration, and forms the residual

    R_a = dgamma_a - dt * rate(tau_a(dgamma), g_lagged)

with the slip resistances lagged one iteration behind the increments. The
residual is exact; the Jacobian uses the elastically linearized, orientation-
constant coupling d(tau_a)/d(dgamma_b) ~ -P_a : C : sym(P_b) precomputed per
grain, so each iteration costs one batched 12x12 solve plus small matmuls.
Per-component step clamping guards the stiff rate law during transients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .material import (
    MaterialParams,
    N_SLIP,
    hardening_matrix,
    hardening_modulus,
    rotated_stiffness,
    slip_rate_and_derivative,
    slip_systems,
)

_I3 = np.eye(3)


def _strain_voigt(M: np.ndarray) -> np.ndarray:
    """Symmetric (...,3,3) tensors to strain-like Voigt (...,6), shears doubled."""
    return np.stack(
        [M[..., 0, 0], M[..., 1, 1], M[..., 2, 2],
         M[..., 1, 2] + M[..., 2, 1],
         M[..., 0, 2] + M[..., 2, 0],
         M[..., 0, 1] + M[..., 1, 0]],
        axis=-1,
    )


def _stress_tensor(v: np.ndarray) -> np.ndarray:
    """Stress-like Voigt (...,6) back to symmetric (...,3,3) tensors."""
    out = np.empty(v.shape[:-1] + (3, 3))
    out[..., 0, 0] = v[..., 0]
    out[..., 1, 1] = v[..., 1]
    out[..., 2, 2] = v[..., 2]
    out[..., 1, 2] = out[..., 2, 1] = v[..., 3]
    out[..., 0, 2] = out[..., 2, 0] = v[..., 4]
    out[..., 0, 1] = out[..., 1, 0] = v[..., 5]
    return out


@dataclass
class GrainFrames:
    """Per-point lattice data: Schmid tensors, their contraction vectors,
    the rotated stiffness, and the constant slip-coupling Jacobian block."""

    schmid: np.ndarray         # (n, 12, 3, 3)
    schmid_flat: np.ndarray    # (n, 12, 9) row-major Schmid tensors
    tau_proj: np.ndarray       # (n, 12, 6): strain-like Voigt of sym(P)
    stiffness: np.ndarray      # (n, 6, 6)
    slip_coupling: np.ndarray  # (n, 12, 12): P_a : C : sym(P_b)

    def __len__(self):
        return self.schmid.shape[0]

    def subset(self, idx) -> "GrainFrames":
        return GrainFrames(self.schmid[idx], self.schmid_flat[idx], self.tau_proj[idx],
                           self.stiffness[idx], self.slip_coupling[idx])

    def tile(self, reps: int) -> "GrainFrames":
        return GrainFrames(
            np.tile(self.schmid, (reps, 1, 1, 1)),
            np.tile(self.schmid_flat, (reps, 1, 1)),
            np.tile(self.tau_proj, (reps, 1, 1)),
            np.tile(self.stiffness, (reps, 1, 1)),
            np.tile(self.slip_coupling, (reps, 1, 1)),
        )


def grain_frames(mat: MaterialParams, angles_deg: np.ndarray) -> GrainFrames:
    """Build per-point frames; repeated angles share one stiffness rotation."""
    angles_deg = np.asarray(angles_deg, dtype=np.float64).reshape(-1)
    uniq, inverse = np.unique(angles_deg, return_inverse=True)
    schmid_u = np.empty((len(uniq), N_SLIP, 3, 3))
    stiff_u = np.empty((len(uniq), 6, 6))
    for k, theta in enumerate(uniq):
        schmid_u[k] = slip_systems(theta).schmid
        stiff_u[k] = rotated_stiffness(mat, theta)
    sym_u = 0.5 * (schmid_u + np.swapaxes(schmid_u, -1, -2))
    proj_u = _strain_voigt(sym_u)                                   # (u, 12, 6)
    tb_u = np.einsum("nij,nbj->nbi", stiff_u, proj_u)               # C : sym(P)
    coupling_u = np.einsum("nav,nbv->nab", proj_u, tb_u)            # P : C : sym(P)
    return GrainFrames(
        schmid_u[inverse],
        schmid_u[inverse].reshape(len(angles_deg), N_SLIP, 9),
        proj_u[inverse],
        stiff_u[inverse],
        coupling_u[inverse],
    )


@dataclass
class BatchState:
    """Evolving state of a batch of Gauss points."""

    fp: np.ndarray                 # (n, 3, 3) plastic deformation gradient
    g: np.ndarray                  # (n, 12) slip resistances, MPa
    accumulated_slip: np.ndarray   # (n, 12)

    @classmethod
    def initial(cls, n: int, mat: MaterialParams) -> "BatchState":
        return cls(
            np.tile(_I3, (n, 1, 1)),
            np.full((n, N_SLIP), float(mat.g0)),
            np.zeros((n, N_SLIP)),
        )

    def copy(self) -> "BatchState":
        return BatchState(self.fp.copy(), self.g.copy(), self.accumulated_slip.copy())

    def tile(self, reps: int) -> "BatchState":
        return BatchState(
            np.tile(self.fp, (reps, 1, 1)),
            np.tile(self.g, (reps, 1)),
            np.tile(self.accumulated_slip, (reps, 1)),
        )


@dataclass
class UpdateResult:
    pk2: np.ndarray        # (n, 3, 3) second Piola-Kirchhoff stress, MPa
    fp: np.ndarray         # (n, 3, 3) updated plastic deformation gradient
    g: np.ndarray          # (n, 12) updated slip resistances
    dgamma: np.ndarray     # (n, 12) converged slip increments
    converged: np.ndarray  # (n,) bool


def constitutive_update(
    F: np.ndarray,
    state: BatchState,
    dt: float,
    mat: MaterialParams,
    frames: GrainFrames,
    dgamma0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    step_clamp: float = 0.02,
) -> UpdateResult:
    """Advance a batch of points over one time increment (does not commit)."""
    n = F.shape[0]
    if np.linalg.det(F).min() <= 0.0:
        raise FloatingPointError("element inversion: det(F) <= 0")

    out = UpdateResult(
        pk2=np.zeros((n, 3, 3)),
        fp=state.fp.copy(),
        g=state.g.copy(),
        dgamma=np.zeros((n, N_SLIP)),
        converged=np.zeros(n, dtype=bool),
    )
    Q_t = hardening_matrix(mat).T
    h_n = hardening_modulus(state.g, mat)  # modulus frozen at start-of-step g
    eye12 = np.eye(N_SLIP)

    idx = np.arange(n)
    Fi, fpi, gi, hi = F, state.fp, state.g, h_n
    frames_i = frames
    dg = np.zeros((n, N_SLIP)) if dgamma0 is None else np.array(dgamma0)

    for _ in range(max_iter):
        incr = (dg[:, None, :] @ frames_i.schmid_flat).reshape(-1, 3, 3)
        fp_new = fpi + incr @ fpi
        det = np.linalg.det(fp_new)
        fp_new /= np.cbrt(det)[:, None, None]
        fe = Fi @ np.linalg.inv(fp_new)
        ce = np.swapaxes(fe, -1, -2) @ fe
        ee_v = _strain_voigt(0.5 * (ce - _I3))
        t_v = (frames_i.stiffness @ ee_v[:, :, None])[:, :, 0]
        tau = (frames_i.tau_proj @ t_v[:, :, None])[:, :, 0]
        g_lag = np.clip(gi + (hi * np.abs(dg)) @ Q_t, mat.g0, mat.gmax)
        rate, drate = slip_rate_and_derivative(tau, g_lag, mat)
        resid = dg - dt * rate
        conv = np.abs(resid).max(axis=1) <= tol

        if conv.any():
            rows = idx[conv]
            out.pk2[rows] = _stress_tensor(t_v[conv])
            out.fp[rows] = fp_new[conv]
            out.g[rows] = g_lag[conv]
            out.dgamma[rows] = dg[conv]
            out.converged[rows] = True
            keep = ~conv
            if not keep.any():
                break
            idx = idx[keep]
            Fi, fpi, gi, hi = Fi[keep], fpi[keep], gi[keep], hi[keep]
            frames_i = frames_i.subset(keep)
            dg, resid, drate = dg[keep], resid[keep], drate[keep]

        jac = eye12 + (dt * drate)[:, :, None] * frames_i.slip_coupling
        delta = np.linalg.solve(jac, -resid[:, :, None])[:, :, 0]
        dg = dg + np.clip(delta, -step_clamp, step_clamp)

    return out


def cauchy_stress(F: np.ndarray, pk2: np.ndarray) -> np.ndarray:
    """Push the PK2 stress forward through F: (1/det F) F T F^T, batched."""
    det = np.linalg.det(F)
    return (F @ pk2 @ np.swapaxes(F, -1, -2)) / det[..., None, None]


# ---------------------------------------------------------------------------
# single-point surface
# ---------------------------------------------------------------------------


@dataclass
class MaterialState:
    """State at one material point."""

    fp: np.ndarray
    g: np.ndarray
    accumulated_slip: np.ndarray

    @classmethod
    def initial(cls, mat: MaterialParams) -> "MaterialState":
        return cls(_I3.copy(), np.full(N_SLIP, float(mat.g0)), np.zeros(N_SLIP))


class ConvergenceError(RuntimeError):
    """Local Newton failed to converge; the caller should reject the step."""


def material_update(F, state: MaterialState, dt: float, mat: MaterialParams,
                    frames: GrainFrames, tangent_step: float = 1e-7):
    """Single-point update returning (cauchy, new_state, d(cauchy)/dF).

    ``frames`` holds the point's rotated slip systems and stiffness (see
    :func:`grain_frames`); the algorithmic tangent is assembled by forward
    perturbation of every F component.
    """
    F = np.asarray(F, dtype=np.float64)
    batch = BatchState(state.fp[None], state.g[None], state.accumulated_slip[None])
    res = constitutive_update(F[None], batch, dt, mat, frames)
    if not res.converged.all():
        raise ConvergenceError(f"local Newton did not converge at dt={dt}")
    sigma = cauchy_stress(F[None], res.pk2)[0]

    tangent = np.empty((3, 3, 3, 3))
    f_stack = np.tile(F, (9, 1, 1))
    for k in range(9):
        f_stack[k, k // 3, k % 3] += tangent_step
    res9 = constitutive_update(f_stack, batch.tile(9), dt, mat, frames.tile(9),
                               dgamma0=np.tile(res.dgamma, (9, 1)))
    if not res9.converged.all():
        raise ConvergenceError("tangent perturbation did not converge")
    sig9 = cauchy_stress(f_stack, res9.pk2)
    for k in range(9):
        tangent[:, :, k // 3, k % 3] = (sig9[k] - sigma) / tangent_step

    new_state = MaterialState(res.fp[0], res.g[0],
                              state.accumulated_slip + np.abs(res.dgamma[0]))
    return sigma, new_state, tangent
