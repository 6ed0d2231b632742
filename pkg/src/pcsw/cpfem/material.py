"""Cubic elasticity, FCC slip-system geometry, and rate-dependent slip kinetics.

The single-crystal model: anisotropic cubic elasticity (C11, C12, C44),
12 FCC {111}<110> slip systems rotated in-plane by the grain's Euler angle,
a thermally activated slip-rate law driven by the resolved shear stress, and
a saturating Voce-style hardening law coupling the systems through a
self/latent interaction matrix.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

BOLTZMANN_J_PER_K = 1.380649e-23

N_SLIP = 12

# FCC {111}<110>: (plane normal, slip direction) integer pairs
_FCC_SYSTEMS = [
    ((1, 1, 1), (0, 1, -1)),
    ((1, 1, 1), (-1, 0, 1)),
    ((1, 1, 1), (1, -1, 0)),
    ((-1, 1, 1), (0, 1, -1)),
    ((-1, 1, 1), (1, 0, 1)),
    ((-1, 1, 1), (1, 1, 0)),
    ((1, -1, 1), (0, 1, 1)),
    ((1, -1, 1), (1, 0, -1)),
    ((1, -1, 1), (1, 1, 0)),
    ((1, 1, -1), (0, 1, 1)),
    ((1, 1, -1), (1, 0, 1)),
    ((1, 1, -1), (1, -1, 0)),
]

_BASE_NORMALS = np.array([n for n, _ in _FCC_SYSTEMS], dtype=np.float64)
_BASE_NORMALS /= np.linalg.norm(_BASE_NORMALS, axis=1, keepdims=True)
_BASE_DIRECTIONS = np.array([s for _, s in _FCC_SYSTEMS], dtype=np.float64)
_BASE_DIRECTIONS /= np.linalg.norm(_BASE_DIRECTIONS, axis=1, keepdims=True)

# Voigt ordering: xx, yy, zz, yz, xz, xy
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))


@dataclass(frozen=True)
class MaterialParams:
    """Cubic elastic constants plus slip/hardening parameters.

    Stresses in MPa, rates in 1/s, the activation energy in J, temperature
    in K. Exponents, the athermal resistance and the hardening interaction
    ratios default to values recorded in every dataset manifest.
    """

    C11: float
    C12: float
    C44: float
    h0: float
    g0: float
    gmax: float
    gamma_dot0: float
    delta_f: float
    p_exp: float = 0.78
    q_exp: float = 1.15
    g_a: float = 0.0
    q_self: float = 1.0
    q_latent: float = 1.4
    temperature: float = 293.15

    def __post_init__(self):
        if not (self.C11 > self.C12 and self.C44 > 0):
            raise ValueError("cubic stiffness requires C11 > C12 and C44 > 0")
        if self.C11 + 2 * self.C12 <= 0:
            raise ValueError("cubic stiffness must be positive definite")
        if not (0 <= self.g_a < self.g0 <= self.gmax):
            raise ValueError("slip resistances must satisfy 0 <= g_a < g0 <= gmax")
        if not (0 < self.p_exp <= 1 and 1 <= self.q_exp <= 2):
            raise ValueError("slip-law exponents must satisfy 0 < p <= 1 and 1 <= q <= 2")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MaterialParams":
        return cls(**d)


@dataclass(frozen=True)
class SlipSystemSet:
    """Unit slip directions/plane normals and their Schmid tensors.

    All arrays are for one in-plane lattice rotation: direction (12, 3),
    normal (12, 3), schmid (12, 3, 3) with P = s (x) n.
    """

    direction: np.ndarray
    normal: np.ndarray
    schmid: np.ndarray


def rotation_z(theta_deg: float) -> np.ndarray:
    t = np.deg2rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def slip_systems(theta_deg: float) -> SlipSystemSet:
    """FCC {111}<110> set rotated in-plane by ``theta_deg`` about the z axis."""
    R = rotation_z(theta_deg)
    s = _BASE_DIRECTIONS @ R.T
    n = _BASE_NORMALS @ R.T
    P = np.einsum("ai,aj->aij", s, n)
    return SlipSystemSet(s, n, P)


def _cubic_stiffness_tensor(C11: float, C12: float, C44: float) -> np.ndarray:
    """Fourth-order cubic stiffness in the crystal frame."""
    eye = np.eye(3)
    C = C12 * np.einsum("ij,kl->ijkl", eye, eye)
    C = C + C44 * (np.einsum("ik,jl->ijkl", eye, eye) + np.einsum("il,jk->ijkl", eye, eye))
    aniso = C11 - C12 - 2.0 * C44
    for m in range(3):
        a = eye[m]
        C = C + aniso * np.einsum("i,j,k,l->ijkl", a, a, a, a)
    return C


def rotated_stiffness(mat: MaterialParams, theta_deg: float) -> np.ndarray:
    """Cubic stiffness rotated about z, returned as a 6x6 Voigt matrix (MPa)."""
    C = _cubic_stiffness_tensor(mat.C11, mat.C12, mat.C44)
    R = rotation_z(theta_deg)
    Cr = np.einsum("ia,jb,kc,ld,abcd->ijkl", R, R, R, R, C, optimize=True)
    V = np.empty((6, 6))
    for I, (i, j) in enumerate(VOIGT_PAIRS):
        for J, (k, l) in enumerate(VOIGT_PAIRS):
            V[I, J] = Cr[i, j, k, l]
    return V


def resolved_shear(stress: np.ndarray, slip: SlipSystemSet) -> np.ndarray:
    """Project a symmetric stress tensor onto each system: tau = stress : P."""
    return np.einsum("ij,aij->a", stress, slip.schmid)


def slip_rate(tau, g, mat: MaterialParams):
    """Signed slip rate (1/s) of the thermally activated flow law.

    Zero at and below the athermal threshold; the stress ratio is clipped to
    [0, 1] so the rate saturates at the reference rate when |tau| reaches g.
    """
    tau = np.asarray(tau, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(tau).all():
        raise FloatingPointError("non-finite resolved shear stress")
    x = np.clip((np.abs(tau) - mat.g_a) / (g - mat.g_a), 0.0, 1.0)
    theta = mat.delta_f / (BOLTZMANN_J_PER_K * mat.temperature)
    rate = mat.gamma_dot0 * np.exp(-theta * (1.0 - x**mat.p_exp) ** mat.q_exp)
    rate = np.where(np.abs(tau) <= mat.g_a, 0.0, rate * np.sign(tau))
    return rate if rate.ndim else float(rate)


def slip_rate_and_derivative(tau: np.ndarray, g: np.ndarray, mat: MaterialParams):
    """Rate and d(rate)/d(tau), vectorized; the derivative is zero where the
    stress ratio is clipped (saturated or inactive systems)."""
    abs_tau = np.abs(tau)
    denom = g - mat.g_a
    x = (abs_tau - mat.g_a) / denom
    xc = np.clip(x, 0.0, 1.0)
    theta = mat.delta_f / (BOLTZMANN_J_PER_K * mat.temperature)
    p, q = mat.p_exp, mat.q_exp
    with np.errstate(invalid="ignore", divide="ignore"):
        xp = xc**p
        bracket = 1.0 - xp
        rate_mag = mat.gamma_dot0 * np.exp(-theta * bracket**q)
        interior = (x > 0.0) & (x < 1.0)
        drate = np.where(
            interior,
            rate_mag * theta * q * bracket ** (q - 1.0) * p * xc ** (p - 1.0) / denom,
            0.0,
        )
    rate = np.where(abs_tau <= mat.g_a, 0.0, rate_mag * np.sign(tau))
    drate = np.where(abs_tau <= mat.g_a, 0.0, drate)
    return rate, np.nan_to_num(drate)


def hardening_matrix(mat: MaterialParams) -> np.ndarray:
    """Self/latent interaction matrix: q_self on the diagonal, q_latent off it."""
    Q = np.full((N_SLIP, N_SLIP), mat.q_latent)
    np.fill_diagonal(Q, mat.q_self)
    return Q


def hardening_modulus(g, mat: MaterialParams):
    """Voce-style saturating modulus h(g) = h0 (gmax - g)/(gmax - g0)."""
    if mat.gmax == mat.g0:
        return np.zeros_like(np.asarray(g, dtype=np.float64))
    return mat.h0 * (mat.gmax - np.asarray(g, dtype=np.float64)) / (mat.gmax - mat.g0)


def harden(g: np.ndarray, slip_increments: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Update slip resistances from slip increments; result clamped to [g0, gmax]."""
    g = np.asarray(g, dtype=np.float64)
    dgamma = np.abs(np.asarray(slip_increments, dtype=np.float64))
    dg = hardening_matrix(mat) @ (hardening_modulus(g, mat) * dgamma)
    return np.clip(g + dg, mat.g0, mat.gmax)


def von_mises(sigma: np.ndarray) -> float:
    """Equivalent stress sqrt(3/2 S:S) of the deviatoric part S."""
    sigma = np.asarray(sigma, dtype=np.float64)
    dev = sigma - np.trace(sigma) / 3.0 * np.eye(3)
    return float(np.sqrt(1.5 * np.einsum("ij,ij->", dev, dev)))


def mean_field(values) -> float:
    """Arithmetic mean over Gauss-point values (uniform mesh volume average)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("mean_field of an empty collection")
    return float(values.mean())
