"""Gradient verification against central finite differences.

Reverse-mode gradients are compared entrywise on a seeded random subsample of
each parameter tensor. Entries whose +h/-h evaluations land on opposite sides
of a relu kink are excluded (the loss is non-differentiable there and the
central difference measures a chord across the kink, not a derivative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import relu_sign_probe
from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    n_checked: int
    n_skipped: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _masks_differ(a: list, b: list) -> bool:
    if len(a) != len(b):
        return True
    return any(not np.array_equal(ma, mb) for ma, mb in zip(a, b))


def grad_check(forward, params, tolerance: float = 1e-5, step: float = 1e-6,
               n_sample: int = 64, seed: int = 0, grad_floor: float = 1e-4) -> GradCheckReport:
    """Compare reverse-mode gradients of ``forward()`` with central differences.

    Parameters
    ----------
    forward : callable
        Zero-argument closure returning the scalar loss Tensor; must be a
        deterministic function of ``params``.
    params : list of (name, Tensor)
        Parameters to perturb; at most ``n_sample`` random entries per tensor
        (all entries if fewer) are checked.
    grad_floor : float
        Denominator floor for the relative error; entries where both gradients
        are far below this scale are dominated by finite-difference noise.
    """
    for p in (t for _, t in params):
        p.zero_grad()
    with Tape() as tape:
        loss = forward()
    tape.backward(loss)
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for name, t in params}

    rng = np.random.default_rng(seed)
    max_err = 0.0
    worst = ""
    checked = skipped = 0
    for name, t in params:
        flat = t.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= n_sample else rng.choice(n, size=n_sample, replace=False)
        a_flat = analytic[name].reshape(-1)
        for i in idx:
            keep = flat[i]
            flat[i] = keep + step
            with relu_sign_probe() as probe_plus:
                f_plus = float(forward().data)
            flat[i] = keep - step
            with relu_sign_probe() as probe_minus:
                f_minus = float(forward().data)
            flat[i] = keep
            if _masks_differ(probe_plus.masks, probe_minus.masks):
                skipped += 1  # perturbation crosses a relu kink
                continue
            numeric = (f_plus - f_minus) / (2.0 * step)
            denom = max(abs(a_flat[i]), abs(numeric), grad_floor)
            err = abs(a_flat[i] - numeric) / denom
            checked += 1
            if err > max_err:
                max_err = err
                worst = name
    return GradCheckReport(max_err, worst, checked, skipped, tolerance)
