"""Metrics and percentile-ranked reports for surrogate predictions.

All metrics run in physical units (MPa). Relative error excludes points whose
reference stress is within 1e-3 of the case's peak magnitude (cyclic curves
cross zero, where relative error is meaningless); MAE and R^2 keep all
points. Relative error aggregates per time step, then per case, then across
cases; percentile case picks use the nearest-rank rule (lower median).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

NEAR_ZERO_FRACTION = 1e-3
DEFAULT_PERCENTILES = (0, 50, 85, 100)
HISTOGRAM_BINS = 50


def relative_error(f_fe, f_pred) -> np.ndarray:
    """Pointwise |fe - pred| / |fe| in percent; caller handles exclusions."""
    f_fe = np.asarray(f_fe, dtype=np.float64)
    f_pred = np.asarray(f_pred, dtype=np.float64)
    return np.abs(f_fe - f_pred) / np.abs(f_fe) * 100.0


def case_relative_error(f_fe, f_pred) -> tuple[float, int]:
    """Mean relative error (%) of one case with the near-zero exclusion rule.

    Returns (mean over included points, number of excluded points).
    """
    f_fe = np.asarray(f_fe, dtype=np.float64)
    f_pred = np.asarray(f_pred, dtype=np.float64)
    include = np.abs(f_fe) >= NEAR_ZERO_FRACTION * np.abs(f_fe).max()
    if not include.any():
        return float("nan"), int(f_fe.size)
    err = relative_error(f_fe[include], f_pred[include])
    return float(err.mean()), int((~include).sum())


def mae(f_fe, f_pred) -> float:
    f_fe = np.asarray(f_fe, dtype=np.float64)
    f_pred = np.asarray(f_pred, dtype=np.float64)
    if f_fe.shape != f_pred.shape:
        raise ValueError(f"length mismatch: {f_fe.shape} vs {f_pred.shape}")
    return float(np.abs(f_fe - f_pred).mean())


def r2(f_fe, f_pred) -> float:
    f_fe = np.asarray(f_fe, dtype=np.float64).reshape(-1)
    f_pred = np.asarray(f_pred, dtype=np.float64).reshape(-1)
    if f_fe.shape != f_pred.shape:
        raise ValueError(f"length mismatch: {f_fe.shape} vs {f_pred.shape}")
    ss_tot = float(((f_fe - f_fe.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: reference values have zero variance")
    ss_res = float(((f_fe - f_pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def percentile_cases(per_case_errors, percentiles=DEFAULT_PERCENTILES) -> dict[int, int]:
    """Nearest-rank percentile selection over ascending per-case error."""
    errors = np.asarray(per_case_errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("no cases to rank")
    order = np.argsort(errors, kind="stable")
    n = errors.size
    picks = {}
    for p in percentiles:
        if p <= 0:
            rank = 1
        else:
            rank = int(np.ceil(p / 100.0 * n))
        picks[p] = int(order[min(rank, n) - 1])
    return picks


@dataclass
class MetricsReport:
    mean_relative_error_pct: float
    mean_absolute_error_mpa: float
    r2: float
    fraction_within_5pct: float
    per_case_relative_error_pct: list
    excluded_points: int
    mean_fe_seconds_per_case: float | None = None
    mean_inference_seconds_per_case: float | None = None
    speedup: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvaluationResult:
    report: MetricsReport
    predictions: np.ndarray              # (N, T) MPa
    references: np.ndarray               # (N, T) MPa
    percentile_indices: dict[int, int]
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray


def evaluate(fe_curves, predictions, fe_seconds_per_case=None,
             inference_seconds_per_case=None,
             percentiles=DEFAULT_PERCENTILES) -> EvaluationResult:
    """Score predictions (MPa) against reference curves (MPa)."""
    fe = np.atleast_2d(np.asarray(fe_curves, dtype=np.float64))
    pred = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    if fe.shape != pred.shape:
        raise ValueError(f"shape mismatch: {fe.shape} vs {pred.shape}")
    if fe.size == 0:
        raise ValueError("empty test set")

    per_case = []
    excluded = 0
    rel_all = []
    for k in range(fe.shape[0]):
        mean_err, n_exc = case_relative_error(fe[k], pred[k])
        per_case.append(mean_err)
        excluded += n_exc
        include = np.abs(fe[k]) >= NEAR_ZERO_FRACTION * np.abs(fe[k]).max()
        rel_all.append(relative_error(fe[k][include], pred[k][include]))
    rel_all = np.concatenate(rel_all)

    speedup = None
    if fe_seconds_per_case and inference_seconds_per_case:
        speedup = fe_seconds_per_case / inference_seconds_per_case

    report = MetricsReport(
        mean_relative_error_pct=float(np.mean(per_case)),
        mean_absolute_error_mpa=mae(fe, pred),
        r2=r2(fe, pred),
        fraction_within_5pct=float((rel_all <= 5.0).mean()),
        per_case_relative_error_pct=[float(e) for e in per_case],
        excluded_points=excluded,
        mean_fe_seconds_per_case=fe_seconds_per_case,
        mean_inference_seconds_per_case=inference_seconds_per_case,
        speedup=speedup,
    )
    abs_err = np.abs(fe - pred).reshape(-1)
    counts, edges = np.histogram(abs_err, bins=HISTOGRAM_BINS,
                                 range=(0.0, max(abs_err.max(), 1e-12)))
    picks = percentile_cases(per_case, percentiles)
    return EvaluationResult(report, pred, fe, picks, edges, counts)


def write_histogram_csv(result: EvaluationResult, path) -> None:
    with open(path, "w") as fh:
        fh.write("bin_lo_mpa,bin_hi_mpa,count\n")
        for lo, hi, c in zip(result.histogram_edges[:-1], result.histogram_edges[1:],
                             result.histogram_counts):
            fh.write(f"{float(lo)!r},{float(hi)!r},{int(c)}\n")


def write_percentile_curves_csv(result: EvaluationResult, times, strains, path) -> None:
    """Curve bundle (reference and prediction) for the ranked percentile cases."""
    with open(path, "w") as fh:
        head = ["time_s", "strain"]
        for p, idx in sorted(result.percentile_indices.items()):
            head += [f"fe_p{p}_case{idx}", f"pred_p{p}_case{idx}"]
        fh.write(",".join(head) + "\n")
        for i, (t, e) in enumerate(zip(times, strains)):
            row = [repr(float(t)), repr(float(e))]
            for p, idx in sorted(result.percentile_indices.items()):
                row += [repr(float(result.references[idx, i])),
                        repr(float(result.predictions[idx, i]))]
            fh.write(",".join(row) + "\n")
