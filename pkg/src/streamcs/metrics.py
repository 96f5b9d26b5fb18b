"""Evaluation quantities for recovery experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UndefinedMetricError",
    "ErrorSummary",
    "normalized_error",
    "stream_nev",
    "tpr_fpr",
    "sampling_efficiency",
    "sampling_efficiency_limit",
    "write_summary",
]


class UndefinedMetricError(ValueError):
    """The metric is undefined for this input (e.g. all-zero reference)."""


@dataclass
class ErrorSummary:
    ne_per_window: list[float] = field(default_factory=list)
    stream_nev: float = float("nan")
    tpr: float = float("nan")
    fpr: float = float("nan")
    mean_iterations: float = float("nan")
    wall_times: dict[str, float] = field(default_factory=dict)
    skipped_windows: int = 0


def normalized_error(x_bar, x_true) -> float:
    """||x_bar - x_true||_2 / ||x_true||_2 for one window."""
    x_bar = np.asarray(x_bar, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_bar.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {x_bar.shape} vs {x_true.shape}")
    denom = np.linalg.norm(x_true)
    if denom == 0.0:
        raise UndefinedMetricError("reference window is all zero")
    return float(np.linalg.norm(x_bar - x_true) / denom)


def stream_nev(x_bar_seq, x_seq) -> float:
    """Ratio of total squared estimation error to total signal energy."""
    est = np.asarray(x_bar_seq, dtype=float)
    ref = np.asarray(x_seq, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    denom = float(ref @ ref)
    if denom == 0.0:
        raise UndefinedMetricError("reference stream has zero energy")
    diff = est - ref
    return float(diff @ diff) / denom


def tpr_fpr(detected, truth, n: int) -> tuple[float, float]:
    """True/false positive rates of a detected support against the truth."""
    det = set(int(i) for i in detected)
    tru = set(int(i) for i in truth)
    for s in (det, tru):
        if s and (min(s) < 0 or max(s) >= n):
            raise ValueError(f"indices out of range [0, {n})")
    if not tru:
        raise UndefinedMetricError("true support is empty; TPR undefined")
    tpr = len(det & tru) / len(tru)
    neg = n - len(tru)
    fpr = len(det - tru) / neg if neg > 0 else 0.0
    return tpr, fpr


def sampling_efficiency(m: int, n: int, tau: int, i: int) -> float:
    """Samples taken per retrieved stream entry after i windows: i*m / (n + (i-1)*tau)."""
    if i < 1:
        raise ValueError(f"window count must be >= 1, got {i}")
    return i * m / (n + (i - 1) * tau)


def sampling_efficiency_limit(m: int, tau: int) -> float:
    """Asymptotic samples-per-entry ratio m / tau."""
    return m / tau


def write_summary(path, rows) -> None:
    """CSV rows of (experiment_id, n, tau, m, sigma, seed, metric_name, value)."""
    with open(path, "w") as fh:
        fh.write("experiment_id,n,tau,m,sigma,seed,metric_name,value\n")
        for exp_id, n, tau, m, sigma, seed, name, value in rows:
            fh.write(f"{exp_id},{n},{tau},{m},{sigma},{seed},{name},{value:.17g}\n")
