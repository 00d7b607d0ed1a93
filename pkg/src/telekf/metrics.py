"""Estimation quality metrics: per-channel RMSE, accuracy percentage,
innovation whiteness, and open-loop validation fit reports.

The accuracy percentage has no single canonical definition in the
teleoperation literature; every report therefore stamps the formula it
used (``metric_def``).  The default is range-normalized:
100 * (1 - RMSE / (max(truth) - min(truth))).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .netsim import NetworkScenario
from .sysid import StateSpaceModel, simulate

DEFAULT_METRIC = "nrmse_range"
ACCURACY_METRICS = ("nrmse_range", "one_minus_rmse", "nmae")

#: Published (RMSE, accuracy %) pairs used by the calibration utility.
REFERENCE_ACCURACY_PAIRS = (
    (0.0331, 94.80),
    (0.0297, 95.99),
    (0.0243, 97.67),
)


@dataclass(frozen=True)
class EstimationReport:
    """Per-channel quality summary for one filter run."""

    rmse: np.ndarray
    accuracy_pct: np.ndarray
    whiteness: np.ndarray
    n_samples: int
    metric_def: str
    burn_in: int = 0
    scenario: NetworkScenario | None = None

    def __post_init__(self):
        for name in ("rmse", "accuracy_pct", "whiteness"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        if np.any(self.rmse < 0):
            raise DataError("rmse must be non-negative")
        if np.any((self.accuracy_pct < 0) | (self.accuracy_pct > 100)):
            raise DataError("accuracy_pct must lie in [0, 100]")
        if not self.metric_def:
            raise DataError("metric_def must be recorded")

    def to_dict(self) -> dict:
        doc = {
            "rmse": self.rmse.tolist(),
            "accuracy_pct": self.accuracy_pct.tolist(),
            "whiteness": self.whiteness.tolist(),
            "n_samples": self.n_samples,
            "metric_def": self.metric_def,
            "burn_in": self.burn_in,
        }
        if self.scenario is not None:
            doc["scenario"] = self.scenario.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EstimationReport":
        sc = doc.get("scenario")
        return cls(
            rmse=np.array(doc["rmse"]),
            accuracy_pct=np.array(doc["accuracy_pct"]),
            whiteness=np.array(doc["whiteness"]),
            n_samples=doc["n_samples"],
            metric_def=doc["metric_def"],
            burn_in=doc.get("burn_in", 0),
            scenario=NetworkScenario.from_dict(sc) if sc else None,
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def _check_pair(estimates, truth):
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise DataError(
            f"shape mismatch: estimates {estimates.shape} vs truth {truth.shape}")
    if estimates.size == 0:
        raise DataError("empty series")
    return estimates, truth


def rmse(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared error over all entries."""
    estimates, truth = _check_pair(estimates, truth)
    return float(np.sqrt(np.mean((estimates - truth) ** 2)))


def accuracy_pct(estimates: np.ndarray, truth: np.ndarray,
                 metric_def: str = DEFAULT_METRIC) -> float:
    """Accuracy percentage under the named formula, clipped to [0, 100].

    "nrmse_range"    -- 100 * (1 - RMSE / range(truth))
    "one_minus_rmse" -- 100 * (1 - RMSE); meaningful on [0, 1] data
    "nmae"           -- 100 * (1 - MAE / range(truth))
    """
    estimates, truth = _check_pair(estimates, truth)
    if metric_def == "one_minus_rmse":
        acc = 100.0 * (1.0 - rmse(estimates, truth))
    elif metric_def in ("nrmse_range", "nmae"):
        span = float(truth.max() - truth.min())
        if span <= 0:
            raise DataError("truth range is zero; range-normalized accuracy undefined")
        if metric_def == "nrmse_range":
            acc = 100.0 * (1.0 - rmse(estimates, truth) / span)
        else:
            acc = 100.0 * (1.0 - float(np.mean(np.abs(estimates - truth))) / span)
    else:
        raise DataError(f"unknown accuracy metric '{metric_def}'")
    return float(np.clip(acc, 0.0, 100.0))


def innovation_whiteness(innovations: np.ndarray, max_lag: int = 10
                         ) -> tuple[np.ndarray, float]:
    """Max |sample autocorrelation| over lags 1..max_lag, per channel,
    plus the 95% confidence band 1.96/sqrt(N)."""
    x = np.atleast_2d(np.asarray(innovations, dtype=float))
    if x.shape[0] == 1 and x.shape[1] > 1:
        x = x.T
    n = x.shape[0]
    if max_lag < 1 or n <= max_lag:
        raise DataError(f"need more than max_lag={max_lag} samples, got {n}")
    centered = x - x.mean(axis=0)
    var = np.sum(centered ** 2, axis=0)
    if np.any(var == 0):
        raise DataError("zero-variance channel: autocorrelation undefined")
    stats = np.zeros(x.shape[1])
    for lag in range(1, max_lag + 1):
        acf = np.sum(centered[lag:] * centered[:-lag], axis=0) / var
        stats = np.maximum(stats, np.abs(acf))
    return stats, 1.96 / np.sqrt(n)


def autocorrelations(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample autocorrelation of each channel at lags 1..max_lag,
    shape (max_lag, channels)."""
    x = np.atleast_2d(np.asarray(series, dtype=float))
    if x.shape[0] == 1 and x.shape[1] > 1:
        x = x.T
    n = x.shape[0]
    if n <= max_lag:
        raise DataError("series shorter than max_lag")
    centered = x - x.mean(axis=0)
    var = np.sum(centered ** 2, axis=0)
    if np.any(var == 0):
        raise DataError("zero-variance channel: autocorrelation undefined")
    out = np.empty((max_lag, x.shape[1]))
    for lag in range(1, max_lag + 1):
        out[lag - 1] = np.sum(centered[lag:] * centered[:-lag], axis=0) / var
    return out


def report_run(estimates: np.ndarray, truth: np.ndarray,
               innovations: np.ndarray | None = None,
               metric_def: str = DEFAULT_METRIC, burn_in: int = 0,
               max_lag: int = 10,
               scenario: NetworkScenario | None = None) -> EstimationReport:
    """Summarize a filter run against ground truth, excluding the first
    ``burn_in`` samples from the error metrics."""
    estimates, truth = _check_pair(estimates, truth)
    estimates = np.atleast_2d(estimates)
    truth = np.atleast_2d(truth)
    if burn_in >= estimates.shape[0]:
        raise DataError(f"burn_in {burn_in} >= series length {estimates.shape[0]}")
    e, t = estimates[burn_in:], truth[burn_in:]
    channels = e.shape[1]
    rmses = np.array([rmse(e[:, j], t[:, j]) for j in range(channels)])
    accs = np.array([accuracy_pct(e[:, j], t[:, j], metric_def)
                     for j in range(channels)])
    if innovations is not None and innovations.shape[0] - burn_in > max_lag:
        white, _ = innovation_whiteness(innovations[burn_in:], max_lag)
    else:
        white = np.full(channels, np.nan)
    return EstimationReport(rmse=rmses, accuracy_pct=accs, whiteness=white,
                            n_samples=e.shape[0], metric_def=metric_def,
                            burn_in=burn_in, scenario=scenario)


def fit_report(model: StateSpaceModel, inputs: np.ndarray,
               outputs: np.ndarray, metric_def: str = DEFAULT_METRIC,
               burn_in: int = 0) -> EstimationReport:
    """Open-loop validation: simulate the model on the given inputs and
    score the prediction against the given outputs per channel."""
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    if outputs.shape[1] != model.m_out:
        raise DataError(
            f"validation outputs have {outputs.shape[1]} channels, "
            f"model expects {model.m_out}")
    predicted = simulate(model, inputs)
    return report_run(predicted, outputs, metric_def=metric_def,
                      burn_in=burn_in)


def calibrate_accuracy(pairs=REFERENCE_ACCURACY_PAIRS) -> dict:
    """Score candidate accuracy formulas against published (RMSE, accuracy)
    pairs and return them ranked by fit.

    Each candidate maps RMSE r to accuracy; range-normalized candidates get
    their range parameter fitted by least squares.  The published pairs are
    mutually inconsistent, so even the best candidate carries a nonzero
    residual; the result records it.
    """
    pairs = np.asarray(pairs, dtype=float)
    r, a = pairs[:, 0], pairs[:, 1]

    candidates = {}
    # 100 (1 - r): no free parameter.
    candidates["one_minus_rmse"] = {
        "predicted": 100.0 * (1.0 - r), "params": {}}
    # 100 (1 - r / rho): rho fitted. Minimize sum (a - 100 + 100 r/rho)^2
    # over s = 1/rho (linear least squares in s).
    y = a - 100.0
    s = float((100.0 * r) @ y / ((100.0 * r) @ (100.0 * r))) * -1.0
    if s > 0:
        candidates["nrmse_range"] = {
            "predicted": 100.0 * (1.0 - s * r), "params": {"range": 1.0 / s}}
    # 100 (1 - c r^2): c fitted.
    c = float(-(100.0 * r ** 2) @ y / ((100.0 * r ** 2) @ (100.0 * r ** 2)))
    candidates["one_minus_c_rmse_sq"] = {
        "predicted": 100.0 * (1.0 - c * r ** 2), "params": {"c": c}}

    scored = []
    for name, cand in candidates.items():
        resid = float(np.sqrt(np.mean((cand["predicted"] - a) ** 2)))
        scored.append({"metric_def": name, "rms_residual_pct": resid,
                       "params": cand["params"],
                       "predicted": list(np.round(cand["predicted"], 4))})
    scored.sort(key=lambda c: c["rms_residual_pct"])
    return {
        "pairs": pairs.tolist(),
        "candidates": scored,
        "best": scored[0]["metric_def"],
    }
