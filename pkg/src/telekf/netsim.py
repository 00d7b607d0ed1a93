"""Channel impairment simulation: constant delay, Gaussian jitter, and
Bernoulli packet loss with last-value hold.

Delay and jitter are specified in milliseconds and converted to sample
offsets through the stream's dt.  Randomness comes from a pinned PCG64
generator; the scenario seed is split into two independent substreams
(jitter normals, loss Bernoullis) so results are reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class NetworkScenario:
    """Channel parameters: delay nd (ms), jitter std nj (ms), loss
    probability np in [0, 1], and a 64-bit RNG seed."""

    nd_ms: float
    nj_ms: float
    loss_prob: float
    seed: int = 0
    delay_range_ms: tuple[float, float] | None = None
    label: str = ""

    def __post_init__(self):
        if self.nd_ms < 0 or self.nj_ms < 0:
            raise DataError("delay and jitter must be non-negative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise DataError(f"loss probability {self.loss_prob} outside [0, 1]")

    def with_seed(self, seed: int) -> "NetworkScenario":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        doc = {
            "nd_ms": self.nd_ms,
            "nj_ms": self.nj_ms,
            "np": self.loss_prob,
            "np_pct": self.loss_prob * 100.0,
            "seed": self.seed,
            "label": self.label,
        }
        if self.delay_range_ms is not None:
            doc["delay_range_ms"] = list(self.delay_range_ms)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkScenario":
        if "np" in doc:
            loss = float(doc["np"])
        elif "np_pct" in doc:
            loss = float(doc["np_pct"]) / 100.0
        else:
            raise DataError("scenario needs 'np' (fraction) or 'np_pct' (percent)")
        rng = doc.get("delay_range_ms")
        return cls(
            nd_ms=float(doc["nd_ms"]),
            nj_ms=float(doc["nj_ms"]),
            loss_prob=loss,
            seed=int(doc.get("seed", 0)),
            delay_range_ms=tuple(rng) if rng else None,
            label=doc.get("label", ""),
        )


@dataclass(frozen=True)
class ImpairedStream:
    """What the estimator sees after the channel.

    observed row k equals clean row source_index[k]-1 when delivered;
    lost packets hold the previous observed row and carry source_index 0.
    source_index is 1-based to match the delay clamp max(1, ...).
    """

    observed: np.ndarray
    source_index: np.ndarray
    loss_mask: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.observed.shape[0]


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # round() in the delay formula is half-away-from-zero, not banker's.
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def impair(clean: np.ndarray, scenario: NetworkScenario, dt: float,
           sample_delay_range: bool = False) -> ImpairedStream:
    """Pass a clean measurement stream through the impaired channel.

    For each sample k >= 2 (1-based) the delivered index is
    max(1, k - round(nd/dt + g_k * nj/dt)) with g_k standard normal and
    nd, nj converted from ms to samples; with probability loss_prob the
    packet is dropped and the previous observed value is held.  Sample 1
    always delivers clean[1].  Deterministic for a fixed seed.

    With ``sample_delay_range`` and a scenario carrying delay_range_ms,
    each sample draws its delay uniformly over the range instead of using
    the fixed nd_ms.
    """
    clean = np.atleast_2d(np.asarray(clean, dtype=float))
    if clean.shape[0] < 2:
        raise DataError("clean stream needs at least 2 rows")
    if dt <= 0:
        raise DataError(f"dt must be positive, got {dt}")
    n = clean.shape[0]

    jitter_ss, loss_ss, delay_ss = np.random.SeedSequence(scenario.seed).spawn(3)
    jitter_rng = np.random.Generator(np.random.PCG64(jitter_ss))
    loss_rng = np.random.Generator(np.random.PCG64(loss_ss))

    g = jitter_rng.standard_normal(n - 1)
    lost = loss_rng.random(n - 1) <= scenario.loss_prob
    # Degenerate endpoints stay exact: no draws consumed beyond the above.
    if scenario.loss_prob == 0.0:
        lost[:] = False
    elif scenario.loss_prob == 1.0:
        lost[:] = True

    ms_to_samples = 1.0 / (dt * 1000.0)
    if sample_delay_range and scenario.delay_range_ms is not None:
        delay_rng = np.random.Generator(np.random.PCG64(delay_ss))
        lo, hi = scenario.delay_range_ms
        nd = delay_rng.uniform(lo, hi, n - 1) * ms_to_samples
    else:
        nd = scenario.nd_ms * ms_to_samples
    offset = _round_half_up(nd + g * scenario.nj_ms * ms_to_samples)

    k = np.arange(2, n + 1)  # 1-based sample indices
    # Lower clamp per the delay formula; upper clamp keeps negative jitter
    # draws from indexing past the end of the stream.
    delivered = np.clip((k - offset).astype(int), 1, n)

    source_index = np.empty(n, dtype=int)
    source_index[0] = 1
    source_index[1:] = np.where(lost, 0, delivered)

    # Held samples replay the last delivered index (forward fill).
    effective = np.empty(n, dtype=int)
    effective[0] = 1
    effective[1:] = delivered
    held = np.concatenate(([False], lost))
    idx = np.where(~held, np.arange(n), 0)
    np.maximum.accumulate(idx, out=idx)
    filled = effective[idx]

    observed = clean[filled - 1, :]
    loss_mask = np.concatenate(([False], lost))
    return ImpairedStream(observed=observed, source_index=source_index,
                          loss_mask=loss_mask)


def scenario_suite(base_seed: int = 0) -> list[NetworkScenario]:
    """The six canonical Tactile-Internet scenarios.

    Ranged delays are collapsed to their midpoint; the range is kept as
    metadata so a per-sample uniform draw can be enabled instead.  Loss
    percentages are stored as fractions (0.01% -> 0.0001).
    """
    rows = [
        # (nj_ms, nd_ms or (lo, hi), loss %)
        (0.5, (0.5, 2.0), 0.01),
        (0.5, (0.5, 2.0), 0.001),
        (0.1, 1.0, 0.01),
        (2.0, 5.0, 0.001),
        (1.0, 1.0, 0.001),
        (3.0, (200.0, 5000.0), 1.0),
    ]
    suite = []
    for i, (nj, nd, loss_pct) in enumerate(rows):
        if isinstance(nd, tuple):
            nd_ms = (nd[0] + nd[1]) / 2.0
            rng = nd
        else:
            nd_ms = nd
            rng = None
        suite.append(NetworkScenario(
            nd_ms=nd_ms, nj_ms=nj, loss_prob=loss_pct / 100.0,
            seed=base_seed + i, delay_range_ms=rng,
            label=f"scenario_{i + 1}"))
    return suite


def save_scenarios(scenarios: list[NetworkScenario], path) -> None:
    with open(path, "w") as f:
        json.dump([s.to_dict() for s in scenarios], f, indent=2)


def load_scenarios(path) -> list[NetworkScenario]:
    with open(path) as f:
        doc = json.load(f)
    return [NetworkScenario.from_dict(d) for d in doc]
