"""Trajectory dataset I/O, min-max normalization, and block Hankel matrices.

Datasets are plain CSV with a header row naming channels by role:
``t,u:<name>,...,y:<name>,...``.  The time column is optional; when absent
the sample period comes from the caller (default 30 Hz).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError

DEFAULT_DT = 1.0 / 30.0


@dataclass(frozen=True)
class TrajectoryDataset:
    """Time-aligned master-side inputs and slave-side outputs.

    inputs  : (N, m_in) array
    outputs : (N, m_out) array
    dt      : sample period in seconds
    """

    inputs: np.ndarray
    outputs: np.ndarray
    dt: float = DEFAULT_DT
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if inputs.shape[0] != outputs.shape[0]:
            raise DataError(
                f"inputs have {inputs.shape[0]} rows but outputs have "
                f"{outputs.shape[0]}"
            )
        if inputs.shape[0] < 2:
            raise DataError("dataset needs at least 2 rows")
        if self.dt <= 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        for name, arr in (("inputs", inputs), ("outputs", outputs)):
            if not np.all(np.isfinite(arr)):
                r, c = np.argwhere(~np.isfinite(arr))[0]
                raise DataError(f"non-finite value in {name} at row {r}, column {c}")
        if not self.input_names:
            object.__setattr__(
                self, "input_names",
                tuple(f"u{i}" for i in range(inputs.shape[1])))
        if not self.output_names:
            object.__setattr__(
                self, "output_names",
                tuple(f"y{i}" for i in range(outputs.shape[1])))
        if len(self.input_names) != inputs.shape[1]:
            raise DataError("input_names length does not match input columns")
        if len(self.output_names) != outputs.shape[1]:
            raise DataError("output_names length does not match output columns")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def m_in(self) -> int:
        return self.inputs.shape[1]

    @property
    def m_out(self) -> int:
        return self.outputs.shape[1]


@dataclass(frozen=True)
class ChannelScaling:
    """Per-channel min/max statistics for one role (input or output)."""

    role: str  # "input" | "output"
    names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float)
        maxs = np.asarray(self.maxs, dtype=float)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        if np.any(maxs < mins):
            raise DataError("channel max below min")

    @property
    def constant(self) -> np.ndarray:
        return self.maxs == self.mins

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.mins.size:
            raise DataError(
                f"expected {self.mins.size} channels, got {x.shape[1]}")
        span = self.maxs - self.mins
        safe = np.where(self.constant, 1.0, span)
        out = (x - self.mins) / safe
        out[:, self.constant] = 0.0
        return out

    def invert(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.mins.size:
            raise DataError(
                f"expected {self.mins.size} channels, got {x.shape[1]}")
        return x * (self.maxs - self.mins) + self.mins


@dataclass(frozen=True)
class NormalizationParams:
    """Min-max statistics for both roles, retained for inverse transforms."""

    inputs: ChannelScaling
    outputs: ChannelScaling

    def to_dict(self) -> dict:
        entries = []
        for sc in (self.inputs, self.outputs):
            for i, name in enumerate(sc.names):
                entries.append({
                    "name": name,
                    "role": sc.role,
                    "min": float(sc.mins[i]),
                    "max": float(sc.maxs[i]),
                    "constant": bool(sc.constant[i]),
                })
        return {"channels": entries}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationParams":
        by_role = {"input": [], "output": []}
        for e in doc["channels"]:
            by_role[e["role"]].append(e)
        scalings = {}
        for role, entries in by_role.items():
            scalings[role] = ChannelScaling(
                role=role,
                names=tuple(e["name"] for e in entries),
                mins=np.array([e["min"] for e in entries]),
                maxs=np.array([e["max"] for e in entries]),
            )
        return cls(inputs=scalings["input"], outputs=scalings["output"])

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "NormalizationParams":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class HankelBlock:
    """Block Hankel matrix: block row s holds samples s .. s+N-1.

    data has shape (block_rows * vars_per_block, columns); the entry at
    block row s, column j is source sample s+j-1 (1-based), so the matrix
    is constant along anti-diagonals at block granularity.
    """

    data: np.ndarray
    block_rows: int
    columns: int
    vars_per_block: int

    def __post_init__(self):
        expected = self.block_rows * self.vars_per_block
        if self.data.shape != (expected, self.columns):
            raise DataError(
                f"Hankel data shape {self.data.shape} does not match "
                f"({expected}, {self.columns})")

    def block_row(self, s: int) -> np.ndarray:
        """Return block row s (0-based), shape (vars_per_block, columns)."""
        v = self.vars_per_block
        return self.data[s * v:(s + 1) * v, :]


def _fit_scaling(x: np.ndarray, names: tuple[str, ...], role: str) -> ChannelScaling:
    return ChannelScaling(role=role, names=names,
                          mins=x.min(axis=0), maxs=x.max(axis=0))


def normalize(
    dataset: TrajectoryDataset,
    params: NormalizationParams | None = None,
) -> tuple[TrajectoryDataset, NormalizationParams]:
    """Min-max scale each channel into [0, 1]: x' = (x - min) / (max - min).

    Constant channels map to 0 and are flagged in the returned params.
    Pass precomputed ``params`` to reuse identification-split statistics on
    validation data.
    """
    if params is None:
        params = NormalizationParams(
            inputs=_fit_scaling(dataset.inputs, dataset.input_names, "input"),
            outputs=_fit_scaling(dataset.outputs, dataset.output_names, "output"),
        )
    scaled = TrajectoryDataset(
        inputs=params.inputs.apply(dataset.inputs),
        outputs=params.outputs.apply(dataset.outputs),
        dt=dataset.dt,
        input_names=dataset.input_names,
        output_names=dataset.output_names,
    )
    return scaled, params


def denormalize(series: np.ndarray, scaling: ChannelScaling) -> np.ndarray:
    """Inverse of the min-max transform: x = x' * (max - min) + min."""
    return scaling.invert(series)


def build_hankel(series: np.ndarray, block_rows: int, columns: int) -> HankelBlock:
    """Stack ``block_rows`` time-shifted windows of ``series`` into a block
    Hankel matrix with ``columns`` columns.

    series is (N, m); block row s (1-based) holds samples s .. s+columns-1
    transposed into columns.  Requires N >= block_rows + columns - 1.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] == 1 and series.shape[1] > 1:
        series = series.T
    n, m = series.shape
    if block_rows < 1 or columns < 1:
        raise DataError("block_rows and columns must be >= 1")
    if n < block_rows + columns - 1:
        raise DataError(
            f"series of length {n} too short for block_rows={block_rows}, "
            f"columns={columns} (need {block_rows + columns - 1})")
    data = np.empty((block_rows * m, columns))
    for s in range(block_rows):
        data[s * m:(s + 1) * m, :] = series[s:s + columns, :].T
    return HankelBlock(data=data, block_rows=block_rows,
                       columns=columns, vars_per_block=m)


def load_dataset(path, dt: float | None = None) -> TrajectoryDataset:
    """Load a trajectory dataset from CSV.

    Header must name every channel with a ``u:`` or ``y:`` prefix; an
    optional leading ``t`` column supplies timestamps (dt inferred from the
    first two rows unless ``dt`` is given explicitly).
    """
    try:
        f = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset file {path}: {exc}") from exc
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_time = bool(header) and header[0] == "t"
        channels = header[1:] if has_time else header
        u_idx, y_idx, u_names, y_names = [], [], [], []
        offset = 1 if has_time else 0
        for i, name in enumerate(channels):
            if name.startswith("u:"):
                u_idx.append(i + offset)
                u_names.append(name[2:])
            elif name.startswith("y:"):
                y_idx.append(i + offset)
                y_names.append(name[2:])
            else:
                raise DataError(
                    f"{path}: column '{name}' lacks a u:/y: role prefix")
        if not u_idx or not y_idx:
            raise DataError(f"{path}: need at least one u: and one y: column")
        rows = []
        times = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} fields, "
                    f"expected {len(header)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if has_time:
                times.append(vals[0])
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path}: fewer than 2 data rows")
    data = np.array(rows, dtype=float)
    for r, c in np.argwhere(~np.isfinite(data)):
        raise DataError(f"{path}: non-finite value at row {r + 1}, column {c}")
    if dt is None:
        dt = (times[1] - times[0]) if has_time else DEFAULT_DT
    return TrajectoryDataset(
        inputs=data[:, u_idx],
        outputs=data[:, y_idx],
        dt=dt,
        input_names=tuple(u_names),
        output_names=tuple(y_names),
    )


def save_dataset(dataset: TrajectoryDataset, path, with_time: bool = True) -> None:
    """Write a dataset back to the CSV layout accepted by load_dataset."""
    header = []
    if with_time:
        header.append("t")
    header += [f"u:{n}" for n in dataset.input_names]
    header += [f"y:{n}" for n in dataset.output_names]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for k in range(dataset.n_samples):
            row = []
            if with_time:
                row.append(repr(float(k * dataset.dt)))
            row += [repr(float(v)) for v in dataset.inputs[k]]
            row += [repr(float(v)) for v in dataset.outputs[k]]
            writer.writerow(row)
