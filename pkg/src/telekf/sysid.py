"""MOESP subspace identification of discrete-time state-space models.

The pipeline: stack input and output block Hankel matrices, take the
lower-triangular factor of an LQ decomposition (computed as QR of the
transpose), SVD the output-residual block to expose the system order,
then recover C and A from the extended observability matrix and B, D
from a least-squares system built out of the discarded left singular
vectors and the L-factor partitions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .dataio import NormalizationParams, build_hankel
from .errors import DataError, NumericalError


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete-time model x_{k+1} = A x_k + B u_k, y_k = C x_k + D u_k."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float = 1.0 / 30.0
    norm_params: NormalizationParams | None = None

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name,
                               np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DataError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DataError(f"B row count {self.B.shape[0]} != order {n}")
        if self.C.shape[1] != n:
            raise DataError(f"C column count {self.C.shape[1]} != order {n}")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise DataError(
                f"D shape {self.D.shape} inconsistent with C/B "
                f"({self.C.shape[0]}, {self.B.shape[1]})")
        for name in "ABCD":
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalError(f"non-finite entries in {name}")

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def m_in(self) -> int:
        return self.B.shape[1]

    @property
    def m_out(self) -> int:
        return self.C.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def is_unstable(self) -> bool:
        return self.spectral_radius >= 1.0

    def markov_parameters(self, count: int) -> list[np.ndarray]:
        """Impulse-response coefficients: D, CB, CAB, CA^2 B, ...

        Invariant under state similarity transforms, hence the right
        target for identification-quality checks.
        """
        params = [self.D.copy()]
        CAk = self.C.copy()
        for _ in range(count - 1):
            params.append(CAk @ self.B)
            CAk = CAk @ self.A
        return params

    def to_dict(self) -> dict:
        doc = {
            "order": self.order,
            "dt": self.dt,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
            "spectral_radius": self.spectral_radius,
            "flags": {"unstable": self.is_unstable},
        }
        if self.norm_params is not None:
            doc["norm_params"] = self.norm_params.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "StateSpaceModel":
        norm = doc.get("norm_params")
        return cls(
            A=np.array(doc["A"]), B=np.array(doc["B"]),
            C=np.array(doc["C"]), D=np.array(doc["D"]),
            dt=doc["dt"],
            norm_params=NormalizationParams.from_dict(norm) if norm else None,
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "StateSpaceModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class SubspaceDecomposition:
    """LQ/SVD factorization of the stacked [U; Y] Hankel system.

    R11, R21, R22 partition the lower-triangular L-factor; U1 holds the
    left singular vectors of R22 and singular_values its spectrum in
    descending order.
    """

    singular_values: np.ndarray
    R11: np.ndarray
    R21: np.ndarray
    R22: np.ndarray
    U1: np.ndarray
    block_rows: int
    m_in: int
    m_out: int
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        ss = np.asarray(self.singular_values, dtype=float)
        if np.any(ss < 0) or np.any(np.diff(ss) > 0):
            raise NumericalError("singular values must be descending and >= 0")


def moesp_decompose(inputs: np.ndarray, outputs: np.ndarray,
                    block_rows: int = 20) -> SubspaceDecomposition:
    """Form the input/output block Hankel stack and factor it.

    inputs is (N, m_in), outputs (N, m_out), both normalized.  Needs at
    least 2 * block_rows * max(m_in, m_out) + 1 samples so the LQ step is
    well posed.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    if inputs.ndim != 2 or outputs.ndim != 2:
        raise DataError("inputs and outputs must be 2-D")
    if inputs.shape[0] != outputs.shape[0]:
        raise DataError("inputs and outputs must have the same length")
    n_samples = inputs.shape[0]
    m_in, m_out = inputs.shape[1], outputs.shape[1]
    d = block_rows
    if n_samples < 2 * d * max(m_in, m_out) + 1:
        raise DataError(
            f"need at least {2 * d * max(m_in, m_out) + 1} samples for "
            f"block_rows={d}, got {n_samples}")

    cols = n_samples - d + 1
    U = build_hankel(inputs, d, cols).data
    Y = build_hankel(outputs, d, cols).data

    # LQ of [U; Y]: lower-triangular factor via QR of the transpose.
    stacked = np.vstack([U, Y])
    R = np.linalg.qr(stacked.T, mode="r")
    L = np.triu(R).T
    du = d * m_in
    R11 = L[:du, :du]
    R21 = L[du:, :du]
    R22 = L[du:, du:]

    U1, ss, _ = np.linalg.svd(R22)

    warns = []
    if du > 0:
        diag = np.abs(np.diag(R11))
        scale = diag.max() if diag.size else 0.0
        if scale == 0.0 or np.any(diag < 1e-12 * scale):
            warns.append("input Hankel block is rank deficient "
                         "(inputs not persistently exciting)")
    return SubspaceDecomposition(
        singular_values=ss, R11=R11, R21=R21, R22=R22, U1=U1,
        block_rows=d, m_in=m_in, m_out=m_out, warnings=tuple(warns))


def select_order(singular_values: np.ndarray, criterion: str = "energy",
                 energy: float = 0.85, fixed: int | None = None,
                 threshold: float | None = None) -> int:
    """Pick the model order from the singular value spectrum.

    criterion:
        "energy"    -- smallest n whose cumulative sum reaches ``energy``
                       of the total (default 0.85)
        "fixed"     -- return ``fixed`` as given
        "threshold" -- count of singular values above threshold * ss[0]
    """
    ss = np.asarray(singular_values, dtype=float)
    total = ss.sum()
    if total <= 0:
        raise NumericalError("degenerate data: all singular values are zero")
    if criterion == "fixed":
        if fixed is None or fixed < 1:
            raise DataError("fixed order criterion needs fixed >= 1")
        return int(fixed)
    if criterion == "threshold":
        if threshold is None:
            raise DataError("threshold criterion needs a threshold ratio")
        return max(1, int(np.sum(ss > threshold * ss[0])))
    if criterion == "energy":
        ratios = np.cumsum(ss) / total
        return int(np.searchsorted(ratios, energy - 1e-12) + 1)
    raise DataError(f"unknown order criterion '{criterion}'")


def realize(decomp: SubspaceDecomposition, order: int,
            dt: float = 1.0 / 30.0,
            norm_params: NormalizationParams | None = None,
            cond_limit: float = 1e12) -> StateSpaceModel:
    """Recover (A, B, C, D) from the decomposition at the given order.

    C is the top block of the scaled observability estimate Ok; A solves
    the observability shift equation in least squares; B and D solve the
    stacked system built from the discarded singular vectors and the
    R21 * R11^-1 product.
    """
    d, m_in, m_out = decomp.block_rows, decomp.m_in, decomp.m_out
    ss = decomp.singular_values
    n_pos = int(np.sum(ss > 0))
    if not 1 <= order <= n_pos:
        raise DataError(f"order {order} outside 1..{n_pos} positive singular values")
    if d * m_out <= order:
        raise DataError(
            f"block_rows * m_out = {d * m_out} must exceed order {order}")
    n = order

    Ok = decomp.U1[:, :n] * np.sqrt(ss[:n])
    C = Ok[:m_out, :]

    # Shift equation: Ok[0:(d-1)*m_out] A = Ok[m_out:d*m_out], least squares.
    top = Ok[:m_out * (d - 1), :]
    bottom = Ok[m_out:m_out * d, :]
    cond = np.linalg.cond(top)
    if cond > cond_limit:
        raise NumericalError(
            f"ill-conditioned observability shift equation (cond={cond:.3e})")
    A, *_ = np.linalg.lstsq(top, bottom, rcond=None)

    # B, D from L1 = U1[:, n:].T and M1 = L1 R21 R11^-1.
    L1 = decomp.U1[:, n:].T
    r11_cond = np.linalg.cond(decomp.R11)
    if not np.isfinite(r11_cond) or r11_cond > cond_limit:
        raise NumericalError(
            f"singular R11 (insufficient input excitation, cond={r11_cond:.3e})")
    M1 = L1 @ decomp.R21 @ np.linalg.inv(decomp.R11)

    # Block column j of M1 equals L1_j D + [L1_{j+1} .. L1_d] Ok[:(d-j)m_out] B;
    # stack all d block equations and solve for [D; B] jointly.
    rows = L1.shape[0]
    L_blocks = []
    M_blocks = []
    for j in range(d):
        Lj = L1[:, j * m_out:(j + 1) * m_out]
        tail = L1[:, (j + 1) * m_out:]
        if tail.shape[1]:
            GB = tail @ Ok[:(d - j - 1) * m_out, :]
        else:
            GB = np.zeros((rows, n))
        L_blocks.append(np.hstack([Lj, GB]))
        M_blocks.append(M1[:, j * m_in:(j + 1) * m_in])
    L_mat = np.vstack(L_blocks)
    M_mat = np.vstack(M_blocks)
    DB, *_ = np.linalg.lstsq(L_mat, M_mat, rcond=None)
    D = DB[:m_out, :]
    B = DB[m_out:, :]

    model = StateSpaceModel(A=A, B=B, C=C, D=D, dt=dt, norm_params=norm_params)
    if model.is_unstable:
        warnings.warn(
            f"identified model is unstable (spectral radius "
            f"{model.spectral_radius:.4f})", stacklevel=2)
    return model


def identify(inputs: np.ndarray, outputs: np.ndarray, block_rows: int = 20,
             criterion: str = "energy", energy: float = 0.85,
             fixed: int | None = None, threshold: float | None = None,
             dt: float = 1.0 / 30.0,
             norm_params: NormalizationParams | None = None,
             ) -> tuple[StateSpaceModel, SubspaceDecomposition, int]:
    """Convenience wrapper: decompose, select order, realize."""
    decomp = moesp_decompose(inputs, outputs, block_rows)
    order = select_order(decomp.singular_values, criterion=criterion,
                         energy=energy, fixed=fixed, threshold=threshold)
    model = realize(decomp, order, dt=dt, norm_params=norm_params)
    return model, decomp, order


def simulate(model: StateSpaceModel, inputs: np.ndarray,
             x0: np.ndarray | None = None) -> np.ndarray:
    """Run the model open loop: y_k = C x_k + D u_k with
    x_{k+1} = A x_k + B u_k, starting from x0 (default zero)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != model.m_in:
        raise DataError(
            f"input has {inputs.shape[1]} channels, model expects {model.m_in}")
    n = model.order
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    out = np.empty((inputs.shape[0], model.m_out))
    A, B, C, D = model.A, model.B, model.C, model.D
    for k in range(inputs.shape[0]):
        u = inputs[k]
        out[k] = C @ x + D @ u
        x = A @ x + B @ u
    return out
