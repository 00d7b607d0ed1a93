"""Kalman filtering over impaired measurement streams, with empirical
bootstrap of the process and measurement noise covariances from residuals.

The measurement update follows the sequential per-row form: each output
channel is applied as a scalar update against the corresponding diagonal
entry of R.  For diagonal R this is algebraically identical to the joint
vector update; a batch mode is available for full R matrices.  Covariance
updates use the Joseph form internally for numerical robustness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .netsim import ImpairedStream, NetworkScenario
from .sysid import StateSpaceModel


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _psd_clip(M: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues to the floor."""
    M = _symmetrize(np.asarray(M, dtype=float))
    w, V = np.linalg.eigh(M)
    if w.min() >= floor:
        return M
    return _symmetrize(V @ np.diag(np.maximum(w, floor)) @ V.T)


@dataclass(frozen=True)
class NoiseModel:
    """Process (Q) and measurement (R) noise covariances."""

    Q: np.ndarray
    R: np.ndarray
    provenance: str = "initial"  # "initial" | "empirical"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1]:
                raise DataError(f"{name} must be square, got {M.shape}")
            if np.abs(M - M.T).max() > 1e-12 * max(1.0, np.abs(M).max()):
                raise DataError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(M).min() < -1e-12 * max(1.0, np.abs(M).max()):
                raise DataError(f"{name} is not positive semidefinite")
        object.__setattr__(self, "Q", _psd_clip(Q))
        object.__setattr__(self, "R", _psd_clip(R))

    @classmethod
    def initial(cls, order: int, m_out: int,
                eps_q: float = 1e-4, eps_r: float = 1e-4) -> "NoiseModel":
        """Small isotropic guesses Q = eps_q I, R = eps_r I."""
        if eps_q <= 0 or eps_r <= 0:
            raise DataError("eps_q and eps_r must be positive")
        return cls(Q=eps_q * np.eye(order), R=eps_r * np.eye(m_out),
                   provenance="initial")

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "R": self.R.tolist(),
                "provenance": self.provenance}

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseModel":
        return cls(Q=np.array(doc["Q"]), R=np.array(doc["R"]),
                   provenance=doc.get("provenance", "initial"))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "NoiseModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class FilterState:
    """Current estimate: state vector x, covariance P, sample index k."""

    x: np.ndarray
    P: np.ndarray
    k: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if P.shape != (x.size, x.size):
            raise DataError(f"P shape {P.shape} inconsistent with state size {x.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", _symmetrize(P))


@dataclass(frozen=True)
class EstimationRun:
    """Filter trajectory: per-step output estimates C x_hat, innovations
    z - C x_prior, and the posterior state sequence."""

    estimates: np.ndarray
    innovations: np.ndarray
    states: np.ndarray
    scenario: NetworkScenario | None = None


def kf_predict(state: FilterState, u: np.ndarray, model: StateSpaceModel,
               noise: NoiseModel) -> FilterState:
    """Time update: x' = A x + B u, P' = A P A^T + Q."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != model.m_in:
        raise DataError(f"input size {u.size}, model expects {model.m_in}")
    A = model.A
    x = A @ state.x + model.B @ u
    P = _symmetrize(A @ state.P @ A.T + noise.Q)
    return FilterState(x=x, P=P, k=state.k + 1)


def _scalar_update(x: np.ndarray, P: np.ndarray, c: np.ndarray,
                   z: float, r: float) -> tuple[np.ndarray, np.ndarray]:
    s = float(c @ P @ c) + r
    if s <= 0:
        raise NumericalError(f"degenerate innovation variance {s}")
    K = (P @ c) / s
    x = x + K * (z - float(c @ x))
    IKc = np.eye(x.size) - np.outer(K, c)
    P = IKc @ P @ IKc.T + r * np.outer(K, K)  # Joseph form
    return x, _symmetrize(P)


def kf_update(prior: FilterState, z: np.ndarray, model: StateSpaceModel,
              noise: NoiseModel, sequential: bool = True) -> FilterState:
    """Measurement update.

    sequential=True applies each row of C as a scalar update against the
    matching diagonal entry of R (off-diagonal R is ignored on this path);
    sequential=False does the joint vector update with the full R.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != model.m_out:
        raise DataError(f"measurement size {z.size}, model expects {model.m_out}")
    if not np.all(np.isfinite(z)):
        raise DataError("non-finite measurement")
    C, R = model.C, noise.R
    x, P = prior.x, prior.P
    if sequential:
        for d in range(model.m_out):
            x, P = _scalar_update(x, P, C[d], float(z[d]), float(R[d, d]))
    else:
        S = C @ P @ C.T + R
        try:
            K = np.linalg.solve(S.T, (P @ C.T).T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"degenerate innovation covariance: {exc}") from exc
        x = x + K @ (z - C @ x)
        IKC = np.eye(x.size) - K @ C
        P = _symmetrize(IKC @ P @ IKC.T + K @ R @ K.T)
    return FilterState(x=x, P=_psd_clip(P, floor=0.0), k=prior.k)


def run_filter(model: StateSpaceModel, noise: NoiseModel, inputs: np.ndarray,
               measurements: ImpairedStream | np.ndarray,
               x0: np.ndarray | None = None, P0: np.ndarray | None = None,
               sequential: bool = True,
               scenario: NetworkScenario | None = None) -> EstimationRun:
    """Run predict/update over the full stream.

    Sample 1 keeps the initial state (x0 = 0, P0 = I by default); from
    sample 2 on, the filter predicts with the previous input and updates
    against the observed (possibly impaired) measurement.
    """
    if isinstance(measurements, ImpairedStream):
        z_seq = measurements.observed
        if scenario is None:
            scenario = getattr(measurements, "scenario", None)
    else:
        z_seq = np.atleast_2d(np.asarray(measurements, dtype=float))
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n_samples = inputs.shape[0]
    if z_seq.shape[0] != n_samples:
        raise DataError(
            f"inputs ({n_samples}) and measurements ({z_seq.shape[0]}) "
            f"have different lengths")
    n, m_out = model.order, model.m_out

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    P = np.eye(n) if P0 is None else _symmetrize(np.atleast_2d(np.asarray(P0, dtype=float)))
    A, B, C = model.A, model.B, model.C
    Q, R = noise.Q, noise.R
    Rdiag = np.diag(R).copy()

    innovations = np.empty((n_samples, m_out))
    states = np.empty((n_samples, n))
    innovations[0] = z_seq[0] - C @ x
    states[0] = x

    AT = A.T
    Bu = inputs @ B.T  # precompute B u(k) for every step
    rows = list(C)
    for k in range(1, n_samples):
        # Predict with the previous input.
        x = A @ x + Bu[k - 1]
        P = A @ P @ AT + Q
        P += P.T
        P *= 0.5
        z = z_seq[k]
        innovations[k] = z - C @ x
        try:
            if sequential:
                for d in range(m_out):
                    c = rows[d]
                    Pc = P @ c
                    s = c @ Pc + Rdiag[d]
                    if s <= 0:
                        raise NumericalError(f"degenerate innovation variance {s}")
                    x = x + Pc * ((z[d] - c @ x) / s)
                    # Joseph form collapsed for a scalar gain K = Pc/s:
                    # (I-Kc) P (I-Kc)^T + r K K^T == P - Pc Pc^T / s,
                    # which is symmetric by construction.
                    P -= Pc[:, None] * (Pc / s)
            else:
                st = kf_update(FilterState(x=x, P=P, k=k), z, model, noise,
                               sequential=False)
                x, P = st.x, st.P
        except NumericalError as exc:
            raise NumericalError(f"sample {k + 1}: {exc}") from exc
        states[k] = x
    return EstimationRun(estimates=states @ C.T, innovations=innovations,
                         states=states, scenario=scenario)


def estimate_noise_empirical(
    model: StateSpaceModel, inputs: np.ndarray, outputs: np.ndarray,
    eps_q: float = 1e-4, eps_r: float = 1e-4, iterations: int = 1,
    x0: np.ndarray | None = None, P0: np.ndarray | None = None,
) -> NoiseModel:
    """Bootstrap Q and R from filter residuals.

    Starting from Q = eps_q I, R = eps_r I, run the filter, then form
    measurement residuals r_y(k) = y(k) - y_hat(k) and process residuals
    r_x(k) = x_hat(k) - A x_hat(k-1) - B u(k), and take
    R = (1/N) sum r_y r_y^T, Q = (1/(N-1)) sum r_x r_x^T.  Additional
    iterations re-run the filter with the empirical values.
    """
    if iterations < 1:
        raise DataError("iterations must be >= 1")
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n_samples = outputs.shape[0]
    if n_samples < 2:
        raise DataError("need at least 2 samples to estimate covariances")

    noise = NoiseModel.initial(model.order, model.m_out,
                               eps_q=eps_q, eps_r=eps_r)
    A, B = model.A, model.B
    for _ in range(iterations):
        run = run_filter(model, noise, inputs, outputs, x0=x0, P0=P0)
        r_y = outputs - run.estimates
        # r_x(k) = x(k) - A x(k-1) - B u(k), k = 2..N
        r_x = run.states[1:] - run.states[:-1] @ A.T - inputs[1:] @ B.T
        R_emp = (r_y.T @ r_y) / n_samples
        Q_emp = (r_x.T @ r_x) / (n_samples - 1)
        noise = NoiseModel(Q=_psd_clip(Q_emp), R=_psd_clip(R_emp),
                           provenance="empirical")
    return noise
