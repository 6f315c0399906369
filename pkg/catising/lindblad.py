"""Lindblad master equation: Liouvillian construction, deterministic
evolution, steady states, spectral gaps and quantum-jump trajectories.

Density matrices are vectorized column-stacked, vec(A rho B) = (B^T kron A) vec(rho).
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from PySide6.QtCore import qDebug, qWarning
from scipy import linalg, sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from catising import pool
from catising.config import (
    DENSITY_HERMITIAN_TOL,
    DENSITY_POSITIVITY_TOL,
    DENSITY_TRACE_TOL,
    EVOLVE_TRACE_TOL,
    EXPM_MAX_DIM2,
    JUMP_RTOL,
    OPERATOR_HERMITIAN_TOL,
    INTEGRATOR_ATOL,
    INTEGRATOR_RTOL,
    STEADY_RESIDUAL_FACTOR,
    ZERO_EIG_FACTOR,
)
from catising.errors import (
    DegenerateSteadyState,
    DimensionMismatch,
    DomainError,
    EigensolverFailure,
    IntegrationError,
)
from catising.operators import Factors, Operator, StateVector, identity
from catising.utils import linear_fit, stream_rng, stream_seed


@dataclass(frozen=True, eq=False)
class LindbladModel:
    hamiltonian: Operator
    jumps: tuple[Operator, ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        for jump in self.jumps:
            if jump.factors != self.hamiltonian.factors:
                raise DimensionMismatch(
                    f"jump on {jump.space_tag} vs Hamiltonian on {self.hamiltonian.space_tag}"
                )
        scale = max(1.0, float(np.max(np.abs(self.hamiltonian.entries), initial=0.0)))
        if not self.hamiltonian.is_hermitian(OPERATOR_HERMITIAN_TOL * scale):
            raise DomainError("Hamiltonian is not Hermitian")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"L{k}" for k in range(len(self.jumps))))
        elif len(self.labels) != len(self.jumps):
            raise DimensionMismatch(f"{len(self.labels)} labels for {len(self.jumps)} jumps")

    @classmethod
    def dissipative(cls, jumps: Sequence[Operator], labels: Sequence[str] = ()) -> "LindbladModel":
        if not jumps:
            raise DomainError("a purely dissipative model needs at least one jump operator")
        zero = 0 * identity(jumps[0].factors)
        return cls(zero, tuple(jumps), tuple(labels))

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def factors(self) -> Factors:
        return self.hamiltonian.factors

    def effective_hamiltonian(self) -> np.ndarray:
        """H - (i/2) sum_j L_j^dag L_j"""
        decay = sum(
            (L.entries.conj().T @ L.entries for L in self.jumps),
            np.zeros((self.dim, self.dim), dtype=complex),
        )
        return self.hamiltonian.entries - 0.5j * decay


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    factors: Factors

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        dim = int(np.prod([d for _, d in self.factors]))
        if entries.shape != (dim, dim):
            raise DimensionMismatch(f"density matrix of shape {entries.shape}, expected {dim}")
        if np.max(np.abs(entries - entries.conj().T)) > DENSITY_HERMITIAN_TOL:
            raise DomainError("density matrix is not Hermitian")
        trace = np.trace(entries).real
        if abs(trace - 1) > DENSITY_TRACE_TOL:
            raise DomainError(f"density matrix trace is {trace}")
        lowest = np.linalg.eigvalsh((entries + entries.conj().T) / 2)[0]
        if lowest < -DENSITY_POSITIVITY_TOL:
            raise DomainError(f"density matrix has eigenvalue {lowest:.3e}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return cls(np.outer(state.amplitudes, state.amplitudes.conj()), state.factors)

    @classmethod
    def from_vector(cls, vector: np.ndarray, factors: Factors) -> "DensityMatrix":
        """Reshape a vectorized matrix, Hermitize and fix the trace."""
        dim = int(np.prod([d for _, d in factors]))
        rho = np.reshape(vector, (dim, dim), order="F")
        rho = (rho + rho.conj().T) / 2
        return cls(rho / np.trace(rho).real, factors)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def vec(self) -> np.ndarray:
        return np.reshape(self.entries, -1, order="F")

    def expectation(self, op: Operator) -> complex:
        return complex(np.trace(op.entries @ self.entries))

    def fidelity(self, state: StateVector) -> float:
        """<psi|rho|psi> for a pure reference state."""
        return float(np.vdot(state.amplitudes, self.entries @ state.amplitudes).real)


class JumpRecord(NamedTuple):
    time: float
    channel: int


class TrajectoryResult(NamedTuple):
    state: StateVector
    jumps: tuple[JumpRecord, ...]
    snapshots: tuple[StateVector, ...]


class EnsembleAverage(NamedTuple):
    times: np.ndarray
    means: np.ndarray  # (len(times), len(observables))
    stderr: np.ndarray


class SpectrumResult(NamedTuple):
    gap: float
    eigenvalues: np.ndarray  # sorted by decreasing real part
    n_steady: int


def build_liouvillian(model: LindbladModel) -> np.ndarray:
    eye = np.eye(model.dim)
    H = model.hamiltonian.entries
    liouvillian = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for jump in model.jumps:
        L = jump.entries
        decay = L.conj().T @ L
        liouvillian += np.kron(L.conj(), L)
        liouvillian -= 0.5 * (np.kron(eye, decay) + np.kron(decay.T, eye))
    return liouvillian


def sparse_liouvillian(model: LindbladModel) -> sparse.csc_matrix:
    """build_liouvillian in sparse form, for dimensions where the dense
    superoperator no longer fits."""
    eye = sparse.identity(model.dim, dtype=complex, format="csr")
    H = sparse.csr_matrix(model.hamiltonian.entries)
    liouvillian = -1j * (sparse.kron(eye, H) - sparse.kron(H.T, eye))
    for jump in model.jumps:
        L = sparse.csr_matrix(jump.entries)
        decay = L.conj().T @ L
        liouvillian = liouvillian + sparse.kron(L.conj(), L)
        liouvillian = liouvillian - 0.5 * (sparse.kron(eye, decay) + sparse.kron(decay.T, eye))
    return sparse.csc_matrix(liouvillian)


def _checked(vector: np.ndarray, factors: Factors) -> DensityMatrix:
    dim = int(np.prod([d for _, d in factors]))
    trace = np.trace(np.reshape(vector, (dim, dim), order="F")).real
    if abs(trace - 1) > EVOLVE_TRACE_TOL:
        raise IntegrationError(f"trace drifted to {trace} during evolution")
    return DensityMatrix.from_vector(vector, factors)


def evolve_many(
    model: LindbladModel, rho0: DensityMatrix, times: Sequence[float]
) -> list[DensityMatrix]:
    """States at each of the increasing times, propagated segment by segment."""
    times = np.asarray(times, dtype=float)
    if rho0.factors != model.factors:
        raise DimensionMismatch(f"state on {rho0.factors} vs model on {model.factors}")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise DomainError("evolution times must be non-negative and increasing")
    if times.size == 0:
        return []

    states = []
    vector = rho0.vec()
    current = 0.0
    liouvillian = sparse_liouvillian(model)
    if model.dim**2 <= EXPM_MAX_DIM2 or times[-1] == 0:
        for t in times:
            if t > current:
                vector = expm_multiply((t - current) * liouvillian, vector)
                current = t
            states.append(_checked(vector, model.factors))
        return states

    # decay rates grow like n_max^2 on cavities, so the large path is implicit
    qDebug(f"evolve: BDF on a {model.dim}x{model.dim} density matrix up to t = {times[-1]}")
    solution = solve_ivp(
        lambda _t, y: liouvillian @ y,
        (0.0, float(times[-1])),
        vector,
        method="BDF",
        jac=liouvillian,
        t_eval=times,
        rtol=INTEGRATOR_RTOL,
        atol=INTEGRATOR_ATOL,
    )
    if solution.status < 0:
        raise IntegrationError(solution.message)
    return [_checked(solution.y[:, k], model.factors) for k in range(times.size)]


def evolve(model: LindbladModel, rho0: DensityMatrix, t: float) -> DensityMatrix:
    if t < 0:
        raise DomainError(f"evolution time must be non-negative, got {t}")
    if t == 0:
        if rho0.factors != model.factors:
            raise DimensionMismatch(f"state on {rho0.factors} vs model on {model.factors}")
        return rho0
    return evolve_many(model, rho0, [t])[0]


def _eig(liouvillian: np.ndarray, **kwargs):
    try:
        return linalg.eig(liouvillian, **kwargs)
    except (linalg.LinAlgError, ValueError) as error:
        raise EigensolverFailure(str(error)) from error


def _kernel(eigenvalues: np.ndarray) -> np.ndarray:
    tol_zero = ZERO_EIG_FACTOR * float(np.max(np.abs(eigenvalues)))
    return np.flatnonzero(np.abs(eigenvalues) < tol_zero)


def steady_state(model: LindbladModel, rho0: DensityMatrix | None = None) -> DensityMatrix:
    """Kernel of the Liouvillian. A multi-dimensional kernel needs `rho0`;
    the result is then its projection onto the kernel along the left
    eigenvectors, the t -> infinity limit of evolve(model, rho0, t)."""
    liouvillian = build_liouvillian(model)
    eigenvalues, left, right = _eig(liouvillian, left=True, right=True)
    kernel = _kernel(eigenvalues)
    if kernel.size == 0:
        raise EigensolverFailure("no eigenvalue within the zero tolerance")

    if kernel.size == 1:
        vector = right[:, kernel[0]]
    elif rho0 is None:
        raise DegenerateSteadyState(kernel.size)
    else:
        R = right[:, kernel]
        W = left[:, kernel]
        overlap = W.conj().T @ R
        vector = R @ linalg.solve(overlap, W.conj().T @ rho0.vec())
        qDebug(f"steady_state: projected initial state onto a {kernel.size}-dim kernel")

    rho = DensityMatrix.from_vector(vector, model.factors)
    residual = np.linalg.norm(liouvillian @ rho.vec())
    bound = STEADY_RESIDUAL_FACTOR * np.linalg.norm(liouvillian)
    if residual > bound:
        raise EigensolverFailure(f"steady-state residual {residual:.2e} exceeds {bound:.2e}")
    return rho


def spectral_evolve(
    model: LindbladModel, rho0: DensityMatrix, times: Sequence[float]
) -> list[DensityMatrix]:
    """Evolution through the eigendecomposition of the Liouvillian,
    rho(t) = sum_k r_k e^{lambda_k t} (l_k . rho0). Cost is one dense
    eigensolve, independent of how long the times are."""
    if rho0.factors != model.factors:
        raise DimensionMismatch(f"state on {rho0.factors} vs model on {model.factors}")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise DomainError("evolution times must be non-negative")
    eigenvalues, right = _eig(build_liouvillian(model))
    try:
        weights = linalg.solve(right, rho0.vec())
    except linalg.LinAlgError as error:
        raise EigensolverFailure(f"eigenvectors are not a basis: {error}") from error
    states = []
    for t in times:
        # modes decaying below 1e-300 underflow cleanly to zero
        vector = right @ (np.exp(eigenvalues * t) * weights)
        states.append(_checked(vector, model.factors))
    return states


def _fit_gap(model: LindbladModel, start: DensityMatrix, t_max: float, n_points: int) -> float:
    times = np.linspace(0, t_max, n_points + 1)
    states = evolve_many(model, start, times)
    # successive differences decay with the same exponent as rho(t) - rho_ss
    distance = np.array([np.linalg.norm(b.entries - a.entries) for a, b in zip(states, states[1:])])
    tail = slice(n_points // 2, n_points)
    if np.any(distance[tail] <= 0):
        raise EigensolverFailure("state stopped moving before the fit window")
    fit = linear_fit(times[:-1][tail], np.log(distance[tail]))
    return -fit.slope


def dissipative_gap(
    model: LindbladModel,
    n_steady: int | None = None,
    method: str = "eig",
    start: DensityMatrix | None = None,
    t_max: float = 50.0,
) -> SpectrumResult:
    """Slowest non-stationary relaxation rate.

    With n_steady=None the kernel is found by the zero tolerance. An explicit
    n_steady skips that many eigenvalues with the largest real part, which
    is how metastable manifolds (exponentially slow flips) are excluded.
    method="fit" fits the late-time exponential decay of the state `start`
    instead of trusting the eigensolver.
    """
    liouvillian = build_liouvillian(model)
    try:
        eigenvalues = linalg.eigvals(liouvillian)
    except (linalg.LinAlgError, ValueError) as error:
        raise EigensolverFailure(str(error)) from error
    eigenvalues = eigenvalues[np.argsort(-eigenvalues.real, kind="stable")]

    if n_steady is None:
        kernel = _kernel(eigenvalues)
        if kernel.size == 0:
            raise EigensolverFailure("no eigenvalue within the zero tolerance")
        tol_zero = ZERO_EIG_FACTOR * float(np.max(np.abs(eigenvalues)))
        decaying = eigenvalues.real[eigenvalues.real < -tol_zero]
        n_steady = kernel.size
    else:
        if not 0 < n_steady < eigenvalues.size:
            raise DomainError(f"n_steady = {n_steady} outside 1..{eigenvalues.size - 1}")
        decaying = eigenvalues.real[n_steady:]
    if decaying.size == 0:
        raise EigensolverFailure("spectrum has no decaying eigenvalue")
    gap = float(-np.max(decaying))

    if method == "fit":
        if start is None:
            raise DomainError("method='fit' needs a start state")
        fitted = _fit_gap(model, start, t_max, 200)
        qDebug(f"dissipative_gap: eigensolver {gap:.6g}, fitted {fitted:.6g}")
        gap = fitted
    elif method != "eig":
        raise DomainError(f"unknown gap method '{method}'")
    return SpectrumResult(gap, eigenvalues, n_steady)


def gauge_shift(model: LindbladModel, index: int, shift: complex) -> LindbladModel:
    """Replace L_index by L_index - shift and compensate in the Hamiltonian,
    H -> H + (i/2)(shift^* L - shift L^dag). The master equation is unchanged."""
    L = model.jumps[index]
    compensation = 0.5j * (np.conj(shift) * L - shift * L.dag())
    hermitian = 0.5 * (compensation + compensation.dag())
    jumps = list(model.jumps)
    jumps[index] = L - shift * identity(L.factors)
    return LindbladModel(model.hamiltonian + hermitian, tuple(jumps), model.labels)


def trajectory(
    model: LindbladModel,
    psi0: StateVector,
    t_final: float,
    seed: int,
    t_eval: Sequence[float] = (),
) -> TrajectoryResult:
    """One quantum-jump trajectory drawing from stream 0 of `seed`.

    The unnormalized state evolves under H_eff until its squared norm reaches
    a uniform threshold u. The crossing is located on the dense output of the
    step that brackets it, then a jump channel is drawn with probability
    proportional to ||L_j psi||^2.
    """
    if psi0.factors != model.factors:
        raise DimensionMismatch(f"state on {psi0.space_tag} vs model on {model.factors}")
    if t_final < 0:
        raise DomainError(f"trajectory length must be non-negative, got {t_final}")
    checkpoints = np.asarray(t_eval, dtype=float)
    if np.any(checkpoints < 0) or np.any(checkpoints > t_final) or np.any(np.diff(checkpoints) < 0):
        raise DomainError("checkpoints must be increasing and inside [0, t_final]")

    rng = stream_rng(seed, 0)
    K = -1j * model.effective_hamiltonian()
    jumps = [L.entries for L in model.jumps]

    def rhs(_t, psi):
        return K @ psi

    snapshots: list[StateVector] = []
    records: list[JumpRecord] = []
    psi = np.array(psi0.amplitudes)
    t = 0.0
    pending = 0
    while pending < checkpoints.size and checkpoints[pending] <= 0:
        snapshots.append(psi0)
        pending += 1

    threshold = rng.random()

    def crossing(_t, y):
        return np.vdot(y, y).real - threshold

    crossing.terminal = True
    crossing.direction = -1

    while t < t_final:
        solution = solve_ivp(
            rhs,
            (t, t_final),
            psi,
            method="DOP853",
            dense_output=True,
            events=crossing,
            rtol=JUMP_RTOL,
            atol=INTEGRATOR_ATOL,
        )
        if solution.status < 0:
            raise IntegrationError(solution.message)
        end = t_final if solution.status == 0 else float(solution.t_events[0][0])
        while pending < checkpoints.size and checkpoints[pending] <= end:
            snapshots.append(
                StateVector.normalized(solution.sol(checkpoints[pending]), model.factors)
            )
            pending += 1

        if solution.status == 0:
            psi = solution.y[:, -1]
            t = t_final
            break

        t = end
        psi = solution.y_events[0][0]
        weights = np.array([np.vdot(L @ psi, L @ psi).real for L in jumps])
        total = weights.sum()
        if total <= 0:
            raise IntegrationError(f"norm decayed at t = {t} with no jump channel open")
        channel = int(rng.choice(len(jumps), p=weights / total))
        psi = jumps[channel] @ psi
        psi = psi / np.linalg.norm(psi)
        records.append(JumpRecord(t, channel))
        threshold = rng.random()

    qDebug(
        f"trajectory: {len(records)} jumps up to t = {t_final}: "
        + ", ".join(f"{model.labels[r.channel]}@{r.time:.4g}" for r in records)
    )
    return TrajectoryResult(
        StateVector.normalized(psi, model.factors), tuple(records), tuple(snapshots)
    )


def ensemble_average(
    model: LindbladModel,
    psi0: StateVector,
    t_final: float,
    n_traj: int,
    observables: Sequence[Operator],
    seed: int,
    t_eval: Sequence[float] | None = None,
    workers: int = 1,
) -> EnsembleAverage:
    """Mean and standard error of <psi|O|psi> over n_traj trajectories, at each
    time of t_eval (default: t_final only). Trajectory i draws from stream i
    of `seed`, so the result does not depend on `workers`."""
    if n_traj < 1:
        raise DomainError(f"need at least one trajectory, got {n_traj}")
    times = np.asarray([t_final] if t_eval is None else t_eval, dtype=float)
    matrices = [op.entries for op in observables]

    def one(index: int) -> np.ndarray:
        result = trajectory(model, psi0, t_final, stream_seed(seed, index), times)
        return np.array(
            [
                [np.vdot(s.amplitudes, O @ s.amplitudes).real for O in matrices]
                for s in result.snapshots
            ]
        )

    samples = np.stack(pool.run_indexed(one, n_traj, workers))
    means = samples.mean(axis=0)
    if n_traj > 1:
        stderr = samples.std(axis=0, ddof=1) / np.sqrt(n_traj)
    else:
        stderr = np.zeros_like(means)
    if n_traj < 30:
        qWarning(f"ensemble_average: only {n_traj} trajectories, error bars are rough")
    return EnsembleAverage(times, means, stderr)
