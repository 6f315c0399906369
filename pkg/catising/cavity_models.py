"""Dissipative cat-qubit cavities: the standard two-photon model, its gauge
form (Model 1), the code-space-projected loss model (Model 2), and the toy
qubit-cavity model with a nearest-neighbour correction channel.

The two-photon drive is H = (lam / 2)(a^2 + a^dag^2), normalized so that
the cat amplitude satisfies |alpha|^2 = lam / kappa2 = N.
"""

from dataclasses import dataclass, replace
from math import pi, sqrt
from typing import Callable, NamedTuple, Sequence

import numpy as np
from PySide6.QtCore import qInfo, qWarning

from catising import pool
from catising.config import (
    CUTOFF_CHECK_STEP,
    CUTOFF_CHECK_TOL,
    SETTLE_TIME,
    WEAK_LOSS_RATIO,
    TOY_T_NOISY,
    TOY_T_RECOVERY,
    default_fock_cutoff,
)
from catising.errors import DomainError, InvariantError
from catising.lindblad import (
    DensityMatrix,
    LindbladModel,
    dissipative_gap,
    evolve,
    spectral_evolve,
    steady_state,
)
from catising.operators import (
    QUBIT,
    FockSpace,
    Operator,
    StateVector,
    annihilation,
    cat_states,
    codespace_projector,
    coherent_state,
    identity,
    number,
    pauli,
    tensor,
    tensor_states,
)
from catising.utils import LinearFit, is_monotone, linear_fit


PHASE = np.exp(-1j * pi / 4)


@dataclass(frozen=True)
class CavityParams:
    lam: float
    kappa2: float = 1.0
    kappa1: float = 0.0
    kappad: float = 0.0
    kappann: float = 0.0
    space: FockSpace | None = None

    def __post_init__(self):
        if self.kappa2 <= 0:
            raise DomainError(f"kappa2 must be positive, got {self.kappa2}")
        for name in ("lam", "kappa1", "kappad", "kappann"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.space is None:
            object.__setattr__(self, "space", FockSpace(default_fock_cutoff(self.N)))

    @classmethod
    def for_photon_number(cls, N: float, kappa2: float = 1.0, **rates) -> "CavityParams":
        return cls(lam=N * kappa2, kappa2=kappa2, **rates)

    @property
    def N(self) -> float:
        return self.lam / self.kappa2

    @property
    def alpha(self) -> complex:
        return PHASE * sqrt(self.N)

    @property
    def mu(self) -> complex:
        """Steady amplitude of the two-photon model with single-photon loss."""
        if 2 * self.lam < self.kappa1:
            raise DomainError("single-photon loss exceeds the two-photon drive")
        return PHASE * sqrt((2 * self.lam - self.kappa1) / (2 * self.kappa2))

    def with_space(self, space: FockSpace) -> "CavityParams":
        return replace(self, space=space)


def two_photon_model(params: CavityParams) -> LindbladModel:
    a = annihilation(params.space)
    hamiltonian = 0.5 * params.lam * (a @ a + (a @ a).dag())
    jumps = [sqrt(params.kappa2) * (a @ a)]
    labels = ["two_photon"]
    if params.kappa1 > 0:
        jumps.append(sqrt(params.kappa1) * a)
        labels.append("single_photon")
    if params.kappad > 0:
        jumps.append(sqrt(params.kappad) * (a.dag() @ a))
        labels.append("dephasing")
    return LindbladModel(hamiltonian, tuple(jumps), tuple(labels))


def _stabilizer(params: CavityParams) -> Operator:
    a = annihilation(params.space)
    return sqrt(params.kappa2) * (a @ a - params.alpha**2 * identity(params.space.factors))


def _require_single_cavity(params: CavityParams):
    if params.kappad != 0 or params.kappann != 0:
        raise DomainError("single-cavity models take kappa1 and kappa2 only")


def model1(params: CavityParams) -> LindbladModel:
    """Gauge form of the two-photon model: H = 0, L_c = sqrt(kappa2)(a^2 - alpha^2),
    L_1 = sqrt(kappa1) a."""
    _require_single_cavity(params)
    a = annihilation(params.space)
    zero = 0 * identity(params.space.factors)
    return LindbladModel(
        zero, (_stabilizer(params), sqrt(params.kappa1) * a), ("stabilizer", "single_photon")
    )


def model2(params: CavityParams) -> LindbladModel:
    """Single-photon loss restricted to the cat code space, E_1 = sqrt(kappa1) a V."""
    _require_single_cavity(params)
    a = annihilation(params.space)
    V = codespace_projector(params.alpha, params.space)
    zero = 0 * identity(params.space.factors)
    return LindbladModel(
        zero, (_stabilizer(params), sqrt(params.kappa1) * (a @ V)), ("stabilizer", "projected_loss")
    )


MODELS: dict[str, Callable[[CavityParams], LindbladModel]] = {"model1": model1, "model2": model2}


def shifted_amplitude(params: CavityParams) -> float:
    """|mu|^2 = (2 lam - kappa1) / (2 kappa2)."""
    return abs(params.mu) ** 2


def mean_photon_number(rho: DensityMatrix, space: FockSpace) -> float:
    return rho.expectation(number(space)).real


def toy_model(params: CavityParams) -> LindbladModel:
    """Qubit (first factor) times cavity. The nearest-neighbour channel
    sqrt(kappann) X (1 - Z)/2 a resets |up> to |down> while removing a photon."""
    space = params.space
    a = annihilation(space)
    qubit_one = identity(QUBIT)
    up_projector = 0.5 * (qubit_one - pauli("Z"))
    jumps = (
        tensor(qubit_one, _stabilizer(params)),
        sqrt(params.kappa1) * tensor(pauli("X"), a),
        sqrt(params.kappad) * tensor(qubit_one, a.dag() @ a),
        sqrt(params.kappann) * tensor(pauli("X") @ up_projector, a),
    )
    zero = 0 * identity(QUBIT + space.factors)
    return LindbladModel(zero, jumps, ("stabilizer", "flip_loss", "dephasing", "neighbour"))


def toy_initial_state(params: CavityParams) -> StateVector:
    """|down> (|C+> + 2 e^{i pi/4} |C->) / sqrt(5)"""
    plus, minus = cat_states(params.alpha, params.space)
    cavity = (plus.amplitudes + 2 * np.exp(1j * pi / 4) * minus.amplitudes) / sqrt(5)
    down = StateVector.basis(0, QUBIT)
    return tensor_states(down, StateVector.normalized(cavity, params.space.factors))


def toy_codespace_overlap(rho: DensityMatrix, params: CavityParams) -> float:
    """Weight of rho on |down> times the cat code space."""
    down = 0.5 * (identity(QUBIT) + pauli("Z"))
    projector = tensor(down, codespace_projector(params.alpha, params.space))
    return rho.expectation(projector).real


# --- scans ----------------------------------------------------------------------


class OverlapPoint(NamedTuple):
    N: float
    kappa1: float
    overlap: float
    n_max: int


class GapScan(NamedTuple):
    N_values: np.ndarray
    gaps: np.ndarray
    fit: LinearFit


class FidelityPoint(NamedTuple):
    N: float
    fidelity: float
    codespace_weight: float
    n_max: int


def _cutoff_drift(
    label: str, compute: Callable[[CavityParams], float], params: CavityParams, value: float
) -> float:
    """Recompute on a Fock space CUTOFF_CHECK_STEP levels wider and warn when
    the result moves by more than CUTOFF_CHECK_TOL."""
    wider = params.with_space(params.space.enlarged(CUTOFF_CHECK_STEP))
    drift = abs(compute(wider) - value)
    if drift > CUTOFF_CHECK_TOL:
        qWarning(f"{label} moved by {drift:.1e} on a wider cutoff")
    return drift


def _settled_overlap(
    family: str, params: CavityParams, method: str, t_settle: float
) -> float:
    model = MODELS[family](params)
    start = coherent_state(params.alpha, params.space)
    rho0 = DensityMatrix.from_state(start)
    if method == "evolve":
        rho = spectral_evolve(model, rho0, [t_settle / params.kappa2])[0]
    elif method == "projected":
        rho = steady_state(model, rho0)
    elif method == "steady":
        rho = steady_state(model)
    else:
        raise DomainError(f"unknown steady-state method '{method}'")
    return rho.fidelity(coherent_state(params.mu, params.space))


def steady_overlap_scan(
    family: str,
    N_values: Sequence[float],
    kappa1_values: Sequence[float],
    kappa2: float = 1.0,
    method: str = "evolve",
    t_settle: float = SETTLE_TIME,
    check_cutoff: bool = True,
    workers: int = 1,
) -> list[OverlapPoint]:
    """<mu|rho|mu> after settling from |alpha>, on the (N, kappa1) grid.

    method="evolve" propagates for t_settle/kappa2; "projected" takes the
    kernel projection of |alpha><alpha|; "steady" demands a unique kernel.
    """
    if family not in MODELS:
        raise DomainError(f"unknown cavity model '{family}'")
    grid = [(N, k1) for k1 in kappa1_values for N in N_values]

    def one(index: int) -> OverlapPoint:
        N, kappa1 = grid[index]
        params = CavityParams.for_photon_number(N, kappa2, kappa1=kappa1)
        overlap = _settled_overlap(family, params, method, t_settle)
        if check_cutoff:
            _cutoff_drift(
                f"overlap at N = {N}, kappa1 = {kappa1}",
                lambda p: _settled_overlap(family, p, method, t_settle),
                params,
                overlap,
            )
        qInfo(f"{family}: N = {N}, kappa1 = {kappa1}, overlap = {overlap:.8f}")
        return OverlapPoint(N, kappa1, overlap, params.space.n_max)

    points = pool.run_indexed(one, len(grid), workers)
    for kappa1 in kappa1_values:
        row = [p.overlap for p in sorted(points, key=lambda p: p.N) if p.kappa1 == kappa1]
        if kappa1 / kappa2 <= WEAK_LOSS_RATIO and not is_monotone(row, increasing=True, tol=1e-9):
            raise InvariantError(f"{family}: settled overlap is not increasing in N at kappa1 = {kappa1}")
    return points


def gap_scan(
    family: str,
    N_values: Sequence[float],
    kappa1: float,
    kappa2: float = 1.0,
    check_cutoff: bool = True,
    workers: int = 1,
) -> GapScan:
    """Dissipative gap against N with the cat manifold (two slowest
    eigenvalues) excluded, and a straight-line fit of gap against N."""
    if family not in MODELS:
        raise DomainError(f"unknown cavity model '{family}'")
    N_values = np.asarray(N_values, dtype=float)

    def gap(params: CavityParams) -> float:
        return dissipative_gap(MODELS[family](params), n_steady=2).gap

    def one(index: int) -> float:
        params = CavityParams.for_photon_number(N_values[index], kappa2, kappa1=kappa1)
        value = gap(params)
        if check_cutoff:
            _cutoff_drift(f"{family} gap at N = {N_values[index]}", gap, params, value)
        qInfo(f"{family}: N = {N_values[index]}, gap = {value:.8g}")
        return value

    gaps = np.array(pool.run_indexed(one, N_values.size, workers))
    fit = linear_fit(N_values, gaps) if N_values.size > 1 else LinearFit(np.nan, np.nan, np.nan)
    return GapScan(N_values, gaps, fit)


def toy_fidelity_experiment(
    N_values: Sequence[float],
    kappa2: float = 1.0,
    kappa1: float = 0.1,
    kappad: float = 0.1,
    kappann: float = 0.3,
    t_noisy: float = TOY_T_NOISY,
    t_recovery: float = TOY_T_RECOVERY,
    keep_neighbour: bool = True,
    check_cutoff: bool = True,
    workers: int = 1,
) -> list[FidelityPoint]:
    """Fidelity of the toy initial state after t_noisy under all channels,
    then t_recovery with kappa1 = kappad = 0 (kappann kept when
    keep_neighbour). Times are in units of 1/kappa2."""

    def protocol(noisy: CavityParams) -> DensityMatrix:
        recovery = replace(noisy, kappa1=0.0, kappad=0.0, kappann=kappann if keep_neighbour else 0.0)
        rho = evolve(toy_model(noisy), DensityMatrix.from_state(toy_initial_state(noisy)), t_noisy / kappa2)
        return evolve(toy_model(recovery), rho, t_recovery / kappa2)

    def one(index: int) -> FidelityPoint:
        N = N_values[index]
        noisy = CavityParams.for_photon_number(
            N, kappa2, kappa1=kappa1, kappad=kappad, kappann=kappann
        )
        rho = protocol(noisy)
        fidelity = rho.fidelity(toy_initial_state(noisy))
        if check_cutoff:
            _cutoff_drift(
                f"toy fidelity at N = {N}",
                lambda p: protocol(p).fidelity(toy_initial_state(p)),
                noisy,
                fidelity,
            )
        qInfo(f"toy model: N = {N}, fidelity = {fidelity:.6f}")
        return FidelityPoint(N, fidelity, toy_codespace_overlap(rho, noisy), noisy.space.n_max)

    return pool.run_indexed(one, len(N_values), workers)
