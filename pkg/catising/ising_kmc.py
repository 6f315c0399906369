"""Classical 2D Ising memory under local dissipative flips.

A site with n misaligned nearest neighbours (periodic, bonds counted with
multiplicity, so on a 2x2 lattice each neighbour counts twice) flips at

    r(n) = delta + kappa_tilde [n == 3] + kappa [n == 4]

Spins are stored as 0 (down, Z = +1) and 1 (up, Z = -1). Sites are grouped
into five classes by n so that one event is O(1).
"""

from dataclasses import dataclass
from functools import lru_cache
from math import expm1, inf, isfinite, log1p, sqrt
from time import perf_counter
from typing import NamedTuple

import numpy as np
from numba import njit
from PySide6.QtCore import qDebug
from scipy import linalg, ndimage
from scipy.sparse.linalg import expm_multiply

from catising import pool
from catising.config import (
    EVENT_CAP,
    MAX_EXACT_LATTICE,
    MAX_QUANTUM_LATTICE,
    ORACLE_TV_TOL,
    quench_time,
)
from catising.errors import (
    DomainError,
    EventCapExceeded,
    KernelDegeneracy,
    OracleMismatch,
)
from catising.lindblad import LindbladModel
from catising.operators import Operator, identity, pauli, tensor
from catising.utils import numba_seed, sign, stream_rng, stream_seed


@dataclass(frozen=True)
class RateParams:
    delta: float
    kappa: float
    kappa_tilde: float
    beta: float

    def __post_init__(self):
        if self.delta < 0 or self.kappa <= 0:
            raise DomainError(f"need delta >= 0 and kappa > 0, got {self.delta}, {self.kappa}")
        if abs(self.kappa_tilde - _kappa_tilde(self.delta, self.kappa)) > 1e-12:
            raise DomainError("kappa_tilde is inconsistent with delta and kappa")
        if abs(self.beta - _beta(self.delta, self.kappa)) > 1e-12 and not (
            self.beta == inf and self.delta == 0
        ):
            raise DomainError("beta is inconsistent with delta and kappa")

    @classmethod
    def from_rates(cls, delta: float, kappa: float) -> "RateParams":
        return cls(delta, kappa, _kappa_tilde(delta, kappa), _beta(delta, kappa))

    def class_rates(self) -> np.ndarray:
        """Flip rate indexed by the number of misaligned neighbours."""
        rates = np.full(5, self.delta)
        rates[3] += self.kappa_tilde
        rates[4] += self.kappa
        return rates


def _kappa_tilde(delta: float, kappa: float) -> float:
    if delta == 0:
        return 0.0
    # sqrt(delta kappa + delta^2) - delta without cancellation
    return delta * kappa / (sqrt(delta * kappa + delta * delta) + delta)


def _beta(delta: float, kappa: float) -> float:
    if delta == 0:
        return inf
    return log1p(kappa / delta) / 8


def rates_from_beta(beta: float, kappa: float) -> RateParams:
    if not beta > 0:
        raise DomainError(f"inverse temperature must be positive, got {beta}")
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    delta = kappa / expm1(8 * beta) if isfinite(beta) and 8 * beta < 700 else 0.0
    return RateParams(delta, kappa, _kappa_tilde(delta, kappa), beta if delta > 0 else inf)


def photonic_to_ising(kappa1: float, kappa_nn: float, photon_number: float) -> RateParams:
    """Rates of the effective classical model for cat qubits with single-photon
    loss kappa1 and nearest-neighbour dissipation kappa_nn at N photons."""
    if kappa1 <= 0 or kappa_nn <= 0 or photon_number <= 0:
        raise DomainError("kappa1, kappa_nn and N must all be positive")
    rates = RateParams.from_rates(photon_number * kappa1, photon_number * kappa_nn)
    quoted = log1p(kappa_nn / kappa1) / 8
    check = rates_from_beta(quoted, rates.kappa)
    if abs(check.delta - rates.delta) > 1e-9 * rates.delta:
        raise OracleMismatch("photonic and Ising parametrizations disagree")
    return rates


# --- lattice bookkeeping (numba) ---------------------------------------------


@lru_cache(maxsize=None)
def _neighbor_table(M: int) -> np.ndarray:
    """Columns: up, down, left, right (periodic)."""
    table = np.empty((M * M, 4), dtype=np.int64)
    for i in range(M):
        for j in range(M):
            site = i * M + j
            table[site] = (
                ((i - 1) % M) * M + j,
                ((i + 1) % M) * M + j,
                i * M + (j - 1) % M,
                i * M + (j + 1) % M,
            )
    table.setflags(write=False)
    return table


@njit(cache=True)
def _count_misaligned(spins, nbr, site):
    n = 0
    for k in range(4):
        if spins[nbr[site, k]] != spins[site]:
            n += 1
    return n


@njit(cache=True)
def _move(site, new_class, nmis, members, pos, counts):
    old = nmis[site]
    if old == new_class:
        return
    # swap-remove from the old class
    last = members[old, counts[old] - 1]
    members[old, pos[site]] = last
    pos[last] = pos[site]
    counts[old] -= 1
    members[new_class, counts[new_class]] = site
    pos[site] = counts[new_class]
    counts[new_class] += 1
    nmis[site] = new_class


@njit(cache=True)
def _rebuild(spins, nbr, nmis, members, pos, counts):
    counts[:] = 0
    for site in range(spins.size):
        n = _count_misaligned(spins, nbr, site)
        nmis[site] = n
        members[n, counts[n]] = site
        pos[site] = counts[n]
        counts[n] += 1


@njit(cache=True)
def _flip(site, spins, nbr, nmis, members, pos, counts):
    spins[site] ^= 1
    _move(site, _count_misaligned(spins, nbr, site), nmis, members, pos, counts)
    for k in range(4):
        other = nbr[site, k]
        _move(other, _count_misaligned(spins, nbr, other), nmis, members, pos, counts)


@njit(nogil=True, cache=True)
def _gillespie(spins, nbr, nmis, members, pos, counts, rates, t_final, seed, cap, checkpoints, ups):
    np.random.seed(seed)
    up = 0
    for site in range(spins.size):
        up += spins[site]
    t = 0.0
    events = 0
    k = 0
    while True:
        total = 0.0
        for c in range(5):
            total += counts[c] * rates[c]
        t_next = t + np.random.exponential(1.0 / total) if total > 0 else np.inf
        while k < checkpoints.size and checkpoints[k] < t_next:
            ups[k] = up
            k += 1
        if t_next > t_final:
            return events, False
        u = np.random.random() * total
        c = 0
        while c < 4 and (counts[c] * rates[c] <= u or counts[c] == 0):
            u -= counts[c] * rates[c]
            c += 1
        while counts[c] == 0 or rates[c] == 0.0:  # rounding overshoot
            c -= 1
        index = min(int(np.random.random() * counts[c]), counts[c] - 1)
        site = members[c, index]
        up += 1 - 2 * spins[site]
        _flip(site, spins, nbr, nmis, members, pos, counts)
        t = t_next
        events += 1
        if events >= cap:
            return events, True


@njit(cache=True)
def _toom_step(spins, M):
    new = np.empty_like(spins)
    for i in range(M):
        for j in range(M):
            votes = spins[i, j] + spins[(i - 1) % M, j] + spins[i, (j + 1) % M]
            new[i, j] = 1 if votes >= 2 else 0
    return new


class SpinConfig:
    """Spins on an M x M torus with the misaligned-neighbour class cache."""

    def __init__(self, spins: np.ndarray):
        spins = np.asarray(spins)
        if spins.ndim != 2 or spins.shape[0] != spins.shape[1] or spins.shape[0] < 1:
            raise DomainError(f"spins must be a non-empty square array, got {spins.shape}")
        if not np.all((spins == 0) | (spins == 1)):
            raise DomainError("spins must be 0 (down) or 1 (up)")
        self.M = spins.shape[0]
        self._spins = spins.astype(np.int64).ravel()
        self._nbr = _neighbor_table(self.M)
        sites = self.M * self.M
        self._nmis = np.zeros(sites, dtype=np.int64)
        self._members = np.zeros((5, sites), dtype=np.int64)
        self._pos = np.zeros(sites, dtype=np.int64)
        self._counts = np.zeros(5, dtype=np.int64)
        _rebuild(self._spins, self._nbr, self._nmis, self._members, self._pos, self._counts)

    @classmethod
    def uniform(cls, M: int, value: int = 0) -> "SpinConfig":
        return cls(np.full((M, M), value, dtype=np.int64))

    @property
    def spins(self) -> np.ndarray:
        return self._spins.reshape(self.M, self.M).copy()

    @property
    def up_count(self) -> int:
        return int(self._spins.sum())

    @property
    def class_counts(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self._counts)

    def _site(self, site: tuple[int, int]) -> int:
        i, j = site
        if not (0 <= i < self.M and 0 <= j < self.M):
            raise DomainError(f"site {site} outside the {self.M}x{self.M} lattice")
        return i * self.M + j

    def misaligned(self, site: tuple[int, int]) -> int:
        return int(self._nmis[self._site(site)])

    def flip(self, site: tuple[int, int]):
        _flip(self._site(site), self._spins, self._nbr, self._nmis, self._members, self._pos, self._counts)

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.spins)

    def cache_consistent(self) -> bool:
        fresh = SpinConfig(self.spins)
        if fresh.class_counts != self.class_counts or not np.array_equal(fresh._nmis, self._nmis):
            return False
        for c in range(5):
            members = self._members[c, : self._counts[c]]
            if set(members.tolist()) != set(np.flatnonzero(self._nmis == c).tolist()):
                return False
            if not np.array_equal(self._pos[members], np.arange(members.size)):
                return False
        return True


def flip_rate(config: SpinConfig, site: tuple[int, int], rates: RateParams) -> float:
    return float(rates.class_rates()[config.misaligned(site)])


def ising_energy(spins: np.ndarray) -> int:
    """-sum over right and down bonds of Z Z, with Z = 1 - 2 * spin."""
    z = 1 - 2 * np.asarray(spins, dtype=np.int64)
    return int(-np.sum(z * np.roll(z, -1, axis=1)) - np.sum(z * np.roll(z, -1, axis=0)))


def magnetization(spins: np.ndarray) -> float:
    """Mean of Z over the lattice."""
    return float(np.mean(1 - 2 * np.asarray(spins)))


def domain_wall_count(spins: np.ndarray) -> int:
    spins = np.asarray(spins)
    return int(np.sum(spins != np.roll(spins, -1, axis=1)) + np.sum(spins != np.roll(spins, -1, axis=0)))


class KMCRun(NamedTuple):
    config: SpinConfig
    events: int
    up_counts: np.ndarray  # at each checkpoint


def kmc_run(
    config0: SpinConfig,
    rates: RateParams,
    t_final: float,
    seed: int,
    checkpoints=(),
    event_cap: int = EVENT_CAP,
) -> KMCRun:
    """Gillespie evolution of a copy of config0 up to t_final."""
    if t_final < 0:
        raise DomainError(f"run length must be non-negative, got {t_final}")
    checkpoints = np.asarray(checkpoints, dtype=float)
    if np.any(np.diff(checkpoints) < 0) or np.any(checkpoints > t_final):
        raise DomainError("checkpoints must be increasing and inside [0, t_final]")
    config = config0.copy()
    ups = np.zeros(checkpoints.size, dtype=np.int64)
    events, capped = _gillespie(
        config._spins,
        config._nbr,
        config._nmis,
        config._members,
        config._pos,
        config._counts,
        rates.class_rates(),
        float(t_final),
        numba_seed(seed),
        event_cap,
        checkpoints,
        ups,
    )
    if capped:
        raise EventCapExceeded(f"{events} events before t = {t_final}")
    return KMCRun(config, int(events), ups)


# --- decoders -----------------------------------------------------------------


def _coin(tie_seed: int) -> int:
    bit = int(stream_rng(tie_seed, 0).integers(2))
    qDebug(f"decoder: tie broken at random to {bit}")
    return bit


def decode_majority(config: SpinConfig, tie_seed: int) -> int:
    """Global majority vote, random on ties."""
    vote = sign(2 * config.up_count - config.M * config.M)
    if vote == 0:
        return _coin(tie_seed)
    return 1 if vote > 0 else 0


def _periodic_labels(mask: np.ndarray) -> np.ndarray:
    """4-connected components on the torus."""
    labels, count = ndimage.label(mask)
    parent = np.arange(count + 1)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = [
        (labels[0, :], labels[-1, :]),
        (labels[:, 0], labels[:, -1]),
    ]
    for first, second in edges:
        for a, b in zip(first, second):
            if a and b:
                parent[find(a)] = find(b)
    roots = np.array([find(x) for x in range(count + 1)])
    return roots[labels]


def decode_components(config: SpinConfig, tie_seed: int) -> int:
    """Value of the largest periodic domain, random on ties."""
    spins = config.spins
    best = {}
    for value in (0, 1):
        labels = _periodic_labels(spins == value)
        sizes = np.bincount(labels.ravel())[1:]
        best[value] = int(sizes.max()) if sizes.size else 0
    if best[0] == best[1]:
        return _coin(tie_seed)
    return 0 if best[0] > best[1] else 1


DECODERS = {"majority": decode_majority, "components": decode_components}


class MemoryResult(NamedTuple):
    M: int
    beta: float
    T: float
    n_traj: int
    success_prob: float
    stderr: float
    decoder: str
    wall_time: float


def memory_experiment(
    M: int,
    beta: float,
    kappa: float,
    n_traj: int,
    seed: int,
    t_final: float | None = None,
    decoder: str = "majority",
    initial: int = 0,
    workers: int = 1,
) -> MemoryResult:
    """Fraction of n_traj runs from the uniform `initial` lattice that decode
    back to `initial` after t_final (default 800/kappa)."""
    if M < 1 or n_traj < 1:
        raise DomainError(f"need M >= 1 and n_traj >= 1, got {M}, {n_traj}")
    if initial not in (0, 1):
        raise DomainError(f"initial bit must be 0 or 1, got {initial}")
    try:
        decode = DECODERS[decoder]
    except KeyError:
        raise DomainError(f"unknown decoder '{decoder}'") from None
    rates = rates_from_beta(beta, kappa)
    t_final = quench_time(kappa) if t_final is None else t_final
    start = SpinConfig.uniform(M, initial)

    def one(index: int) -> int:
        trajectory_seed = stream_seed(seed, index)
        run = kmc_run(start, rates, t_final, stream_seed(trajectory_seed, 0))
        return int(decode(run.config, stream_seed(trajectory_seed, 1)) == initial)

    began = perf_counter()
    outcomes = pool.run_indexed(one, n_traj, workers)
    wall_time = perf_counter() - began
    p = sum(outcomes) / n_traj
    qDebug(f"memory_experiment: M = {M}, beta = {beta}, p = {p} in {wall_time:.2f} s")
    return MemoryResult(
        M, beta, t_final, n_traj, p, sqrt(p * (1 - p) / n_traj), decoder, wall_time
    )


# --- exact references -----------------------------------------------------------


def _state_spins(M: int) -> np.ndarray:
    """Row s holds the spins of basis state s; site k is bit (M^2 - 1 - k),
    matching the ordering of a Kronecker product over sites."""
    sites = M * M
    states = np.arange(2**sites)
    return (states[:, None] >> (sites - 1 - np.arange(sites))[None, :]) & 1


def classical_generator(M: int, rates: RateParams) -> np.ndarray:
    """Column-stochastic rate matrix, dp/dt = G p."""
    if not 1 <= M <= MAX_EXACT_LATTICE:
        raise DomainError(f"exact enumeration needs 1 <= M <= {MAX_EXACT_LATTICE}, got {M}")
    all_spins = _state_spins(M)
    nbr = _neighbor_table(M)
    class_rates = rates.class_rates()
    sites = M * M
    generator = np.zeros((2**sites, 2**sites))
    for state, spins in enumerate(all_spins):
        for site in range(sites):
            n = int(np.sum(spins[nbr[site]] != spins[site]))
            target = state ^ (1 << (sites - 1 - site))
            generator[target, state] += class_rates[n]
            generator[state, state] -= class_rates[n]
    return generator


class StationaryResult(NamedTuple):
    probabilities: np.ndarray
    gibbs: np.ndarray
    tv_distance: float


def exact_stationary(M: int, rates: RateParams, tol: float = ORACLE_TV_TOL) -> StationaryResult:
    """Kernel of the classical generator compared with exp(-beta H) / Z."""
    generator = classical_generator(M, rates)
    kernel = linalg.null_space(generator, rcond=1e-12)
    if kernel.shape[1] != 1:
        raise KernelDegeneracy(f"classical generator has a {kernel.shape[1]}-dim kernel")
    p = kernel[:, 0] / kernel[:, 0].sum()
    energies = np.array([ising_energy(s.reshape(M, M)) for s in _state_spins(M)])
    weights = np.exp(-rates.beta * (energies - energies.min()))
    gibbs = weights / weights.sum()
    tv = float(0.5 * np.sum(np.abs(p - gibbs)))
    if tv > tol:
        raise OracleMismatch(f"stationary law is {tv:.2e} from Gibbs at beta = {rates.beta}")
    return StationaryResult(p, gibbs, tv)


def detailed_balance_error(rates: RateParams) -> float:
    """max over n of |r(n) exp(beta (8 - 4n)) / r(4 - n) - 1|."""
    r = rates.class_rates()
    return float(
        max(abs(r[n] / r[4 - n] * np.exp(rates.beta * (8 - 4 * n)) - 1) for n in range(5))
    )


def exact_magnetization(M: int, rates: RateParams, times, initial: int = 0) -> np.ndarray:
    """Mean Z over the lattice at each time, from the uniform `initial` state."""
    generator = classical_generator(M, rates)
    p0 = np.zeros(generator.shape[0])
    p0[0 if initial == 0 else -1] = 1
    z = np.array([magnetization(s) for s in _state_spins(M)])
    times = np.asarray(times, dtype=float)
    return np.array([z @ expm_multiply(t * generator, p0) for t in times])


def ising_lindbladian(M: int, rates: RateParams) -> LindbladModel:
    """Quantum version of the flip dynamics on M x M qubits (M <= 2): per site
    one bit flip at delta, four kappa_tilde flips gated on exactly one aligned
    bond, and one kappa flip gated on four misaligned bonds."""
    if not 1 <= M <= MAX_QUANTUM_LATTICE:
        raise DomainError(f"quantum Ising model needs 1 <= M <= {MAX_QUANTUM_LATTICE}, got {M}")
    sites = M * M
    one = identity(pauli("I").factors)

    def on_site(name: str, site: int) -> Operator:
        return tensor(*(pauli(name) if k == site else one for k in range(sites)))

    full = identity(sum((one.factors for _ in range(sites)), ()))
    nbr = _neighbor_table(M)
    jumps, labels = [], []
    for site in range(sites):
        X = on_site("X", site)
        Z = on_site("Z", site)
        aligned = [0.5 * (full + Z @ on_site("Z", int(other))) for other in nbr[site]]
        misaligned = [full - P for P in aligned]

        jumps.append(sqrt(rates.delta) * X)
        labels.append(f"delta[{site}]")
        for k in range(4):
            gate = aligned[k]
            for m in range(4):
                if m != k:
                    gate = gate @ misaligned[m]
            jumps.append(sqrt(rates.kappa_tilde) * (X @ gate))
            labels.append(f"kappa3[{site},{k}]")
        gate = misaligned[0] @ misaligned[1] @ misaligned[2] @ misaligned[3]
        jumps.append(sqrt(rates.kappa) * (X @ gate))
        labels.append(f"kappa4[{site}]")
    return LindbladModel(0 * full, tuple(jumps), tuple(labels))


def lattice_magnetization_operator(M: int) -> Operator:
    sites = M * M
    one = identity(pauli("I").factors)
    total = None
    for site in range(sites):
        Z = tensor(*(pauli("Z") if k == site else one for k in range(sites)))
        total = Z if total is None else total + Z
    return (1 / sites) * total


# --- Toom's rule --------------------------------------------------------------


def toom_step(config: SpinConfig, flip_prob: float = 0.0, seed: int = 0) -> SpinConfig:
    """One synchronous north-east-centre majority update, then independent
    bit flips with probability flip_prob."""
    if not 0 <= flip_prob <= 1:
        raise DomainError(f"flip probability must be in [0, 1], got {flip_prob}")
    spins = _toom_step(config.spins, config.M)
    if flip_prob > 0:
        flips = stream_rng(seed, 0).random(spins.shape) < flip_prob
        spins = spins ^ flips.astype(spins.dtype)
    return SpinConfig(spins)


def toom_erosion_time(config: SpinConfig, max_steps: int) -> int | None:
    """Noise-free steps until the lattice is all down, None if it takes longer."""
    for step in range(max_steps + 1):
        if config.up_count == 0:
            return step
        config = toom_step(config)
    return None
