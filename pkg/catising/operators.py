"""Fock-space building blocks: truncated bosonic operators, coherent and cat
states, tensor products and the Josephson rotating-wave Hamiltonian.

Qubit convention: basis index 0 is |down> with Z|down> = +|down>, index 1 is
|up> with Z|up> = -|up>.
"""

from dataclasses import dataclass
from functools import reduce
from math import ceil

import numpy as np
from scipy import linalg, special

from catising.config import LEAK_TOL, RWA_CONVERGENCE_STEP, RWA_CONVERGENCE_TOL
from catising.errors import ConvergenceError, DimensionMismatch, DomainError, TruncationError


Factors = tuple[tuple[str, int], ...]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def _tag(factors: Factors) -> str:
    return "⊗".join(name for name, _ in factors)


@dataclass(frozen=True)
class FockSpace:
    n_max: int
    leak_tol: float = LEAK_TOL

    def __post_init__(self):
        if self.n_max < 1:
            raise DomainError(f"Fock cutoff must be at least 1, got {self.n_max}")
        if self.leak_tol <= 0:
            raise DomainError(f"leak tolerance must be positive, got {self.leak_tol}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def factors(self) -> Factors:
        return (("cavity", self.dim),)

    def enlarged(self, levels: int) -> "FockSpace":
        return FockSpace(self.n_max + levels, self.leak_tol)


QUBIT: Factors = (("qubit", 2),)


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray
    factors: Factors

    __array_ufunc__ = None  # numpy scalars defer to __rmul__

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"operator must be square, got {entries.shape}")
        expected = int(np.prod([d for _, d in self.factors]))
        if entries.shape[0] != expected:
            raise DimensionMismatch(
                f"operator of size {entries.shape[0]} on {self.space_tag} (dim {expected})"
            )
        if not np.all(np.isfinite(entries)):
            raise DomainError("operator has non-finite entries")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def space_tag(self) -> str:
        return _tag(self.factors)

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, self.factors)

    def is_hermitian(self, tol: float) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol)

    def _check(self, other: "Operator"):
        if self.factors != other.factors:
            raise DimensionMismatch(f"{self.space_tag} vs {other.space_tag}")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.entries + other.entries, self.factors)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.entries - other.entries, self.factors)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(scalar * self.entries, self.factors)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(-self.entries, self.factors)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.entries @ other.entries, self.factors)
        if isinstance(other, StateVector):
            if self.factors != other.factors:
                raise DimensionMismatch(f"{self.space_tag} vs {other.space_tag}")
            return self.entries @ other.amplitudes  # not normalized in general
        return NotImplemented


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    factors: Factors
    leak_tol: float = LEAK_TOL

    def __post_init__(self):
        amplitudes = _frozen(self.amplitudes)
        expected = int(np.prod([d for _, d in self.factors]))
        if amplitudes.shape != (expected,):
            raise DimensionMismatch(
                f"state of shape {amplitudes.shape} on {self.space_tag} (dim {expected})"
            )
        norm = np.linalg.norm(amplitudes)
        if not abs(norm - 1) <= self.leak_tol:
            raise DomainError(f"state norm {norm} deviates from 1 by more than {self.leak_tol}")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def normalized(cls, amplitudes: np.ndarray, factors: Factors) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise DomainError("cannot normalize the zero vector")
        return cls(amplitudes / norm, factors)

    @classmethod
    def basis(cls, index: int, factors: Factors) -> "StateVector":
        amplitudes = np.zeros(int(np.prod([d for _, d in factors])), dtype=complex)
        amplitudes[index] = 1
        return cls(amplitudes, factors)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def space_tag(self) -> str:
        return _tag(self.factors)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>"""
        if self.factors != other.factors:
            raise DimensionMismatch(f"{self.space_tag} vs {other.space_tag}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> Operator:
        return Operator(np.outer(self.amplitudes, self.amplitudes.conj()), self.factors)


def annihilation(space: FockSpace) -> Operator:
    return Operator(np.diag(np.sqrt(np.arange(1, space.dim)), k=1), space.factors)


def creation(space: FockSpace) -> Operator:
    return annihilation(space).dag()


def number(space: FockSpace) -> Operator:
    return Operator(np.diag(np.arange(space.dim, dtype=float)), space.factors)


def parity(space: FockSpace) -> Operator:
    return Operator(np.diag((-1.0) ** np.arange(space.dim)), space.factors)


def identity(factors: Factors) -> Operator:
    return Operator(np.eye(int(np.prod([d for _, d in factors]))), factors)


_PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]),
}


def pauli(name: str) -> Operator:
    try:
        return Operator(_PAULI[name.upper()], QUBIT)
    except KeyError:
        raise DomainError(f"unknown Pauli operator '{name}'") from None


def tensor(*operators: Operator) -> Operator:
    if not operators:
        raise DomainError("tensor product of nothing")
    entries = reduce(np.kron, (op.entries for op in operators))
    factors = sum((op.factors for op in operators), ())
    return Operator(entries, factors)


def tensor_states(*states: StateVector) -> StateVector:
    amplitudes = reduce(np.kron, (s.amplitudes for s in states))
    factors = sum((s.factors for s in states), ())
    return StateVector.normalized(amplitudes, factors)


def expectation(op: Operator, state: StateVector) -> complex:
    return complex(np.vdot(state.amplitudes, op @ state))


def coherent_tail(alpha: complex, space: FockSpace) -> float:
    """Poisson weight beyond the cutoff, sum_{n > n_max} e^{-|a|^2} |a|^2n / n!."""
    return float(special.gammainc(space.n_max + 1, abs(alpha) ** 2))


def _coherent_amplitudes(alpha: complex, space: FockSpace) -> np.ndarray:
    n = np.arange(space.dim)
    amplitudes = np.empty(space.dim, dtype=complex)
    amplitudes[0] = np.exp(-abs(alpha) ** 2 / 2)
    for k in n[1:]:
        amplitudes[k] = amplitudes[k - 1] * alpha / np.sqrt(k)
    return amplitudes


def coherent_state(alpha: complex, space: FockSpace) -> StateVector:
    amplitudes = _coherent_amplitudes(alpha, space)
    deficit = 1 - float(np.sum(np.abs(amplitudes) ** 2))
    if deficit > space.leak_tol:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} leaks {deficit:.2e} past n_max = {space.n_max}"
        )
    return StateVector(amplitudes, space.factors, space.leak_tol)


def cat_states(alpha: complex, space: FockSpace) -> tuple[StateVector, StateVector]:
    """Even and odd cats, normalized against the truncated norm. Parity
    eigenstates exactly: the other parity carries exact zeros."""
    if alpha == 0:
        raise DomainError("odd cat state is undefined at alpha = 0")
    amplitudes = _coherent_amplitudes(alpha, space)
    deficit = 1 - float(np.sum(np.abs(amplitudes) ** 2))
    if deficit > space.leak_tol:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} leaks {deficit:.2e} past n_max = {space.n_max}"
        )
    even = np.arange(space.dim) % 2 == 0
    plus = np.where(even, amplitudes, 0)
    minus = np.where(even, 0, amplitudes)
    return (
        StateVector.normalized(plus, space.factors),
        StateVector.normalized(minus, space.factors),
    )


def codespace_projector(alpha: complex, space: FockSpace) -> Operator:
    plus, minus = cat_states(alpha, space)
    return plus.projector() + minus.projector()


def laguerre_scaled(n_max: int, y: float) -> np.ndarray:
    """e^{-y/2} L_n(y) for n = 0..n_max by forward three-term recurrence."""
    values = np.empty(n_max + 1)
    values[0] = np.exp(-y / 2)
    if n_max >= 1:
        values[1] = (1 - y) * values[0]
    for n in range(1, n_max):
        values[n + 1] = ((2 * n + 1 - y) * values[n] - n * values[n - 1]) / (n + 1)
    return values


def _cosine_diagonal(x: float, n_big: int) -> np.ndarray:
    """Diagonal of cos(x (a + a^dag)) on n_big + 1 levels."""
    off = x * np.sqrt(np.arange(1, n_big + 1))
    eigenvalues, vectors = linalg.eigh_tridiagonal(np.zeros(n_big + 1), off)
    return np.einsum("ij,j,ij->i", vectors, np.cos(eigenvalues), vectors)


def josephson_diagonal(x: float, n_max: int) -> np.ndarray:
    """Diagonal of cos(x (a + a^dag)) for n <= n_max, computed in an enlarged
    space and checked against a further enlargement."""
    if x < 0:
        raise DomainError(f"Josephson displacement must be non-negative, got {x}")
    pad = ceil(2 * x * x + 20 * x + 40)
    diagonal = _cosine_diagonal(x, n_max + pad)[: n_max + 1]
    check = _cosine_diagonal(x, n_max + pad + RWA_CONVERGENCE_STEP)[: n_max + 1]
    drift = float(np.max(np.abs(diagonal - check)))
    if drift > RWA_CONVERGENCE_TOL:
        raise ConvergenceError(f"cos(x(a+a^dag)) diagonal moved by {drift:.2e} on enlargement")
    return diagonal


def josephson_rwa_hamiltonian(E_J: float, x: float, space: FockSpace) -> Operator:
    """Diagonal part of -E_J cos(x(a + a^dag)), the rotating-wave Hamiltonian
    of a Josephson junction driven off-resonantly."""
    return Operator(np.diag(-E_J * josephson_diagonal(x, space.n_max)), space.factors)


def josephson_rwa_laguerre(E_J: float, x: float, space: FockSpace) -> Operator:
    """Same Hamiltonian from the closed form <n|cos(x(a+a^dag))|n> = e^{-x^2/2} L_n(x^2)."""
    if x < 0:
        raise DomainError(f"Josephson displacement must be non-negative, got {x}")
    return Operator(np.diag(-E_J * laguerre_scaled(space.n_max, x * x)), space.factors)


def josephson_rwa_two_mode(
    E_J: float, x1: float, x2: float, space1: FockSpace, space2: FockSpace
) -> Operator:
    """Diagonal part of -E_J cos(x1(a+a^dag) + x2(b+b^dag)). The cosine of a sum
    keeps only cos*cos on the diagonal because each sine factor is odd."""
    diagonal = np.kron(
        josephson_diagonal(x1, space1.n_max), josephson_diagonal(x2, space2.n_max)
    )
    return Operator(np.diag(-E_J * diagonal), space1.factors + space2.factors)
