"""Mean-field theory of the photonic Ising lattice (photon amplitude plus
bit order parameter Q) and of the single-qubit toy model.

Thermodynamic-limit equations (n = |A|, A = <a^2>):

    dQ/dt = -2 n (c5 Q^5 + c3 Q^3 - c1 Q)
    dA/dt = -2 kappa2 n A - 2 i lam n - (kappa1 + 2 kappad + gamma(Q)) A

with gamma(Q) = g4 Q^4 + g2 Q^2 + g0 the bit-flip loss at order Q.
"""

from dataclasses import dataclass, field
from enum import Enum
from math import sqrt
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from PySide6.QtCore import qDebug
from scipy.integrate import solve_ivp

from catising.config import (
    DEGENERATE_DENOMINATOR_TOL,
    MEANFIELD_RESIDUAL_TOL,
    MF_KAPPA2,
    MF_KAPPA_NN,
    MF_LAMBDA,
    INTEGRATOR_ATOL,
)
from catising.errors import ConvergenceError, DomainError, IntegrationError, InvariantError


class Phase(str, Enum):
    FERRO_CAT = "ferro_cat"
    CAT_ONLY = "cat_only"
    TRIVIAL = "trivial"

    @property
    def rank(self) -> int:
        # ordered from most to least protected
        return {"ferro_cat": 0, "cat_only": 1, "trivial": 2}[self.value]


@dataclass(frozen=True)
class MFInputs:
    kappa1: float
    kappad: float
    kappann: float
    lam: float = MF_LAMBDA
    kappa2: float = MF_KAPPA2
    kappann_tilde: float = field(init=False)

    def __post_init__(self):
        for name in ("kappa1", "kappad", "kappann", "lam"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.kappa2 <= 0:
            raise DomainError(f"kappa2 must be positive, got {self.kappa2}")
        # sqrt(kappa1 kappann + kappa1^2) - kappa1, written without cancellation
        k1, knn = self.kappa1, self.kappann
        tilde = k1 * knn / (sqrt(k1 * knn + k1 * k1) + k1) if k1 > 0 else 0.0
        object.__setattr__(self, "kappann_tilde", tilde)


class MeanFieldPoint(NamedTuple):
    Q_sq: float
    alpha_sq: float
    Z_exp: float | None
    phase: Phase


def gamma_coefficients(inputs: MFInputs) -> tuple[float, float, float]:
    """(g4, g2, g0) of the bit-flip loss gamma(Q) = g4 Q^4 + g2 Q^2 + g0."""
    knn, kt = inputs.kappann, inputs.kappann_tilde
    g4 = (4 * kt - 3 * knn) / 16
    g2 = (knn - 4 * kt) / 8
    g0 = (knn + 4 * kt) / 16
    return g4, g2, g0


def q_coefficients(inputs: MFInputs) -> tuple[float, float, float]:
    """(c5, c3, c1) of the order-parameter force c5 Q^5 + c3 Q^3 - c1 Q."""
    knn, kt = inputs.kappann, inputs.kappann_tilde
    c5 = (knn - 4 * kt) / 16
    c3 = (knn + 4 * kt) / 8
    c1 = (3 * knn + 4 * kt) / 16 - inputs.kappa1
    return c5, c3, c1


def gamma(inputs: MFInputs, Q: float) -> float:
    g4, g2, g0 = gamma_coefficients(inputs)
    return g4 * Q**4 + g2 * Q**2 + g0


def _order_parameter(inputs: MFInputs) -> float:
    """Stable non-zero root x = Q^2 in (0, 1], or 0 when there is none."""
    c5, c3, c1 = q_coefficients(inputs)
    if c3 <= 0 or c1 <= 0:
        return 0.0
    if abs(16 * c5) < DEGENERATE_DENOMINATOR_TOL:
        x = c1 / c3
    else:
        disc = c3 * c3 + 4 * c5 * c1
        if disc < 0:
            return 0.0
        # closed-form root (-c3 + sqrt(disc)) / (2 c5), rationalized for small c5
        x = 2 * c1 / (c3 + sqrt(disc))
    if x > 1 and x - 1 < 1e-12:
        x = 1.0
    if not 0 < x <= 1 or not 2 * c5 * x + c3 > 0:
        return 0.0
    Q = sqrt(x)
    residual = c5 * Q**5 + c3 * Q**3 - c1 * Q
    if abs(residual) > MEANFIELD_RESIDUAL_TOL:
        raise ConvergenceError(f"order-parameter residual {residual:.2e} at Q^2 = {x}")
    return x


def photonic_ising_fixed_point(inputs: MFInputs) -> MeanFieldPoint:
    Q_sq = _order_parameter(inputs)
    numerator = 2 * inputs.lam - inputs.kappa1 - 2 * inputs.kappad - gamma(inputs, sqrt(Q_sq))
    if numerator <= 0:
        return MeanFieldPoint(0.0, 0.0, None, Phase.TRIVIAL)
    alpha_sq = numerator / (2 * inputs.kappa2)
    phase = Phase.FERRO_CAT if Q_sq > 0 else Phase.CAT_ONLY
    return MeanFieldPoint(Q_sq, alpha_sq, None, phase)


def _toy_spin(inputs: MFInputs) -> float:
    denominator = inputs.kappann + 2 * inputs.kappa1
    return inputs.kappann / denominator if denominator > 0 else 0.0


def toy_fixed_point(inputs: MFInputs) -> MeanFieldPoint:
    """Steady <Z> and |<a>|^2 of the toy model. Q_sq carries <Z>^2, the
    bit order of the single qubit."""
    Z = _toy_spin(inputs)
    denominator = inputs.kappann + 2 * inputs.kappa1
    drain = inputs.kappa1 * inputs.kappann / denominator if denominator > 0 else 0.0
    numerator = inputs.lam - 0.5 * (inputs.kappa1 + inputs.kappad + drain)
    if numerator <= 0:
        return MeanFieldPoint(0.0, 0.0, Z, Phase.TRIVIAL)
    Q_sq = Z * Z
    phase = Phase.FERRO_CAT if Q_sq > 0 else Phase.CAT_ONLY
    return MeanFieldPoint(Q_sq, numerator / inputs.kappa2, Z, phase)


class MeanFieldTrajectory(NamedTuple):
    times: np.ndarray
    Q: np.ndarray
    a2: np.ndarray


def meanfield_ode(
    inputs: MFInputs, Q0: float, a2_0: complex, t_final: float, n_points: int = 200
) -> MeanFieldTrajectory:
    if not -1 <= Q0 <= 1:
        raise DomainError(f"order parameter must lie in [-1, 1], got {Q0}")
    if t_final <= 0:
        raise DomainError(f"integration time must be positive, got {t_final}")
    c5, c3, c1 = q_coefficients(inputs)
    g4, g2, g0 = gamma_coefficients(inputs)
    loss = inputs.kappa1 + 2 * inputs.kappad

    def rhs(_t, y):
        Q, A = y[0], y[1] + 1j * y[2]
        n = abs(A)
        dQ = -2 * n * (c5 * Q**5 + c3 * Q**3 - c1 * Q)
        rate = loss + g4 * Q**4 + g2 * Q**2 + g0
        dA = -2 * inputs.kappa2 * n * A - 2j * inputs.lam * n - rate * A
        return [dQ, dA.real, dA.imag]

    times = np.linspace(0, t_final, n_points)
    solution = solve_ivp(
        rhs,
        (0, t_final),
        [Q0, a2_0.real, a2_0.imag],
        method="LSODA",
        t_eval=times,
        rtol=1e-10,
        atol=INTEGRATOR_ATOL,
    )
    if solution.status < 0:
        raise IntegrationError(solution.message)
    return MeanFieldTrajectory(solution.t, solution.y[0], solution.y[1] + 1j * solution.y[2])


class ToyTrajectory(NamedTuple):
    times: np.ndarray
    a: np.ndarray
    Z: np.ndarray


def toy_meanfield_ode(
    inputs: MFInputs, a0: complex, Z0: float, t_final: float, n_points: int = 200
) -> ToyTrajectory:
    """d<a>/dt = -i lam <a>^* - (kappa1 + kappad + kappann (1 - Z)/2) <a>/2 - kappa2 |a|^2 <a>
    dZ/dt = -2 kappa1 |a|^2 Z + kappann |a|^2 (1 - Z)"""
    if not -1 <= Z0 <= 1:
        raise DomainError(f"<Z> must lie in [-1, 1], got {Z0}")
    if t_final <= 0:
        raise DomainError(f"integration time must be positive, got {t_final}")
    k1, kd, knn = inputs.kappa1, inputs.kappad, inputs.kappann

    def rhs(_t, y):
        a, Z = y[0] + 1j * y[1], y[2]
        n = abs(a) ** 2
        da = -1j * inputs.lam * np.conj(a) - 0.5 * (k1 + kd + 0.5 * knn * (1 - Z)) * a
        da -= inputs.kappa2 * n * a
        dZ = -2 * k1 * n * Z + knn * n * (1 - Z)
        return [da.real, da.imag, dZ]

    times = np.linspace(0, t_final, n_points)
    solution = solve_ivp(
        rhs, (0, t_final), [a0.real, a0.imag, Z0], method="LSODA", t_eval=times, rtol=1e-10, atol=INTEGRATOR_ATOL
    )
    if solution.status < 0:
        raise IntegrationError(solution.message)
    return ToyTrajectory(solution.t, solution.y[0] + 1j * solution.y[1], solution.y[2])


@dataclass
class PhaseDiagram:
    kappa1_values: np.ndarray
    kappad_values: np.ndarray
    points: list[list[MeanFieldPoint]]  # [kappad index][kappa1 index]
    diagonal: bool = False

    def rows(self) -> Iterator[tuple[float, float, float, float, str]]:
        for j, row in enumerate(self.points):
            for i, point in enumerate(row):
                kappad = self.kappa1_values[i] if self.diagonal else self.kappad_values[j]
                yield (
                    float(self.kappa1_values[i]),
                    float(kappad),
                    point.Q_sq,
                    point.alpha_sq,
                    point.phase.value,
                )

    def ordering_holds(self) -> bool:
        """Phase rank never decreases along rows (kappa1 up) or columns (kappad up)."""
        ranks = np.array([[p.phase.rank for p in row] for row in self.points])
        return bool(np.all(np.diff(ranks, axis=1) >= 0) and np.all(np.diff(ranks, axis=0) >= 0))


def phase_diagram(
    kappa1_values: Sequence[float],
    kappad_values: Sequence[float] = (),
    kappann: float = MF_KAPPA_NN,
    lam: float = MF_LAMBDA,
    kappa2: float = MF_KAPPA2,
    diagonal: bool = False,
) -> PhaseDiagram:
    """Fixed points on the (kappa1, kappad) grid, or along kappad = kappa1
    when diagonal."""
    kappa1_values = np.asarray(kappa1_values, dtype=float)
    kappad_values = np.asarray(kappad_values, dtype=float)
    if np.any(np.diff(kappa1_values) <= 0) or (not diagonal and np.any(np.diff(kappad_values) <= 0)):
        raise DomainError("phase diagram grids must be strictly increasing")
    if diagonal:
        rows = [[photonic_ising_fixed_point(MFInputs(k1, k1, kappann, lam, kappa2)) for k1 in kappa1_values]]
    else:
        if kappad_values.size == 0:
            raise DomainError("a two-dimensional phase diagram needs kappad values")
        rows = [
            [photonic_ising_fixed_point(MFInputs(k1, kd, kappann, lam, kappa2)) for k1 in kappa1_values]
            for kd in kappad_values
        ]
    diagram = PhaseDiagram(kappa1_values, kappad_values, rows, diagonal)
    if not diagram.ordering_holds():
        raise InvariantError("phase rank decreases somewhere along the (kappa1, kappad) grid")
    qDebug(f"phase_diagram: {sum(len(r) for r in rows)} points")
    return diagram
