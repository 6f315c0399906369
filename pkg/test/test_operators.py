from math import pi, sqrt

import numpy as np
import pytest
from scipy import stats

from catising.errors import DimensionMismatch, DomainError, TruncationError
from catising.operators import (
    QUBIT,
    FockSpace,
    Operator,
    StateVector,
    annihilation,
    cat_states,
    codespace_projector,
    coherent_state,
    coherent_tail,
    creation,
    expectation,
    identity,
    josephson_diagonal,
    josephson_rwa_hamiltonian,
    josephson_rwa_laguerre,
    josephson_rwa_two_mode,
    laguerre_scaled,
    number,
    parity,
    pauli,
    tensor,
)
from catising.config import default_fock_cutoff


def test_commutator_is_identity_below_cutoff(space):
    a = annihilation(space)
    commutator = (a @ a.dag() - a.dag() @ a).entries
    n = space.n_max
    assert np.max(np.abs(commutator[:n, :n] - np.eye(n))) < 1e-12


def test_creation_is_adjoint_and_number_counts(space):
    a, ad = annihilation(space), creation(space)
    assert np.allclose(ad.entries, a.entries.conj().T)
    assert np.allclose((ad @ a).entries, number(space).entries)


def test_operators_are_immutable(space):
    a = annihilation(space)
    with pytest.raises(ValueError):
        a.entries[0, 1] = 5


def test_mismatched_spaces_are_rejected():
    with pytest.raises(DimensionMismatch):
        annihilation(FockSpace(5)) @ annihilation(FockSpace(6))
    with pytest.raises(DimensionMismatch):
        Operator(np.eye(3), QUBIT)


def test_coherent_state_tail_matches_poisson():
    space = FockSpace(12, leak_tol=1e-2)
    alpha = 2.0 * np.exp(0.3j)
    state = coherent_state(alpha, space)
    deficit = 1 - state.norm() ** 2
    tail = stats.poisson.sf(space.n_max, abs(alpha) ** 2)
    assert tail / 2 <= deficit <= 2 * tail
    assert coherent_tail(alpha, space) == pytest.approx(tail, rel=1e-6)


def test_coherent_state_amplitudes_and_mean(space):
    alpha = 1.5 - 0.5j
    state = coherent_state(alpha, space)
    assert state.amplitudes[3] == pytest.approx(
        np.exp(-abs(alpha) ** 2 / 2) * alpha**3 / sqrt(6)
    )
    a = annihilation(space)
    assert expectation(a, state) == pytest.approx(alpha, abs=1e-9)


def test_coherent_state_beyond_cutoff_raises():
    with pytest.raises(TruncationError):
        coherent_state(5.0, FockSpace(10))


def test_default_cutoff_holds_coherent_states():
    for N in (1, 4, 8, 16):
        space = FockSpace(default_fock_cutoff(N))
        assert coherent_tail(sqrt(N), space) < 1e-10


def test_cat_states_are_exact_parity_eigenstates(space):
    plus, minus = cat_states(2.0, space)
    P = parity(space)
    assert expectation(P, plus).real == pytest.approx(1.0, abs=1e-12)
    assert expectation(P, minus).real == pytest.approx(-1.0, abs=1e-12)
    assert np.all(plus.amplitudes[1::2] == 0)
    assert np.all(minus.amplitudes[0::2] == 0)
    assert abs(plus.inner(minus)) == 0


def test_cats_recombine_into_coherent_state(space):
    alpha = 2.0 * np.exp(-1j * pi / 4)
    plus, minus = cat_states(alpha, space)
    recombined = (plus.amplitudes + minus.amplitudes) / sqrt(2)
    coherent = coherent_state(alpha, space).amplitudes
    assert np.linalg.norm(recombined - coherent) < 2 * np.exp(-2 * abs(alpha) ** 2)


def test_odd_cat_undefined_at_zero(space):
    with pytest.raises(DomainError):
        cat_states(0.0, space)


def test_codespace_projector(space):
    V = codespace_projector(1.7j, space).entries
    assert np.allclose(V @ V, V, atol=1e-12)
    assert np.trace(V).real == pytest.approx(2.0)


def test_pauli_convention_and_tensor_shapes(space):
    down = StateVector.basis(0, QUBIT)
    assert expectation(pauli("Z"), down).real == 1.0
    op = tensor(pauli("X"), annihilation(space))
    assert op.dim == 2 * space.dim
    assert op.space_tag == "qubit⊗cavity"
    with pytest.raises(DomainError):
        pauli("W")


def test_identity_over_factors():
    one = identity(QUBIT + FockSpace(3).factors)
    assert np.array_equal(one.entries, np.eye(8))


def test_laguerre_recurrence_against_scipy():
    from scipy.special import eval_laguerre

    y = 3.7
    values = laguerre_scaled(20, y)
    expected = np.exp(-y / 2) * eval_laguerre(np.arange(21), y)
    assert np.allclose(values, expected, rtol=1e-10, atol=1e-14)


def test_josephson_rwa_at_zero_displacement(space):
    H = josephson_rwa_hamiltonian(2.5, 0.0, space)
    assert np.allclose(H.entries, -2.5 * np.eye(space.dim), atol=1e-12)


def test_josephson_rwa_constructions_agree():
    space = FockSpace(default_fock_cutoff(16))
    H_eig = josephson_rwa_hamiltonian(1.0, 8.0, space)
    H_lag = josephson_rwa_laguerre(1.0, 8.0, space)
    assert np.max(np.abs(H_eig.entries - H_lag.entries)) < 1e-8


def test_josephson_rwa_cat_splitting_is_parity():
    N, E_J = 16, 1.0
    space = FockSpace(default_fock_cutoff(N))
    alpha = sqrt(N)
    H = josephson_rwa_hamiltonian(E_J, 2 * alpha, space)
    plus, minus = cat_states(alpha, space)
    splitting = expectation(H, plus).real - expectation(H, minus).real
    omega = E_J / sqrt(2 * pi * N)
    assert splitting == pytest.approx(-omega, rel=0.01)


def test_josephson_two_mode_couples_parities():
    N, E_J = 4, 1.0
    space = FockSpace(default_fock_cutoff(N))
    alpha = sqrt(N)
    H = josephson_rwa_two_mode(E_J, 2 * alpha, 2 * alpha, space, space)
    plus, minus = cat_states(alpha, space)

    def energy(first, second):
        state = np.kron(first.amplitudes, second.amplitudes)
        return np.vdot(state, H.entries @ state).real

    omega = E_J / sqrt(2 * pi * N)
    coupling = -(omega * omega) / (4 * E_J)
    assert energy(plus, plus) == pytest.approx(coupling, rel=0.03)
    assert energy(minus, minus) == pytest.approx(coupling, rel=0.03)
    assert energy(plus, minus) == pytest.approx(-coupling, rel=0.03)


def test_josephson_rejects_negative_displacement(space):
    with pytest.raises(DomainError):
        josephson_diagonal(-1.0, space.n_max)
