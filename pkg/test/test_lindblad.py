from math import log

import numpy as np
import pytest
from PySide6.QtCore import QtMsgType

from catising import lindblad
from catising.errors import DegenerateSteadyState, DimensionMismatch, DomainError
from catising.lindblad import (
    DensityMatrix,
    LindbladModel,
    build_liouvillian,
    dissipative_gap,
    ensemble_average,
    evolve,
    evolve_many,
    gauge_shift,
    spectral_evolve,
    sparse_liouvillian,
    steady_state,
    trajectory,
)
from catising.operators import (
    QUBIT,
    FockSpace,
    Operator,
    StateVector,
    annihilation,
    coherent_state,
    number,
    pauli,
)
from catising.utils import stream_rng, stream_seed


SIGMA_MINUS = Operator(np.array([[0, 1], [0, 0]]), QUBIT)  # |up> -> |down>
UP = StateVector.basis(1, QUBIT)
DOWN = StateVector.basis(0, QUBIT)


def random_model(rng, dim=6, n_jumps=2) -> LindbladModel:
    factors = (("cavity", dim),)
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = Operator((A + A.conj().T) / 2, factors)
    jumps = tuple(
        Operator(0.5 * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))), factors)
        for _ in range(n_jumps)
    )
    return LindbladModel(H, jumps)


def rabi_decay(gamma=1.0, omega=2.0) -> LindbladModel:
    return LindbladModel(0.5 * omega * pauli("X"), (np.sqrt(gamma) * SIGMA_MINUS,))


def test_liouvillian_matches_direct_rhs(rng, random_density):
    model = random_model(rng)
    liouvillian = build_liouvillian(model)
    H = model.hamiltonian.entries
    for _ in range(20):
        rho = random_density(model.dim)
        direct = -1j * (H @ rho - rho @ H)
        for jump in model.jumps:
            L = jump.entries
            decay = L.conj().T @ L
            direct += L @ rho @ L.conj().T - 0.5 * (decay @ rho + rho @ decay)
        vectorized = np.reshape(liouvillian @ rho.reshape(-1, order="F"), rho.shape, order="F")
        assert np.linalg.norm(vectorized - direct) <= 1e-10 * np.linalg.norm(direct)


def test_sparse_liouvillian_matches_dense(rng):
    model = random_model(rng, n_jumps=3)
    difference = sparse_liouvillian(model).toarray() - build_liouvillian(model)
    assert np.max(np.abs(difference)) < 1e-12


def test_liouvillian_is_trace_preserving(rng):
    model = random_model(rng)
    liouvillian = build_liouvillian(model)
    trace_row = np.eye(model.dim).reshape(-1, order="F")
    assert np.max(np.abs(trace_row @ liouvillian)) < 1e-10 * np.abs(liouvillian).max()


def test_model_validation():
    with pytest.raises(DomainError):
        LindbladModel(Operator(np.array([[0, 1], [0, 0]]), QUBIT), ())
    with pytest.raises(DimensionMismatch):
        LindbladModel(pauli("Z"), (annihilation(FockSpace(3)),))


def test_density_matrix_validation():
    with pytest.raises(DomainError):
        DensityMatrix(np.eye(2), QUBIT)
    with pytest.raises(DomainError):
        DensityMatrix(np.diag([1.5, -0.5]), QUBIT)


def test_evolve_zero_time_and_semigroup(rng, random_density):
    model = random_model(rng, dim=4)
    rho0 = DensityMatrix(random_density(4), model.factors)
    assert evolve(model, rho0, 0.0) is rho0
    direct = evolve(model, rho0, 0.7)
    stepped = evolve(model, evolve(model, rho0, 0.3), 0.4)
    assert np.max(np.abs(direct.entries - stepped.entries)) < 1e-8
    assert np.trace(direct.entries).real == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DomainError):
        evolve(model, rho0, -1.0)


def test_spectral_evolution_agrees_with_exponential(rng, random_density):
    model = random_model(rng, dim=4)
    rho0 = DensityMatrix(random_density(4), model.factors)
    times = [0.2, 1.0, 3.0]
    for a, b in zip(evolve_many(model, rho0, times), spectral_evolve(model, rho0, times)):
        assert np.max(np.abs(a.entries - b.entries)) < 1e-8


def test_implicit_path_keeps_coherent_states_coherent():
    space = FockSpace(69)  # dim^2 = 4900 takes the BDF path
    model = LindbladModel.dissipative((annihilation(space),))
    alpha = 2.0 + 1.0j
    rho = evolve(model, DensityMatrix.from_state(coherent_state(alpha, space)), 1.0)
    expected = coherent_state(alpha * np.exp(-0.5), space)
    assert rho.fidelity(expected) == pytest.approx(1.0, abs=1e-7)


def test_implicit_path_agrees_with_exponential(rng, random_density, monkeypatch):
    model = random_model(rng, dim=4)
    rho0 = DensityMatrix(random_density(4), model.factors)
    times = [0.0, 0.2, 1.0, 3.0]
    exact = evolve_many(model, rho0, times)
    monkeypatch.setattr(lindblad, "EXPM_MAX_DIM2", 0)
    implicit = evolve_many(model, rho0, times)
    for a, b in zip(exact, implicit):
        assert np.max(np.abs(a.entries - b.entries)) < 1e-6
        assert np.trace(b.entries).real == pytest.approx(1.0, abs=1e-9)


def test_unique_steady_state_of_amplitude_damping():
    space = FockSpace(6)
    model = LindbladModel(number(space), (annihilation(space),))
    rho = steady_state(model)
    vacuum = np.zeros((space.dim, space.dim))
    vacuum[0, 0] = 1
    assert np.max(np.abs(rho.entries - vacuum)) < 1e-9


def test_degenerate_kernel_needs_initial_state():
    model = LindbladModel.dissipative((pauli("Z"),))
    with pytest.raises(DegenerateSteadyState) as error:
        steady_state(model)
    assert error.value.kernel_dim == 2

    plus = StateVector.normalized(np.array([1, 1]), QUBIT)
    rho = steady_state(model, DensityMatrix.from_state(plus))
    assert np.allclose(rho.entries, np.eye(2) / 2, atol=1e-9)


def test_gap_of_qubit_decay():
    model = LindbladModel.dissipative((np.sqrt(0.8) * SIGMA_MINUS,))
    result = dissipative_gap(model)
    assert result.gap == pytest.approx(0.4, rel=1e-9)
    assert result.n_steady == 1
    assert dissipative_gap(model, n_steady=3).gap == pytest.approx(0.8, rel=1e-9)


def test_gap_by_decay_fit():
    model = LindbladModel.dissipative((np.sqrt(0.8) * SIGMA_MINUS,))
    start = DensityMatrix.from_state(StateVector.normalized(np.array([1, 1]), QUBIT))
    fitted = dissipative_gap(model, method="fit", start=start, t_max=20.0)
    assert fitted.gap == pytest.approx(0.4, rel=1e-3)


def test_gauge_shift_leaves_generator_unchanged(rng):
    model = random_model(rng, dim=5)
    shifted = gauge_shift(model, 1, 0.7 - 0.4j)
    assert np.max(np.abs(build_liouvillian(model) - build_liouvillian(shifted))) < 1e-10
    assert np.allclose(
        shifted.jumps[1].entries, model.jumps[1].entries - (0.7 - 0.4j) * np.eye(5)
    )


def test_jump_time_follows_norm_decay():
    gamma = 1.3
    model = LindbladModel.dissipative((np.sqrt(gamma) * SIGMA_MINUS,))
    threshold = stream_rng(5, 0).random()
    result = trajectory(model, UP, 50.0, seed=5)
    assert len(result.jumps) == 1
    assert result.jumps[0].time == pytest.approx(-log(threshold) / gamma, rel=1e-7)
    assert result.jumps[0].channel == 0
    assert abs(result.state.inner(DOWN)) == pytest.approx(1.0)


def test_dark_state_never_jumps():
    model = LindbladModel.dissipative((SIGMA_MINUS,))
    result = trajectory(model, DOWN, 10.0, seed=1, t_eval=[0.0, 5.0, 10.0])
    assert result.jumps == ()
    assert len(result.snapshots) == 3
    assert abs(result.state.inner(DOWN)) == pytest.approx(1.0)


def test_trajectories_are_reproducible():
    model = rabi_decay()
    first = trajectory(model, DOWN, 8.0, seed=11)
    second = trajectory(model, DOWN, 8.0, seed=11)
    assert first.jumps == second.jumps
    assert np.array_equal(first.state.amplitudes, second.state.amplitudes)


def test_jump_log_is_reported(qt_messages):
    model = LindbladModel.dissipative((np.sqrt(1.3) * SIGMA_MINUS,), ("decay",))
    result = trajectory(model, UP, 50.0, seed=5)
    logged = [
        text
        for mode, text in qt_messages
        if mode == QtMsgType.QtDebugMsg and text.startswith("trajectory:")
    ]
    assert logged == [f"trajectory: 1 jumps up to t = 50.0: decay@{result.jumps[0].time:.4g}"]


def test_ensemble_average_independent_of_workers():
    model = rabi_decay()
    Z = pauli("Z")
    one = ensemble_average(model, DOWN, 3.0, 24, [Z], seed=99, t_eval=[1.0, 3.0], workers=1)
    many = ensemble_average(model, DOWN, 3.0, 24, [Z], seed=99, t_eval=[1.0, 3.0], workers=3)
    assert np.array_equal(one.means, many.means)
    assert np.array_equal(one.stderr, many.stderr)


def test_single_trajectory_ensemble_has_no_error_bar():
    model = rabi_decay()
    result = ensemble_average(model, DOWN, 1.0, 1, [pauli("Z")], seed=3)
    assert result.stderr.shape == (1, 1)
    assert result.stderr[0, 0] == 0
    single = trajectory(model, DOWN, 1.0, seed=stream_seed(3, 0), t_eval=[1.0])
    state = single.snapshots[0].amplitudes
    assert result.means[0, 0] == pytest.approx(np.vdot(state, pauli("Z").entries @ state).real)


def test_ensemble_reproduces_master_equation():
    model = rabi_decay()
    Z = pauli("Z")
    times = [0.5, 1.5, 3.0]
    result = ensemble_average(model, DOWN, 3.0, 400, [Z], seed=2024, t_eval=times)
    exact = evolve_many(model, DensityMatrix.from_state(DOWN), times)
    for k, rho in enumerate(exact):
        expected = rho.expectation(Z).real
        assert abs(result.means[k, 0] - expected) < 4 * result.stderr[k, 0] + 1e-3
