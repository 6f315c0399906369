from math import exp, sqrt

import numpy as np
import pytest
from PySide6.QtCore import QtMsgType

from catising import cavity_models
from catising.errors import DomainError, InvariantError
from catising.lindblad import DensityMatrix, build_liouvillian, evolve_many, gauge_shift, spectral_evolve
from catising.meanfield import MFInputs, toy_fixed_point
from catising.operators import (
    QUBIT,
    FockSpace,
    StateVector,
    cat_states,
    codespace_projector,
    coherent_state,
    parity,
    pauli,
    tensor,
    tensor_states,
)
from catising.cavity_models import (
    PHASE,
    CavityParams,
    gap_scan,
    mean_photon_number,
    model1,
    model2,
    shifted_amplitude,
    steady_overlap_scan,
    toy_codespace_overlap,
    toy_fidelity_experiment,
    toy_initial_state,
    toy_model,
    two_photon_model,
)
from catising.utils import linear_fit


def test_params_derive_amplitudes():
    params = CavityParams.for_photon_number(4.0, kappa2=2.0, kappa1=0.2)
    assert params.lam == 8.0
    assert params.alpha == pytest.approx(2 * PHASE)
    assert shifted_amplitude(params) == pytest.approx(4.0 - 0.05)
    with pytest.raises(DomainError):
        CavityParams(lam=1.0, kappa2=0.0)
    with pytest.raises(DomainError):
        CavityParams(lam=0.1, kappa1=1.0).mu


def test_cats_are_dark_states_of_the_stabilizer():
    params = CavityParams.for_photon_number(4.0)
    L_c = model1(params).jumps[0]
    for state in (*cat_states(params.alpha, params.space), coherent_state(-params.alpha, params.space)):
        assert np.linalg.norm(L_c @ state) < 1e-6


def test_gauge_form_matches_two_photon_drive():
    params = CavityParams.for_photon_number(3.0, kappa1=0.05)
    shift = -sqrt(params.kappa2) * params.alpha**2
    shifted = gauge_shift(model1(params), 0, shift)
    reference = build_liouvillian(two_photon_model(params))
    difference = build_liouvillian(shifted) - reference
    assert np.max(np.abs(difference)) < 1e-10 * np.max(np.abs(reference))


def test_single_cavity_models_reject_toy_rates():
    with pytest.raises(DomainError):
        model1(CavityParams.for_photon_number(2.0, kappad=0.1))


def test_projected_loss_stays_in_code_space():
    params = CavityParams.for_photon_number(3.0, kappa1=0.1)
    V = codespace_projector(params.alpha, params.space)
    E = model2(params).jumps[1]
    assert np.max(np.abs((V @ E).entries - E.entries)) < 1e-6
    plus, minus = cat_states(params.alpha, params.space)
    flipped = StateVector.normalized(E @ plus, params.space.factors)
    assert abs(flipped.inner(minus)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("build", [model1, model2, two_photon_model])
def test_parity_is_a_weak_symmetry(build):
    params = CavityParams.for_photon_number(2.0, kappa1=0.1)
    P = parity(params.space).entries.real
    superop = np.kron(P, P)
    liouvillian = build_liouvillian(build(params))
    commutator = superop @ liouvillian - liouvillian @ superop
    assert np.max(np.abs(commutator)) < 1e-10 * np.max(np.abs(liouvillian))


def _commutes_with_conjugation(liouvillian: np.ndarray, U: np.ndarray) -> float:
    superop = np.kron(U.conj(), U)
    commutator = superop @ liouvillian - liouvillian @ superop
    return np.max(np.abs(commutator)) / np.max(np.abs(liouvillian))


def test_toy_model_conserves_qubit_z_times_parity():
    params = CavityParams.for_photon_number(2.0, kappa1=0.1, kappad=0.1, kappann=0.3, space=FockSpace(20))
    U = tensor(pauli("Z"), parity(params.space)).entries
    assert _commutes_with_conjugation(build_liouvillian(toy_model(params)), U) < 1e-12


def test_x_times_parity_is_broken_only_by_the_neighbour_channel():
    space = FockSpace(20)
    U = tensor(pauli("X"), parity(space)).entries
    without = CavityParams.for_photon_number(2.0, kappa1=0.1, kappad=0.1, space=space)
    with_neighbour = CavityParams.for_photon_number(2.0, kappa1=0.1, kappad=0.1, kappann=0.3, space=space)
    assert _commutes_with_conjugation(build_liouvillian(toy_model(without)), U) < 1e-12
    assert _commutes_with_conjugation(build_liouvillian(toy_model(with_neighbour)), U) > 1e-3


def test_two_photon_model_conserves_parity_without_loss():
    params = CavityParams.for_photon_number(2.0)
    rho0 = DensityMatrix.from_state(coherent_state(0.5, params.space))
    Q = parity(params.space)
    states = evolve_many(two_photon_model(params), rho0, [0.0, 0.5, 2.0, 5.0])
    for rho in states:
        assert rho.expectation(Q).real == pytest.approx(exp(-0.5), abs=1e-8)

    lossy = CavityParams.for_photon_number(2.0, kappa1=0.5)
    (late,) = evolve_many(two_photon_model(lossy), rho0, [5.0])
    assert abs(late.expectation(Q).real - exp(-0.5)) > 1e-2


def test_projected_loss_model_reduces_to_gauge_form_without_loss():
    params = CavityParams.for_photon_number(3.0)
    difference = build_liouvillian(model2(params)) - build_liouvillian(model1(params))
    assert np.max(np.abs(difference)) < 1e-14


@pytest.mark.slow
def test_both_models_settle_close_together_at_weak_loss():
    params = CavityParams.for_photon_number(8.0, kappa1=1e-3)
    rho0 = DensityMatrix.from_state(coherent_state(params.alpha, params.space))
    (first,) = spectral_evolve(model1(params), rho0, [200.0])
    (second,) = spectral_evolve(model2(params), rho0, [200.0])
    distance = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(first.entries - second.entries)))
    assert distance < 0.05


@pytest.mark.parametrize("build", [model1, model2, toy_model])
def test_evolution_keeps_states_positive(build):
    if build is toy_model:
        params = CavityParams.for_photon_number(2.0, kappa1=0.1, kappad=0.1, kappann=0.3)
        rho0 = DensityMatrix.from_state(toy_initial_state(params))
    else:
        params = CavityParams.for_photon_number(2.0, kappa1=0.1)
        rho0 = DensityMatrix.from_state(cat_states(params.alpha, params.space)[0])
    for rho in evolve_many(build(params), rho0, [0.1, 1.0, 5.0, 20.0]):
        assert np.linalg.eigvalsh(rho.entries)[0] > -1e-9
        assert np.trace(rho.entries).real == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("N", [2.0, 4.0, 8.0])
@pytest.mark.parametrize("kappa1", [1e-3, 1e-2, 1e-1])
def test_shifted_coherent_state_overlap(N, kappa1):
    params = CavityParams.for_photon_number(N, kappa1=kappa1)
    overlap = abs(
        coherent_state(params.alpha, params.space).inner(coherent_state(params.mu, params.space))
    ) ** 2
    assert overlap == pytest.approx(exp(-(sqrt(N) - abs(params.mu)) ** 2), abs=1e-9)
    assert overlap == pytest.approx(exp(-(kappa1**2) / (16 * params.kappa2 * params.lam)), abs=1e-5)


def test_mean_photon_number_of_coherent_state():
    params = CavityParams.for_photon_number(5.0)
    rho = DensityMatrix.from_state(coherent_state(params.alpha, params.space))
    assert mean_photon_number(rho, params.space) == pytest.approx(5.0, abs=1e-8)


def test_neighbour_channel_leaves_down_untouched():
    params = CavityParams.for_photon_number(2.0, kappa1=0.1, kappad=0.1, kappann=0.3)
    model = toy_model(params)
    assert model.labels[3] == "neighbour"
    rng = np.random.default_rng(4)
    cavity = StateVector.normalized(
        rng.normal(size=params.space.dim) + 1j * rng.normal(size=params.space.dim),
        params.space.factors,
    )
    down = tensor_states(StateVector.basis(0, QUBIT), cavity)
    assert np.linalg.norm(model.jumps[3] @ down) < 1e-14


def test_toy_initial_state_is_in_code_space():
    params = CavityParams.for_photon_number(3.0, kappa1=0.1, kappad=0.1, kappann=0.3)
    psi = toy_initial_state(params)
    assert psi.dim == 2 * params.space.dim
    rho = DensityMatrix.from_state(psi)
    assert toy_codespace_overlap(rho, params) == pytest.approx(1.0, abs=1e-9)


def test_model1_keeps_the_shifted_coherent_state():
    (point,) = steady_overlap_scan("model1", [3.0], [1e-3], check_cutoff=False)
    assert point.overlap > 0.99
    assert point.n_max == CavityParams.for_photon_number(3.0).space.n_max


def test_model2_settles_on_the_unshifted_coherent_state():
    (point,) = steady_overlap_scan("model2", [3.0], [0.1], check_cutoff=False)
    params = CavityParams.for_photon_number(3.0, kappa1=0.1)
    assert point.overlap == pytest.approx(exp(-(sqrt(3.0) - abs(params.mu)) ** 2), abs=1e-6)


def test_scans_reject_unknown_models():
    with pytest.raises(DomainError):
        steady_overlap_scan("model3", [2.0], [0.01])
    with pytest.raises(DomainError):
        gap_scan("model3", [2.0], 0.01)


@pytest.mark.slow
def test_model1_overlap_grows_with_photon_number():
    points = steady_overlap_scan("model1", [2.0, 4.0, 8.0], [1e-3], workers=2)
    overlaps = [p.overlap for p in points]
    assert overlaps == sorted(overlaps)
    assert overlaps[-1] > 0.99


@pytest.mark.slow
def test_gap_grows_linearly_with_photon_number():
    N_values = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
    scan = gap_scan("model1", N_values, 1e-3, check_cutoff=False)
    assert np.all(np.diff(scan.gaps) > 0)
    assert scan.fit.slope > 0
    assert scan.fit.r_squared > 0.999
    projected = gap_scan("model2", [8.0], 1e-3, check_cutoff=False)
    assert projected.gaps[0] == pytest.approx(scan.gaps[-1], rel=0.02)


@pytest.mark.slow
def test_projected_loss_deviation_scales_with_kappa1_squared():
    kappa1_values = [3e-2, 1e-1, 3e-1]
    points = steady_overlap_scan("model2", [8.0], kappa1_values, check_cutoff=False)
    deviation = [1 - p.overlap for p in sorted(points, key=lambda p: p.kappa1)]
    fit = linear_fit(np.log(kappa1_values), np.log(deviation))
    assert fit.slope == pytest.approx(2.0, abs=0.05)


@pytest.mark.slow
def test_gauge_model_deviation_grows_with_kappa1():
    points = steady_overlap_scan("model1", [8.0], [3e-2, 1e-1, 3e-1], check_cutoff=False)
    deviation = [1 - p.overlap for p in sorted(points, key=lambda p: p.kappa1)]
    assert deviation == sorted(deviation)


def test_scan_rejects_overlap_falling_with_photon_number(monkeypatch):
    monkeypatch.setattr(cavity_models, "_settled_overlap", lambda family, params, method, t: 1 / params.N)
    with pytest.raises(InvariantError) as error:
        steady_overlap_scan("model1", [2.0, 3.0, 4.0], [1e-3], check_cutoff=False)
    assert error.value.exit_code == 3
    # strong loss is allowed to push the overlap either way
    points = steady_overlap_scan("model1", [2.0, 3.0, 4.0], [0.1], check_cutoff=False)
    assert [p.overlap for p in points] == pytest.approx([1 / 2, 1 / 3, 1 / 4])


def test_converged_gap_raises_no_cutoff_warning(qt_messages):
    gap_scan("model1", [2.0], 1e-3)
    assert not [text for mode, text in qt_messages if mode == QtMsgType.QtWarningMsg]


def test_tight_cutoff_is_reported(monkeypatch, qt_messages):
    monkeypatch.setattr(cavity_models, "default_fock_cutoff", lambda N: 8)
    scan = gap_scan("model1", [3.0], 0.1)
    assert scan.gaps[0] > 0
    warnings = [text for mode, text in qt_messages if mode == QtMsgType.QtWarningMsg]
    assert any(text.startswith("model1 gap at N = 3.0 moved by") for text in warnings)


def test_converged_toy_fidelity_raises_no_cutoff_warning(qt_messages):
    (point,) = toy_fidelity_experiment([1.0])
    assert 0 < point.fidelity <= 1
    assert not [text for mode, text in qt_messages if mode == QtMsgType.QtWarningMsg]


@pytest.mark.slow
def test_neighbour_channel_restores_fidelity():
    keep = toy_fidelity_experiment([2.0], keep_neighbour=True, check_cutoff=False)[0]
    drop = toy_fidelity_experiment([2.0], keep_neighbour=False, check_cutoff=False)[0]
    assert keep.fidelity > drop.fidelity
    assert 0.5 < drop.codespace_weight < 1.0


@pytest.mark.slow
def test_toy_fidelity_halves_without_neighbour_channel():
    points = toy_fidelity_experiment([6.0, 8.0], kappann=0.0, check_cutoff=False)
    for point in points:
        assert point.fidelity == pytest.approx(0.5, abs=0.02)


@pytest.mark.slow
def test_dropping_the_neighbour_channel_leaves_the_down_population():
    expected = (1 + toy_fixed_point(MFInputs(0.1, 0.1, 0.3)).Z_exp) / 2
    assert expected == pytest.approx(0.8)
    for point in toy_fidelity_experiment([3.0, 4.0], keep_neighbour=False, check_cutoff=False):
        assert point.fidelity == pytest.approx(expected, abs=0.03)


@pytest.mark.slow
def test_toy_infidelity_falls_exponentially_with_photon_number():
    N_values = [2.0, 3.0, 4.0, 5.0]
    points = toy_fidelity_experiment(N_values, check_cutoff=False)
    infidelity = np.array([1 - p.fidelity for p in points])
    assert np.all(infidelity > 0)
    fit = linear_fit(N_values, np.log(infidelity))
    assert fit.slope < 0
    assert fit.r_squared > 0.95
