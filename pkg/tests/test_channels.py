import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from macroqubit import states as st
from macroqubit.channels import (
    FactoredLoss,
    LossParams,
    apply_loss,
    kraus_weights,
    loss_kraus,
    lossy_density,
    lost_photon_mean,
)
from macroqubit.errors import InvariantError
from macroqubit.fock import DensityOperator, TwoModeSpace, density_from_pure, lift_mode_unitary, mean_photon_number, number_state
from macroqubit.metrics import fidelity
from macroqubit.validate import conjugate, random_density, random_mode_unitary

from oracles import beam_splitter_loss

reflectivity = hs.floats(0.0, 1.0, allow_nan=False)


def test_loss_params_range():
    assert LossParams(0.3).T == pytest.approx(0.7)
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(ValueError):
            LossParams(bad)


@pytest.mark.parametrize("cutoff", [1, 4, 25])
@pytest.mark.parametrize("R", [0.0, 0.1, 0.5, 0.93, 1.0])
def test_kraus_completeness(cutoff, R):
    ks = loss_kraus(cutoff, R)
    assert len(ks) == cutoff + 1
    assert np.max(np.abs(sum(K.T @ K for K in ks) - np.eye(cutoff + 1))) < 1e-10


def test_kraus_extremes():
    ks = loss_kraus(5, 0.0)
    assert np.array_equal(ks[0], np.eye(6))
    assert all(not np.any(K) for K in ks[1:])
    ks = loss_kraus(5, 1.0)
    for n in range(6):
        # |n> goes to |0> with unit probability
        assert ks[n][0, n] == pytest.approx(1.0)
        assert sum(abs(K[0, n]) ** 2 for K in ks) == pytest.approx(1.0)


def test_kraus_single_photon():
    ks = loss_kraus(1, 0.3)
    assert ks[1][0, 1] == pytest.approx(math.sqrt(0.3))
    assert ks[0][1, 1] == pytest.approx(math.sqrt(0.7))


def test_kraus_weights_binomial():
    W = kraus_weights(6, 0.25)
    assert W[2, 5] ** 2 == pytest.approx(math.comb(5, 2) * 0.75**3 * 0.25**2)


@pytest.mark.parametrize("R", [0.2, 0.65])
def test_single_mode_loss_matches_beam_splitter(R):
    rng = np.random.default_rng(7)
    space = TwoModeSpace(6)
    # a state of mode 1 only, with mode 2 in vacuum
    d = 7
    G = rng.normal(size=(d, 3)) + 1j * rng.normal(size=(d, 3))
    single = G @ G.conj().T
    single /= np.trace(single).real
    full = np.zeros((space.dim, space.dim), dtype=complex)
    idx = [space.index(n, 0) for n in range(d)]
    full[np.ix_(idx, idx)] = single
    out = apply_loss(DensityOperator(space, full), R).matrix[np.ix_(idx, idx)]
    ref = beam_splitter_loss(single, R)
    assert np.max(np.abs(out - ref)) < 1e-10


def test_zero_loss_identity():
    rng = np.random.default_rng(3)
    rho = random_density(rng, TwoModeSpace(4), triangle=False)
    assert np.max(np.abs(apply_loss(rho, 0.0).matrix - rho.matrix)) < 1e-12


def test_single_photon_loss():
    space = TwoModeSpace(2)
    rho = density_from_pure(number_state(space, 1, 0))
    out = apply_loss(rho, 0.4).matrix
    expected = np.zeros_like(out)
    expected[space.index(1, 0), space.index(1, 0)] = 0.6
    expected[space.index(0, 0), space.index(0, 0)] = 0.4
    assert np.max(np.abs(out - expected)) < 1e-15


@pytest.mark.parametrize("R", [0.1, 0.5, 0.9])
def test_coherent_state_stays_coherent(R):
    alpha = 1.5
    psi = st.coherent_state(alpha)
    out = lossy_density(psi, R)
    ref = density_from_pure(st.coherent_state(math.sqrt(1 - R) * alpha, psi.space))
    assert fidelity(out, ref) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(reflectivity, reflectivity, hs.integers(0, 2**32 - 1))
def test_loss_composition(R1, R2, seed):
    rho = random_density(np.random.default_rng(seed), TwoModeSpace(4), triangle=False)
    two = apply_loss(apply_loss(rho, R1), R2)
    one = apply_loss(rho, 1 - (1 - R1) * (1 - R2))
    assert np.max(np.abs(two.matrix - one.matrix)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(reflectivity, hs.integers(0, 2**32 - 1))
def test_loss_commutes_with_polarization_rotation(R, seed):
    rng = np.random.default_rng(seed)
    space = TwoModeSpace(5)
    rho = random_density(rng, space)
    U = lift_mode_unitary(space, random_mode_unitary(rng)).toarray()
    a = apply_loss(conjugate(rho, U), R)
    b = conjugate(apply_loss(rho, R), U)
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(reflectivity, hs.integers(0, 2**32 - 1))
def test_output_valid_and_photons_scale(R, seed):
    rho = random_density(np.random.default_rng(seed), TwoModeSpace(4), rank=2, triangle=False)
    out = apply_loss(rho, R)
    assert abs(np.trace(out.matrix).real - 1) < 1e-9
    assert out.min_eigenvalue() > -1e-9
    assert mean_photon_number(out) == pytest.approx((1 - R) * mean_photon_number(rho), abs=1e-8)
    assert lost_photon_mean(rho.space, rho, R) == pytest.approx(R * mean_photon_number(rho), abs=1e-8)


def test_negative_input_is_hard_error():
    space = TwoModeSpace(1)
    bad = DensityOperator(space, np.diag([1.2, -0.2, 0.0, 0.0]).astype(complex))
    with pytest.raises(InvariantError):
        apply_loss(bad, 0.0)


@pytest.mark.parametrize("R", [0.0, 0.3, 0.8, 1.0])
def test_factored_route_reproduces_density(R):
    psi = st.macro_qubit(0.4, 0.0)
    fl = FactoredLoss(psi, R)
    dense = fl.dense()
    via_kraus = apply_loss(density_from_pure(psi), R).matrix
    assert np.max(np.abs(dense @ dense.conj().T - via_kraus)) < 1e-12
    assert np.max(np.abs(fl.density().matrix - via_kraus)) < 1e-12
