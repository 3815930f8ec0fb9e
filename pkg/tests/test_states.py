import math

import numpy as np
import pytest

from macroqubit import states as st
from macroqubit.errors import IncompatibleSpaceError, NormalizationError, TruncationError
from macroqubit.fock import CIRCULAR, DIAGONAL, HV, PureState, TwoModeSpace, equatorial_basis, mean_photon_number
from macroqubit.metrics import pure_fidelity

from oracles import gamma_ij, opa_output, restrict_to_triangle

ORACLE_D = 31


def overlap_with_oracle(psi, flat):
    ref = restrict_to_triangle(flat, ORACLE_D, psi.space.cutoff)
    return abs(np.vdot(ref, psi.amplitudes)) / (np.linalg.norm(ref) * psi.norm)


def test_gain_params():
    gp = st.GainParams(0.8)
    assert gp.C == pytest.approx(math.cosh(0.8))
    assert gp.Gamma == pytest.approx(math.tanh(0.8))
    with pytest.raises(ValueError):
        st.GainParams(-0.1)


def test_pole_state_leading_amplitude_frozen():
    # cosh(0.8)^-2, evaluated independently
    psi = st.amplified_pole_state(0.8, "H")
    assert psi.amplitude(1, 0).real == pytest.approx(0.5590551677, abs=1e-10)
    assert psi.amplitude(2, 1).real == pytest.approx(0.5590551677 * math.tanh(0.8) * math.sqrt(2), abs=1e-10)


def test_pole_state_v_mirrors_h():
    h = st.amplified_pole_state(0.5, "H")
    v = st.amplified_pole_state(0.5, "V", h.space)
    assert np.allclose(h.grid(), v.grid().T)


@pytest.mark.parametrize("g", [0.0, 0.4, 0.8])
def test_pole_state_matches_squeezing_evolution(g):
    psi = st.amplified_pole_state(g, "H")
    assert overlap_with_oracle(psi, opa_output(g, (1.0, 0.0), ORACLE_D)) > 1 - 1e-10


@pytest.mark.parametrize("phi", [0.0, 0.7, math.pi / 2, math.pi])
def test_equatorial_state_matches_squeezing_evolution(phi):
    g = 0.4
    psi = st.macro_qubit(g, phi, HV)
    seed = (1 / math.sqrt(2), np.exp(1j * phi) / math.sqrt(2))
    assert overlap_with_oracle(psi, opa_output(g, seed, ORACLE_D)) > 1 - 1e-10


def test_gamma_amplitudes_against_direct_formula():
    g, phi = 0.8, 0.3
    gam = st.equatorial_amplitudes(g, phi, 6)
    for i in range(6):
        for j in range(6):
            assert gam[i, j] == pytest.approx(gamma_ij(g, phi, i, j), abs=1e-14)
    # gamma_10 at phi = 0: C^-2 Gamma sqrt(6) / 2
    assert st.equatorial_amplitudes(g, 0.0, 2)[1, 0].real == pytest.approx(0.4546659431, abs=1e-10)


def test_equatorial_state_layout_in_own_basis():
    psi = st.amplified_equatorial_state(0.8, 0.0)
    grid = psi.grid()
    odd_even = np.zeros_like(grid, dtype=bool)
    odd_even[1::2, 0::2] = True
    assert np.all(grid[~odd_even] == 0)
    assert psi.space.basis == DIAGONAL


@pytest.mark.parametrize("g, expected", [(0.4, 1 + 4 * math.sinh(0.4) ** 2), (0.8, 4.1549280)])
def test_mean_photon_number_two_modes(g, expected):
    assert mean_photon_number(st.macro_qubit(g, 0.0)) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("g, c", [(0.4, 21), (0.8, 49)])
def test_cutoff_rule_frozen(g, c):
    assert st.equatorial_cutoff(g) == c
    assert st.macro_qubit(g, 0.0).space.cutoff == c


def test_cutoff_grows_with_tighter_tolerance():
    assert st.equatorial_cutoff(0.8, 1e-10) > st.equatorial_cutoff(0.8, 1e-8)


def test_starved_cutoff_is_reported():
    with pytest.raises(TruncationError):
        st.macro_qubit(1.3, 0.0, cutoff=3)


def test_truncated_state_not_renormalized():
    psi = st.macro_qubit(0.8, 0.0)
    assert 1 - 1e-8 < psi.norm <= 1.0


def test_phi_basis_mismatch_rejected():
    with pytest.raises(IncompatibleSpaceError):
        st.amplified_equatorial_state(0.8, 0.0, TwoModeSpace(49, HV))


def test_mqs_identity_with_circular_macro_states():
    g = 0.8
    plus = st.macro_qubit(g, 0.0, DIAGONAL)
    c = plus.space.cutoff
    minus = st.macro_qubit(g, math.pi, DIAGONAL, cutoff=c)
    psi_p = st.mqs_superposition(plus, minus, 1j)
    psi_m = st.mqs_superposition(plus, minus, -1j)
    left = st.macro_qubit(g, 1.5 * math.pi, DIAGONAL, cutoff=c)
    right = st.macro_qubit(g, 0.5 * math.pi, DIAGONAL, cutoff=c)
    assert pure_fidelity(psi_p, left) > 1 - 1e-12
    assert pure_fidelity(psi_m, right) > 1 - 1e-12
    assert pure_fidelity(psi_p, right) < 1e-10


def test_mqs_superposition_validation():
    plus = st.macro_qubit(0.4, 0.0)
    with pytest.raises(ValueError):
        st.mqs_superposition(plus, plus, 1.0)
    # a + i (i a) = 0
    rotated = PureState(plus.space, 1j * plus.amplitudes)
    with pytest.raises(NormalizationError):
        st.mqs_superposition(plus, rotated, 1j)
    assert st.mqs_superposition(plus, plus, 1j).norm == pytest.approx(1.0)


def test_coherent_state_poisson_weights():
    psi = st.coherent_state(2.0)
    w = np.abs(psi.grid()[:, 0]) ** 2
    assert w[0] == pytest.approx(math.exp(-4.0), rel=1e-12)
    assert w[3] == pytest.approx(math.exp(-4.0) * 4.0**3 / 6, rel=1e-12)
    assert np.all(psi.grid()[:, 1:] == 0)


def test_coherent_overlap_frozen():
    # <alpha|-alpha> = exp(-2|alpha|^2)
    a = st.coherent_state(1.0)
    b = st.coherent_state(-1.0, a.space)
    assert pure_fidelity(a, b) == pytest.approx(math.exp(-2.0), abs=1e-8)


def test_cats_have_definite_parity_and_unit_norm():
    odd = st.coherent_mqs(2.0, "-")
    even = st.coherent_mqs(2.0, "+", odd.space)
    col_e, col_o = even.grid()[:, 0], odd.grid()[:, 0]
    assert np.all(col_e[1::2] == 0) and np.all(col_o[0::2] == 0)
    assert even.norm == pytest.approx(1.0, abs=1e-8)
    assert pure_fidelity(even, odd) == 0.0


def test_cat_normalization_is_cosh_sinh():
    a2 = 1.0
    even = st.coherent_mqs(1.0, "+")
    # unnormalized even cat squared norm is 2 + 2 exp(-2 a2); amplitude of |0> after normalization
    assert abs(even.amplitude(0, 0)) == pytest.approx(2 * math.exp(-a2 / 2) / math.sqrt(2 + 2 * math.exp(-2 * a2)))


def test_small_alpha_cat_limits():
    assert abs(st.coherent_mqs(0.0, "+").amplitude(0, 0)) == 1.0
    assert abs(st.coherent_mqs(0.0, "-").amplitude(1, 0)) == 1.0


def test_equatorial_basis_choice_respected():
    psi = st.macro_qubit(0.4, 0.0, CIRCULAR)
    assert psi.space.basis == equatorial_basis(math.pi / 2)
