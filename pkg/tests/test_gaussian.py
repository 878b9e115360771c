import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from intensive.gaussian import (
    CovarianceMatrix,
    Partition,
    UnphysicalStateError,
    entropy,
    entropy_function,
    fidelity,
    log_negativity,
    mutual_information,
    reduce,
    symplectic_spectrum,
    thermal_covariance,
)
from intensive.lattice import LatticeSpec, build_potential, potential_spectrum
from intensive.oracle import CutoffWarning, fock_entropy, fock_fidelity, fock_negativity, fock_thermal, second_moments

COTH_HALF = 2.163953413738653  # coth(0.5) = 1 + 2/(e - 1)


def single(nu):
    return CovarianceMatrix([[nu]], [[nu]])


def thermal_nu(nbar):
    return single(2.0 * nbar + 1.0)


# ---------------------------------------------------------------- thermal states


def test_single_mode_ground_state():
    cm = thermal_covariance(np.array([[1.0]]), math.inf)
    np.testing.assert_array_equal(cm.Q, [[1.0]])
    np.testing.assert_array_equal(cm.P, [[1.0]])


def test_single_mode_thermal_value():
    cm = thermal_covariance(np.array([[1.0]]), 1.0)
    assert cm.Q[0, 0] == pytest.approx(COTH_HALF, rel=1e-14)
    assert cm.P[0, 0] == pytest.approx(1.0 + 2.0 / (math.e - 1.0), rel=1e-14)


def test_single_mode_thermal_matches_fock():
    rho = fock_thermal([[1.0]], 1.0, 40)
    Q, P = second_moments(rho)
    assert Q[0, 0] == pytest.approx(COTH_HALF, abs=1e-6)
    assert P[0, 0] == pytest.approx(COTH_HALF, abs=1e-6)


@pytest.mark.parametrize("spec", [LatticeSpec(1, 40, 0.3), LatticeSpec(2, 8, 0.2)])
def test_high_temperature_limit(spec):
    beta = 1e-4
    cm = thermal_covariance(spec, beta)
    V = build_potential(spec)
    Q_lim = (2.0 / beta) * np.linalg.inv(V)
    P_lim = (2.0 / beta) * np.eye(spec.n_modes)
    assert np.abs(cm.Q - Q_lim).max() <= 0.01 * np.abs(Q_lim).max()
    assert np.abs(cm.P - P_lim).max() <= 0.01 * np.abs(P_lim).max()


@pytest.mark.parametrize("spec", [LatticeSpec(1, 12, 0.4), LatticeSpec(2, 5, 0.2)])
@pytest.mark.parametrize("beta", [0.3, 2.0, math.inf])
def test_lattice_and_dense_paths_agree(spec, beta):
    a = thermal_covariance(spec, beta)
    b = thermal_covariance(build_potential(spec), beta)
    np.testing.assert_allclose(a.Q, b.Q, atol=1e-10)
    np.testing.assert_allclose(a.P, b.P, atol=1e-10)


@pytest.mark.parametrize("beta", [0.0, -1.0, float("nan")])
def test_rejects_bad_beta(beta):
    with pytest.raises(ValueError):
        thermal_covariance(np.eye(2), beta)


def test_rejects_indefinite_potential():
    with pytest.raises(ValueError):
        thermal_covariance(np.array([[1.0, -1.2], [-1.2, 1.0]]), 1.0)


def test_covariance_is_immutable():
    cm = thermal_covariance(np.eye(2), 1.0)
    with pytest.raises(ValueError):
        cm.Q[0, 0] = 3.0


# ---------------------------------------------------------------- partial trace


def test_reduce_all_modes_is_identity():
    cm = thermal_covariance(LatticeSpec(1, 5, 0.3), 2.0)
    r = reduce(cm, range(5))
    np.testing.assert_array_equal(r.Q, cm.Q)
    np.testing.assert_array_equal(r.P, cm.P)


def test_reduce_uncoupled_lattice_gives_single_mode_thermal():
    cm = thermal_covariance(LatticeSpec(2, 4, 0.0), 1.5)
    one = thermal_covariance(np.array([[1.0]]), 1.5)
    r = reduce(cm, [7])
    np.testing.assert_allclose(r.Q, one.Q, atol=1e-14)
    np.testing.assert_allclose(r.P, one.P, atol=1e-14)


def test_reduce_is_top_left_block_dense_route():
    # The Fock oracle stops at two modes; the 4-mode ring is checked against
    # dense eigendecomposition instead.
    spec = LatticeSpec(1, 4, 0.3)
    cm = thermal_covariance(spec, 2.0)
    w, U = np.linalg.eigh(build_potential(spec))
    W = 1.0 / np.tanh(np.sqrt(w))
    Q_full = (U * (W / np.sqrt(w))) @ U.T
    r = reduce(cm, [0, 1])
    np.testing.assert_allclose(r.Q, Q_full[:2, :2], atol=1e-12)


def test_reduce_two_modes_matches_fock_marginal():
    V = np.array([[1.0, -0.3], [-0.3, 1.0]])
    cm = thermal_covariance(V, 2.0)
    Q, P = second_moments(fock_thermal(V, 2.0, 30))
    np.testing.assert_allclose(reduce(cm, [1]).Q, Q[1:, 1:], atol=1e-6)
    np.testing.assert_allclose(reduce(cm, [1]).P, P[1:, 1:], atol=1e-6)


@pytest.mark.parametrize("modes,exc", [([], ValueError), ([0, 0], ValueError), ([5], IndexError), ([-1], IndexError)])
def test_reduce_rejects_bad_indices(modes, exc):
    with pytest.raises(exc):
        reduce(thermal_covariance(np.eye(3), 1.0), modes)


# ---------------------------------------------------------------- symplectic spectrum


def test_ground_state_is_pure():
    cm = thermal_covariance(LatticeSpec(2, 6, 0.23), math.inf)
    np.testing.assert_allclose(symplectic_spectrum(cm), 1.0, atol=1e-9)
    assert entropy(cm) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("spec", [LatticeSpec(1, 30, 0.45), LatticeSpec(2, 7, 0.2)])
@pytest.mark.parametrize("beta", [0.5, 3.0])
def test_thermal_symplectic_spectrum(spec, beta):
    nu = symplectic_spectrum(thermal_covariance(spec, beta))
    expected = np.sort(1.0 / np.tanh(beta * np.sqrt(potential_spectrum(spec)) / 2.0))[::-1]
    np.testing.assert_allclose(nu, expected, atol=1e-9, rtol=0)


def test_single_mode_symplectic_value():
    nu = symplectic_spectrum(thermal_covariance(np.array([[1.0]]), 1.0))
    assert nu[0] == pytest.approx(COTH_HALF, abs=1e-13)


def test_clip_and_reject():
    assert symplectic_spectrum(single(1.0 - 5e-10))[0] == 1.0
    with pytest.raises(UnphysicalStateError):
        symplectic_spectrum(single(1.0 - 1e-5))
    with pytest.raises(UnphysicalStateError):
        symplectic_spectrum(CovarianceMatrix([[-1.0]], [[1.0]]))


# ---------------------------------------------------------------- entropy


def test_entropy_nu_three():
    assert entropy(single(3.0)) == pytest.approx(math.log(4.0), abs=1e-14)


def test_entropy_nu_three_matches_fock():
    # nu = 3 is a thermal mode with mean occupation 1, i.e. beta = ln 2 for V = [1]
    rho = fock_thermal([[1.0]], math.log(2.0), 60)
    assert fock_entropy(rho) == pytest.approx(math.log(4.0), abs=1e-6)


def test_entropy_function_continuous_at_one():
    nu = 1.0 + np.array([0.0, 1e-12, 1e-8, 9.9e-7, 1.01e-6, 1e-4])
    h = entropy_function(nu)
    assert h[0] == 0.0
    assert np.all(np.diff(h) > 0)
    x = 0.5 * (nu[1:] - 1.0)
    exact = (x + 1) * np.log1p(x) - x * np.log(x)
    np.testing.assert_allclose(h[1:], exact, rtol=1e-9)


def test_entropy_additive_for_uncoupled_lattice():
    spec = LatticeSpec(2, 5, 0.0)
    beta = 0.7
    S = entropy(thermal_covariance(spec, beta))
    assert S == pytest.approx(spec.n_modes * entropy_function(1.0 / math.tanh(beta / 2)), rel=1e-12)


# ---------------------------------------------------------------- mutual information


def test_mutual_information_vanishes_without_coupling():
    cm = thermal_covariance(LatticeSpec(1, 10, 0.0), 1.0)
    assert mutual_information(cm, Partition.from_block(range(4), 10)) == pytest.approx(0.0, abs=1e-12)


def test_mutual_information_pure_state():
    cm = thermal_covariance(LatticeSpec(1, 20, 0.4), math.inf)
    part = Partition.from_block(range(7), 20)
    S_B = entropy(reduce(cm, part.block))
    assert mutual_information(cm, part) == pytest.approx(2.0 * S_B, rel=1e-8)
    assert entropy(reduce(cm, part.rest)) == pytest.approx(S_B, rel=1e-8)


def test_mutual_information_area_law_1d():
    spec = LatticeSpec(1, 400, 0.4999)
    cm = thermal_covariance(spec, 5.0)
    I40 = mutual_information(cm, Partition.from_block(range(40), 400))
    I50 = mutual_information(cm, Partition.from_block(range(50), 400))
    assert abs(I40 - I50) < 0.05 * I50


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition((), (0, 1))
    with pytest.raises(ValueError):
        Partition((0, 1), (1, 2))
    with pytest.raises(ValueError):
        mutual_information(thermal_covariance(np.eye(3), 1.0), Partition((0,), (1,)))


# ---------------------------------------------------------------- negativity


@pytest.mark.parametrize("beta", [0.5, 5.0, math.inf])
def test_negativity_vanishes_without_coupling(beta):
    cm = thermal_covariance(LatticeSpec(1, 8, 0.0), beta)
    assert log_negativity(cm, Partition.from_block([0, 1, 2], 8)) == 0.0


def test_negativity_vanishes_at_high_temperature():
    spec = LatticeSpec(2, 10, 0.24)
    cm = thermal_covariance(spec, 0.05)
    block = [x + 10 * y for y in range(5) for x in range(5)]
    assert log_negativity(cm, Partition.from_block(block, 100)) == 0.0


def test_negativity_two_mode_ground_state_matches_fock():
    V = np.array([[1.0, -0.3], [-0.3, 1.0]])
    gauss = log_negativity(thermal_covariance(V, math.inf), Partition((0,), (1,)))
    oracle = fock_negativity(fock_thermal(V, math.inf, 40), 0)
    assert gauss > 0
    assert gauss == pytest.approx(oracle, abs=1e-4)


def test_negativity_symmetric_under_swapping_sides():
    cm = thermal_covariance(LatticeSpec(1, 12, 0.45), 8.0)
    part = Partition.from_block(range(5), 12)
    swapped = Partition(part.rest, part.block)
    assert log_negativity(cm, part) == pytest.approx(log_negativity(cm, swapped), abs=1e-10)


# ---------------------------------------------------------------- fidelity


def test_fidelity_identical_states():
    cm = thermal_covariance(LatticeSpec(2, 4, 0.2), 3.0)
    assert fidelity(cm, cm) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n1,n2", [(0.3, 1.7), (0.05, 0.8), (1.0, 1.2), (0.0, 2.0)])
def test_fidelity_single_mode_thermal_closed_form(n1, n2):
    expected = 1.0 / (math.sqrt((n1 + 1) * (n2 + 1)) - math.sqrt(n1 * n2))
    assert fidelity(thermal_nu(n1), thermal_nu(n2)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n1,n2", [(0.3, 1.7), (0.05, 0.8)])
def test_fidelity_single_mode_thermal_fock(n1, n2):
    beta = lambda n: math.log1p(1.0 / n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CutoffWarning)
        oracle = fock_fidelity(fock_thermal([[1.0]], beta(n1), 60), fock_thermal([[1.0]], beta(n2), 60))
    expected = 1.0 / (math.sqrt((n1 + 1) * (n2 + 1)) - math.sqrt(n1 * n2))
    assert oracle == pytest.approx(expected, abs=1e-6)
    assert fidelity(thermal_nu(n1), thermal_nu(n2)) == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("nu", [1.0, 1.5, 3.0, 10.0])
def test_fidelity_ground_vs_thermal(nu):
    expected = math.sqrt(2.0 / (nu + 1.0))
    assert fidelity(single(1.0), single(nu)) == pytest.approx(expected, abs=1e-12)
    # <0|rho|0>^{1/2} from the oracle: nbar = (nu - 1)/2
    if 1.0 < nu <= 3.0:  # cutoff 60 is unconverged for hotter modes
        rho = fock_thermal([[1.0]], math.log1p(2.0 / (nu - 1.0)), 60)
        assert math.sqrt(rho.rho[0, 0]) == pytest.approx(expected, abs=1e-6)


def test_fidelity_two_mode_matches_fock():
    V1 = np.array([[1.0, -0.35], [-0.35, 1.0]])
    V2 = np.array([[0.9, 0.1], [0.1, 1.2]])
    g = fidelity(thermal_covariance(V1, 1.3), thermal_covariance(V2, 0.9))
    o = fock_fidelity(fock_thermal(V1, 1.3, 40), fock_thermal(V2, 0.9, 40))
    assert g == pytest.approx(o, abs=1e-4)


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        fidelity(single(1.0), thermal_covariance(np.eye(2), 1.0))


def test_fidelity_rejects_unphysical():
    with pytest.raises(UnphysicalStateError):
        fidelity(single(0.5), single(1.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_fidelity_symmetry(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng, n), random_state(rng, n)
    f_ab, f_ba = fidelity(a, b), fidelity(b, a)
    assert abs(f_ab - f_ba) < 1e-10
    assert 0.0 <= f_ab <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_fidelity_multiplicative(n, m, seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng, n), random_state(rng, n)
    c, d = random_state(rng, m), random_state(rng, m)

    def tensor(x, y):
        return CovarianceMatrix(np.block([[x.Q, np.zeros((n, m))], [np.zeros((m, n)), y.Q]]),
                                np.block([[x.P, np.zeros((n, m))], [np.zeros((m, n)), y.P]]))

    assert fidelity(tensor(a, c), tensor(b, d)) == pytest.approx(fidelity(a, b) * fidelity(c, d), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_fidelity_symplectic_invariance(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng, n), random_state(rng, n)
    O, _ = np.linalg.qr(rng.standard_normal((n, n)))
    S = O @ np.diag(rng.uniform(0.5, 2.0, n))
    Sinv = np.linalg.inv(S)

    def act(x):
        return CovarianceMatrix(S @ x.Q @ S.T, Sinv.T @ x.P @ Sinv)

    assert fidelity(act(a), act(b)) == pytest.approx(fidelity(a, b), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_random_states_are_physical(n, seed):
    nu = symplectic_spectrum(random_state(np.random.default_rng(seed), n))
    assert nu.min() >= 1.0 - 1e-9


def test_fidelity_decreases_with_temperature_gap():
    spec = LatticeSpec(1, 30, 0.4)
    base = thermal_covariance(spec, 2.0)
    values = [fidelity(base, thermal_covariance(spec, 2.0 + d)) for d in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)]
    assert values[0] == pytest.approx(1.0, abs=1e-10)
    assert all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("spec", [LatticeSpec(1, 50, 0.49), LatticeSpec(2, 8, 0.24)])
@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0, math.inf])
def test_uncertainty_for_produced_states(spec, beta):
    cm = thermal_covariance(spec, beta)
    assert symplectic_spectrum(cm).min() >= 1.0 - 1e-9
    assert symplectic_spectrum(reduce(cm, range(0, spec.n_modes, 3))).min() >= 1.0 - 1e-9


def test_fidelity_strongly_squeezed_pair():
    # cond(Q) ~ 1e9 puts one eigenvalue of A B within 4e-10 of the 1/4 branch point;
    # reference value from a 40-digit evaluation of the same closed form
    rng = np.random.default_rng(32021969)
    a, b = random_state(rng, 5), random_state(rng, 5)
    expected = 0.0027546265916272679
    assert fidelity(a, b) == pytest.approx(expected, abs=1e-10)
    assert fidelity(b, a) == pytest.approx(expected, abs=1e-10)
