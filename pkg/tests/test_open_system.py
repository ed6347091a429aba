import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spin1ent.open_system import (
    NoiseParams,
    TwoQubitState,
    TwoQubitXState,
    apply_gad_pair,
    gad_kraus,
    integrate_master_equation,
    kraus_evolve,
    lindblad_rhs,
    p_of_t,
    pair_hamiltonian,
    thermal_pair_state,
    trajectory_rows,
    xstate_elements,
    xstate_elements_gad,
)
from spin1ent.acceptance import random_xstates

probs = st.floats(0, 1)
nbars = st.floats(0, 20)


@given(probs, nbars)
def test_kraus_completeness(p, n):
    s = sum(k.conj().T @ k for k in gad_kraus(p, n))
    assert np.allclose(s, np.eye(2), atol=1e-14)


def test_kraus_limits():
    rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    assert np.allclose(apply_gad_pair(rho, 0.0, 1.0), rho)
    # p = 1 sends each qubit to the bath state: P(e) = n / (2n + 1)
    pe = 1 / 3
    single = np.diag([1 - pe, pe])
    assert np.allclose(apply_gad_pair(rho, 1.0, 1.0), np.kron(single, single), atol=1e-14)


@given(st.floats(0, 5), st.floats(0, 5), nbars, st.floats(0.01, 2))
@settings(max_examples=50)
def test_semigroup(t1, t2, n, g):
    noise = NoiseParams(n, g)
    s0 = random_xstates(1, seed=7)[0]
    one = kraus_evolve(kraus_evolve(s0, t1, noise), t2, noise)
    both = kraus_evolve(s0, t1 + t2, noise)
    assert np.allclose(one.matrix(), both.matrix(), atol=1e-12)


@given(st.integers(0, 10_000), probs, nbars)
@settings(max_examples=50)
def test_x_form_closure(seed, p, n):
    s0 = random_xstates(1, seed=seed)[0]
    out = apply_gad_pair(s0.matrix().astype(complex), p, n)
    back = TwoQubitXState.from_matrix(out, s0.z_q, tol=1e-12)
    assert TwoQubitState(out).min_eigenvalue >= -1e-12
    assert abs(np.trace(out) - 1) < 1e-12
    assert back.z_q == s0.z_q


def test_p_of_t():
    noise = NoiseParams(1.0, 0.1)
    assert p_of_t(0.0, noise) == 0.0
    assert p_of_t(1.0, noise) == pytest.approx(1 - math.exp(-0.6), rel=1e-15)
    assert p_of_t(1.0, noise) == pytest.approx(0.451188363905973555, rel=1e-15)
    with pytest.raises(ValueError):
        p_of_t(-1.0, noise)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseParams(-1, 0.1)
    with pytest.raises(ValueError):
        NoiseParams(1, 0)
    assert NoiseParams(1, 0.1).a(0.3) == pytest.approx(0.1)


def test_thermal_state_is_gibbs():
    from scipy.linalg import expm

    j, w, T = 0.02, 0.01, 0.03
    rho = expm(-pair_hamiltonian(j, w) / T)
    rho /= np.trace(rho)
    assert np.allclose(thermal_pair_state(j, w, T).matrix(), rho, atol=1e-13)


def test_thermal_state_low_temperature_finite():
    s = thermal_pair_state(1.0, 0.0, 1e-4)
    assert np.all(np.isfinite(s.matrix()))
    assert s.matrix()[1, 2] == pytest.approx(-0.5)


@pytest.mark.parametrize("p", [0.0, 0.2, 0.7, 1.0])
@pytest.mark.parametrize("n", [0.0, 0.5, 3.0])
def test_gad_closed_form_matches_kraus(p, n):
    j, w, T = 0.02, 0.005, 0.01
    s0 = thermal_pair_state(j, w, T)
    k = apply_gad_pair(s0.matrix().astype(complex), p, n).real
    assert np.allclose(xstate_elements_gad(j, w, T, p, n).matrix(), k, atol=1e-14)


def test_symmetric_flip_only_matches_at_p_zero():
    j, w, T, n = 0.02, 0.0, 0.01, 1.0
    a = xstate_elements(j, w, T, 0.0, n).matrix()
    b = xstate_elements_gad(j, w, T, 0.0, n).matrix()
    assert np.allclose(a, b, atol=1e-15)
    a = xstate_elements(j, w, T, 0.5, n).matrix()
    b = xstate_elements_gad(j, w, T, 0.5, n).matrix()
    assert np.abs(a - b).max() > 0.1


def test_lindblad_trace_preserving():
    rho = random_xstates(1, seed=3)[0].matrix().astype(complex)
    d = lindblad_rhs(rho, pair_hamiltonian(0.3, 0.1), NoiseParams(2.0, 0.4))
    assert abs(np.trace(d)) < 1e-14
    assert np.allclose(d, d.conj().T)


def test_master_equation_matches_kraus():
    noise = NoiseParams(1.0, 0.1)
    s0 = thermal_pair_state(0.02, 0.0, 0.01)
    grid = np.linspace(0, 10, 41)
    traj = integrate_master_equation(s0, pair_hamiltonian(0.0, 0.0), noise, grid, tol=1e-10)
    for t, st_ in zip(grid, traj.states):
        assert np.abs(st_.rho - kraus_evolve(s0, t, noise).matrix()).max() <= 1e-7
    assert np.abs(traj.trace_drift).max() < 1e-8
    assert traj.min_eigenvalue.min() > -1e-10


def test_interacting_equals_free_for_symmetric_x_state():
    noise = NoiseParams(1.0, 0.1)
    s0 = thermal_pair_state(0.02, 0.0, 0.01)
    grid = np.linspace(0, 5, 11)
    a = integrate_master_equation(s0, pair_hamiltonian(0.02, 0.0), noise, grid)
    b = integrate_master_equation(s0, pair_hamiltonian(0.0, 0.0), noise, grid)
    assert max(np.abs(x.rho - y.rho).max() for x, y in zip(a.states, b.states)) <= 1e-9


def test_trajectory_rows():
    noise = NoiseParams(1.0, 0.1)
    traj = integrate_master_equation(thermal_pair_state(0.02, 0.0, 0.01), pair_hamiltonian(0, 0), noise, [0.0, 1.0])
    rows = trajectory_rows(traj, noise)
    assert len(rows) == 2 and len(rows[0]) == 8
    assert rows[1][1] == pytest.approx(p_of_t(1.0, noise))


def test_bad_grid():
    s0 = thermal_pair_state(0.02, 0.0, 0.01)
    with pytest.raises(ValueError):
        integrate_master_equation(s0, pair_hamiltonian(0, 0), NoiseParams(1, 0.1), [1.0, 2.0])


def test_state_checks():
    with pytest.raises(ValueError):
        TwoQubitState(np.diag([1.5, -0.5, 0, 0]).astype(complex)).check()
    with pytest.raises(ValueError):
        TwoQubitXState.from_matrix(np.full((4, 4), 0.25))
