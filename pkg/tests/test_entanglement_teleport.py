import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from spin1ent.acceptance import random_xstates
from spin1ent.entanglement_teleport import (
    PSI_MINUS,
    InputQubit,
    average_fidelity,
    average_fidelity_quadrature,
    concurrence_wootters,
    concurrence_xstate,
    entanglement_threshold,
    teleport_output,
    thermal_concurrence,
)
from spin1ent.open_system import TwoQubitXState, thermal_pair_state


def bell(vec):
    return np.outer(vec, vec.conj())


def test_concurrence_reference_states():
    assert concurrence_wootters(bell(PSI_MINUS)) == pytest.approx(1.0, abs=1e-12)
    assert concurrence_wootters(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-12)
    prod = np.kron(np.diag([1.0, 0]), np.diag([0, 1.0]))
    assert concurrence_wootters(prod) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("q", [0.0, 0.2, 1 / 3, 0.5, 0.9])
def test_werner_state(q):
    rho = q * bell(PSI_MINUS) + (1 - q) * np.eye(4) / 4
    assert concurrence_wootters(rho) == pytest.approx(max(0.0, (3 * q - 1) / 2), abs=1e-12)


def test_xstate_formula_matches_wootters():
    for s in random_xstates(200, seed=11):
        assert concurrence_xstate(s) == pytest.approx(concurrence_wootters(s.matrix()), abs=1e-10)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_local_unitary_invariance(seed):
    s = random_xstates(1, seed=seed)[0].matrix()
    ua = unitary_group.rvs(2, random_state=seed)
    ub = unitary_group.rvs(2, random_state=seed + 1)
    u = np.kron(ua, ub)
    assert concurrence_wootters(u @ s @ u.conj().T) == pytest.approx(concurrence_wootters(s), abs=1e-10)


def test_thermal_concurrence_and_threshold():
    assert entanglement_threshold() == pytest.approx(math.log(3), abs=1e-11)
    assert thermal_concurrence(0.02, 0.02 / math.log(3) * 1.001) == 0.0
    for r in (1.5, 3.0, 10.0):
        c = concurrence_xstate(thermal_pair_state(r, 0.0, 1.0))
        assert thermal_concurrence(r, 1.0) == pytest.approx(c, abs=1e-14)


def test_teleport_with_singlet_is_perfect():
    inp = InputQubit(1.1, 0.4)
    assert np.allclose(teleport_output(bell(PSI_MINUS), inp), inp.rho())
    assert average_fidelity_quadrature(bell(PSI_MINUS)) == pytest.approx(1.0, abs=1e-13)


def test_maximally_mixed_channel():
    rep = average_fidelity(TwoQubitXState(1, 1, 0, 1, 4))
    assert rep.f_avg_formula == pytest.approx(0.5)
    assert rep.f_avg_quadrature == pytest.approx(0.5, abs=1e-13)
    assert rep.f_avg_paper_eq14 == pytest.approx(5 / 12)
    assert not rep.above_classical


def test_formula_matches_quadrature():
    for s in random_xstates(50, seed=5):
        rep = average_fidelity(s)
        assert rep.f_avg_formula == pytest.approx(rep.f_avg_quadrature, abs=1e-12)
        assert rep.singlet_fraction == pytest.approx(float(np.real(PSI_MINUS.conj() @ s.matrix() @ PSI_MINUS)))


def test_input_validation():
    with pytest.raises(ValueError):
        InputQubit(4.0, 0.0)
    with pytest.raises(ValueError):
        InputQubit(0.0, 2 * math.pi)
