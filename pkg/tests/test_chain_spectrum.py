import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from spin1ent.chain_spectrum import (
    ChainSpec,
    PhysicsDomainError,
    SectorSpectrum,
    ValidityWarning,
    build_chain_hamiltonian,
    diagonalize_sector,
    full_spectrum,
    low_spectrum,
    thermal_weights,
)
from spin1ent.effective_coupling import chain_hamiltonian_dense, dimer_levels
from spin1ent.spin_core import SparseOperator, build_sector_basis


def all_eigenvalues(spec):
    out = []
    for sz in range(-spec.L, spec.L + 1):
        out.extend(np.linalg.eigvalsh(build_chain_hamiltonian(spec, sz).toarray()))
    return np.sort(out)


def test_dimer_spectrum_theta_zero():
    ev = all_eigenvalues(ChainSpec(2, 0.0))
    assert np.allclose(ev, [-2] + [-1] * 3 + [1] * 5)


def test_dimer_spectrum_closed_forms():
    th = 0.1
    e0, e1, e2 = -2 * (math.cos(th) - 2 * math.sin(th)), -(math.cos(th) - math.sin(th)), math.cos(th) + math.sin(th)
    ev = all_eigenvalues(ChainSpec(2, th))
    assert np.allclose(ev, [e0] + [e1] * 3 + [e2] * 5, atol=1e-13)
    assert np.allclose(dimer_levels(th), (e0, e1, e2))


def test_hamiltonian_real_symmetric():
    H = build_chain_hamiltonian(ChainSpec(6, 0.15), 0).matrix
    assert not np.iscomplexobj(H.data)
    assert abs(H - H.T).max() == 0
    v = np.random.default_rng(1).standard_normal(H.shape[0])
    assert np.isreal(v @ (H @ v))


@pytest.mark.parametrize("L,theta", [(2, 0.0), (4, 0.1), (4, -0.2)])
def test_trace_matches_sum_of_eigenvalues(L, theta):
    spec = ChainSpec(L, theta)
    dense = chain_hamiltonian_dense(spec)
    assert abs(all_eigenvalues(spec).sum() - np.trace(dense)) <= 1e-8
    assert np.allclose(np.sort(np.linalg.eigvalsh(dense)), all_eigenvalues(spec), atol=1e-10)


def test_diagonalize_dimer_sector():
    s = diagonalize_sector(build_chain_hamiltonian(ChainSpec(2), 0))
    assert np.allclose(s.eigenvalues, [-2, -1, 1])
    assert isinstance(s, SectorSpectrum) and s.solver == "dense_full"


def test_diagonalize_identity():
    b = build_sector_basis(4, 0)
    eye = SparseOperator(b, b, sp.identity(b.dim, format="csr"))
    assert np.allclose(diagonalize_sector(eye).eigenvalues, 1)


def test_dense_residuals():
    H = build_chain_hamiltonian(ChainSpec(6, 0.05), 1)
    s = diagonalize_sector(H)
    norm = abs(H.matrix).sum(axis=1).max()
    res = np.linalg.norm(H.matrix @ s.eigenvectors - s.eigenvectors * s.eigenvalues, axis=0)
    assert res.max() <= 1e-9 * norm
    assert np.all(np.diff(s.eigenvalues) >= 0)


def test_dense_cap():
    H = build_chain_hamiltonian(ChainSpec(6), 0)
    with pytest.raises(ValueError, match="cap"):
        diagonalize_sector(H, dense_cap=10)


def test_krylov_matches_dense_l4():
    H = build_chain_hamiltonian(ChainSpec(6), 0)
    dense = diagonalize_sector(H).eigenvalues[:6]
    kry = diagonalize_sector(H, "krylov_extremal", k=6).eigenvalues
    assert np.allclose(dense, kry, atol=1e-9)
    a = low_spectrum(ChainSpec(4), solver="dense_full")
    b = low_spectrum(ChainSpec(4), solver="krylov_extremal")
    assert abs(a.eps0 - b.eps0) <= 1e-9 and abs(a.gap - b.gap) <= 1e-9


def test_low_spectrum_dimer():
    assert low_spectrum(ChainSpec(2)).gap == pytest.approx(1.0, abs=1e-12)
    th = 0.1
    assert low_spectrum(ChainSpec(2, th)).gap == pytest.approx(math.cos(th) - 3 * math.sin(th), abs=1e-12)


@pytest.mark.parametrize("L", [2, 4, 6, 8])
@pytest.mark.parametrize("theta", [-0.2, -0.1, 0.0, 0.1, 0.2])
def test_gap_positive_and_triplet_degenerate(L, theta):
    spec = ChainSpec(L, theta)
    low = low_spectrum(spec, solver="dense_full" if L <= 6 else None)
    assert low.gap > 0
    energies = []
    for sz in (-1, 0, 1):
        w = diagonalize_sector(build_chain_hamiltonian(spec, sz), "krylov_extremal", k=2).eigenvalues
        energies.append(w[1] if sz == 0 else w[0])
    assert max(energies) - min(energies) <= 1e-9
    # S^z = +1 and -1 blocks have identical spectra
    if L <= 6:
        wp = diagonalize_sector(build_chain_hamiltonian(spec, 1)).eigenvalues
        wm = diagonalize_sector(build_chain_hamiltonian(spec, -1)).eigenvalues
        assert np.allclose(wp, wm, atol=1e-10)


def test_spec_validation():
    with pytest.raises(PhysicsDomainError):
        ChainSpec(3)
    with pytest.raises(PhysicsDomainError):
        ChainSpec(4, theta=0.33)
    with pytest.warns(ValidityWarning):
        ChainSpec(4, J_p=0.5)


def test_thermal_weights():
    low = low_spectrum(ChainSpec(2))
    w = thermal_weights(low, 0.1)
    assert w.Z == pytest.approx(1.000136199789287, rel=1e-14)
    assert w.w0 + 3 * w.w1 == w.Z
    assert w.log_scale == pytest.approx(20.0)
    with pytest.warns(ValidityWarning):
        hot = thermal_weights(low, 1.5)
    assert hot.w1 / hot.w0 == pytest.approx(math.exp(-1 / 1.5))
    assert hot.out_of_validity
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cold = thermal_weights(low, 1e-3)
    assert cold.Z == 1.0 and cold.w1 == 0.0
    with pytest.raises(PhysicsDomainError):
        thermal_weights(low, 0.0)


def test_full_spectrum_blocks():
    out = full_spectrum(ChainSpec(4), (0, 1))
    assert set(out) == {0, 1}
    assert out[0].eigenvectors.shape == (19, 19)
