"""Bilinear-biquadratic chain Hamiltonian, sector diagonalization and low spectrum."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .spin_core import SectorBasis, SparseOperator, build_sector_basis, two_site_coupling

log = logging.getLogger(__name__)

THETA_MAX = math.atan(1.0 / 3.0)
DENSE_CAP = 12000
TRIPLET_TOL = 1e-6


class PhysicsDomainError(ValueError):
    """Input outside the physical regime the model is defined for."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


class ValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ChainSpec:
    L: int
    theta: float = 0.0
    J: float = 1.0
    J_p: float = 0.1
    omega: float = 0.0

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise PhysicsDomainError(f"L must be even and >= 2, got {self.L}")
        if not abs(self.theta) < THETA_MAX:
            raise PhysicsDomainError(f"|theta| must be below arctan(1/3) = {THETA_MAX:.6f}, got {self.theta}")
        if self.J <= 0:
            raise PhysicsDomainError("J must be positive")
        if self.J_p < 0:
            raise PhysicsDomainError("J_p must be non-negative")
        if self.J_p / self.J > 0.3:
            warnings.warn(f"J_p/J = {self.J_p / self.J:.3g} is not small; perturbation theory is unreliable",
                          ValidityWarning, stacklevel=2)


@dataclass(frozen=True, eq=False)
class SectorSpectrum:
    sector: SectorBasis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    solver: str


@dataclass(frozen=True, eq=False)
class LowSpectrum:
    eps0: float
    eps1: float
    ground_state: np.ndarray
    triplet_states: tuple[np.ndarray, np.ndarray, np.ndarray]  # Sz = -1, 0, +1
    sectors: dict[int, SectorBasis]

    @property
    def gap(self) -> float:
        return self.eps1 - self.eps0


@dataclass(frozen=True)
class ThermalWeights:
    """Truncated singlet + triplet Boltzmann weights.

    Weights are stored relative to ``exp(-eps0/T)`` (so ``w0 == 1``) to stay
    finite at low T; ``log_scale = -eps0/T`` restores absolute values.
    """

    T: float
    w0: float
    w1: float
    Z: float
    log_scale: float
    out_of_validity: bool


def build_chain_hamiltonian(spec: ChainSpec, sz_total: int, basis: SectorBasis | None = None) -> SparseOperator:
    if basis is None:
        basis = build_sector_basis(spec.L, sz_total)
    c, s = math.cos(spec.theta), math.sin(spec.theta)
    H = sp.csr_matrix((basis.dim, basis.dim))
    for i in range(1, spec.L):
        bond = two_site_coupling(basis, i, i + 1).matrix
        H = H + spec.J * (c * bond + s * (bond @ bond))
    H = sp.csr_matrix(H.real)
    H.eliminate_zeros()
    return SparseOperator(basis, basis, H)


def diagonalize_sector(H: SparseOperator, mode: str = "dense_full", k: int = 6,
                       dense_cap: int = DENSE_CAP, tol: float = 0.0) -> SectorSpectrum:
    """Eigen-decompose one sector block.

    ``dense_full`` returns every eigenpair; ``krylov_extremal`` returns the
    ``k`` lowest via implicitly restarted Lanczos (ARPACK).
    """
    m = H.matrix
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ValueError("Hamiltonian block must be square")
    if mode == "dense_full" or (mode == "krylov_extremal" and n <= max(k + 1, 16)):
        if n > dense_cap:
            raise ValueError(f"dense diagonalization refused: dim {n} exceeds cap {dense_cap}")
        dense = m.toarray()
        if np.iscomplexobj(dense) and np.abs(dense.imag).max(initial=0) < 1e-14:
            dense = dense.real
        w, v = np.linalg.eigh(dense)
        if mode == "krylov_extremal":
            w, v = w[:k], v[:, :k]
        return SectorSpectrum(H.sector_in, w, v, "dense_full" if mode == "dense_full" else mode)
    if mode != "krylov_extremal":
        raise ValueError(f"unknown mode {mode!r}")
    v0 = np.random.default_rng(12345).standard_normal(n)
    try:
        w, v = sla.eigsh(m, k=k, which="SA", tol=tol, v0=v0, maxiter=20 * n)
    except sla.ArpackNoConvergence as exc:
        res = [np.linalg.norm(m @ exc.eigenvectors[:, j] - exc.eigenvalues[j] * exc.eigenvectors[:, j])
               for j in range(len(exc.eigenvalues))]
        raise ConvergenceError(f"Lanczos did not converge for dim {n}", residuals=res) from exc
    order = np.argsort(w)
    return SectorSpectrum(H.sector_in, w[order], v[:, order], "krylov_extremal")


def _solver_for(dim: int, solver: str | None, dense_cap: int) -> str:
    if solver is None:
        return "dense_full" if dim <= min(dense_cap, 2000) else "krylov_extremal"
    return solver


def low_spectrum(spec: ChainSpec, solver: str | None = None, dense_cap: int = DENSE_CAP) -> LowSpectrum:
    """Singlet ground state and the triplet first-excited multiplet."""
    sectors = {sz: build_sector_basis(spec.L, sz) for sz in (-1, 0, 1)}
    spectra = {}
    for sz, basis in sectors.items():
        H = build_chain_hamiltonian(spec, sz, basis)
        mode = _solver_for(basis.dim, solver, dense_cap)
        spectra[sz] = diagonalize_sector(H, mode, k=2 if sz == 0 else 1, dense_cap=dense_cap)
    w0 = spectra[0].eigenvalues
    eps0 = float(w0[0])
    e_plus, e_minus, e_zero = float(spectra[1].eigenvalues[0]), float(spectra[-1].eigenvalues[0]), float(w0[1])
    scale = spec.J * TRIPLET_TOL
    if max(e_plus, e_minus, e_zero) - min(e_plus, e_minus, e_zero) > scale:
        raise PhysicsDomainError(
            f"triplet candidates disagree ({e_minus}, {e_zero}, {e_plus}); theta outside the Haldane-singlet regime?")
    if e_zero - eps0 <= 1e-8 * spec.J:
        raise PhysicsDomainError("ground state is not a non-degenerate singlet")
    eps1 = e_plus
    triplet = (spectra[-1].eigenvectors[:, 0], spectra[0].eigenvectors[:, 1], spectra[1].eigenvectors[:, 0])
    return LowSpectrum(eps0, eps1, spectra[0].eigenvectors[:, 0], triplet, sectors)


def thermal_weights(low: LowSpectrum, T: float) -> ThermalWeights:
    if not T > 0:
        raise PhysicsDomainError(f"temperature must be positive, got {T}")
    gap = low.gap
    w1 = math.exp(-gap / T)
    out = T >= gap
    if out:
        warnings.warn(f"T = {T} >= gap = {gap:.6g}: singlet-triplet truncation out of validity",
                      ValidityWarning, stacklevel=2)
    return ThermalWeights(T=T, w0=1.0, w1=w1, Z=1.0 + 3.0 * w1, log_scale=-low.eps0 / T, out_of_validity=out)


def full_spectrum(spec: ChainSpec, sz_values=(-1, 0, 1), dense_cap: int = DENSE_CAP,
                  cache=None) -> dict[int, SectorSpectrum]:
    """Dense eigen-decomposition of the requested Sz blocks.

    ``cache`` is an optional :class:`~spin1ent.spectrum_cache.SpectrumCache`.
    """
    if cache is not None:
        hit = cache.get(spec.L, spec.theta, "dense_full", spec.J)
        if hit is not None and all(sz in hit and hit[sz].eigenvectors is not None for sz in sz_values):
            return {sz: hit[sz] for sz in sz_values}
    out = {}
    for sz in sz_values:
        H = build_chain_hamiltonian(spec, sz)
        out[sz] = diagonalize_sector(H, "dense_full", dense_cap=dense_cap)
    if cache is not None:
        cache.put(spec.L, spec.theta, "dense_full", out, spec.J)
    return out
