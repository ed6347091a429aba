"""Concurrence and standard-teleportation fidelity of two-qubit channel states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .open_system import TwoQubitState, TwoQubitXState, thermal_pair_state

PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# (|ge> - |eg>)/sqrt2 in the {gg, ge, eg, ee} basis
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
CLASSICAL_FIDELITY = 2.0 / 3.0
CLIP = 1e-10


def concurrence_wootters(rho) -> float:
    r = rho.rho if isinstance(rho, TwoQubitState) else np.asarray(rho, dtype=complex)
    TwoQubitState(r).check()
    r = 0.5 * (r + r.conj().T)
    yy = np.kron(PAULI["y"], PAULI["y"])
    w, V = np.linalg.eigh(r)
    if w.min() < -CLIP:
        raise ValueError("density matrix is not positive semidefinite")
    sq = V @ np.diag(np.sqrt(np.clip(w, 0, None))) @ V.conj().T
    # lambda_i = singular values of sqrt(rho) sqrt(rho~), avoids square roots of tiny eigenvalues
    tilde_sq = yy @ sq.conj() @ yy
    lam = np.linalg.svd(sq @ tilde_sq, compute_uv=False)
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_xstate(state: TwoQubitXState) -> float:
    return 2.0 / state.z_q * max(0.0, abs(state.y) - math.sqrt(max(state.u * state.v, 0.0)))


def thermal_concurrence(j_eff: float, T: float) -> float:
    """Concurrence of the zero-field thermal pair, ``max(0, e^{3j/4T} - 3e^{-j/4T}) / Z_q``."""
    r = j_eff / T
    # divide numerator and Z_q by e^{3j/4T}
    return max(0.0, (1 - 3 * math.exp(-r)) / (1 + 3 * math.exp(-r)))


def entanglement_threshold(tol: float = 1e-12, lo: float = 0.0, hi: float = 5.0) -> float:
    """Bisect the smallest ``j_eff / T`` with non-zero thermal concurrence."""

    def entangled(ratio):
        return concurrence_xstate(thermal_pair_state(ratio, 0.0, 1.0)) > 0

    if entangled(lo) or not entangled(hi):
        raise ValueError("threshold not bracketed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if entangled(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class InputQubit:
    theta_b: float
    phi_b: float

    def __post_init__(self):
        if not 0 <= self.theta_b <= math.pi:
            raise ValueError("theta_b must lie in [0, pi]")
        if not 0 <= self.phi_b < 2 * math.pi:
            raise ValueError("phi_b must lie in [0, 2 pi)")

    def ket(self) -> np.ndarray:
        return np.array([math.cos(self.theta_b / 2), math.sin(self.theta_b / 2) * np.exp(1j * self.phi_b)])

    def rho(self) -> np.ndarray:
        k = self.ket()
        return np.outer(k, k.conj())


def bell_weights(rho: np.ndarray) -> dict[str, float]:
    """``Tr[E^i rho]`` with ``E^0 = |psi-><psi-|`` and ``E^i = s^i E^0 s^i``."""
    out = {}
    for name, s in PAULI.items():
        vec = np.kron(s, np.eye(2)) @ PSI_MINUS
        out[name] = float(np.real(vec.conj() @ rho @ vec))
    return out


def teleport_output(channel, inp: InputQubit) -> np.ndarray:
    r = channel.rho if isinstance(channel, TwoQubitState) else np.asarray(channel)
    rin = inp.rho()
    w = bell_weights(r)
    return sum(w[k] * PAULI[k] @ rin @ PAULI[k] for k in PAULI)


@lru_cache(maxsize=4)
def _sphere_grid(n_theta: int, n_phi: int):
    x, wx = np.polynomial.legendre.leggauss(n_theta)  # x = cos(theta)
    theta = np.arccos(x)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    kets = np.stack([np.cos(th / 2), np.sin(th / 2) * np.exp(1j * ph)], axis=-1).reshape(-1, 2)
    # sin(theta) d theta = d cos(theta); uniform phi weights 2 pi / n_phi; total 4 pi
    weights = (wx[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).reshape(-1)
    return kets, weights


def average_fidelity_quadrature(channel, n_theta: int = 64, n_phi: int = 64) -> float:
    """Bloch-sphere average of ``Tr[rho_out rho_in]`` for pure inputs."""
    r = channel.rho if isinstance(channel, TwoQubitState) else np.asarray(channel)
    w = bell_weights(r)
    kets, weights = _sphere_grid(n_theta, n_phi)
    f = np.zeros(len(kets))
    for k, s in PAULI.items():
        # <psi| s rho_in s |psi> = |<psi|s|psi>|^2
        amp = np.einsum("ni,ij,nj->n", kets.conj(), s, kets)
        f += w[k] * np.abs(amp) ** 2
    return float(weights @ f / (4 * np.pi))


@dataclass(frozen=True)
class FidelityReport:
    f_avg_formula: float
    f_avg_quadrature: float
    f_avg_paper_eq14: float
    singlet_fraction: float

    @property
    def above_classical(self) -> bool:
        return self.f_avg_formula > CLASSICAL_FIDELITY


def average_fidelity(channel: TwoQubitXState) -> FidelityReport:
    """Average teleportation fidelity three ways.

    ``f_avg_formula = (1 + 2 F_singlet) / 3`` is canonical and checked by
    quadrature; ``f_avg_paper_eq14 = 1/6 + (3x - 2y) / (3 Z_q)`` is an
    alternative expression kept for comparison (it is 5/12 on the maximally
    mixed channel).
    """
    sf = (channel.x - channel.y) / channel.z_q
    return FidelityReport(
        f_avg_formula=1 / 3 + 2 * (channel.x - channel.y) / (3 * channel.z_q),
        f_avg_quadrature=average_fidelity_quadrature(channel.matrix()),
        f_avg_paper_eq14=1 / 6 + (3 * channel.x - 2 * channel.y) / (3 * channel.z_q),
        singlet_fraction=sf,
    )
