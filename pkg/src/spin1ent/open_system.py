"""Two-qubit thermal pair under independent local thermal reservoirs.

Ordered basis ``{|gg>, |ge>, |eg>, |ee>}`` with qubit A first and
``|g>`` the ``s^z = -1/2`` state, so ``sigma^- = |g><e|``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

log = logging.getLogger(__name__)

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SZ_HALF = np.diag([-0.5, 0.5]).astype(complex)
SX_HALF = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
SY_HALF = np.array([[0, 0.5j], [-0.5j, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    rho: np.ndarray

    def check(self, tol: float = 1e-10) -> None:
        r = self.rho
        if r.shape != (4, 4):
            raise ValueError("two-qubit state must be 4x4")
        if np.abs(r - r.conj().T).max() > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r).real - 1) > tol:
            raise ValueError("density matrix does not have unit trace")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -tol:
            raise ValueError("density matrix is not positive semidefinite")

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())


@dataclass(frozen=True)
class TwoQubitXState:
    """Unnormalized X-shaped state; the density matrix is ``[[u..],[x,y],[y,x],[..v]] / z_q``."""

    u: float
    x: float
    y: float
    v: float
    z_q: float

    def matrix(self) -> np.ndarray:
        r = np.zeros((4, 4))
        r[0, 0], r[3, 3] = self.u, self.v
        r[1, 1] = r[2, 2] = self.x
        r[1, 2] = r[2, 1] = self.y
        return r / self.z_q

    def state(self) -> TwoQubitState:
        return TwoQubitState(self.matrix().astype(complex))

    @classmethod
    def from_matrix(cls, rho: np.ndarray, z_q: float = 1.0, tol: float = 1e-10) -> "TwoQubitXState":
        r = np.asarray(rho)
        mask = np.ones((4, 4), dtype=bool)
        for i, j in [(0, 0), (1, 1), (2, 2), (3, 3), (1, 2), (2, 1)]:
            mask[i, j] = False
        if np.abs(r[mask]).max() > tol or abs(r[1, 1] - r[2, 2]) > tol or abs(r[1, 2].imag) > tol:
            raise ValueError("matrix is not a symmetric real X state")
        return cls(float(r[0, 0].real) * z_q, float(r[1, 1].real) * z_q, float(r[1, 2].real) * z_q,
                   float(r[3, 3].real) * z_q, z_q)


@dataclass(frozen=True)
class NoiseParams:
    n_bar: float
    gamma: float

    def __post_init__(self):
        if self.n_bar < 0:
            raise ValueError("n_bar must be non-negative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def a(self, p: float) -> float:
        return self.n_bar * p / (2 * self.n_bar + 1)


def _pair_weights(j_eff: float, omega: float, T: float):
    # Boltzmann factors of |gg>, |ee>, triplet-0, singlet sharing one shift
    energies = np.array([j_eff / 4 - omega, j_eff / 4 + omega, j_eff / 4, -3 * j_eff / 4])
    shift = energies.min()
    return np.exp(-(energies - shift) / T)


def thermal_pair_state(j_eff: float, omega: float, T: float) -> TwoQubitXState:
    """Gibbs state of ``j_eff s_A.s_B + omega (s_A^z + s_B^z)``.

    Elements carry a common factor ``exp(E_min/T)`` to avoid overflow; only
    ratios to ``z_q`` are physical.
    """
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    wgg, wee, wt, ws = _pair_weights(j_eff, omega, T)
    u, v = wgg, wee
    x, y = 0.5 * (wt + ws), 0.5 * (wt - ws)
    return TwoQubitXState(u, x, y, v, u + 2 * x + v)


def gad_kraus(p: float, n_bar: float) -> list[np.ndarray]:
    """Generalized amplitude damping Kraus operators in the (g, e) basis."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    norm = 2 * n_bar + 1
    q = math.sqrt(1 - p)
    k0 = math.sqrt((n_bar + 1) / norm) * np.array([[1, 0], [0, q]], dtype=complex)
    k1 = math.sqrt((n_bar + 1) * p / norm) * np.array([[0, 1], [0, 0]], dtype=complex)
    k2 = math.sqrt(n_bar / norm) * np.array([[q, 0], [0, 1]], dtype=complex)
    k3 = math.sqrt(n_bar * p / norm) * np.array([[0, 0], [1, 0]], dtype=complex)
    return [k0, k1, k2, k3]


def p_of_t(t: float, noise: NoiseParams) -> float:
    """Exchange probability ``1 - exp(-2 gamma (2 n_bar + 1) t)``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return float(-np.expm1(-2 * noise.gamma * (2 * noise.n_bar + 1) * t))


def apply_gad_pair(rho: np.ndarray, p: float, n_bar: float) -> np.ndarray:
    ks = gad_kraus(p, n_bar)
    out = np.zeros((4, 4), dtype=complex)
    for ka in ks:
        for kb in ks:
            k = np.kron(ka, kb)
            out += k @ rho @ k.conj().T
    return out


def kraus_evolve(state0, t: float, noise: NoiseParams):
    """Apply the local GAD x GAD channel for time ``t``.

    X-form inputs come back in X form with the same ``z_q``.
    """
    p = p_of_t(t, noise)
    if isinstance(state0, TwoQubitXState):
        rho = apply_gad_pair(state0.matrix().astype(complex), p, noise.n_bar)
        return TwoQubitXState.from_matrix(rho, state0.z_q)
    return TwoQubitState(apply_gad_pair(state0.rho, p, noise.n_bar))


def xstate_elements(j_eff: float, omega: float, T: float, p: float, n_bar: float) -> TwoQubitXState:
    """Evolved X-state elements using the same flip weight ``a`` in both directions.

    Only coincides with the GAD product channel at ``p = 0``; compare
    :func:`xstate_elements_gad`.
    """
    a = n_bar * p / (2 * n_bar + 1)
    wgg, wee, wt, ws = _pair_weights(j_eff, omega, T)
    pair = wt + ws
    u = (1 - a) ** 2 * wgg + a**2 * wee + a * (1 - a) * pair
    v = (1 - a) ** 2 * wee + a**2 * wgg + a * (1 - a) * pair
    x = a * (1 - a) * (wee + wgg) + 0.5 * ((1 - a) ** 2 + a**2) * pair
    y = 0.5 * (1 - p) * (wt - ws)
    return TwoQubitXState(u, x, y, v, wgg + wee + pair)


def xstate_elements_gad(j_eff: float, omega: float, T: float, p: float, n_bar: float) -> TwoQubitXState:
    """Evolved X-state elements of the GAD x GAD channel in closed form.

    ``a`` is the g -> e flip probability and ``b = (n_bar + 1) p / (2 n_bar + 1)``
    the e -> g one.
    """
    a = n_bar * p / (2 * n_bar + 1)
    b = (n_bar + 1) * p / (2 * n_bar + 1)
    wgg, wee, wt, ws = _pair_weights(j_eff, omega, T)
    x0 = 0.5 * (wt + ws)
    u = (1 - a) ** 2 * wgg + b**2 * wee + 2 * (1 - a) * b * x0
    v = a**2 * wgg + (1 - b) ** 2 * wee + 2 * a * (1 - b) * x0
    x = a * (1 - a) * wgg + b * (1 - b) * wee + ((1 - a) * (1 - b) + a * b) * x0
    y = 0.5 * (1 - p) * (wt - ws)
    return TwoQubitXState(u, x, y, v, wgg + wee + 2 * x0)


def pair_hamiltonian(j_eff: float, omega: float) -> np.ndarray:
    """``j_eff s_A.s_B + omega (s_A^z + s_B^z)``; pass ``j_eff = 0`` for the free pair."""
    ss = sum(np.kron(s, s) for s in (SX_HALF, SY_HALF, SZ_HALF))
    return j_eff * ss + omega * (np.kron(SZ_HALF, I2) + np.kron(I2, SZ_HALF))


_LOWER = [np.kron(SIGMA_MINUS, I2), np.kron(I2, SIGMA_MINUS)]


def lindblad_rhs(rho: np.ndarray, h_eff: np.ndarray, noise: NoiseParams) -> np.ndarray:
    out = -1j * (h_eff @ rho - rho @ h_eff)
    g, n = noise.gamma, noise.n_bar
    for sm in _LOWER:
        spl = sm.conj().T
        down = spl @ sm  # sigma^+ sigma^-
        up = sm @ spl
        out += (n + 1) * g * (2 * sm @ rho @ spl - rho @ down - down @ rho)
        out += n * g * (2 * spl @ rho @ sm - rho @ up - up @ rho)
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    states: list[TwoQubitState]
    trace_drift: np.ndarray
    min_eigenvalue: np.ndarray
    renormalized: np.ndarray


def integrate_master_equation(state0, h_eff: np.ndarray, noise: NoiseParams, t_grid,
                              tol: float = 1e-9) -> Trajectory:
    """Integrate the master equation with an adaptive Dormand-Prince 5(4) pair."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending and start at 0")
    rho0 = state0.rho if isinstance(state0, TwoQubitState) else state0.matrix().astype(complex)

    def f(_, y):
        r = y.view(complex).reshape(4, 4)
        return lindblad_rhs(r, h_eff, noise).reshape(-1).view(float)

    y0 = np.ascontiguousarray(rho0, dtype=complex).reshape(-1).view(float).copy()
    if len(t_grid) == 1:
        ys = y0[:, None]
    else:
        sol = solve_ivp(f, (t_grid[0], t_grid[-1]), y0, method="RK45", t_eval=t_grid,
                        rtol=tol, atol=tol * 1e-3, dense_output=True)
        if not sol.success:
            raise FloatingPointError(f"master-equation integration failed: {sol.message}")
        ys = sol.y
    states, drift, mins, renorm = [], [], [], []
    for k in range(ys.shape[1]):
        r = np.ascontiguousarray(ys[:, k]).view(complex).reshape(4, 4).copy()
        d = float(np.trace(r).real - 1)
        drift.append(d)
        if abs(d) > 1e-12:
            log.info("trace drift %.3e at t=%g, renormalizing", d, t_grid[k])
            r /= np.trace(r).real
            renorm.append(True)
        else:
            renorm.append(False)
        st = TwoQubitState(r)
        states.append(st)
        mins.append(st.min_eigenvalue)
    return Trajectory(t_grid, states, np.array(drift), np.array(mins), np.array(renorm))


def trajectory_rows(traj: Trajectory, noise: NoiseParams, z_q: float = 1.0):
    """CSV rows ``(t, p, u, x, y, v, trace_drift, min_eigenvalue)``; elements scaled by ``z_q``."""
    rows = []
    for t, st, d, m in zip(traj.t, traj.states, traj.trace_drift, traj.min_eigenvalue):
        r = st.rho.real * z_q
        rows.append((float(t), p_of_t(float(t), noise), r[0, 0], 0.5 * (r[1, 1] + r[2, 2]), r[1, 2], r[3, 3],
                     float(d), float(m)))
    return rows
