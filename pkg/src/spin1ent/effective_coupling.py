"""Second-order effective coupling between two probe qubits at the chain ends.

The chain is traced out in its truncated thermal state (singlet + triplet),
giving an isotropic Heisenberg coupling ``j_eff * s_A . s_B`` between the
probes.  Each level contributes through the resolvent sum

    omega_l = (1/d_l) sum_{n in level l} sum_{k not in level l}
              <l n|S_1^z|k><k|S_L^z|l n> / (eps_k - eps_l)

and ``j_eff = -(2 J_p^2 / Z) sum_l d_l exp(-eps_l/T) omega_l``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.optimize import least_squares

from .chain_spectrum import (
    ChainSpec,
    ConvergenceError,
    LowSpectrum,
    PhysicsDomainError,
    THETA_MAX,
    build_chain_hamiltonian,
    full_spectrum,
    low_spectrum,
    thermal_weights,
)
from .spin_core import build_sector_basis, site_operator, spin_matrices, two_site_coupling

DEGENERACY = {0: 1, 1: 3}
DENOM_TOL = 1e-10
RESOLVENT_RTOL = 1e-10


@dataclass(frozen=True)
class OmegaSum:
    level: int
    i: int
    j: int
    value: float
    degeneracy: int
    excluded_terms: int = 0
    backend: str = "full_spectrum"

    @property
    def multiplet_total(self) -> float:
        return self.degeneracy * self.value


@dataclass(frozen=True)
class EffectiveCoupling:
    j_eff: float
    T: float
    theta: float
    L: int
    J_p: float
    omega0: OmegaSum
    omega1: OmegaSum
    eps0: float
    eps1: float
    validity: str = "ok"
    backend: str = ""

    @property
    def gap(self) -> float:
        return self.eps1 - self.eps0

    def recompute(self) -> float:
        """Rebuild j_eff from the stored ingredients."""
        b = math.exp(-self.gap / self.T)
        Z = 1.0 + 3.0 * b
        return -(2.0 * self.J_p**2 / Z) * (self.omega0.multiplet_total + b * self.omega1.multiplet_total)


def _level_members(low: LowSpectrum, level: int):
    """(sz, energy, vector) for each member of the level-l multiplet."""
    if level == 0:
        return [(0, low.eps0, low.ground_state)]
    if level == 1:
        return [(sz, low.eps1, vec) for sz, vec in zip((-1, 0, 1), low.triplet_states)]
    raise ValueError("only levels 0 (singlet) and 1 (triplet) are tracked")


def _omega_full(spec: ChainSpec, level: int, dense_cap: int, cache=None) -> OmegaSum:
    spectra = full_spectrum(spec, (-1, 0, 1), dense_cap=dense_cap, cache=cache)
    eps0 = float(spectra[0].eigenvalues[0])
    if level == 0:
        eps_l = eps0
        members = [(0, 0)]
    else:
        eps_l = float(spectra[1].eigenvalues[0])
        w0 = spectra[0].eigenvalues
        idx0 = int(np.argmin(np.abs(w0 - eps_l)))
        members = [(-1, 0), (0, idx0), (1, 0)]
    total = 0.0
    excluded = 0
    for sz, idx in members:
        sec = spectra[sz]
        basis = sec.sector
        V = sec.eigenvectors
        phi = V[:, idx]
        a = V.T @ (site_operator(basis, 1, "z").matrix @ phi)
        b = V.T @ (site_operator(basis, spec.L, "z").matrix @ phi)
        denom = sec.eigenvalues - eps_l
        keep = np.abs(denom) >= DENOM_TOL * spec.J
        # the member itself is always excluded; only count unexpected hits
        excluded += int(np.count_nonzero(~keep)) - 1
        total += float(np.sum(a[keep] * b[keep] / denom[keep]))
    d = DEGENERACY[level]
    return OmegaSum(level, 1, spec.L, total / d, d, excluded, "full_spectrum")


def _omega_resolvent(spec: ChainSpec, level: int, low: LowSpectrum | None, rtol: float) -> OmegaSum:
    if low is None:
        low = low_spectrum(spec, solver="krylov_extremal")
    total = 0.0
    for sz, eps_l, phi in _level_members(low, level):
        basis = low.sectors[sz]
        H = build_chain_hamiltonian(spec, sz, basis).matrix
        # project off every member of the level living in this sector
        P = np.column_stack([v for s, _, v in _level_members(low, level) if s == sz])
        P, _ = np.linalg.qr(P)

        def proj(x, P=P):
            return x - P @ (P.T @ x)

        shifted = H - eps_l * sp.identity(basis.dim, format="csr")
        op = sla.LinearOperator(shifted.shape, matvec=lambda x, A=shifted, q=proj: q(A @ q(x)), dtype=float)
        left = proj(site_operator(basis, 1, "z").matrix @ phi)
        rhs = proj(site_operator(basis, spec.L, "z").matrix @ phi)
        x, info = sla.minres(op, rhs, rtol=rtol, maxiter=20 * basis.dim)
        if info != 0:
            res = np.linalg.norm(op @ x - rhs) / np.linalg.norm(rhs)
            raise ConvergenceError(f"MINRES failed (info={info}) in Sz={sz}", residuals=[res])
        total += float(left @ proj(x))
    d = DEGENERACY[level]
    return OmegaSum(level, 1, spec.L, total / d, d, 0, "resolvent")


def omega_sum(spec: ChainSpec, level: int, backend: str = "full_spectrum", *,
              low: LowSpectrum | None = None, dense_cap: int = 12000,
              rtol: float = RESOLVENT_RTOL, cache=None) -> OmegaSum:
    """Multiplet-averaged resolvent sum for level 0 (singlet) or 1 (triplet)."""
    if backend == "full_spectrum":
        return _omega_full(spec, level, dense_cap, cache)
    if backend == "resolvent":
        return _omega_resolvent(spec, level, low, rtol)
    raise ValueError(f"unknown backend {backend!r}")


def j_eff_sweep(spec: ChainSpec, temperatures, backend: str = "full_spectrum", **kw) -> list[EffectiveCoupling]:
    """J_eff at several temperatures sharing one spectrum and one pair of omega sums."""
    solver = "krylov_extremal" if backend == "resolvent" else None
    low = low_spectrum(spec, solver=solver)
    extra = {"low": low} if backend == "resolvent" else {}
    om0 = omega_sum(spec, 0, backend, **extra, **kw)
    om1 = omega_sum(spec, 1, backend, **extra, **kw)
    out = []
    for T in temperatures:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = thermal_weights(low, T)
        value = -(2.0 * spec.J_p**2 / w.Z) * (w.w0 * om0.multiplet_total + w.w1 * om1.multiplet_total)
        out.append(EffectiveCoupling(value, T, spec.theta, spec.L, spec.J_p, om0, om1, low.eps0, low.eps1,
                                     "out_of_validity" if w.out_of_validity else "ok", backend))
    return out


def j_eff(spec: ChainSpec, T: float, backend: str = "full_spectrum", **kw) -> EffectiveCoupling:
    if not T > 0:
        raise PhysicsDomainError(f"temperature must be positive, got {T}")
    return j_eff_sweep(spec, [T], backend, **kw)[0]


def dimer_levels(theta: float, J: float = 1.0) -> tuple[float, float, float]:
    c, s = math.cos(theta), math.sin(theta)
    return -2 * J * (c - 2 * s), -J * (c - s), J * (c + s)


def _dimer(theta, T, J_p, J, quintet_sign) -> EffectiveCoupling:
    if not abs(theta) < THETA_MAX:
        raise PhysicsDomainError(f"|theta| must be below arctan(1/3), got {theta}")
    if not T > 0:
        raise PhysicsDomainError(f"temperature must be positive, got {T}")
    e0, e1, e2 = dimer_levels(theta, J)
    gap = e1 - e0
    b = math.exp(-gap / T)
    Z = 1.0 + 3.0 * b  # relative to exp(-e0/T)
    value = (1.0 / (3.0 * Z)) * ((4 * J_p**2 - 4 * J_p**2 * b) / gap + quintet_sign * 5 * J_p**2 * b / (e2 - e1))
    om0 = OmegaSum(0, 1, 2, -2.0 / (3.0 * gap), 1)
    om1_total = 2.0 / (3.0 * gap) - quintet_sign * 5.0 / (6.0 * (e2 - e1))
    om1 = OmegaSum(1, 1, 2, om1_total / 3.0, 3)
    return EffectiveCoupling(value, T, theta, 2, J_p, om0, om1, e0, e1,
                             "out_of_validity" if T >= gap else "ok", "dimer_analytic")


def j_eff_dimer_analytic(theta: float, T: float, J_p: float = 0.1, J: float = 1.0) -> EffectiveCoupling:
    """Closed-form two-site coupling with the quintet term entering with a minus sign."""
    return _dimer(theta, T, J_p, J, -1.0)


def j_eff_dimer_closed_form(theta: float, T: float, J_p: float = 0.1, J: float = 1.0) -> EffectiveCoupling:
    """Closed-form two-site coupling obtained from the second-order trace.

    The triplet's coupling to the quintet enters with a plus sign; this is
    the form :func:`frohlich_effective_hamiltonian` reproduces.
    """
    return _dimer(theta, T, J_p, J, +1.0)


# ---------------------------------------------------------------------------
# Full-Hilbert-space oracles (Kronecker-built, independent of the sector code)

def _kron_all(mats):
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def _chain_ops_dense(L: int):
    s1 = spin_matrices("one")
    I3 = np.eye(3)

    def at(op, i):
        return _kron_all([op if k == i else I3 for k in range(1, L + 1)])

    return s1, at


def chain_hamiltonian_dense(spec: ChainSpec) -> np.ndarray:
    s1, at = _chain_ops_dense(spec.L)
    dim = 3**spec.L
    H = np.zeros((dim, dim), dtype=complex)
    c, s = math.cos(spec.theta), math.sin(spec.theta)
    for i in range(1, spec.L):
        b = sum(at(getattr(s1, a), i) @ at(getattr(s1, a), i + 1) for a in ("sx", "sy", "sz"))
        H += spec.J * (c * b + s * b @ b)
    return H.real


def _levels(e: np.ndarray, tol: float = 1e-8):
    """Group ascending eigenvalues into degenerate levels."""
    groups = [[0]]
    for k in range(1, len(e)):
        if abs(e[k] - e[groups[-1][0]]) <= tol * max(1.0, abs(e[k])):
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def omega_tensor_dense(spec: ChainSpec, level: int) -> dict[tuple[str, str], complex]:
    """Multiplet-summed resolvent sums for every pair of spherical components.

    Returns ``{(alpha, beta): sum}`` with alpha, beta in ``{"z", "+", "-"}``,
    where the sum uses ``<l|S_1^alpha|k> <l|S_L^beta|k>^*``.  Limited to
    small L (dense 3^L space).
    """
    if spec.L > 8:
        raise ValueError("dense oracle limited to L <= 8")
    s1, at = _chain_ops_dense(spec.L)
    e, V = np.linalg.eigh(chain_hamiltonian_dense(spec))
    groups = _levels(e)
    # level 1 = first multiplet above the ground singlet
    members = groups[level]
    ops = {"z": s1.sz, "+": s1.s_plus, "-": s1.s_minus}
    left = {a: V.conj().T @ at(m, 1) @ V for a, m in ops.items()}
    right = {a: V.conj().T @ at(m, spec.L) @ V for a, m in ops.items()}
    mask = np.ones(len(e), dtype=bool)
    mask[members] = False
    out = {}
    for a in ops:
        for b in ops:
            tot = 0j
            for n in members:
                tau_i = left[a][n, mask]
                tau_j = right[b][n, mask]
                tot += np.sum(tau_i * tau_j.conj() / (e[mask] - e[n]))
            out[(a, b)] = complex(tot)
    return out


def frohlich_effective_hamiltonian(spec: ChainSpec, T: float) -> tuple[np.ndarray, float]:
    """Brute-force second-order effective probe Hamiltonian.

    Builds the generator ``S`` with ``<i|S|j> = <i|H_I|j>/(eps_i - eps_j)``
    in the full probe x chain space and traces ``[S, H_I]/2`` against the
    truncated chain thermal state.  Returns the 4x4 probe operator (probe
    constants included) and its triplet-minus-singlet splitting.
    """
    if spec.L > 4:
        raise ValueError("Frohlich oracle limited to L <= 4")
    L = spec.L
    dc = 3**L
    h = spin_matrices("half")
    s1, at = _chain_ops_dense(L)
    I2, Ic = np.eye(2), np.eye(dc)
    e, V = np.linalg.eigh(chain_hamiltonian_dense(spec))
    HI = np.zeros((4 * dc, 4 * dc), dtype=complex)
    for a in ("sx", "sy", "sz"):
        HI += _kron_all([getattr(h, a), at(getattr(s1, a), 1), I2])
        HI += _kron_all([I2, at(getattr(s1, a), L), getattr(h, a)])
    HI *= spec.J_p
    U = _kron_all([I2, V, I2])
    HIe = (U.conj().T @ HI @ U).reshape(2, dc, 2, 2, dc, 2)
    de = e[:, None] - e[None, :]
    inv = np.where(np.abs(de) > DENOM_TOL * spec.J, 1.0 / np.where(de == 0, 1, de), 0.0)
    S = (HIe * inv[None, :, None, None, :, None]).reshape(4 * dc, 4 * dc)
    HIm = HIe.reshape(4 * dc, 4 * dc)
    comm = (0.5 * (S @ HIm - HIm @ S)).reshape(2, dc, 2, 2, dc, 2)
    groups = _levels(e)
    w = np.zeros(dc)
    w[groups[0]] = 1.0
    w[groups[1]] = np.exp(-(e[groups[1][0]] - e[0]) / T)
    w /= w.sum()
    Heff = np.einsum("akbckd,k->abcd", comm, w).reshape(4, 4)
    Heff = 0.5 * (Heff + Heff.conj().T)
    # singlet (|ud> - |du>)/sqrt2 and triplet-0 in the (A, B) product basis
    singlet = np.array([0, 1, -1, 0]) / math.sqrt(2)
    trip0 = np.array([0, 1, 1, 0]) / math.sqrt(2)
    split = float((trip0 @ Heff @ trip0 - singlet @ Heff @ singlet).real)
    return Heff, split


def full_system_hamiltonian(spec: ChainSpec, sz_total: int):
    """Sector block of the complete probes + chain + coupling Hamiltonian."""
    basis = build_sector_basis(spec.L, sz_total, probes=True)
    c, s = math.cos(spec.theta), math.sin(spec.theta)
    H = sp.csr_matrix((basis.dim, basis.dim))
    for i in range(1, spec.L):
        bond = two_site_coupling(basis, i, i + 1).matrix
        H = H + spec.J * (c * bond + s * (bond @ bond))
    H = H + spec.J_p * (two_site_coupling(basis, 0, 1, "probe_heisenberg").matrix
                        + two_site_coupling(basis, spec.L, spec.L + 1, "probe_heisenberg").matrix)
    if spec.omega:
        H = H + spec.omega * (site_operator(basis, 0, "z").matrix + site_operator(basis, spec.L + 1, "z").matrix)
    return basis, sp.csr_matrix(H.real)


def sw_numeric_oracle(spec: ChainSpec, tol: float = 1e-9) -> float:
    """Probe singlet-triplet splitting from exact diagonalization of the full system.

    Only meaningful for small J_p at omega = 0; returns E(triplet) - E(singlet).
    """
    if spec.omega != 0:
        raise PhysicsDomainError("the full-system oracle assumes omega = 0")
    if spec.L > 6:
        raise ValueError("full-system oracle limited to L <= 6")
    lowest = {}
    for sz in (0, 1, -1):
        _, H = full_system_hamiltonian(spec, sz)
        lowest[sz] = np.linalg.eigvalsh(H.toarray())[:3]
    e_t = lowest[1][0]
    if abs(lowest[-1][0] - e_t) > tol * spec.J:
        raise ConvergenceError("Sz = +1 and -1 ground energies differ")
    a, b = lowest[0][0], lowest[0][1]
    # one of the two lowest Sz=0 levels is the triplet partner
    if abs(b - e_t) <= abs(a - e_t):
        e_s, partner = a, b
    else:
        e_s, partner = b, a
    split = e_t - e_s
    quartet = sorted([e_s, e_t])
    fifth = min(lowest[0][2], lowest[1][1])
    if abs(partner - e_t) > max(tol * spec.J, 1e-6 * abs(split)) or fifth - quartet[1] <= abs(split):
        raise ConvergenceError("lowest four levels do not form a clean 1 + 3 pattern")
    return float(split)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaturationFit:
    j_inf: float
    amplitude: float
    decay_length: float
    residual: float
    converged: bool = True
    n_points: int = 0
    message: str = field(default="", compare=False)

    def model(self, L):
        return self.j_inf - self.amplitude * np.exp(-np.asarray(L, dtype=float) / self.decay_length)


class FitError(ValueError):
    pass


def saturation_fit(points, max_iter: int = 500) -> SaturationFit:
    """Least-squares fit of ``j_inf - A exp(-L/xi)`` to (L, j_eff) pairs."""
    pts = sorted((float(L), float(j)) for L, j in points)
    Ls = np.array([p[0] for p in pts])
    js = np.array([p[1] for p in pts])
    if len(set(Ls)) < 3 or len(Ls) != len(set(Ls)):
        raise FitError("saturation fit needs at least 3 points with distinct L")
    L0 = Ls[0]
    j_inf0 = js[-1]
    B0 = max(j_inf0 - js[0], 1e-12 * max(abs(j_inf0), 1e-300))
    inc = np.diff(js)
    ratio = abs(inc[0] / inc[-1]) if inc[-1] != 0 else 2.0
    xi0 = (Ls[-1] - Ls[0]) / math.log(max(ratio, 2.0))

    # amplitude referenced to the smallest L keeps the problem well scaled
    def resid(p):
        j_inf, B, xi = p
        return j_inf - B * np.exp(-(Ls - L0) / xi) - js

    res = least_squares(resid, [j_inf0, B0, xi0], bounds=([-np.inf, 0, 1e-3], [np.inf, np.inf, 1e3]),
                        max_nfev=max_iter, xtol=1e-15, ftol=1e-15, gtol=1e-15, x_scale="jac")
    j_inf, B, xi = res.x
    amplitude = B * math.exp(min(L0 / xi, 700.0))
    rms = float(np.sqrt(np.mean(res.fun**2)))
    fit = SaturationFit(float(j_inf), float(amplitude), float(xi), rms, bool(res.status > 0), len(Ls), res.message)
    if not fit.converged:
        warnings.warn(f"saturation fit did not converge: {res.message}", RuntimeWarning, stacklevel=2)
    return fit
