"""Spin operators, total-Sz sector bases and sparse two-site couplings.

Local states are labelled by twice the magnetic quantum number (``2m``) so
that spin-1/2 probes and spin-1 chain sites share integer bookkeeping.  Site
positions follow the chain convention: chain sites are ``1..L`` and, when
probes are attached, probe A sits at position 0 and probe B at ``L + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import numpy as np
import scipy.sparse as sp

DROP_TOL = 1e-14


@dataclass(frozen=True)
class SpinOps:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray

    @property
    def dim(self) -> int:
        return self.sz.shape[0]


def spin_matrices(spin: str) -> SpinOps:
    """Standard angular-momentum matrices in the m-descending basis.

    ``spin`` is ``"half"`` or ``"one"``.
    """
    if spin == "half":
        s = 0.5
    elif spin == "one":
        s = 1.0
    else:
        raise ValueError(f"unsupported spin {spin!r}")
    ms = np.arange(s, -s - 1, -1)
    d = len(ms)
    sz = np.diag(ms).astype(complex)
    s_plus = np.zeros((d, d), dtype=complex)
    for k in range(1, d):
        m = ms[k]
        s_plus[k - 1, k] = np.sqrt(s * (s + 1) - m * (m + 1))
    s_minus = s_plus.conj().T
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    return SpinOps(sx=sx, sy=sy, sz=sz, s_plus=s_plus, s_minus=s_minus)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """All product states of a fixed total Sz, sorted by configuration label.

    ``configs`` holds ``2m`` per site (rows = states, columns = positions).
    The label of a configuration is its mixed-radix integer with digits
    ``(2m + 2s) / 2`` and position 0 most significant, so the ordering is
    lexicographic in the local m-values.
    """

    L: int
    sz_total: int
    probes: bool
    configs: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def states(self) -> list[tuple[float, ...]]:
        return [tuple(float(x) / 2 for x in row) for row in self.configs]

    @property
    def two_s(self) -> tuple[int, ...]:
        return site_twice_spins(self.L, self.probes)

    @property
    def positions(self) -> range:
        """Valid site positions for this basis."""
        return range(0, self.L + 2) if self.probes else range(1, self.L + 1)

    def column(self, position: int) -> int:
        if position not in self.positions:
            raise IndexError(f"site {position} outside basis with L={self.L}, probes={self.probes}")
        return position if self.probes else position - 1

    @cached_property
    def _radix_weights(self) -> np.ndarray:
        radices = np.array([t + 1 for t in self.two_s], dtype=np.int64)
        w = np.ones(len(radices), dtype=np.int64)
        for k in range(len(radices) - 2, -1, -1):
            w[k] = w[k + 1] * radices[k + 1]
        return w

    def label_of(self, configs: np.ndarray) -> np.ndarray:
        digits = (configs + np.array(self.two_s)) // 2
        return digits @ self._radix_weights

    def index_of(self, configs: np.ndarray) -> np.ndarray:
        """Row indices of the given configurations (must belong to the sector)."""
        lab = self.label_of(np.atleast_2d(configs))
        idx = np.searchsorted(self.labels, lab)
        if np.any(idx >= self.dim) or np.any(self.labels[np.minimum(idx, self.dim - 1)] != lab):
            raise KeyError("configuration not in sector")
        return idx


def site_twice_spins(L: int, probes: bool) -> tuple[int, ...]:
    chain = (2,) * L
    return (1,) + chain + (1,) if probes else chain


def build_sector_basis(L: int, sz_total: int, probes: bool = False) -> SectorBasis:
    """Enumerate the total-Sz sector of an open spin-1 chain (plus probes)."""
    if L < 2 or L % 2:
        raise ValueError(f"chain length must be even and >= 2, got {L}")
    two_s = site_twice_spins(L, probes)
    target = 2 * sz_total
    if abs(target) > sum(two_s):
        configs = np.zeros((0, len(two_s)), dtype=np.int64)
        return SectorBasis(L, sz_total, probes, configs, np.zeros(0, dtype=np.int64))
    # labels 0..N-1 decoded most-significant first are already sorted
    radices = [t + 1 for t in two_s]
    rest = np.arange(int(np.prod(radices)), dtype=np.int64)
    digits = np.empty((len(rest), len(radices)), dtype=np.int64)
    for k in range(len(radices) - 1, -1, -1):
        rest, digits[:, k] = np.divmod(rest, radices[k])
    configs = 2 * digits - np.array(two_s)
    configs = configs[configs.sum(axis=1) == target]
    basis = SectorBasis(L, sz_total, probes, configs, np.zeros(0, dtype=np.int64))
    labels = basis.label_of(configs)
    object.__setattr__(basis, "labels", labels)
    return basis


def sector_dimension(L: int, sz_total: int) -> int:
    """Count chain-only sector states by dynamic programming over sites."""
    counts = {0: 1}
    for _ in range(L):
        nxt: dict[int, int] = {}
        for m, c in counts.items():
            for dm in (-1, 0, 1):
                nxt[m + dm] = nxt.get(m + dm, 0) + c
        counts = nxt
    return counts.get(sz_total, 0)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    sector_in: SectorBasis
    sector_out: SectorBasis
    matrix: sp.csr_matrix

    def triplets(self) -> list[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            if other.sector_out is not self.sector_in:
                raise ValueError("sector mismatch in operator product")
            return SparseOperator(other.sector_in, self.sector_out, _clean(self.matrix @ other.matrix))
        return self.matrix @ other


def _clean(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m)
    m.data[np.abs(m.data) < DROP_TOL] = 0
    m.eliminate_zeros()
    m.sort_indices()
    return m


def _ladder(two_s: int, two_m: np.ndarray, up: bool) -> np.ndarray:
    # sqrt(s(s+1) - m(m±1)) written in doubled quantum numbers
    sign = 1 if up else -1
    val = (two_s * (two_s + 2) - two_m * (two_m + 2 * sign)) / 4.0
    return np.sqrt(np.clip(val, 0.0, None))


def site_operator(basis: SectorBasis, i: int, kind: str, target: SectorBasis | None = None) -> SparseOperator:
    """Single-site ``S^z``, ``S^+`` or ``S^-`` from ``basis`` into its image sector.

    ``target`` must be the sector reached by the operator; it is built on the
    fly when omitted.
    """
    col = basis.column(i)
    ts = basis.two_s[col]
    shift = {"z": 0, "+": 1, "-": -1}[kind]
    if target is None:
        target = basis if shift == 0 else build_sector_basis(basis.L, basis.sz_total + shift, basis.probes)
    if target.sz_total != basis.sz_total + shift or target.probes != basis.probes or target.L != basis.L:
        raise ValueError("target sector does not match the operator's Sz shift")
    m = basis.configs[:, col]
    if kind == "z":
        rows = cols = np.arange(basis.dim)
        vals = m / 2.0
        shape = (basis.dim, basis.dim)
    else:
        ok = (m + 2 * shift >= -ts) & (m + 2 * shift <= ts)
        cols = np.nonzero(ok)[0]
        new = basis.configs[cols].copy()
        new[:, col] += 2 * shift
        rows = target.index_of(new)
        vals = _ladder(ts, m[cols], shift > 0)
        shape = (target.dim, basis.dim)
    mat = sp.csr_matrix((vals.astype(float), (rows, cols)), shape=shape)
    return SparseOperator(basis, target, _clean(mat))


def _bilinear(basis: SectorBasis, i: int, j: int) -> sp.csr_matrix:
    ci, cj = basis.column(i), basis.column(j)
    tsi, tsj = basis.two_s[ci], basis.two_s[cj]
    mi, mj = basis.configs[:, ci], basis.configs[:, cj]
    rows = [np.arange(basis.dim)]
    cols = [np.arange(basis.dim)]
    vals = [mi * mj / 4.0]
    # S_i^+ S_j^- / 2 and S_i^- S_j^+ / 2
    for si in (1, -1):
        ok = (np.abs(mi + 2 * si) <= tsi) & (np.abs(mj - 2 * si) <= tsj)
        c = np.nonzero(ok)[0]
        new = basis.configs[c].copy()
        new[:, ci] += 2 * si
        new[:, cj] -= 2 * si
        rows.append(basis.index_of(new) if len(c) else c)
        cols.append(c)
        vals.append(0.5 * _ladder(tsi, mi[c], si > 0) * _ladder(tsj, mj[c], si < 0))
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )
    return _clean(mat)


def two_site_coupling(basis: SectorBasis, i: int, j: int, form: str = "bilinear") -> SparseOperator:
    """``S_i.S_j``, ``(S_i.S_j)^2`` or a probe-chain Heisenberg term within a sector.

    All forms conserve total Sz, so the result maps the sector onto itself.
    """
    if i == j:
        raise ValueError("two_site_coupling needs distinct sites")
    basis.column(i), basis.column(j)
    if form == "bilinear":
        mat = _bilinear(basis, i, j)
    elif form == "biquadratic":
        b = _bilinear(basis, i, j)
        mat = _clean(b @ b)
    elif form == "probe_heisenberg":
        if not basis.probes:
            raise ValueError("probe_heisenberg requires a basis with probes")
        probe_sites = {0, basis.L + 1}
        if (i in probe_sites) == (j in probe_sites):
            raise ValueError("probe_heisenberg couples exactly one probe to one chain site")
        mat = _bilinear(basis, i, j)
    else:
        raise ValueError(f"unknown coupling form {form!r}")
    return SparseOperator(basis, basis, mat)


def total_sz(basis: SectorBasis) -> sp.csr_matrix:
    return sp.diags(basis.configs.sum(axis=1) / 2.0).tocsr()
