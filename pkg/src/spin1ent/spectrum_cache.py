"""Binary cache of sector spectra.

File layout (little-endian)::

    header   magic b"SPNSPEC1" | L: u4 | theta: f8 | n_sectors: u4
    sector   sz_total: i4 | dim: u4 | n_eig: u4 | has_vectors: u1
             eigenvalues: n_eig * f8
             eigenvectors: dim * n_eig * f8, one eigenvector after another (if has_vectors)

Eigenvalues are stored for J = 1 and rescaled on load.  The solver is part of
the file name, so a cache entry matches only on the exact (L, theta, solver)
key.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .chain_spectrum import SectorSpectrum
from .spin_core import build_sector_basis

MAGIC = b"SPNSPEC1"
_HEADER = struct.Struct("<8sIdI")
_SECTOR = struct.Struct("<iIIB")


def write_spectra(path, L: int, theta: float, spectra: dict[int, SectorSpectrum], J: float = 1.0,
                  with_vectors: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, L, float(theta), len(spectra)))
        for sz in sorted(spectra):
            s = spectra[sz]
            vecs = s.eigenvectors if with_vectors and s.eigenvectors is not None else None
            n_eig = len(s.eigenvalues)
            fh.write(_SECTOR.pack(sz, s.sector.dim, n_eig, vecs is not None))
            fh.write(np.asarray(s.eigenvalues / J, dtype="<f8").tobytes())
            if vecs is not None:
                fh.write(np.asarray(vecs.real, dtype="<f8").T.tobytes())


def read_spectra(path, J: float = 1.0, solver: str = "dense_full"):
    """Return ``(L, theta, {sz: SectorSpectrum})``."""
    data = Path(path).read_bytes()
    magic, L, theta, n_sec = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a spectrum cache file")
    off = _HEADER.size
    out = {}
    for _ in range(n_sec):
        sz, dim, n_eig, has_vec = _SECTOR.unpack_from(data, off)
        off += _SECTOR.size
        vals = np.frombuffer(data, dtype="<f8", count=n_eig, offset=off).copy() * J
        off += 8 * n_eig
        vecs = None
        if has_vec:
            vecs = np.frombuffer(data, dtype="<f8", count=dim * n_eig, offset=off).reshape(n_eig, dim).T.copy()
            off += 8 * dim * n_eig
        basis = build_sector_basis(L, sz)
        if basis.dim != dim:
            raise ValueError(f"{path}: sector {sz} has dim {dim}, expected {basis.dim}")
        out[sz] = SectorSpectrum(basis, vals, vecs, solver)
    return L, theta, out


class SpectrumCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, L: int, theta: float, solver: str) -> Path:
        return self.directory / f"spec_L{L}_th{float(theta).hex()}_{solver}.bin"

    def get(self, L: int, theta: float, solver: str, J: float = 1.0):
        p = self.path(L, theta, solver)
        if not p.exists():
            return None
        L_, theta_, spectra = read_spectra(p, J, solver)
        if L_ != L or theta_ != theta:
            return None
        return spectra

    def put(self, L: int, theta: float, solver: str, spectra, J: float = 1.0) -> None:
        write_spectra(self.path(L, theta, solver), L, theta, spectra, J)
