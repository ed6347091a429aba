import numpy as np
import pytest

from spin1ent.chain_spectrum import ChainSpec, full_spectrum
from spin1ent.effective_coupling import omega_sum
from spin1ent.spectrum_cache import MAGIC, SpectrumCache, read_spectra, write_spectra


def test_round_trip(tmp_path):
    spectra = full_spectrum(ChainSpec(4, 0.1), (-1, 0, 1))
    path = tmp_path / "s.bin"
    write_spectra(path, 4, 0.1, spectra)
    assert path.read_bytes()[:8] == MAGIC
    L, theta, back = read_spectra(path)
    assert (L, theta) == (4, 0.1)
    for sz in spectra:
        assert np.array_equal(back[sz].eigenvalues, spectra[sz].eigenvalues)
        assert np.array_equal(back[sz].eigenvectors, spectra[sz].eigenvectors)


def test_energy_scale(tmp_path):
    spec = ChainSpec(2, J=2.0)
    spectra = full_spectrum(spec, (0,))
    write_spectra(tmp_path / "s.bin", 2, 0.0, spectra, J=2.0)
    _, _, back = read_spectra(tmp_path / "s.bin", J=3.0)
    assert np.allclose(back[0].eigenvalues, 1.5 * spectra[0].eigenvalues)


def test_bad_magic(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"x" * 64)
    with pytest.raises(ValueError):
        read_spectra(p)


def test_cache_reuse(tmp_path):
    cache = SpectrumCache(tmp_path)
    spec = ChainSpec(4, 0.05)
    assert cache.get(4, 0.05, "dense_full") is None
    first = omega_sum(spec, 1, cache=cache)
    assert cache.path(4, 0.05, "dense_full").exists()
    second = omega_sum(spec, 1, cache=cache)
    assert first.value == second.value
    assert cache.get(4, 0.06, "dense_full") is None
