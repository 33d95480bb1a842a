import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molscat.density import (
    DensityChannelSpec, ProfileTable, default_spacing, rasterize,
)
from molscat.invariants import (
    DescriptorTable, FeatureDescriptor, FeatureMatrix, descriptor_table, featurize,
    featurize_dataset, fourier_dictionary, scattering_dictionary,
    scattering_second_order, wavelet_dictionary, wavelet_modulus,
)
from molscat.molecule import Dataset, Molecule, assign_folds

TABLE = ProfileTable(allow_analytic=True)
ATOMIC = DensityChannelSpec(("atomic",))
CV = DensityChannelSpec(("core", "valence"))


def synthetic(rng, n=5, spread=2.5):
    while True:
        pos = rng.uniform(-spread, spread, (n, 2))
        d = np.hypot(*(pos[:, None] - pos[None]).transpose(2, 0, 1))
        if d[~np.eye(n, dtype=bool)].min(initial=9.0) > 1.0:
            return Molecule.from_arrays("m", rng.choice([1, 6, 7, 8], n), pos)


def test_counts():
    assert len(descriptor_table("scattering", ["a"], 9, 16)) == 667
    assert len(descriptor_table("wavelet", ["a"], 9, 16)) == 19
    assert len(descriptor_table("fourier", ["a"], 9)) == 2 * 256
    assert len(descriptor_table("scattering", ["core", "valence"], 9, 16)) == 1334
    assert len(descriptor_table("fourier", ["a"], 9, include_dc=True)) == 2 * 257


def test_descriptor_validation_and_json():
    with pytest.raises(ValueError):
        FeatureDescriptor("scattering", 2, "a", 1, j=3, j2=3, t=0)
    t = descriptor_table("scattering", ["a"], 4, 4)
    assert DescriptorTable.from_json(t.to_json()) == t
    assert t.select(order=2).sum() == 3 * 6 * 2
    assert len(set(t.names)) == len(t)


def test_zero_density(bank6):
    z = np.zeros((bank6.N, bank6.N))
    assert np.all(wavelet_modulus(z, bank6) == 0)
    assert np.all(scattering_dictionary(z, bank6) == 0)


def test_size_mismatch(bank6):
    with pytest.raises(ValueError):
        wavelet_modulus(np.zeros((32, 32)), bank6)
    with pytest.raises(ValueError):
        fourier_dictionary(np.zeros((32, 32)), J=6)


def test_isotropic_bump(bank6):
    N = bank6.N
    x = np.arange(N) - N / 2
    rho = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / 18.0)
    U = wavelet_modulus(rho, bank6)
    assert np.all(U >= 0)
    # interior scales: no aliasing past Nyquist, no wrap around the box
    for j in (2, 3):
        n = np.sum(U[j] ** 2, axis=(1, 2))
        assert (n.max() - n.min()) / n.max() < 1e-6


def test_shift_covariance(bank6, rng):
    rho = rng.random((bank6.N, bank6.N))
    U = wavelet_modulus(rho, bank6)
    V = wavelet_modulus(np.roll(rho, (1, 0), axis=(0, 1)), bank6)
    assert np.max(np.abs(np.roll(U, (1, 0), axis=(2, 3)) - V)) < 1e-10


def test_wavelet_dictionary_mass(bank6):
    m = Molecule.from_arrays("ch4", [6, 1, 1, 1, 1], [[0, 0], [2, 0], [-2, 0], [0, 2], [0, -2]])
    g = rasterize(m, ATOMIC, TABLE, 6)
    v = wavelet_dictionary(g["atomic"], bank6, g.h)
    assert len(v) == 13
    assert v[0] == pytest.approx(10, rel=1e-3)
    assert np.all(v > 0)


def test_order_one_definition(bank6, rng):
    rho = rng.random((bank6.N, bank6.N))
    h = 0.3
    U = wavelet_modulus(rho, bank6)
    v = wavelet_dictionary(rho, bank6, h)
    w = math.pi / bank6.L * h * h
    assert v[1] == pytest.approx(w * U[0].sum(), rel=1e-12)
    assert v[4] == pytest.approx(w * (U[1] ** 2).sum(), rel=1e-12)


def test_second_order_brute_force():
    from molscat.filterbank import MorletParams, build_morlet_bank
    fb = build_morlet_bank(MorletParams(J=4, L=4))
    rho = np.random.default_rng(0).random((16, 16))
    got = scattering_second_order(rho, fb)
    U = wavelet_modulus(rho, fb)
    L, w = 4, math.pi / 4
    ref = []
    for j in range(4):
        for j2 in range(j + 1, 4):
            per = {}
            for s in range(L):
                a = b = 0.0
                for ell in range(L):
                    V = np.abs(np.fft.ifft2(np.fft.fft2(U[j, ell]) * fb.psi_hat[j2, (ell + s) % L]))
                    a += V.sum()
                    b += (V ** 2).sum()
                per[s] = (w * a, w * b)
            for t in range(L // 2 + 1):
                for p in range(2):
                    ref.append(0.5 * (per[t][p] + per[(L - t) % L][p]))
    np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_fourier_constant_and_translation(rng):
    c = np.full((32, 32), 2.0)
    assert np.max(fourier_dictionary(c)) < 1e-12
    rho = rng.random((32, 32))
    a = fourier_dictionary(rho, 5)
    b = fourier_dictionary(np.roll(rho, (3, -5), axis=(0, 1)), 5)
    np.testing.assert_allclose(a, b, rtol=1e-10)
    assert len(a) == 32


def test_fourier_rotation_30_degrees():
    rng = np.random.default_rng(2)
    m = synthetic(rng)
    J = 7
    h = default_spacing([m], J, TABLE, ATOMIC)
    c = m.positions.mean(axis=0)
    a = math.radians(30)
    R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    f0 = featurize(m, ATOMIC, None, "fourier", TABLE, J, h).values
    f1 = featurize(m.transformed(R, c - R @ c), ATOMIC, None, "fourier", TABLE, J, h).values
    assert np.linalg.norm(f1 - f0) / np.linalg.norm(f0) < 0.02


def test_featurize_lengths(bank6):
    m = synthetic(np.random.default_rng(1), 3)
    v = featurize(m, CV, bank6, "scattering", TABLE)
    assert len(v.values) == 2 * (1 + 12 + 5 * 30)
    w = featurize(m, ATOMIC, bank6, "wavelet", TABLE)
    assert len(w.values) == 13
    again = featurize(m, ATOMIC, bank6, "wavelet", TABLE)
    assert np.array_equal(w.values, again.values)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_invariance(bank6, seed):
    rng = np.random.default_rng(seed)
    m = synthetic(rng)
    a = featurize(m, CV, bank6, "scattering", TABLE).values
    b = featurize(m.permuted(rng.permutation(len(m))), CV, bank6, "scattering", TABLE).values
    assert np.array_equal(a, b)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000), st.integers(-2, 2), st.integers(-2, 2))
def test_translation_invariance(bank6, seed, p, q):
    rng = np.random.default_rng(seed)
    m = synthetic(rng)
    h = default_spacing([m], 6, TABLE, ATOMIC) * 1.3
    c = m.positions.mean(axis=0)
    origin = (c[0] - 32 * h, c[1] - 32 * h)
    a = featurize(m, ATOMIC, bank6, "scattering", TABLE, h=h, origin=origin).values
    b = featurize(m.transformed(shift=(p * h, q * h)), ATOMIC, bank6, "scattering",
                  TABLE, h=h, origin=origin).values
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-9


def test_reflection_invariance(bank6):
    rng = np.random.default_rng(4)
    m = synthetic(rng)
    g = rasterize(m, ATOMIC, TABLE, 6)
    rho = g["atomic"]
    for kind in ("wavelet", "scattering"):
        f = wavelet_dictionary if kind == "wavelet" else scattering_dictionary
        a = f(rho, bank6, g.h)
        b = f(rho[:, ::-1], bank6, g.h)
        np.testing.assert_allclose(a, b, rtol=1e-10)


def test_featurize_dataset_cache(tmp_path, bank6):
    rng = np.random.default_rng(0)
    mols = [Molecule.from_arrays(f"m{i}", *(lambda s: (s.charges, s.positions))(synthetic(rng, 3)))
            for i in range(3)]
    ds = Dataset(mols, assign_folds(mols))
    h = default_spacing(ds, 6, TABLE, ATOMIC)
    fm = featurize_dataset(ds, ATOMIC, bank6, "wavelet", TABLE, 6, h, cache_dir=tmp_path)
    assert fm.X.shape == (3, 13)
    files = list(tmp_path.glob("features-*.bin"))
    assert len(files) == 1
    back = FeatureMatrix.load(files[0].with_suffix(""))
    assert np.array_equal(back.X, fm.X) and back.table == fm.table and back.ids == fm.ids
    again = featurize_dataset(ds, ATOMIC, bank6, "wavelet", TABLE, 6, h, cache_dir=tmp_path)
    assert np.array_equal(again.X, fm.X)
