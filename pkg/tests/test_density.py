import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from molscat.density import (
    CHANNELS, DensityChannelSpec, DensityGrid, MarginError, ProfileError,
    ProfileTable, RadialProfile, analytic_profile, default_spacing, load_profiles,
    rasterize, rasterize_displaced, restrict_to_2d, write_profiles,
)
from molscat.molecule import Molecule

ALL = DensityChannelSpec(CHANNELS)


@pytest.fixture(scope="module")
def table():
    return ProfileTable(allow_analytic=True)


def hydrogen_like(n=1024):
    r = np.linspace(0, 30, n)
    rho = np.exp(-2 * r) / math.pi
    return RadialProfile(1, r, rho, np.zeros(n), rho)


def test_restrict_to_2d():
    p = hydrogen_like()
    q = restrict_to_2d(p)
    i = np.searchsorted(p.radii, 2.0)
    assert q.total[i] == pytest.approx(2 * p.radii[i] * p.total[i])
    assert q.total[0] == 0
    assert trapezoid(2 * math.pi * q.radii * q.total, q.radii) == pytest.approx(1, abs=1e-3)
    with pytest.raises(ProfileError):
        restrict_to_2d(q)


def test_profile_validation():
    r = np.linspace(0, 10, 100)
    rho = np.exp(-2 * r) / math.pi
    with pytest.raises(ProfileError):
        RadialProfile(2, r, rho, 0 * r, rho)  # wrong normalization
    with pytest.raises(ProfileError):
        RadialProfile(1, r[::-1], rho, 0 * r, rho)
    with pytest.raises(ProfileError):
        RadialProfile(1, r, rho, rho, rho)


def test_analytic_shells():
    h = analytic_profile(1)
    assert h.mass("core") == 0 and h.mass("val") == pytest.approx(1)
    c = analytic_profile(6)
    assert c.mass("core") == pytest.approx(2) and c.mass("val") == pytest.approx(4)
    cl = analytic_profile(17)
    assert cl.mass("core") == pytest.approx(10) and cl.mass("val") == pytest.approx(7)
    with pytest.raises(ProfileError):
        analytic_profile(19)


def test_profiles_roundtrip(tmp_path):
    profs = [analytic_profile(z, 512) for z in (1, 6, 7, 8, 16, 17)]
    write_profiles(profs, tmp_path / "p.csv")
    t = load_profiles(tmp_path / "p.csv")
    assert len(t) == 6
    np.testing.assert_array_equal(t.get(8).total, profs[3].total)
    with pytest.raises(ProfileError):
        t.get(9)
    assert load_profiles(tmp_path / "p.csv", allow_analytic=True).get(9).z == 9


def test_single_h_dirac():
    m = Molecule.from_arrays("h", [1], [[0.3, -0.2]])
    g = rasterize(m, DensityChannelSpec(("dirac",)), None, 5)
    d = g["dirac"]
    assert np.count_nonzero(d) == 4
    assert g.mass("dirac") == pytest.approx(1.0, abs=1e-14)


def test_ch4_masses(table):
    m = Molecule.from_arrays("ch4", [6, 1, 1, 1, 1], [[0, 0], [2, 0], [-2, 0], [0, 2], [0, -2]])
    g = rasterize(m, ALL, table, 7)
    assert g.mass("atomic") == pytest.approx(10, rel=1e-3)
    assert g.mass("dirac") == pytest.approx(10, rel=1e-12)
    assert g.mass("core") == pytest.approx(2, rel=1e-3)
    assert g.mass("valence") == pytest.approx(8, rel=1e-3)
    assert np.all(g.data >= 0) and np.all(np.isfinite(g.data))


def test_missing_profile():
    m = Molecule.from_arrays("o", [8], [[0, 0]])
    with pytest.raises(ProfileError):
        rasterize(m, ALL, ProfileTable(), 6)


def test_margin_guard(table):
    m = Molecule.from_arrays("w", [1, 1], [[0, 0], [10, 0]])
    with pytest.raises(MarginError):
        rasterize(m, ALL, table, 6, h=0.2)


def _mol(rng, n=4):
    while True:
        pos = rng.uniform(-3, 3, (n, 2))
        d = np.hypot(*(pos[:, None] - pos[None]).transpose(2, 0, 1))
        if d[~np.eye(n, dtype=bool)].min() > 0.5:
            return Molecule.from_arrays("m", rng.choice([1, 6, 8, 17], n), pos)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_permutation_bit_exact(seed):
    rng = np.random.default_rng(seed)
    table = ProfileTable(allow_analytic=True)
    m = _mol(rng)
    a = rasterize(m, ALL, table, 6)
    b = rasterize(m.permuted(rng.permutation(len(m))), ALL, table, 6)
    assert np.array_equal(a.data, b.data)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(-3, 3), st.integers(-3, 3))
def test_translation_covariance(seed, p, q):
    rng = np.random.default_rng(seed)
    table = ProfileTable(allow_analytic=True)
    m = _mol(rng)
    h = default_spacing([m], 6, table, ALL) * 1.5
    c = m.positions.mean(axis=0)
    origin = (c[0] - 32 * h, c[1] - 32 * h)
    a = rasterize(m, ALL, table, 6, h, origin)
    b = rasterize(m.transformed(shift=(p * h, q * h)), ALL, table, 6, h, origin)
    np.testing.assert_allclose(np.roll(a.data, (p, q), axis=(1, 2)), b.data,
                               atol=1e-12 * a.data.max())


def test_reflection_flips_rows(table):
    rng = np.random.default_rng(3)
    m = _mol(rng)
    a = rasterize(m, ALL, table, 6)
    cy = m.positions[:, 1].mean()
    r = m.transformed(np.diag([1.0, -1.0]), shift=(0, 2 * cy))
    b = rasterize(r, ALL, table, 6)
    np.testing.assert_allclose(a.data[:, :, ::-1], b.data, atol=1e-12 * a.data.max())


def test_grid_roundtrip(tmp_path, table):
    m = _mol(np.random.default_rng(0))
    g = rasterize(m, ALL, table, 5)
    g.save(tmp_path / "g")
    g2 = DensityGrid.load(tmp_path / "g")
    assert np.array_equal(g.data, g2.data) and g2.channels == g.channels
    assert g2.h == g.h and tuple(g2.origin) == tuple(g.origin)


def test_spec_validation():
    with pytest.raises(ValueError):
        DensityChannelSpec(())
    with pytest.raises(ValueError):
        DensityChannelSpec(("core", "core"))
    assert DensityChannelSpec.parse("dirac, core").channels == ("dirac", "core")


def test_displaced_zero_matches_rasterize(table):
    m = _mol(np.random.default_rng(5))
    h = default_spacing([m], 6, table, ALL)
    a = rasterize(m, ALL, table, 6, h)
    b = rasterize_displaced(m, np.zeros((len(m), 2)), ALL, table, 6, h)
    np.testing.assert_allclose(b.data, a.data, atol=1e-12 * np.abs(a.data).max())


def test_displaced_whole_cells_matches_moved_atom(table):
    m = _mol(np.random.default_rng(6))
    h = 1.5 * default_spacing([m], 6, table, ALL)
    origin = tuple(m.positions.mean(axis=0) - 32 * h)
    disp = np.zeros((len(m), 2))
    disp[1] = (2 * h, -3 * h)
    moved = Molecule.from_arrays("m", m.charges, m.positions + disp)
    a = rasterize(moved, ALL, table, 6, h, origin)
    b = rasterize_displaced(m, disp, ALL, table, 6, h, origin)
    np.testing.assert_allclose(b.data, a.data, atol=1e-9 * np.abs(a.data).max())
    for c in ALL.channels:
        assert abs(b.mass(c) - a.mass(c)) < 1e-9 * a.mass(c)
