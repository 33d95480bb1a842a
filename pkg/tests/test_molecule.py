import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molscat.molecule import (
    Atom, Dataset, DatasetError, Molecule, MissingEnergyError, assign_folds,
    load_dataset, nuclear_repulsion, write_dataset,
)


def random_molecule(rng, n=5, idx=0, energy=True):
    while True:
        pos = rng.uniform(-4, 4, (n, 2))
        d = np.hypot(*(pos[:, None] - pos[None]).transpose(2, 0, 1))
        if d[~np.eye(n, dtype=bool)].min(initial=9.0) > 0.8:
            break
    z = rng.choice([1, 6, 7, 8, 16, 17], n)
    return Molecule.from_arrays(f"m{idx}", z, pos, float(rng.normal(-1000, 200)) if energy else None)


def test_atom_validation():
    with pytest.raises(DatasetError):
        Atom(0, (0, 0))
    with pytest.raises(DatasetError):
        Atom(1, (math.nan, 0))
    with pytest.raises(DatasetError):
        Molecule.from_arrays("x", [1, 1], [[0, 0], [0, 0]])
    with pytest.raises(DatasetError):
        Molecule("x", ())


def test_h2_csv(tmp_path):
    p = tmp_path / "h2.csv"
    p.write_text("id,n_atoms\nh2,2,1,1,0,0,1.4,0,-104.2\n")
    ds = load_dataset(p)
    assert len(ds) == 1 and ds.fold_of == {"h2": 0}
    assert ds.molecules[0].energy == -104.2


def test_zero_charge_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,2,0,1,0,0,1.4,0,-1\n")
    with pytest.raises(DatasetError):
        load_dataset(p)
    p.write_text("x,2,1,1,0,0,1.4\n")
    with pytest.raises(DatasetError):
        load_dataset(p)


def test_fold_sizes_and_determinism():
    rng = np.random.default_rng(0)
    mols = [random_molecule(rng, 3, i) for i in range(454)]
    f1 = assign_folds(mols, seed=3)
    f2 = assign_folds(mols, seed=3)
    assert f1 == f2
    sizes = sorted(np.bincount(list(f1.values())).tolist(), reverse=True)
    assert sizes == [91, 91, 91, 91, 90]
    fs = assign_folds(mols, seed=3, stratify=True)
    assert sorted(np.bincount(list(fs.values())).tolist(), reverse=True) == sizes


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_roundtrip(tmp_path, fmt):
    rng = np.random.default_rng(1)
    mols = [random_molecule(rng, int(rng.integers(1, 7)), i, energy=i % 3 != 0) for i in range(12)]
    ds = Dataset(mols, assign_folds(mols, 4))
    path = tmp_path / f"d.{fmt}"
    write_dataset(ds, path)
    back = load_dataset(path)
    assert back.fold_of == ds.fold_of
    for a, b in zip(ds, back):
        assert a.id == b.id and a.energy == b.energy
        np.testing.assert_array_equal(a.charges, b.charges)
        np.testing.assert_allclose(a.positions, b.positions, rtol=1e-12)
    with pytest.raises(MissingEnergyError):
        back.energies()


def test_partial_folds_rejected(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("a,1,1,0,0,-1,0\nb,1,1,0,0,-1,\n")
    with pytest.raises(DatasetError):
        load_dataset(p)


def test_nuclear_repulsion_examples():
    assert nuclear_repulsion(Molecule.from_arrays("a", [1, 1], [[0, 0], [1, 0]])) == 1.0
    tri = [[0, 0], [2, 0], [1, math.sqrt(3)]]
    assert nuclear_repulsion(Molecule.from_arrays("t", [1, 1, 1], tri)) == pytest.approx(1.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_nuclear_repulsion_oracle_and_permutation(seed):
    rng = np.random.default_rng(seed)
    m = random_molecule(rng)
    z, r = m.charges, m.positions
    brute = 0.0
    for k, l in itertools.permutations(range(len(m)), 2):
        brute += 0.5 * z[k] * z[l] / np.linalg.norm(r[k] - r[l])
    assert nuclear_repulsion(m) == pytest.approx(brute, rel=1e-12)
    assert nuclear_repulsion(m.permuted(rng.permutation(len(m)))) == nuclear_repulsion(m)
