"""Planar molecules, datasets and their file formats.

Positions are in Bohr and energies in kcal/mol.  Two equivalent file
formats are supported.

CSV, one molecule per row (a first row starting with ``id`` is a header)::

    id, n_atoms, z_1..z_n, x_1, y_1, ..., x_n, y_n, energy[, fold]

``energy`` may be empty.  JSON::

    {"molecules": [{"id": "h2", "charges": [1, 1],
                    "positions": [[0, 0], [1.4, 0]], "energy": -104.2,
                    "fold": 0}]}
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

HARTREE_TO_KCAL = 627.509
N_FOLDS = 5


class DatasetError(ValueError):
    """Malformed or physically invalid dataset content."""


class MissingEnergyError(DatasetError):
    """A molecule has no target energy where one is required."""


@dataclass(frozen=True)
class Atom:
    charge: int
    position: tuple[float, float]

    def __post_init__(self):
        if int(self.charge) != self.charge or self.charge < 1:
            raise DatasetError(f"atomic charge must be a positive integer, got {self.charge}")
        x, y = (float(v) for v in self.position)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DatasetError("atom position must be finite")
        object.__setattr__(self, "charge", int(self.charge))
        object.__setattr__(self, "position", (x, y))


@dataclass(frozen=True)
class Molecule:
    id: str
    atoms: tuple[Atom, ...]
    energy: float | None = None

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise DatasetError(f"molecule {self.id!r} has no atoms")
        if len({a.position for a in atoms}) != len(atoms):
            raise DatasetError(f"molecule {self.id!r} has coincident atoms")
        object.__setattr__(self, "atoms", atoms)
        if self.energy is not None:
            object.__setattr__(self, "energy", float(self.energy))

    @classmethod
    def from_arrays(cls, id, charges, positions, energy=None) -> "Molecule":
        pos = np.asarray(positions, dtype=float).reshape(-1, 2)
        if len(pos) != len(charges):
            raise DatasetError(f"molecule {id!r}: {len(charges)} charges, {len(pos)} positions")
        return cls(str(id), tuple(Atom(z, tuple(p)) for z, p in zip(charges, pos)), energy)

    @property
    def charges(self) -> np.ndarray:
        return np.array([a.charge for a in self.atoms], dtype=int)

    @property
    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms], dtype=float)

    def __len__(self) -> int:
        return len(self.atoms)

    def permuted(self, order) -> "Molecule":
        return replace(self, atoms=tuple(self.atoms[i] for i in order))

    def transformed(self, matrix=None, shift=(0.0, 0.0)) -> "Molecule":
        """Apply ``r -> matrix @ r + shift`` to every atom."""
        pos = self.positions
        if matrix is not None:
            pos = pos @ np.asarray(matrix, dtype=float).T
        pos = pos + np.asarray(shift, dtype=float)
        return Molecule.from_arrays(self.id, self.charges, pos, self.energy)


@dataclass
class Dataset:
    molecules: list[Molecule]
    fold_of: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = [m.id for m in self.molecules]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate molecule ids")
        if set(self.fold_of) != set(ids):
            raise DatasetError("every molecule needs exactly one fold")
        if any(f not in range(N_FOLDS) for f in self.fold_of.values()):
            raise DatasetError(f"fold indices must lie in 0..{N_FOLDS - 1}")

    def __len__(self) -> int:
        return len(self.molecules)

    def __iter__(self):
        return iter(self.molecules)

    @property
    def folds(self) -> np.ndarray:
        return np.array([self.fold_of[m.id] for m in self.molecules], dtype=int)

    def energies(self) -> np.ndarray:
        """Targets as an array; raises :class:`MissingEnergyError` if any is absent."""
        missing = [m.id for m in self.molecules if m.energy is None]
        if missing:
            raise MissingEnergyError(f"{len(missing)} molecules lack energies, e.g. {missing[0]!r}")
        return np.array([m.energy for m in self.molecules], dtype=float)

    def subset(self, index) -> "Dataset":
        mols = [self.molecules[i] for i in index]
        return Dataset(mols, {m.id: self.fold_of[m.id] for m in mols})


def assign_folds(molecules, seed: int = 0, stratify: bool = False) -> dict[str, int]:
    """Seeded partition into five folds of sizes differing by at most one.

    With ``stratify`` molecules are dealt round-robin in order of atom count
    (ties broken by the seeded shuffle) so every fold sees every size.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(molecules))
    if stratify:
        rank = np.empty(len(molecules), dtype=int)
        rank[perm] = np.arange(len(molecules))
        perm = sorted(range(len(molecules)), key=lambda i: (len(molecules[i]), rank[i]))
    return {molecules[i].id: k % N_FOLDS for k, i in enumerate(perm)}


def _finalize(mols, folds, seed, stratify) -> Dataset:
    given = [f is not None for f in folds]
    if all(given) and mols:
        return Dataset(mols, {m.id: int(f) for m, f in zip(mols, folds)})
    if any(given):
        raise DatasetError("fold column must be given for all molecules or none")
    return Dataset(mols, assign_folds(mols, seed, stratify))


def _parse_csv_row(row, lineno):
    try:
        mid = row[0].strip()
        n = int(row[1])
        z = [int(v) for v in row[2:2 + n]]
        xy = [float(v) for v in row[2 + n:2 + 3 * n]]
        rest = [v.strip() for v in row[2 + 3 * n:]]
    except (IndexError, ValueError) as exc:
        raise DatasetError(f"line {lineno}: {exc}") from None
    if len(z) != n or len(xy) != 2 * n or len(rest) > 2:
        raise DatasetError(f"line {lineno}: expected {3 * n + 3} or {3 * n + 4} fields")
    try:
        energy = float(rest[0]) if rest and rest[0] else None
        fold = int(rest[1]) if len(rest) > 1 and rest[1] else None
    except ValueError as exc:
        raise DatasetError(f"line {lineno}: {exc}") from None
    return Molecule.from_arrays(mid, z, xy, energy), fold


def load_dataset(path, format: str | None = None, seed: int = 0,
                 stratify: bool = False) -> Dataset:
    """Read a dataset; folds come from the file if present, else :func:`assign_folds`."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    mols, folds = [], []
    if fmt == "csv":
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or not "".join(row).strip() or row[0].startswith("#"):
                    continue
                if lineno == 1 and row[0].strip().lower() == "id":
                    continue
                m, f = _parse_csv_row(row, lineno)
                mols.append(m)
                folds.append(f)
    elif fmt == "json":
        try:
            doc = json.loads(path.read_text())
            for rec in doc["molecules"]:
                mols.append(Molecule.from_arrays(rec["id"], rec["charges"],
                                                 rec["positions"], rec.get("energy")))
                folds.append(rec.get("fold"))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DatasetError(f"{path}: {exc}") from None
    else:
        raise DatasetError(f"unknown dataset format {fmt!r}")
    return _finalize(mols, folds, seed, stratify)


def write_dataset(ds: Dataset, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for m in ds:
                xy = [repr(float(v)) for v in m.positions.ravel()]
                e = "" if m.energy is None else repr(m.energy)
                w.writerow([m.id, len(m), *m.charges.tolist(), *xy, e, ds.fold_of[m.id]])
    elif fmt == "json":
        recs = [{"id": m.id, "charges": m.charges.tolist(),
                 "positions": m.positions.tolist(), "energy": m.energy,
                 "fold": ds.fold_of[m.id]} for m in ds]
        path.write_text(json.dumps({"molecules": recs}, indent=1))
    else:
        raise DatasetError(f"unknown dataset format {fmt!r}")


def nuclear_repulsion(m: Molecule) -> float:
    """``1/2 sum_{k != l} z_k z_l / |r_k - r_l|`` in Hartree.

    Atoms are put in a canonical order first so the floating-point result is
    identical for every permutation of the atom list.
    """
    order = sorted(range(len(m)), key=lambda i: (m.atoms[i].charge, m.atoms[i].position))
    z = m.charges[order].astype(float)
    r = m.positions[order]
    total = 0.0
    for k in range(len(z)):
        for l in range(k + 1, len(z)):
            d = math.hypot(r[k, 0] - r[l, 0], r[k, 1] - r[l, 1])
            if d == 0:
                raise DatasetError(f"molecule {m.id!r} has coincident atoms")
            total += z[k] * z[l] / d
    return total
