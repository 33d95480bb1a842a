"""Kernel ridge regression on randomly sorted Coulomb matrices.

Each molecule is represented by ``R`` Coulomb matrices whose rows and
columns are sorted by row norm perturbed with Gaussian noise.  Training
solves the dual system over all replicas; a prediction averages the
regressed energies of the query's replicas.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from ..molecule import Molecule

logger = logging.getLogger(__name__)


def coulomb_matrix(m: Molecule, pad_to: int | None = None) -> np.ndarray:
    """``1/2 z_k**2.4`` on the diagonal and ``z_k z_l / |r_k - r_l|`` off it, zero padded."""
    n = len(m)
    pad_to = n if pad_to is None else pad_to
    if pad_to < n:
        raise ValueError(f"pad_to={pad_to} is smaller than the atom count {n}")
    z = m.charges.astype(float)
    r = m.positions
    d = np.hypot(r[:, None, 0] - r[None, :, 0], r[:, None, 1] - r[None, :, 1])
    np.fill_diagonal(d, 1.0)
    if np.any(d == 0):
        raise ValueError(f"molecule {m.id!r} has coincident atoms")
    C = np.outer(z, z) / d
    np.fill_diagonal(C, 0.5 * z ** 2.4)
    out = np.zeros((pad_to, pad_to))
    out[:n, :n] = C
    return out


def sorted_by_row_norm(C: np.ndarray, noise: np.ndarray | None = None) -> np.ndarray:
    """Simultaneous row/column permutation by descending (noisy) row norm, ties by index."""
    key = np.linalg.norm(C, axis=1)
    if noise is not None:
        key = key + noise
    order = np.lexsort((np.arange(len(key)), -key))
    return C[np.ix_(order, order)]


def random_sorted_matrices(m: Molecule, R: int = 8, noise_scale: float = 1.0,
                           seed=0, pad_to: int | None = None) -> np.ndarray:
    """``R`` noisy-sorted Coulomb matrices of shape ``(R, pad, pad)``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    C = coulomb_matrix(m)
    n = len(m)
    pad_to = n if pad_to is None else pad_to
    if pad_to < n:
        raise ValueError(f"pad_to={pad_to} is smaller than the atom count {n}")
    rng = np.random.default_rng(seed)
    out = np.zeros((R, pad_to, pad_to))
    for r in range(R):
        noise = rng.normal(0.0, noise_scale, n) if noise_scale > 0 else None
        out[r, :n, :n] = sorted_by_row_norm(C, noise)
    return out


def _molecule_seed(seed: int, m: Molecule) -> list[int]:
    return [int(seed), zlib.crc32(m.id.encode())]


def laplacian_kernel(A, B, sigma: float) -> np.ndarray:
    """``exp(-sum |a - b| / sigma)`` between rows of ``A`` and ``B``."""
    return np.exp(-cdist(A, B, "cityblock") / sigma)


@dataclass
class CoulombKernelModel:
    alpha: np.ndarray
    train_reps: np.ndarray
    sigma: float
    lam: float
    R: int
    noise_scale: float
    pad_to: int
    seed: int

    def representations(self, molecules) -> np.ndarray:
        reps = [random_sorted_matrices(m, self.R, self.noise_scale,
                                       _molecule_seed(self.seed, m), self.pad_to).reshape(self.R, -1)
                for m in molecules]
        return np.concatenate(reps)

    def predict(self, molecules) -> np.ndarray:
        molecules = list(molecules)
        if not molecules:
            return np.zeros(0)
        Q = self.representations(molecules)
        y = laplacian_kernel(Q, self.train_reps, self.sigma) @ self.alpha
        return y.reshape(len(molecules), self.R).mean(axis=1)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "train_reps": self.train_reps.tolist(),
                "sigma": self.sigma, "lam": self.lam, "R": self.R,
                "noise_scale": self.noise_scale, "pad_to": self.pad_to, "seed": self.seed}

    @classmethod
    def from_dict(cls, d) -> "CoulombKernelModel":
        return cls(np.array(d["alpha"]), np.array(d["train_reps"]), d["sigma"], d["lam"],
                   d["R"], d["noise_scale"], d["pad_to"], d["seed"])


def solve_dual(K: np.ndarray, f: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(K + lam I) alpha = f``, reporting the condition estimate on failure."""
    A = K + lam * np.eye(len(K))
    try:
        return linalg.solve(A, f, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        try:
            return linalg.solve(A, f, assume_a="sym")
        except linalg.LinAlgError as exc:
            cond = np.linalg.cond(A)
            raise linalg.LinAlgError(f"kernel solve failed (condition ~{cond:.3e}): {exc}") from None


def krr_fit(molecules, targets, sigma: float, lam: float, R: int = 8,
            noise_scale: float = 1.0, seed: int = 0, pad_to: int | None = None,
            train_reps: np.ndarray | None = None) -> CoulombKernelModel:
    """Fit the dual coefficients over ``len(molecules) * R`` replicas."""
    if sigma <= 0 or lam <= 0:
        raise ValueError("sigma and lambda must be positive")
    molecules = list(molecules)
    targets = np.asarray(targets, dtype=float)
    pad_to = pad_to or max(len(m) for m in molecules)
    model = CoulombKernelModel(np.zeros(0), np.zeros((0, pad_to * pad_to)), sigma, lam, R,
                               noise_scale, pad_to, seed)
    reps = model.representations(molecules) if train_reps is None else train_reps
    K = laplacian_kernel(reps, reps, sigma)
    model.alpha = solve_dual(K, np.repeat(targets, R), lam)
    model.train_reps = reps
    return model


def dense_dual_oracle(reps: np.ndarray, targets_rep: np.ndarray, sigma: float, lam: float):
    """Brute-force dual solution with explicit double loops and ``numpy.linalg.solve``."""
    n = len(reps)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = np.exp(-np.sum(np.abs(reps[i] - reps[j])) / sigma)
    return np.linalg.solve(K + lam * np.eye(n), targets_rep)
