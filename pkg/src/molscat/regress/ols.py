"""Greedy orthogonal least squares over a feature dictionary.

At step ``m`` the column most correlated with the target is selected among
the dictionary columns orthogonalized against the previous picks, and all
remaining columns are then orthogonalized against it and renormalized.  The
orthogonal weights ``w~_m = <f, phi^m_{k_m}>`` give the training residual in
closed form,

    ||f - f_m||^2 = ||f||^2 - sum_{n <= m} w~_n^2,

and the dense weights follow from the triangular factor ``R = Q^T Phi_S``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

logger = logging.getLogger(__name__)

ZERO_COLUMN_TOL = 1e-12
RANK_TOL = 1e-9


@dataclass
class OlsModel:
    """Fitted greedy OLS model.

    Attributes
    ----------
    selected : ndarray of int
        Selected column indices of the original feature matrix, in order.
    ortho_weights : ndarray
        ``w~_m``, weights on the orthonormalized selected columns.
    R : ndarray
        Upper-triangular ``M x M`` factor with ``Phi_S = Q R`` on the training set.
    scales : ndarray
        Per-feature training norms ``s_k``; zero for dropped columns.
    target_energy : float
        ``||f||^2`` on the training set.
    """

    selected: np.ndarray
    ortho_weights: np.ndarray
    R: np.ndarray
    scales: np.ndarray
    target_energy: float

    @property
    def M(self) -> int:
        return len(self.selected)

    def training_errors(self) -> np.ndarray:
        """``||f - f_m||^2`` for ``m = 0..M`` from the residual identity."""
        return self.target_energy - np.concatenate([[0.0], np.cumsum(self.ortho_weights ** 2)])

    def dense_weights(self, m: int | None = None) -> np.ndarray:
        """Weights ``w`` on the original (unnormalized) features, length ``K``."""
        m = self.M if m is None else m
        w = np.zeros(len(self.scales))
        if m == 0:
            return w
        v = solve_triangular(self.R[:m, :m], self.ortho_weights[:m])
        w[self.selected[:m]] = v / self.scales[self.selected[:m]]
        return w

    def ortho_features(self, X) -> np.ndarray:
        """Orthogonalized selected features evaluated on ``X``, shape ``(n, M)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        S = X[:, self.selected] / self.scales[self.selected]
        if self.M == 0:
            return S
        return solve_triangular(self.R, S.T, trans="T").T

    def predict_path(self, X) -> np.ndarray:
        """Predictions of every truncated model, shape ``(n, M)``; column ``m-1`` uses ``m`` terms."""
        return np.cumsum(self.ortho_features(X) * self.ortho_weights, axis=1)

    def predict(self, X, m: int | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.dense_weights(m)

    def to_dict(self) -> dict:
        return {"selected": self.selected.tolist(), "ortho_weights": self.ortho_weights.tolist(),
                "R": self.R.tolist(), "scales": self.scales.tolist(),
                "target_energy": self.target_energy}

    @classmethod
    def from_dict(cls, d) -> "OlsModel":
        M = len(d["selected"])
        return cls(np.array(d["selected"], dtype=int), np.array(d["ortho_weights"], dtype=float),
                   np.array(d["R"], dtype=float).reshape(M, M), np.array(d["scales"], dtype=float),
                   float(d["target_energy"]))


def column_scales(X) -> np.ndarray:
    """``s_k = sqrt(sum_i X_ik^2)``; columns below tolerance get scale 0 (dropped)."""
    s = np.sqrt(np.sum(np.asarray(X, dtype=float) ** 2, axis=0))
    ref = s.max(initial=0.0)
    s[s <= ZERO_COLUMN_TOL * max(ref, 1e-300)] = 0.0
    return s


def ols_fit(X, f, M_max: int, reorthogonalize: bool = True) -> OlsModel:
    """Greedy forward selection of up to ``M_max`` columns of ``X``.

    Parameters
    ----------
    X : array (n, K)
        Training features.
    f : array (n,)
        Training targets.
    M_max : int
        Maximal model dimension; selection stops early at the numerical rank.
    reorthogonalize : bool
        Re-project each picked column against all earlier picks before
        normalizing it, which keeps ``Q`` orthonormal to working precision.
    """
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    n, K = X.shape
    if n < 2:
        raise ValueError("need at least two training samples")
    if len(f) != n:
        raise ValueError("features and targets differ in length")
    scales = column_scales(X)
    live = np.flatnonzero(scales > 0)
    if len(live) < K:
        logger.warning("dropping %d all-zero feature columns", K - len(live))
    Phi = X[:, live] / scales[live]
    work = Phi.copy()
    active = np.ones(len(live), dtype=bool)
    Q = np.empty((n, 0))
    picks, weights = [], []
    for _ in range(min(M_max, len(live))):
        corr = np.where(active, np.abs(f @ work), -1.0)
        k = int(np.argmax(corr))  # first maximum = lowest index
        if corr[k] < 0:
            break
        q = work[:, k].copy()
        if reorthogonalize and Q.shape[1]:
            q -= Q @ (Q.T @ q)
        q /= np.linalg.norm(q)
        Q = np.column_stack([Q, q])
        picks.append(k)
        weights.append(float(f @ q))
        active[k] = False
        work -= np.outer(q, q @ work)
        norms = np.linalg.norm(work, axis=0)
        dead = active & (norms <= RANK_TOL)
        active &= ~dead
        norms[~active] = 1.0
        work /= norms
        if not active.any():
            break
    if len(picks) < M_max:
        logger.info("OLS stopped at M=%d (numerical rank) before M_max=%d", len(picks), M_max)
    sel = np.array(picks, dtype=int)
    R = np.triu(Q.T @ Phi[:, sel]) if len(sel) else np.zeros((0, 0))
    return OlsModel(live[sel], np.array(weights), R, scales, float(f @ f))


def qr_oracle_errors(X, f, selected) -> np.ndarray:
    """Training ``||f - f_m||^2`` from a dense least-squares re-solve per ``m``."""
    X = np.asarray(X, dtype=float)
    out = []
    for m in range(1, len(selected) + 1):
        A = X[:, selected[:m]]
        w, *_ = np.linalg.lstsq(A, f, rcond=None)
        out.append(float(np.sum((A @ w - f) ** 2)))
    return np.array(out)
