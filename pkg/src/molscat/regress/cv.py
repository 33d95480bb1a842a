"""Five-fold cross-validation with all model selection inside the training folds."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .bagging import bagged_fit
from .krr import CoulombKernelModel, krr_fit, solve_dual
from .metrics import mae, rmse

logger = logging.getLogger(__name__)

SIGMA_GRID = tuple(2.0 ** k for k in range(4, 15))
LAMBDA_GRID = tuple(10.0 ** k for k in range(-8, 0))


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    mae: float
    rmse: float
    params: dict = field(default_factory=dict)


@dataclass
class CVReport:
    method: str
    folds: list[FoldResult]
    seed: int
    config_hash: str = ""

    def _stat(self, key):
        v = np.array([getattr(f, key) for f in self.folds])
        return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0

    @property
    def mae(self):
        return self._stat("mae")

    @property
    def rmse(self):
        return self._stat("rmse")

    @property
    def M_bar(self):
        vals = [f.params["M_bar"] for f in self.folds if "M_bar" in f.params]
        return float(np.mean(vals)) if vals else None

    def to_dict(self) -> dict:
        return {"method": self.method, "seed": self.seed, "config_hash": self.config_hash,
                "mae": self.mae, "rmse": self.rmse, "M_bar": self.M_bar,
                "folds": [vars(f) for f in self.folds]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["fold", "n_train", "n_test", "MAE", "RMSE", "params"])
        for f in self.folds:
            w.writerow([f.fold, f.n_train, f.n_test, repr(f.mae), repr(f.rmse),
                        ";".join(f"{k}={v}" for k, v in sorted(f.params.items()))])
        return buf.getvalue()

    def table(self) -> str:
        mb = self.M_bar
        (ma, ms), (ra, rs) = self.mae, self.rmse
        head = f"{'Method':<28}{'M':>8}{'MAE':>18}{'RMSE':>18}"
        row = (f"{self.method:<28}{'-' if mb is None else f'{mb:.0f}':>8}"
               f"{f'{ma:.2f} ± {ms:.2f}':>18}{f'{ra:.2f} ± {rs:.2f}':>18}")
        return head + "\n" + row


def _fold_ids(folds) -> np.ndarray:
    ids = np.unique(folds)
    if len(ids) < 2:
        raise ValueError("cross-validation needs at least two folds")
    return ids


def cross_validate_ols(X, y, folds, beta: float = 90.0, n_bags: int = 10,
                       M_max: int = 3 * 2 ** 9, criterion: str = "MAE", seed: int = 0,
                       method: str = "scattering") -> CVReport:
    """Bagged OLS per outer fold; ``M_bar`` is chosen on held-out parts of the training folds."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = np.asarray(folds)
    results = []
    for k in _fold_ids(folds):
        tr, te = folds != k, folds == k
        model = bagged_fit(X[tr], y[tr], beta, n_bags, M_max, criterion, seed=seed + int(k))
        res = model.predict(X[te]) - y[te]
        results.append(FoldResult(int(k), int(tr.sum()), int(te.sum()), mae(res), rmse(res),
                                  {"M_bar": model.M_bar}))
        logger.info("fold %d: MAE %.3f RMSE %.3f M_bar %.1f", k, results[-1].mae,
                    results[-1].rmse, model.M_bar)
    return CVReport(method, results, seed)


def _reps(molecules, R, noise_scale, seed, pad_to):
    shell = CoulombKernelModel(np.zeros(0), np.zeros(0), 1.0, 1.0, R, noise_scale, pad_to, seed)
    return shell.representations(molecules)


def select_krr(reps, y, inner_folds, R: int, sigmas=SIGMA_GRID, lambdas=LAMBDA_GRID,
               criterion: str = "MAE"):
    """Grid search by inner cross-validation on precomputed replica representations.

    ``reps`` has ``R`` consecutive rows per molecule.  Returns ``(sigma, lambda, score)``.
    """
    D = cdist(reps, reps, "cityblock")
    mol_fold = np.asarray(inner_folds)
    rep_fold = np.repeat(mol_fold, R)
    best = (None, None, np.inf)
    for s in sigmas:
        K = np.exp(-D / s)
        for lam in lambdas:
            errs = []
            for k in np.unique(mol_fold):
                tr, te = rep_fold != k, rep_fold == k
                try:
                    alpha = solve_dual(K[np.ix_(tr, tr)], np.repeat(y[mol_fold != k], R), lam)
                except np.linalg.LinAlgError:
                    errs = None
                    break
                pred = (K[np.ix_(te, tr)] @ alpha).reshape(-1, R).mean(axis=1)
                r = pred - y[mol_fold == k]
                errs.append(mae(r) if criterion == "MAE" else rmse(r))
            if errs is None:
                continue
            score = float(np.mean(errs))
            if score < best[2]:
                best = (s, lam, score)
    if best[0] is None:
        raise np.linalg.LinAlgError("no kernel hyperparameters gave a solvable system")
    return best


def cross_validate_krr(molecules, y, folds, R: int = 8, noise_scale: float = 1.0,
                       sigmas=SIGMA_GRID, lambdas=LAMBDA_GRID, seed: int = 0,
                       criterion: str = "MAE") -> CVReport:
    """Coulomb-matrix KRR with inner 4-fold selection of ``(sigma, lambda)``."""
    molecules = list(molecules)
    y = np.asarray(y, dtype=float)
    folds = np.asarray(folds)
    pad_to = max(len(m) for m in molecules)
    reps = _reps(molecules, R, noise_scale, seed, pad_to)
    rep_idx = np.arange(len(molecules) * R).reshape(len(molecules), R)
    results = []
    for k in _fold_ids(folds):
        tr = np.flatnonzero(folds != k)
        te = np.flatnonzero(folds == k)
        tr_reps = reps[rep_idx[tr].ravel()]
        s, lam, _ = select_krr(tr_reps, y[tr], folds[tr], R, sigmas, lambdas, criterion)
        model = krr_fit([molecules[i] for i in tr], y[tr], s, lam, R, noise_scale, seed,
                        pad_to, train_reps=tr_reps)
        res = model.predict([molecules[i] for i in te]) - y[te]
        results.append(FoldResult(int(k), len(tr), len(te), mae(res), rmse(res),
                                  {"sigma": s, "lambda": lam}))
    return CVReport("coulomb-krr", results, seed)
