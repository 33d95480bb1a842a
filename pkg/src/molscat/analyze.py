"""Weight-distribution analytics for greedy OLS models.

A study collects the orthogonal weights ``w~`` of many OLS fits on seeded
random training draws.  Features a draw never selects carry weight 0.  The
mean magnitudes ``E_l |w~_k| / sqrt(n)`` can be grouped by descriptor keys,
and their decay along the selection order fitted with a quadratic law on
``log2``-``log2`` axes.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .invariants import DescriptorTable
from .regress.ols import OlsModel, ols_fit

logger = logging.getLogger(__name__)

GROUP_KEYS = ("scale_pair", "order", "norm", "channel")
DEFAULT_DRAWS = 100
DEFAULT_M = 2 ** 9


@dataclass
class WeightStudy:
    """Orthogonal weights of repeated OLS fits.

    Attributes
    ----------
    weights : ndarray (L, K)
        ``w~_k^l`` per draw ``l`` and feature ``k``; zero where unselected.
    n : int
        Training size of every draw.
    table : DescriptorTable or None
        Descriptors aligned with the ``K`` columns.
    step_weights : ndarray (L, M)
        ``w~_{k_m}^l`` in selection order, zero-padded past a draw's model size.
    seeds : list
        Seeds of the draws, for provenance.
    """

    weights: np.ndarray
    n: int
    table: DescriptorTable | None = None
    step_weights: np.ndarray | None = None
    seeds: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if self.n < 1:
            raise ValueError("training size must be positive")
        if self.table is not None and len(self.table) != self.weights.shape[1]:
            raise ValueError("descriptor table does not match the weight columns")

    @property
    def n_draws(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_models(cls, models: list[OlsModel], n: int, n_features: int,
                    table: DescriptorTable | None = None, M: int | None = None,
                    seeds=()) -> "WeightStudy":
        """Scatter each model's first ``M`` orthogonal weights onto the feature axis."""
        if not models:
            raise ValueError("need at least one draw")
        M = max(m.M for m in models) if M is None else M
        W = np.zeros((len(models), n_features))
        S = np.zeros((len(models), M))
        for l, mod in enumerate(models):
            m = min(M, mod.M)
            W[l, mod.selected[:m]] = mod.ortho_weights[:m]
            S[l, :m] = mod.ortho_weights[:m]
        return cls(W, n, table, S, list(seeds))


def run_weight_study(X, f, n_train: int, draws: int = DEFAULT_DRAWS, M: int = DEFAULT_M,
                     table: DescriptorTable | None = None, seed: int = 0,
                     workers: int = 1) -> WeightStudy:
    """Fit OLS on ``draws`` seeded random subsets of ``n_train`` rows.

    Draw ``l`` uses ``numpy.random.default_rng([seed, l])`` so results do not
    depend on ``workers``.
    """
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    if draws < 1:
        raise ValueError("need at least one draw")
    if not 2 <= n_train <= len(f):
        raise ValueError(f"n_train={n_train} must lie in [2, {len(f)}]")

    def one(l):
        idx = np.sort(np.random.default_rng([seed, l]).choice(len(f), n_train, replace=False))
        return ols_fit(X[idx], f[idx], M)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            models = list(ex.map(one, range(draws)))
    else:
        models = [one(l) for l in range(draws)]
    return WeightStudy.from_models(models, n_train, X.shape[1], table, M,
                                   seeds=[[seed, l] for l in range(draws)])


def mean_weight_magnitudes(study: WeightStudy) -> np.ndarray:
    """``E_l |w~_k^l| / sqrt(n)`` per feature."""
    if study.n_draws < 1:
        raise ValueError("need at least one draw")
    return np.abs(study.weights).mean(axis=0) / np.sqrt(study.n)


def step_magnitudes(study: WeightStudy) -> np.ndarray:
    """``E_l |w~_{k_m}^l| / sqrt(n)`` for selection steps ``m = 1..M``."""
    if study.step_weights is None:
        raise ValueError("study carries no selection-order weights")
    return np.abs(study.step_weights).mean(axis=0) / np.sqrt(study.n)


def _key(d, key):
    if key == "scale_pair":
        return (d.j if d.j is not None else "-", d.j2 if d.j2 is not None else "-")
    return getattr(d, key)


def aggregate(study: WeightStudy, key: str) -> dict:
    """Sum mean magnitudes over descriptors sharing ``key``.

    ``scale_pair`` groups by ``(j, j2)``; missing scales are ``"-"``.
    """
    if key not in GROUP_KEYS:
        raise ValueError(f"unknown key {key!r}; choose from {GROUP_KEYS}")
    if study.table is None:
        raise ValueError("aggregation needs a descriptor table")
    mags = mean_weight_magnitudes(study)
    out = defaultdict(float)
    for d, v in zip(study.table, mags):
        out[_key(d, key)] += float(v)
    return dict(sorted(out.items(), key=lambda kv: str(kv[0])))


def aggregate_csv(groups: dict, key: str) -> str:
    """CSV with one row per group; scale pairs get separate ``j`` and ``j2`` columns."""
    buf = io.StringIO()
    w = csv.writer(buf)
    total = sum(groups.values())
    if key == "scale_pair":
        w.writerow(["j", "j2", "mean_abs_weight", "fraction"])
        for (j, j2), v in groups.items():
            w.writerow([j, j2, repr(v), repr(v / total if total else 0.0)])
    else:
        w.writerow([key, "mean_abs_weight", "fraction"])
        for k, v in groups.items():
            w.writerow([k, repr(v), repr(v / total if total else 0.0)])
    return buf.getvalue()


@dataclass
class DecayFit:
    """``log2 E ~ a (log2 m)^2 + b log2 m + c`` with coefficient of determination ``r2``."""

    a: float
    b: float
    c: float
    r2: float

    def __iter__(self):
        return iter((self.a, self.b, self.c))

    def exponent(self, m) -> np.ndarray:
        """Local power ``alpha(m) = -(a log2 m + b)`` of ``E ~ 2^c m^-alpha(m)``."""
        return -(self.a * np.log2(m) + self.b)


def fit_decay_law(study_or_magnitudes) -> DecayFit:
    """Least-squares quadratic fit of step magnitudes on ``log2``-``log2`` axes.

    Accepts a :class:`WeightStudy` or the magnitudes for ``m = 1, 2, ...``.
    Steps with zero magnitude are left out.
    """
    if isinstance(study_or_magnitudes, WeightStudy):
        E = step_magnitudes(study_or_magnitudes)
    else:
        E = np.asarray(study_or_magnitudes, dtype=float)
    m = np.arange(1, len(E) + 1)
    keep = E > 0
    if keep.sum() < 8:
        raise ValueError("decay fit needs at least 8 selection steps with nonzero weight")
    x, y = np.log2(m[keep]), np.log2(E[keep])
    if np.ptp(y) <= 1e-12 * max(1.0, np.abs(y).max()):
        raise ValueError("degenerate decay fit: all magnitudes are equal")
    coef = np.polynomial.polynomial.polyfit(x, y, 2)
    resid = y - np.polynomial.polynomial.polyval(x, coef)
    r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    c, b, a = (float(v) for v in coef)
    return DecayFit(a, b, c, r2)


def decay_csv(study: WeightStudy, fit: DecayFit | None = None) -> str:
    """Two- or three-column data (``m``, magnitude, fitted) for plotting."""
    E = step_magnitudes(study)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["m", "mean_abs_weight"] + (["fit"] if fit else []))
    for m, e in enumerate(E, 1):
        row = [m, repr(float(e))]
        if fit:
            lm = np.log2(m)
            row.append(repr(float(2.0 ** (fit.a * lm * lm + fit.b * lm + fit.c))))
        w.writerow(row)
    return buf.getvalue()
