"""Bagged OLS: many random held-in/held-out splits, each picking its own model size."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import error
from .ols import OlsModel, ols_fit


@dataclass
class Bag:
    model: OlsModel
    M_bar: int
    held_in: np.ndarray
    curve: np.ndarray = field(repr=False)


@dataclass
class BaggedModel:
    """Mean of ``X`` OLS models trained on ``beta`` percent splits.

    ``curve`` of each bag is its held-out error for ``m = 1..M``.
    """

    bags: list[Bag]
    beta: float
    n_bags: int
    criterion: str
    seed: int

    def predict(self, X) -> np.ndarray:
        preds = np.array([b.model.predict(X, b.M_bar) for b in self.bags])
        return preds.mean(axis=0)

    def per_bag(self, X) -> np.ndarray:
        return np.array([b.model.predict(X, b.M_bar) for b in self.bags])

    @property
    def M_bar(self) -> float:
        return float(np.mean([b.M_bar for b in self.bags]))

    def to_dict(self) -> dict:
        return {"beta": self.beta, "n_bags": self.n_bags, "criterion": self.criterion,
                "seed": self.seed,
                "bags": [{"M_bar": b.M_bar, "held_in": b.held_in.tolist(),
                          "curve": b.curve.tolist(), "model": b.model.to_dict()}
                         for b in self.bags]}

    @classmethod
    def from_dict(cls, d) -> "BaggedModel":
        bags = [Bag(OlsModel.from_dict(b["model"]), int(b["M_bar"]),
                    np.array(b["held_in"], dtype=int), np.array(b["curve"]))
                for b in d["bags"]]
        return cls(bags, d["beta"], d["n_bags"], d["criterion"], d["seed"])


def split_sizes(n: int, beta: float) -> tuple[int, int]:
    if not 0 < beta < 100:
        raise ValueError("beta must lie strictly between 0 and 100")
    n_in = int(round(n * beta / 100.0))
    n_in = min(n_in, n - 1)
    if n_in < 2 or n - n_in < 1:
        raise ValueError(f"beta={beta}% of {n} samples leaves a degenerate split")
    return n_in, n - n_in


def bagged_fit(X, f, beta: float = 90.0, n_bags: int = 10, M_max: int = 3 * 2 ** 9,
               criterion: str = "MAE", seed: int = 0) -> BaggedModel:
    """Fit ``n_bags`` OLS models on seeded ``beta`` percent subsets.

    Each bag selects ``M_bar`` minimizing ``criterion`` on its held-out part
    (the first minimum on ties).
    """
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    if n_bags < 1:
        raise ValueError("need at least one bag")
    n = len(f)
    n_in, _ = split_sizes(n, beta)
    bags = []
    for b in range(n_bags):
        rng = np.random.default_rng([seed, b])
        perm = rng.permutation(n)
        tr, va = np.sort(perm[:n_in]), np.sort(perm[n_in:])
        model = ols_fit(X[tr], f[tr], M_max)
        path = model.predict_path(X[va])
        curve = np.array([error(path[:, m] - f[va], criterion) for m in range(model.M)])
        M_bar = int(np.argmin(curve)) + 1 if model.M else 0
        bags.append(Bag(model, M_bar, tr, curve))
    return BaggedModel(bags, beta, n_bags, criterion, seed)
