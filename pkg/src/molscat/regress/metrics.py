"""Regression error metrics."""

import numpy as np

CRITERIA = ("MAE", "RMSE")


def mae(residual) -> float:
    return float(np.mean(np.abs(residual)))


def rmse(residual) -> float:
    return float(np.sqrt(np.mean(np.square(residual))))


def error(residual, criterion: str) -> float:
    if criterion == "MAE":
        return mae(residual)
    if criterion == "RMSE":
        return rmse(residual)
    raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
