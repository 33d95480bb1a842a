"""Command-line front end.

Every subcommand resolves a configuration from defaults, an optional TOML or
JSON file (``--config``) and command-line flags (flags win), writes its
artifacts under ``--out`` and prints a JSON summary.  Reports embed the hash
of the resolved configuration and the seeds used.  Exit codes: 0 success,
1 user error (bad input or configuration), 2 internal error; errors are
printed to stderr as JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analyze import (DEFAULT_DRAWS, DEFAULT_M, GROUP_KEYS, aggregate, aggregate_csv,
                      decay_csv, fit_decay_law, run_weight_study)
from .density import DensityChannelSpec, MarginError, ProfileError, ProfileTable, default_spacing, load_profiles
from .filterbank import AliasingError, MorletParams, build_morlet_bank, nyquist_leakage
from .invariants import DICT_KINDS, config_hash, featurize_dataset
from .molecule import DatasetError, load_dataset
from .regress import BaggedModel, bagged_fit, cross_validate_krr, cross_validate_ols
from .regress.cv import LAMBDA_GRID, SIGMA_GRID
from .theory import convergence_report, coulomb_energy_gaussian, random_config, wavelet_identity_sum

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("molscat")

CACHE_ENV = "MOLSCAT_CACHE"
COMMANDS = ("featurize", "train", "predict", "cv", "krr-baseline", "validate-theorems",
            "analyze-weights", "filterbank-check")

DEFAULTS = {
    "dataset": None,
    "profiles": None,
    "analytic_profiles": False,
    "dict": "scattering",
    "channels": "core,valence",
    "J": 9,
    "L": 16,
    "xi": MorletParams.xi,
    "sigma": MorletParams.sigma,
    "h": None,
    "include_dc": False,
    "m_max": 3 * 2 ** 9,
    "bags": 10,
    "beta": 90.0,
    "criterion": "MAE",
    "seed": 0,
    "stratify": False,
    "krr_R": 8,
    "krr_noise": 1.0,
    "krr_sigmas": list(SIGMA_GRID),
    "krr_lambdas": list(LAMBDA_GRID),
    "draws": DEFAULT_DRAWS,
    "n_train": None,
    "M": DEFAULT_M,
    "group_by": "scale_pair",
    "workers": 1,
    "theory_configs": 5,
    "model": None,
    "cache_dir": None,
    "out": "molscat-out",
}

# keys that only affect where artifacts go, not their content
_LOCATION_KEYS = {"cache_dir", "out", "workers"}


class UserError(Exception):
    """Invalid input or configuration; maps to exit code 1."""


_USER_ERRORS = (UserError, DatasetError, ProfileError, MarginError, AliasingError,
                FileNotFoundError, ValueError)


def load_config(path) -> dict:
    """Read a TOML or JSON configuration file into a flat dict of known keys.

    Tables are flattened one level, so ``[regression] m_max = 64`` and a
    top-level ``m_max = 64`` are equivalent.
    """
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        raw = json.loads(text)
    else:
        raw = tomllib.loads(text.decode())
    flat = {}
    for k, v in raw.items():
        if isinstance(v, dict):
            flat.update(v)
        else:
            flat[k] = v
    flat = {k.replace("-", "_"): v for k, v in flat.items()}
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise UserError(f"unknown configuration keys {unknown}")
    return flat


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < config file < flags; relative paths in the file resolve against it."""
    cfg = dict(DEFAULTS)
    if os.environ.get(CACHE_ENV):
        cfg["cache_dir"] = os.environ[CACHE_ENV]
    if args.config:
        base = Path(args.config).resolve().parent
        filecfg = load_config(args.config)
        for key in ("dataset", "profiles", "model", "cache_dir", "out"):
            if filecfg.get(key) and not Path(filecfg[key]).is_absolute():
                filecfg[key] = str(base / filecfg[key])
        cfg.update(filecfg)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if cfg["dict"] not in DICT_KINDS:
        raise UserError(f"--dict must be one of {DICT_KINDS}, got {cfg['dict']!r}")
    if cfg["criterion"] not in ("MAE", "RMSE"):
        raise UserError("criterion must be MAE or RMSE")
    if cfg["group_by"] not in GROUP_KEYS:
        raise UserError(f"--group-by must be one of {GROUP_KEYS}")
    return cfg


def content_hash(cfg: dict) -> str:
    return config_hash({k: v for k, v in cfg.items() if k not in _LOCATION_KEYS})


# ---------------------------------------------------------------------------
# pipeline pieces


def _dataset(cfg):
    if not cfg["dataset"]:
        raise UserError("--dataset is required for this command")
    return load_dataset(cfg["dataset"], seed=cfg["seed"], stratify=cfg["stratify"])


def _profiles(cfg, spec):
    if not spec.needs_profiles:
        return None
    if cfg["profiles"]:
        return load_profiles(cfg["profiles"], allow_analytic=cfg["analytic_profiles"])
    if cfg["analytic_profiles"]:
        return ProfileTable(allow_analytic=True)
    raise UserError(f"channels {spec.channels} need --profiles or --analytic-profiles")


def _bank(cfg):
    if cfg["dict"] == "fourier":
        return None
    return build_morlet_bank(MorletParams(cfg["J"], cfg["L"], cfg["xi"], cfg["sigma"]))


def _cache_dir(cfg):
    return cfg["cache_dir"] or str(Path(cfg["out"]) / "cache")


def _feature_key(cfg):
    return {k: cfg[k] for k in ("dict", "channels", "J", "L", "xi", "sigma", "profiles",
                                "analytic_profiles", "include_dc")}


def featurize_from_config(cfg, ds, h=None):
    """Features of ``ds`` under ``cfg``; returns ``(FeatureMatrix, cache_hit)``."""
    spec = DensityChannelSpec.parse(cfg["channels"])
    profiles = _profiles(cfg, spec)
    J = cfg["J"]
    h = h or cfg["h"] or default_spacing(ds, J, profiles, spec)
    key = _feature_key(cfg)
    probe = dict(key, kind=cfg["dict"], channels=list(spec.channels), J=J, h=h,
                 ids=[m.id for m in ds], include_dc=cfg["include_dc"])
    hit = (Path(_cache_dir(cfg)) / f"features-{config_hash(probe)}.json").exists()
    fb = None if hit else _bank(cfg)
    fm = featurize_dataset(ds, spec, fb, cfg["dict"], profiles, J, h,
                           cache_dir=_cache_dir(cfg), cache_key=key,
                           include_dc=cfg["include_dc"])
    return fm, hit


def _write(out: Path, name: str, text: str) -> str:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return str(p)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# commands


def cmd_featurize(cfg):
    ds = _dataset(cfg)
    fm, hit = featurize_from_config(cfg, ds)
    return {"features": fm.meta["config_hash"], "cache_hit": hit,
            "cache_dir": _cache_dir(cfg), "shape": list(fm.X.shape), "h": fm.meta["h"]}


def cmd_train(cfg):
    ds = _dataset(cfg)
    fm, _ = featurize_from_config(cfg, ds)
    model = bagged_fit(fm.X, ds.energies(), cfg["beta"], cfg["bags"], cfg["m_max"],
                       cfg["criterion"], cfg["seed"])
    doc = {"config": cfg, "config_hash": content_hash(cfg), "seed": cfg["seed"],
           "h": fm.meta["h"], "n_features": fm.X.shape[1], "model": model.to_dict()}
    path = _write(Path(cfg["out"]), "model.json", _dump(doc))
    return {"model": path, "M_bar": model.M_bar, "config_hash": doc["config_hash"]}


def cmd_predict(cfg):
    if not cfg["model"]:
        raise UserError("--model is required for predict")
    doc = json.loads(Path(cfg["model"]).read_text())
    mcfg = dict(doc["config"])
    for key in ("dataset", "cache_dir", "out"):
        mcfg[key] = cfg[key]
    ds = _dataset(cfg)
    fm, _ = featurize_from_config(mcfg, ds, h=doc["h"])
    if fm.X.shape[1] != doc["n_features"]:
        raise UserError("feature count does not match the trained model")
    pred = BaggedModel.from_dict(doc["model"]).predict(fm.X)
    lines = [f"# config_hash={doc['config_hash']} seed={doc['seed']}", "id,prediction"]
    lines += [f"{i},{p!r}" for i, p in zip(fm.ids, pred.tolist())]
    path = _write(Path(cfg["out"]), "predictions.csv", "\n".join(lines) + "\n")
    return {"predictions": path, "n": len(pred)}


def _report(cfg, report, stem):
    report.config_hash = content_hash(cfg)
    out = Path(cfg["out"])
    d = report.to_dict()
    d["config"] = cfg
    jpath = _write(out, f"{stem}.json", _dump(d))
    header = f"# config_hash={report.config_hash} seed={report.seed}\n"
    cpath = _write(out, f"{stem}.csv", header + report.to_csv())
    tpath = _write(out, f"{stem}.txt", report.table() + "\n")
    print(report.table(), file=sys.stderr)
    return {"report": jpath, "csv": cpath, "table": tpath, "mae": report.mae,
            "rmse": report.rmse, "M_bar": report.M_bar, "config_hash": report.config_hash}


def cmd_cv(cfg):
    ds = _dataset(cfg)
    fm, _ = featurize_from_config(cfg, ds)
    rep = cross_validate_ols(fm.X, ds.energies(), ds.folds, cfg["beta"], cfg["bags"],
                             cfg["m_max"], cfg["criterion"], cfg["seed"],
                             method=f"{cfg['dict']} ({cfg['channels']})")
    return _report(cfg, rep, "cv")


def cmd_krr(cfg):
    ds = _dataset(cfg)
    rep = cross_validate_krr(ds.molecules, ds.energies(), ds.folds, cfg["krr_R"],
                             cfg["krr_noise"], cfg["krr_sigmas"], cfg["krr_lambdas"],
                             cfg["seed"], cfg["criterion"])
    return _report(cfg, rep, "krr")


def cmd_validate_theorems(cfg):
    rng = np.random.default_rng(cfg["seed"])
    configs = [random_config(rng, n_charges=int(rng.integers(1, 7)))
               for _ in range(cfg["theory_configs"])]
    identity = []
    for c in configs:
        U = coulomb_energy_gaussian(c)
        identity.append(abs(wavelet_identity_sum(c) - U) / U)
    conv = convergence_report(random_config(rng, n_charges=3))
    doc = {"config_hash": content_hash(cfg), "seed": cfg["seed"],
           "identity_relative_errors": identity, "convergence": conv.to_dict()}
    path = _write(Path(cfg["out"]), "theorems.json", _dump(doc))
    return {"report": path, "fourier_slope": conv.fourier_slope,
            "wavelet_slope": conv.wavelet_slope, "max_identity_error": max(identity)}


def cmd_analyze_weights(cfg):
    ds = _dataset(cfg)
    fm, _ = featurize_from_config(cfg, ds)
    n_train = cfg["n_train"] or int(round(0.8 * len(ds)))
    study = run_weight_study(fm.X, ds.energies(), n_train, cfg["draws"], cfg["M"],
                             fm.table, cfg["seed"], cfg["workers"])
    out = Path(cfg["out"])
    head = f"# config_hash={content_hash(cfg)} seed={cfg['seed']} draws={cfg['draws']}\n"
    groups = aggregate(study, cfg["group_by"])
    gpath = _write(out, f"weights-{cfg['group_by']}.csv",
                   head + aggregate_csv(groups, cfg["group_by"]))
    try:
        fit = fit_decay_law(study)
    except ValueError as exc:
        logger.warning("decay fit skipped: %s", exc)
        fit = None
    dpath = _write(out, "weights-decay.csv", head + decay_csv(study, fit))
    res = {"groups": gpath, "decay": dpath, "config_hash": content_hash(cfg)}
    if fit:
        res.update(a=fit.a, b=fit.b, c=fit.c, r2=fit.r2)
    return res


def cmd_filterbank_check(cfg):
    params = MorletParams(cfg["J"], cfg["L"], cfg["xi"], cfg["sigma"])
    fb = build_morlet_bank(params)
    lp = fb.littlewood_paley().ravel()
    doc = {"config_hash": content_hash(cfg), "params": params.to_dict(),
           "frame_constant": fb.frame_constant, "lp_max": float(lp.max()),
           "nyquist_leakage": nyquist_leakage(params), "ok": fb.frame_constant <= 0.25}
    _write(Path(cfg["out"]), "filterbank.json", _dump(doc))
    return doc


HANDLERS = {"featurize": cmd_featurize, "train": cmd_train, "predict": cmd_predict,
            "cv": cmd_cv, "krr-baseline": cmd_krr, "validate-theorems": cmd_validate_theorems,
            "analyze-weights": cmd_analyze_weights, "filterbank-check": cmd_filterbank_check}


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="TOML or JSON configuration file")
    a("--dataset", help="molecule file (.csv or .json)")
    a("--profiles", help="radial profile CSV")
    a("--analytic-profiles", dest="analytic_profiles", action="store_const", const=True,
      help="fall back to built-in analytic atomic profiles")
    a("--dict", choices=DICT_KINDS)
    a("--channels", help="comma-separated density channels")
    a("--grid-J", dest="J", type=int)
    a("--angles-L", dest="L", type=int)
    a("--xi", type=float)
    a("--sigma", type=float)
    a("--spacing", dest="h", type=float, help="grid spacing in Bohr")
    a("--m-max", dest="m_max", type=int)
    a("--bags", type=int)
    a("--beta", type=float)
    a("--criterion", choices=("MAE", "RMSE"))
    a("--seed", type=int)
    a("--stratify", action="store_const", const=True)
    a("--krr-R", dest="krr_R", type=int)
    a("--krr-sigmas", dest="krr_sigmas", type=_floats)
    a("--krr-lambdas", dest="krr_lambdas", type=_floats)
    a("--draws", type=int)
    a("--n-train", dest="n_train", type=int)
    a("--M", dest="M", type=int)
    a("--group-by", dest="group_by", choices=GROUP_KEYS)
    a("--workers", type=int)
    a("--theory-configs", dest="theory_configs", type=int)
    a("--model", help="model.json written by train")
    a("--cache-dir", dest="cache_dir")
    a("--out")
    a("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="molscat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"molscat {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result = HANDLERS[args.command](cfg)
    except _USER_ERRORS as exc:
        _error(exc, 1)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level guard
        logger.debug("internal error", exc_info=True)
        _error(exc, 2)
        return 2
    sys.stdout.write(_dump(result))
    if args.command == "filterbank-check" and not result["ok"]:
        return 1
    return 0


def _error(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
