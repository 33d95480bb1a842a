"""Permutation and isometry invariant dictionaries of planar densities.

Three dictionaries are computed per density channel:

* ``fourier``: means of ``|rho_hat|`` and ``|rho_hat|**2`` over one-cell
  annuli of the DFT, ``k = 1 .. N/2``;
* ``wavelet``: ``||rho||_1`` and the ``L1`` and squared ``L2`` norms of
  ``rho * psi_{j,.}`` integrated over orientations, ``2J + 1`` values;
* ``scattering``: the wavelet dictionary plus the norms of
  ``|rho * psi_{j,.}| * psi_{j', . + t}`` for ``j < j'`` and
  ``t = 0 .. L/2``, averaged over ``+t`` and ``-t`` so that reflections
  leave every value unchanged.

Convolutions are periodic and computed in pixel units; norms carry the cell
area ``h**2`` and the angular cell ``pi / L``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import fft

from .density import DensityChannelSpec, DensityGrid, ProfileTable, rasterize
from .filterbank import FilterBank, angular_weight
from .io import load_array_bundle, save_array_bundle
from .molecule import Dataset, Molecule

DICT_KINDS = ("fourier", "wavelet", "scattering")


@dataclass(frozen=True)
class FeatureDescriptor:
    """Provenance of one invariant.

    ``order`` is 0 for ``||rho||_1``, 1 for first-order wavelet and Fourier
    terms, 2 for scattering terms.  ``norm`` is the exponent ``p``.
    """

    kind: str
    order: int
    channel: str
    norm: int
    j: int | None = None
    j2: int | None = None
    t: int | None = None
    k: int | None = None

    def __post_init__(self):
        if self.order == 2 and not (self.j is not None and self.j2 is not None
                                    and self.j < self.j2):
            raise ValueError("second-order descriptors need j < j2")

    @property
    def name(self) -> str:
        parts = [self.kind, self.channel, f"o{self.order}", f"p{self.norm}"]
        for key in ("j", "j2", "t", "k"):
            v = getattr(self, key)
            if v is not None:
                parts.append(f"{key}{v}")
        return ":".join(parts)


class DescriptorTable(tuple):
    """Ordered descriptors aligned with feature columns."""

    def to_json(self) -> list[dict]:
        return [asdict(d) for d in self]

    @classmethod
    def from_json(cls, recs) -> "DescriptorTable":
        return cls(FeatureDescriptor(**r) for r in recs)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self]

    def select(self, **fields) -> np.ndarray:
        """Boolean mask of descriptors matching all given field values."""
        return np.array([all(getattr(d, k) == v for k, v in fields.items()) for d in self],
                        dtype=bool)


def _wavelet_descriptors(kind, channel, J):
    out = [FeatureDescriptor(kind, 0, channel, 1)]
    for j in range(J):
        out += [FeatureDescriptor(kind, 1, channel, p, j=j) for p in (1, 2)]
    return out


def _second_order_descriptors(channel, J, L):
    return [FeatureDescriptor("scattering", 2, channel, p, j=j, j2=j2, t=t)
            for j in range(J) for j2 in range(j + 1, J)
            for t in range(L // 2 + 1) for p in (1, 2)]


def _fourier_descriptors(channel, J, include_dc=False):
    ks = range(0 if include_dc else 1, 2 ** (J - 1) + 1)
    return [FeatureDescriptor("fourier", 1, channel, p, k=k) for k in ks for p in (1, 2)]


def descriptor_table(kind: str, channels, J: int, L: int = 16,
                     include_dc: bool = False) -> DescriptorTable:
    """Descriptors emitted by :func:`featurize`, without computing anything."""
    out = []
    for ch in channels:
        if kind == "fourier":
            out += _fourier_descriptors(ch, J, include_dc)
        elif kind == "wavelet":
            out += _wavelet_descriptors("wavelet", ch, J)
        elif kind == "scattering":
            out += _wavelet_descriptors("scattering", ch, J) + _second_order_descriptors(ch, J, L)
        else:
            raise ValueError(f"unknown dictionary kind {kind!r}")
    return DescriptorTable(out)


def _check(rho, fb: FilterBank):
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (fb.N, fb.N):
        raise ValueError(f"density of shape {rho.shape} does not match a {fb.N}x{fb.N} bank")
    return rho


def wavelet_modulus(rho, fb: FilterBank) -> np.ndarray:
    """``|rho * psi_{j,l}|`` for every scale and orientation, shape ``(J, L, N, N)``."""
    rho = _check(rho, fb)
    R = fft.fft2(rho)
    out = np.empty(fb.psi_hat.shape)
    for j in range(fb.J):
        out[j] = np.abs(fft.ifft2(R[None] * fb.psi_hat[j], workers=-1))
    return out


def _first_order(U, h, L):
    w = angular_weight(L) * h * h
    vals = []
    for j in range(U.shape[0]):
        vals.append(w * np.sum(U[j]))
        vals.append(w * np.sum(U[j] ** 2))
    return vals


def wavelet_dictionary(rho, fb: FilterBank, h: float = 1.0, U=None) -> np.ndarray:
    """``(||rho||_1, ||rho * psi_{j,.}||_1, ||rho * psi_{j,.}||_2^2)_{j<J}``."""
    rho = _check(rho, fb)
    if U is None:
        U = wavelet_modulus(rho, fb)
    return np.array([h * h * np.sum(rho)] + _first_order(U, h, fb.L))


def scattering_second_order(rho, fb: FilterBank, h: float = 1.0, U=None) -> np.ndarray:
    """Second-order norms ordered by ``(j, j2, t, p)``.

    For each ``j < j2`` and offset ``s`` the norms of
    ``|U_{j,l} * psi_{j2,(l+s) mod L}|`` are summed over ``l``; offsets ``t``
    and ``L - t`` are then averaged.
    """
    rho = _check(rho, fb)
    if U is None:
        U = wavelet_modulus(rho, fb)
    J, L = fb.J, fb.L
    w = angular_weight(L) * h * h
    ell = np.arange(L)
    out = []
    for j in range(J - 1):
        Uh = fft.fft2(U[j], workers=-1)
        for j2 in range(j + 1, J):
            per_s = np.empty((L, 2))
            for s in range(L):
                V = np.abs(fft.ifft2(Uh * fb.psi_hat[j2][(ell + s) % L], workers=-1))
                per_s[s] = w * np.sum(V), w * np.sum(V * V)
            for t in range(L // 2 + 1):
                avg = 0.5 * (per_s[t] + per_s[(L - t) % L])
                out.extend(avg.tolist())
    return np.array(out)


def scattering_dictionary(rho, fb: FilterBank, h: float = 1.0) -> np.ndarray:
    """Orders 0, 1 and 2, ``1 + 2J + (L/2 + 1) J (J - 1)`` values."""
    rho = _check(rho, fb)
    U = wavelet_modulus(rho, fb)
    return np.concatenate([wavelet_dictionary(rho, fb, h, U),
                           scattering_second_order(rho, fb, h, U)])


def _radial_bins(N: int) -> np.ndarray:
    k = np.fft.fftfreq(N, 1.0 / N)
    return np.rint(np.hypot(k[:, None], k[None, :])).astype(int)


def fourier_dictionary(rho, J: int | None = None, h: float = 1.0,
                       include_dc: bool = False) -> np.ndarray:
    """Annulus means of ``|rho_hat|`` and ``|rho_hat|**2``, ``k = 1 .. N/2``.

    ``rho_hat = h**2 * DFT(rho)`` approximates the continuous transform.
    """
    rho = np.asarray(rho, dtype=float)
    N = rho.shape[0]
    if rho.shape != (N, N) or (J is not None and N != 2 ** J):
        raise ValueError(f"density of shape {rho.shape} is not 2**J square")
    A = np.abs(fft.fft2(rho, workers=-1)) * h * h
    bins = _radial_bins(N).ravel()
    A = A.ravel()
    kmax = N // 2
    keep = bins <= kmax
    cnt = np.bincount(bins[keep], minlength=kmax + 1)
    s1 = np.bincount(bins[keep], A[keep], minlength=kmax + 1) / cnt
    s2 = np.bincount(bins[keep], A[keep] ** 2, minlength=kmax + 1) / cnt
    k0 = 0 if include_dc else 1
    return np.column_stack([s1[k0:], s2[k0:]]).ravel()


def dictionary(rho, kind: str, fb: FilterBank | None, h: float = 1.0,
               J: int | None = None, include_dc: bool = False) -> np.ndarray:
    if kind == "fourier":
        return fourier_dictionary(rho, J, h, include_dc)
    if fb is None:
        raise ValueError(f"{kind} dictionary needs a filter bank")
    if kind == "wavelet":
        return wavelet_dictionary(rho, fb, h)
    if kind == "scattering":
        return scattering_dictionary(rho, fb, h)
    raise ValueError(f"unknown dictionary kind {kind!r}")


@dataclass
class FeatureVector:
    values: np.ndarray
    molecule_id: str
    table: DescriptorTable

    def __post_init__(self):
        if len(self.values) != len(self.table):
            raise ValueError("feature values and descriptor table differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite features for {self.molecule_id!r}")


def featurize_grid(grid: DensityGrid, kind: str, fb: FilterBank | None,
                   include_dc: bool = False) -> np.ndarray:
    return np.concatenate([dictionary(grid[ch], kind, fb, grid.h, grid.J, include_dc)
                           for ch in grid.channels])


def featurize(m: Molecule, spec: DensityChannelSpec, fb: FilterBank | None, kind: str,
              profiles: ProfileTable | None = None, J: int | None = None,
              h: float | None = None, origin=None, include_dc: bool = False) -> FeatureVector:
    """Rasterize ``m`` and concatenate the per-channel dictionaries."""
    if J is None:
        if fb is None:
            raise ValueError("J is required when no filter bank is given")
        J = fb.J
    if fb is not None and fb.J != J:
        raise ValueError("filter bank and grid disagree on J")
    grid = rasterize(m, spec, profiles, J, h, origin)
    L = fb.L if fb is not None else 16
    table = descriptor_table(kind, spec.channels, J, L, include_dc)
    return FeatureVector(featurize_grid(grid, kind, fb, include_dc), m.id, table)


@dataclass
class FeatureMatrix:
    X: np.ndarray
    ids: list[str]
    table: DescriptorTable
    meta: dict

    def save(self, path) -> None:
        save_array_bundle(path, {"X": self.X},
                          {"ids": self.ids, "descriptors": self.table.to_json(), **self.meta})

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        arrays, meta = load_array_bundle(path)
        ids = meta.pop("ids")
        table = DescriptorTable.from_json(meta.pop("descriptors"))
        return cls(arrays["X"], ids, table, meta)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def featurize_dataset(ds: Dataset, spec: DensityChannelSpec, fb: FilterBank | None,
                      kind: str, profiles: ProfileTable | None, J: int, h: float,
                      cache_dir=None, cache_key: dict | None = None,
                      include_dc: bool = False, progress=None) -> FeatureMatrix:
    """Feature matrix of a whole dataset on a common grid spacing ``h``.

    With ``cache_dir`` the matrix is stored under a hash of ``cache_key`` and
    reused on later calls with the same key.
    """
    key = dict(cache_key or {}, kind=kind, channels=list(spec.channels), J=J, h=h,
               ids=[m.id for m in ds], include_dc=include_dc)
    digest = config_hash(key)
    path = Path(cache_dir) / f"features-{digest}" if cache_dir else None
    if path is not None and path.with_suffix(".json").exists():
        return FeatureMatrix.load(path)
    rows = []
    for i, m in enumerate(ds):
        rows.append(featurize(m, spec, fb, kind, profiles, J, h, include_dc=include_dc).values)
        if progress:
            progress(i + 1, len(ds))
    L = fb.L if fb is not None else 16
    fm = FeatureMatrix(np.array(rows), [m.id for m in ds],
                       descriptor_table(kind, spec.channels, J, L, include_dc),
                       {"config_hash": digest, "kind": kind, "J": J, "h": h})
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fm.save(path)
    return fm
