"""Planar electronic density channels rasterized on a ``2**J x 2**J`` grid.

Each channel is a superposition over atoms of a radial bump centered at the
atom, ``rho(u) = sum_k rho[z_k](u - r_k)``.  Spherical 3D profiles are
condensed to the plane by moving the mass of each sphere onto the circle of
the same radius, ``rho_2d(a) = 2 a rho_3d(a)``.

Grids are indexed ``[ix, iy]`` with cell centers at ``origin + (i + 1/2) h``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .io import load_array_bundle, save_array_bundle
from .molecule import Molecule

CHANNELS = ("dirac", "atomic", "core", "valence")
_PROFILE_COLUMN = {"atomic": "total", "core": "core", "valence": "val"}


class ProfileError(ValueError):
    """Invalid or missing radial profile."""


class MarginError(ValueError):
    """The molecule and its densities do not fit in the central half of the box."""


@dataclass(frozen=True)
class RadialProfile:
    """Radial charge densities of one element.

    ``dim=3`` means densities per Bohr^3 normalized by ``int 4 pi a^2 rho da``;
    ``dim=2`` means densities per Bohr^2 normalized by ``int 2 pi a rho da``.
    """

    z: int
    radii: np.ndarray
    total: np.ndarray
    core: np.ndarray
    val: np.ndarray
    dim: int = 3

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        arrs = [np.asarray(getattr(self, k), dtype=float) for k in ("total", "core", "val")]
        if r.ndim != 1 or len(r) < 2 or r[0] != 0 or np.any(np.diff(r) <= 0):
            raise ProfileError(f"z={self.z}: radii must increase strictly from 0")
        if any(a.shape != r.shape for a in arrs):
            raise ProfileError(f"z={self.z}: density columns must match radii")
        if any(np.any(a < 0) or not np.all(np.isfinite(a)) for a in arrs):
            raise ProfileError(f"z={self.z}: densities must be finite and >= 0")
        tot, core, val = arrs
        if np.any(np.abs(core + val - tot) > 1e-6 * np.maximum(np.abs(tot), 1e-300)):
            raise ProfileError(f"z={self.z}: core + valence must equal total")
        for k, a in zip(("radii", "total", "core", "val"), (r, *arrs)):
            object.__setattr__(self, k, a)
        m = self.mass("total")
        if abs(m - self.z) > 1e-3 * self.z:
            raise ProfileError(f"z={self.z}: profile integrates to {m:.6f}")

    def mass(self, column: str = "total") -> float:
        rho = getattr(self, column)
        if self.dim == 3:
            return float(trapezoid(4 * math.pi * self.radii ** 2 * rho, self.radii))
        return float(trapezoid(2 * math.pi * self.radii * rho, self.radii))

    @property
    def support(self) -> float:
        return float(self.radii[-1])


def restrict_to_2d(p: RadialProfile) -> RadialProfile:
    """Condense a 3D profile onto the plane, ``rho_2d(a) = 2 a rho_3d(a)``."""
    if p.dim != 3:
        raise ProfileError("profile is already two-dimensional")
    f = 2 * p.radii
    return RadialProfile(p.z, p.radii, f * p.total, f * p.core, f * p.val, dim=2)


# shell occupancies up to argon: (n, capacity)
_SHELLS = ((1, 2), (2, 8), (3, 8))


def _occupancy(z: int) -> list[int]:
    occ, left = [], z
    for _, cap in _SHELLS:
        if left <= 0:
            break
        occ.append(min(cap, left))
        left -= cap
    return occ


def shell_radii(z: int) -> list[float]:
    """Mean shell radii ``n (2n+1) / (2 Z_eff)`` with Slater screening constants."""
    occ = _occupancy(z)
    out = []
    for i, q in enumerate(occ):
        n = i + 1
        same = 0.30 if n == 1 else 0.35
        shield = same * (q - 1)
        if i >= 1:
            shield += 0.85 * occ[i - 1]
        shield += 1.0 * sum(occ[:max(i - 1, 0)])
        out.append(n * (2 * n + 1) / (2 * (z - shield)))
    return out


def analytic_profile(z: int, n_points: int = 2049) -> RadialProfile:
    """Per-shell normalized 3D Gaussians for ``1 <= z <= 18``.

    The outermost occupied shell is valence and the inner shells are core
    (noble-gas core).  Each Gaussian has the Slater mean radius of its shell.
    """
    z = int(z)
    if not 1 <= z <= 18:
        raise ProfileError(f"no analytic profile for z={z}")
    occ = _occupancy(z)
    widths = [r / (2 * math.sqrt(2 / math.pi)) for r in shell_radii(z)]
    radii = np.linspace(0.0, 6.0 * max(widths), n_points)
    shells = []
    for q, a in zip(occ, widths):
        g = np.exp(-0.5 * (radii / a) ** 2) / (2 * math.pi * a * a) ** 1.5
        # exact discrete normalization
        g *= q / trapezoid(4 * math.pi * radii ** 2 * g, radii)
        shells.append(g)
    val = shells[-1]
    core = np.sum(shells[:-1], axis=0) if len(shells) > 1 else np.zeros_like(radii)
    return RadialProfile(z, radii, core + val, core, val)


class ProfileTable:
    """Radial profiles keyed by atomic charge, with an optional analytic fallback."""

    def __init__(self, profiles=None, allow_analytic: bool = False):
        self._profiles = {int(p.z): p for p in (profiles or [])}
        self.allow_analytic = allow_analytic
        self._planar = {}

    def __contains__(self, z) -> bool:
        return int(z) in self._profiles or (self.allow_analytic and 1 <= int(z) <= 18)

    def __len__(self) -> int:
        return len(self._profiles)

    def get(self, z: int) -> RadialProfile:
        z = int(z)
        if z not in self._profiles:
            if not self.allow_analytic:
                raise ProfileError(f"no radial profile for z={z}")
            self._profiles[z] = analytic_profile(z)
        return self._profiles[z]

    def planar(self, z: int) -> RadialProfile:
        z = int(z)
        if z not in self._planar:
            self._planar[z] = restrict_to_2d(self.get(z))
        return self._planar[z]

    def channel_mass(self, z: int, channel: str) -> float:
        if channel in ("dirac", "atomic"):
            return float(z)
        p = self.get(z)
        return z * p.mass(_PROFILE_COLUMN[channel]) / p.mass("total")


def load_profiles(path, allow_analytic: bool = False) -> ProfileTable:
    """Read ``z,radius,rho_total,rho_core,rho_val`` rows grouped by ``z``."""
    rows: dict[int, list] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"z", "radius", "rho_total", "rho_core", "rho_val"}
        if not need <= set(reader.fieldnames or ()):
            raise ProfileError(f"{path}: header must contain {sorted(need)}")
        for rec in reader:
            try:
                rows.setdefault(int(rec["z"]), []).append(
                    [float(rec[k]) for k in ("radius", "rho_total", "rho_core", "rho_val")])
            except ValueError as exc:
                raise ProfileError(f"{path}: {exc}") from None
    profiles = []
    for z, vals in rows.items():
        a = np.array(vals)
        profiles.append(RadialProfile(z, a[:, 0], a[:, 1], a[:, 2], a[:, 3]))
    return ProfileTable(profiles, allow_analytic)


def write_profiles(table_or_profiles, path) -> None:
    profiles = (table_or_profiles._profiles.values()
                if isinstance(table_or_profiles, ProfileTable) else table_or_profiles)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "radius", "rho_total", "rho_core", "rho_val"])
        for p in sorted(profiles, key=lambda p: p.z):
            for row in zip(p.radii, p.total, p.core, p.val):
                w.writerow([p.z, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class DensityChannelSpec:
    channels: tuple[str, ...]

    def __post_init__(self):
        ch = tuple(self.channels)
        if not ch:
            raise ValueError("at least one channel is required")
        if len(set(ch)) != len(ch):
            raise ValueError("duplicate channels")
        bad = [c for c in ch if c not in CHANNELS]
        if bad:
            raise ValueError(f"unknown channels {bad}; choose from {CHANNELS}")
        object.__setattr__(self, "channels", ch)

    @classmethod
    def parse(cls, text: str) -> "DensityChannelSpec":
        return cls(tuple(c.strip() for c in text.split(",") if c.strip()))

    @property
    def needs_profiles(self) -> bool:
        return any(c != "dirac" for c in self.channels)


@dataclass
class DensityGrid:
    channels: tuple[str, ...]
    data: np.ndarray
    h: float
    origin: tuple[float, float]
    J: int

    @property
    def N(self) -> int:
        return 2 ** self.J

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[self.channels.index(name)]

    def mass(self, name: str) -> float:
        return float(self.h ** 2 * self[name].sum())

    def save(self, path) -> None:
        save_array_bundle(path, {"data": self.data},
                          {"channels": list(self.channels), "h": self.h,
                           "origin": list(self.origin), "J": self.J})

    @classmethod
    def load(cls, path) -> "DensityGrid":
        arrays, meta = load_array_bundle(path)
        return cls(tuple(meta["channels"]), arrays["data"], meta["h"],
                   tuple(meta["origin"]), meta["J"])


def _support(m: Molecule, spec: DensityChannelSpec, profiles: ProfileTable | None) -> float:
    if not spec.needs_profiles:
        return 0.0
    return max(profiles.get(z).support for z in set(m.charges.tolist()))


def default_spacing(molecules, J: int, profiles: ProfileTable | None = None,
                    spec: DensityChannelSpec | None = None) -> float:
    """Smallest spacing keeping every molecule (plus profile support) in the central half.

    With the centroid at the box center the guard needs
    ``max |r_k - centroid|_inf + support <= N h / 4``; the Euclidean radius is
    used instead so the spacing also admits every rotation of each molecule.
    """
    spec = spec or DensityChannelSpec(("dirac",))
    reach = 0.0
    for m in molecules:
        pos = m.positions
        half = float(np.max(np.hypot(*(pos - centroid(m)).T)))
        reach = max(reach, half + _support(m, spec, profiles))
    reach = max(reach, 1.0)
    return 4.0 * reach * (1 + 1e-9) / 2 ** J


def centroid(m: Molecule) -> np.ndarray:
    """Mean atom position, correctly rounded so it ignores the atom order."""
    pos = m.positions
    return np.array([math.fsum(pos[:, 0]), math.fsum(pos[:, 1])]) / len(m)


def _canonical_order(m: Molecule) -> list[int]:
    return sorted(range(len(m)), key=lambda i: (m.atoms[i].charge, m.atoms[i].position))


def _splat(grid, x, y, origin, h, weight):
    tx = (x - origin[0]) / h - 0.5
    ty = (y - origin[1]) / h - 0.5
    ix, iy = math.floor(tx), math.floor(ty)
    fx, fy = tx - ix, ty - iy
    for dx, wx in ((0, 1 - fx), (1, fx)):
        for dy, wy in ((0, 1 - fy), (1, fy)):
            grid[ix + dx, iy + dy] += weight * wx * wy


def _stamp(grid, x, y, origin, h, prof: RadialProfile, column: str, mass: float):
    N = grid.shape[0]
    R = prof.support
    lo_x = max(0, math.floor((x - R - origin[0]) / h))
    hi_x = min(N, math.ceil((x + R - origin[0]) / h) + 1)
    lo_y = max(0, math.floor((y - R - origin[1]) / h))
    hi_y = min(N, math.ceil((y + R - origin[1]) / h) + 1)
    cx = origin[0] + (np.arange(lo_x, hi_x) + 0.5) * h - x
    cy = origin[1] + (np.arange(lo_y, hi_y) + 0.5) * h - y
    r = np.hypot(cx[:, None], cy[None, :])
    vals = np.interp(r, prof.radii, getattr(prof, column), right=0.0)
    s = vals.sum() * h * h
    if s > 0:
        # discrete mass equals the atom's channel charge exactly
        vals *= mass / s
    grid[lo_x:hi_x, lo_y:hi_y] += vals


def rasterize(m: Molecule, spec: DensityChannelSpec, profiles: ProfileTable | None,
              J: int, h: float | None = None, origin=None) -> DensityGrid:
    """Rasterize every channel of ``spec`` for molecule ``m``.

    ``origin`` defaults to the value that puts the atom centroid at the box
    center.  Atoms are accumulated in a canonical order so the result does not
    depend on the order of the atom list.

    Raises
    ------
    MarginError
        If atoms plus profile support leave the central half of the box.
    ProfileError
        If a non-dirac channel needs a profile that is missing.
    """
    N = 2 ** J
    if spec.needs_profiles and profiles is None:
        raise ProfileError("profiles are required for non-dirac channels")
    if h is None:
        h = default_spacing([m], J, profiles, spec)
    pos = m.positions
    if origin is None:
        c = centroid(m)
        origin = (float(c[0] - N * h / 2), float(c[1] - N * h / 2))
    origin = (float(origin[0]), float(origin[1]))
    R = _support(m, spec, profiles)
    for d in range(2):
        lo = origin[d] + N * h / 4
        hi = origin[d] + 3 * N * h / 4
        if pos[:, d].min() - R < lo - 1e-12 * N * h or pos[:, d].max() + R > hi + 1e-12 * N * h:
            raise MarginError(f"molecule {m.id!r} exceeds the central half of the box "
                              f"(h={h:.4g}, support={R:.4g})")
    data = np.zeros((len(spec.channels), N, N))
    order = _canonical_order(m)
    for c, name in enumerate(spec.channels):
        for i in order:
            a = m.atoms[i]
            x, y = a.position
            if name == "dirac":
                _splat(data[c], x, y, origin, h, a.charge / (h * h))
                continue
            mass = profiles.channel_mass(a.charge, name)
            if mass > 0:
                _stamp(data[c], x, y, origin, h, profiles.planar(a.charge),
                       _PROFILE_COLUMN[name], mass)
    return DensityGrid(spec.channels, data, float(h), origin, int(J))



def rasterize_displaced(m: Molecule, displacements, spec: DensityChannelSpec,
                        profiles: ProfileTable | None, J: int, h: float,
                        origin=None) -> DensityGrid:
    """Rasterize ``m`` with atom ``k`` moved by ``displacements[k]`` (Bohr).

    Each atom is rasterized at its original position and then translated by
    a band-limited Fourier shift, so the grid depends smoothly on the
    displacements instead of jittering with sub-cell sampling.
    """
    disp = np.asarray(displacements, dtype=float).reshape(len(m), 2)
    N = 2 ** J
    if origin is None:
        c = centroid(m)
        origin = (float(c[0] - N * h / 2), float(c[1] - N * h / 2))
    w = 2 * np.pi * np.fft.fftfreq(N)
    acc = np.zeros((len(spec.channels), N, N), dtype=complex)
    for i in _canonical_order(m):
        single = Molecule.from_arrays(m.id, [m.atoms[i].charge], [m.atoms[i].position])
        g = rasterize(single, spec, profiles, J, h, origin)
        dx, dy = disp[i] / h
        phase = np.exp(-1j * (w[:, None] * dx + w[None, :] * dy))
        if N % 2 == 0:
            # real shift of the Nyquist rows
            phase[N // 2, :] = np.cos(np.pi * dx) * np.exp(-1j * w * dy)
            phase[:, N // 2] = np.exp(-1j * w * dx) * np.cos(np.pi * dy)
            phase[N // 2, N // 2] = np.cos(np.pi * dx) * np.cos(np.pi * dy)
        acc += np.fft.fft2(g.data) * phase
    data = np.fft.ifft2(acc).real
    return DensityGrid(spec.channels, data, float(h), tuple(origin), int(J))
