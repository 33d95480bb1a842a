"""2D Morlet filter banks in the frequency domain.

Filters are sampled on the DFT grid of an ``N x N`` image (``N = 2**J``) with
unit pixel spacing.  Each wavelet is the discrete-time Fourier transform of the
pixel-sampled Morlet, i.e. the continuous transform periodized over the
aliasing lattice ``2*pi*Z^2``.  For the isotropic Morlet the transform is
real, so filters are stored as ``float64`` arrays.

Orientation ``l`` of ``L`` has angle ``theta_l = -pi/2 + pi*(l+1)/L``, which
covers the half circle ``(-pi/2, pi/2]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


def angular_weight(L: int) -> float:
    """Cell width replacing the angular integral over the half circle."""
    return math.pi / L


class AliasingError(ValueError):
    """The finest wavelet puts most of its energy beyond the Nyquist band."""


@dataclass(frozen=True)
class MorletParams:
    """Parameters of a 2D Morlet bank.

    Parameters
    ----------
    J : int
        Number of dyadic scales; the image side is ``2**J``.
    L : int
        Number of orientations on the half circle (even).
    xi : float
        Center frequency of the finest wavelet, radians per pixel.
    sigma : float
        Gaussian envelope width of the finest wavelet, pixels.
    slant : float
        Envelope aspect ratio orthogonal to the oscillation; 1 is isotropic.
    """

    J: int = 9
    L: int = 16
    xi: float = 0.9 * math.pi
    sigma: float = 0.6
    slant: float = 1.0

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 2:
            raise ValueError(f"J must be an integer >= 2, got {self.J}")
        if int(self.L) != self.L or self.L < 2 or self.L % 2:
            raise ValueError(f"L must be a positive even integer, got {self.L}")
        if not 0 < self.xi < math.pi:
            raise ValueError(f"xi must lie in (0, pi), got {self.xi}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.slant > 0:
            raise ValueError(f"slant must be positive, got {self.slant}")

    @property
    def N(self) -> int:
        return 2 ** self.J

    def thetas(self) -> np.ndarray:
        ell = np.arange(self.L)
        return -math.pi / 2 + math.pi * (ell + 1) / self.L

    def to_dict(self) -> dict:
        return {"J": self.J, "L": self.L, "xi": self.xi, "sigma": self.sigma,
                "slant": self.slant}


def frequency_grid(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Angular frequencies of the ``N x N`` DFT, indexed ``[kx, ky]``."""
    w = 2 * np.pi * np.fft.fftfreq(N)
    return np.meshgrid(w, w, indexing="ij")


def _alias_offsets(scale: float, reach: float, sigma: float) -> np.ndarray:
    """Aliasing lattice points whose Gaussian contribution exceeds 1e-20."""
    P = 0
    while True:
        # smallest |scaled frequency| reachable from the next ring
        dist = scale * (2 * math.pi * (P + 1) - math.pi) - reach
        if dist > 0 and 0.5 * (sigma * dist) ** 2 > 46.0:
            break
        P += 1
    r = np.arange(-P, P + 1)
    return 2 * np.pi * np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)


def _envelope(nx, ny, theta, sigma, slant):
    c, s = math.cos(theta), math.sin(theta)
    par = c * nx + s * ny
    perp = -s * nx + c * ny
    return np.exp(-0.5 * sigma ** 2 * (par ** 2 + (perp / slant) ** 2))


def morlet_hat(wx, wy, scale: float, theta: float, xi: float, sigma: float,
               slant: float = 1.0, periodize: bool = True) -> np.ndarray:
    """Frequency response of the Morlet dilated by ``scale`` and rotated by ``theta``.

    Without periodization this is the continuous formula
    ``G(scale*w - xi*e_theta) - C*G(scale*w)`` (up to the constant ``2*pi*sigma^2``),
    where ``G`` is the envelope transform and ``C`` cancels the mean.
    With periodization ``C`` is recomputed so the DFT coefficient at ``w = 0``
    vanishes.
    """
    e = np.array([math.cos(theta), math.sin(theta)])
    if periodize:
        offsets = _alias_offsets(scale, xi, sigma * min(1.0, 1.0 / slant))
    else:
        offsets = np.zeros((1, 2))
    wave = np.zeros(np.broadcast(wx, wy).shape)
    env = np.zeros_like(wave)
    wave0 = env0 = 0.0
    for ox, oy in offsets:
        nx = scale * (wx + ox)
        ny = scale * (wy + oy)
        wave += _envelope(nx - xi * e[0], ny - xi * e[1], theta, sigma, slant)
        env += _envelope(nx, ny, theta, sigma, slant)
        wave0 += float(_envelope(scale * ox - xi * e[0], scale * oy - xi * e[1],
                                 theta, sigma, slant))
        env0 += float(_envelope(scale * ox, scale * oy, theta, sigma, slant))
    C = wave0 / env0
    return wave - C * env


def gaussian_hat(wx, wy, width: float) -> np.ndarray:
    """Periodized transform of an isotropic Gaussian of std ``width`` pixels, unit DC."""
    offsets = _alias_offsets(1.0, 0.0, width)
    out = np.zeros(np.broadcast(wx, wy).shape)
    for ox, oy in offsets:
        out += np.exp(-0.5 * width ** 2 * ((wx + ox) ** 2 + (wy + oy) ** 2))
    dc = sum(math.exp(-0.5 * width ** 2 * (ox ** 2 + oy ** 2)) for ox, oy in offsets)
    return out / dc


def nyquist_leakage(params: MorletParams, n: int = 801) -> float:
    """Fraction of the finest wavelet's spectral energy outside ``[-pi, pi)^2``.

    Evaluated on the continuous (non-periodized) formula, worst case over
    orientations.
    """
    lim = params.xi + 9.0 / params.sigma + math.pi
    w = np.linspace(-lim, lim, n)
    wx, wy = np.meshgrid(w, w, indexing="ij")
    inside = (np.abs(wx) <= math.pi) & (np.abs(wy) <= math.pi)
    worst = 0.0
    for theta in params.thetas():
        e2 = morlet_hat(wx, wy, 1.0, theta, params.xi, params.sigma,
                        params.slant, periodize=False) ** 2
        worst = max(worst, float(e2[~inside].sum() / e2.sum()))
    return worst


@dataclass
class FilterBank:
    """Frequency-domain Morlet wavelets plus a Gaussian low-pass.

    ``psi_hat[j, l]`` is real, shape ``(N, N)``; ``phi_hat`` has unit DC gain.
    Wavelets are globally rescaled so the symmetrized Littlewood-Paley sum
    peaks at exactly 1.
    """

    params: MorletParams
    psi_hat: np.ndarray
    phi_hat: np.ndarray
    lp_scale: float
    frame_constant: float = field(default=float("nan"))

    @property
    def J(self) -> int:
        return self.params.J

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def N(self) -> int:
        return self.params.N

    def littlewood_paley(self) -> np.ndarray:
        return littlewood_paley_sum(self.psi_hat, self.phi_hat, self.L)

    def save(self, path) -> None:
        from .io import save_array_bundle

        save_array_bundle(path, {"psi_hat": self.psi_hat, "phi_hat": self.phi_hat},
                          {"params": self.params.to_dict(), "lp_scale": self.lp_scale,
                           "frame_constant": self.frame_constant})

    @classmethod
    def load(cls, path) -> "FilterBank":
        from .io import load_array_bundle

        arrays, meta = load_array_bundle(path)
        return cls(MorletParams(**meta["params"]), arrays["psi_hat"],
                   arrays["phi_hat"], meta["lp_scale"], meta["frame_constant"])


def _reflect_freq(a: np.ndarray) -> np.ndarray:
    """``a(-w)`` on the DFT grid."""
    return np.roll(np.flip(a, axis=(-2, -1)), 1, axis=(-2, -1))


def littlewood_paley_sum(psi_hat, phi_hat, L) -> np.ndarray:
    """``|phi|^2 + (pi/L) sum_{j,l} (|psi(w)|^2 + |psi(-w)|^2) / 2``.

    The symmetrization accounts for orientations on the other half circle,
    whose moduli coincide for real inputs.
    """
    W = np.zeros(phi_hat.shape)
    for j in range(psi_hat.shape[0]):
        e = np.sum(np.abs(psi_hat[j]) ** 2, axis=0)
        W += 0.5 * (e + _reflect_freq(e))
    return np.abs(phi_hat) ** 2 + angular_weight(L) * W


def build_morlet_bank(params: MorletParams | None = None, *,
                      max_leakage: float = 0.5) -> FilterBank:
    """Build the bank for ``params`` and measure its frame constant.

    Raises
    ------
    AliasingError
        If more than ``max_leakage`` of the finest wavelet's energy lies
        beyond the Nyquist band.
    """
    params = params or MorletParams()
    leak = nyquist_leakage(params)
    if leak > max_leakage:
        raise AliasingError(
            f"finest wavelet leaks {leak:.2f} of its energy past Nyquist "
            f"(xi={params.xi:.3f}, sigma={params.sigma:.3f})")
    N, J, L = params.N, params.J, params.L
    wx, wy = frequency_grid(N)
    psi = np.empty((J, L, N, N))
    for j in range(J):
        for ell, theta in enumerate(params.thetas()):
            psi[j, ell] = morlet_hat(wx, wy, 2.0 ** j, theta, params.xi,
                                     params.sigma, params.slant)
    phi = gaussian_hat(wx, wy, params.sigma * 2 ** (J - 1))

    # rescale wavelets so max_w LP(w) == 1 while keeping phi_hat(0) == 1
    W = littlewood_paley_sum(psi, np.zeros_like(phi), L)
    room = 1.0 - phi ** 2
    mask = W > 1e-300
    mask[0, 0] = False
    scale2 = float(np.min(room[mask] / W[mask]))
    psi *= math.sqrt(scale2)
    bank = FilterBank(params, psi, phi, math.sqrt(scale2))
    bank.frame_constant = measure_frame_constant(bank)
    return bank


def measure_frame_constant(fb: FilterBank, warn_above: float = 0.25) -> float:
    """``c = 1 - min_{w != 0} LP(w)`` over the full DFT grid.

    Emits a :class:`UserWarning` when ``c`` exceeds ``warn_above``.
    """
    lp = fb.littlewood_paley().ravel()
    c = float(1.0 - lp[1:].min())
    if c > warn_above:
        warnings.warn(f"Littlewood-Paley frame constant c={c:.3f} exceeds {warn_above}",
                      stacklevel=2)
    return c


# ---------------------------------------------------------------------------
# band-limited radial wavelet for the Coulomb identity (3D, continuous)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 4 * (35 - 84 * x + 70 * x ** 2 - 20 * x ** 3)


@dataclass(frozen=True)
class TheoryWavelet:
    """Angular-integrated squared wavelet spectrum ``h(a) = a**-2 * chi(a)``.

    ``chi`` is a smooth window supported on ``[1/2, 2]`` whose dyadic dilates
    sum to one, so ``sum_j 2**(2j) h(2**j a) == a**-2`` for every ``a > 0``.
    """

    radii: np.ndarray
    values: np.ndarray

    @staticmethod
    def chi(a):
        a = np.asarray(a, dtype=float)
        t = np.abs(np.log2(np.where(a > 0, a, 1.0)))
        out = np.cos(0.5 * np.pi * _smoothstep(t)) ** 2
        return np.where((a > 0) & (t < 1.0), out, 0.0)

    @classmethod
    def h(cls, a):
        a = np.asarray(a, dtype=float)
        return np.where(a > 0, cls.chi(a) / np.where(a > 0, a, 1.0) ** 2, 0.0)

    support = (0.5, 2.0)


def build_theory_wavelet(J_range: tuple[int, int] = (-20, 20),
                         n_radial: int = 256) -> TheoryWavelet:
    """Tabulate the radial profile on its support with ``n_radial`` points.

    ``J_range`` is recorded for the caller; the profile itself is scale-free.
    """
    if n_radial < 64:
        raise ValueError("n_radial must be >= 64")
    radii = np.geomspace(0.5, 2.0, n_radial)
    return TheoryWavelet(radii, TheoryWavelet.h(radii))
