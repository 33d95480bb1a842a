"""Coulomb energy of Gaussian charges three ways.

Compares the closed-form energy with the full dyadic wavelet sum, then shows
how the truncated Fourier and wavelet regressions converge as the resolution
parameter eps shrinks, and how many terms each one needs.
"""

import numpy as np

from molscat.filterbank import build_theory_wavelet
from molscat.theory import convergence_report, coulomb_energy_gaussian, random_config, wavelet_identity_sum


def main():
    rng = np.random.default_rng(1)
    wavelet = build_theory_wavelet()
    print("closed form vs. dyadic wavelet sum")
    for _ in range(5):
        cfg = random_config(rng, n_charges=int(rng.integers(2, 7)))
        U = coulomb_energy_gaussian(cfg)
        S = wavelet_identity_sum(cfg, wavelet=wavelet)
        print(f"  {len(cfg.charges)} charges  U={U:12.6f}  sum={S:12.6f}  rel={abs(S - U) / U:.1e}")

    rep = convergence_report(random_config(rng, n_charges=3), wavelet=wavelet)
    print("\n  eps      Fourier terms  error       wavelet terms  error")
    for row in rep.rows():
        print(f"  {row['eps']:<8.5f} {row['fourier_terms']:>13d}  {row['fourier_error']:.3e}"
              f"  {row['wavelet_terms']:>13d}  {row['wavelet_error']:.3e}")
    print(f"fitted log-log slopes: Fourier {rep.fourier_slope:.2f}, wavelet {rep.wavelet_slope:.2f}")


if __name__ == "__main__":
    main()
