"""Build Morlet banks of increasing size and report their frame constants.

The Littlewood-Paley sum of a bank shows how evenly the filters tile the
frequency plane; its minimum sets the frame constant c.  The script also
writes the J=6 sum to a CSV so it can be plotted with any external tool.
"""

import sys
from pathlib import Path

import numpy as np

from molscat.filterbank import MorletParams, build_morlet_bank, nyquist_leakage


def main(out=Path("demo-out")):
    for J in (5, 6, 7, 8):
        p = MorletParams(J=J, L=16)
        fb = build_morlet_bank(p)
        lp = fb.littlewood_paley()
        print(f"J={J} N={p.N:4d}  c={fb.frame_constant:.4f}  max LP={lp.max():.6f}  "
              f"Nyquist leakage={nyquist_leakage(p):.3f}")
    fb = build_morlet_bank(MorletParams(J=6, L=16))
    out.mkdir(exist_ok=True)
    lp = np.fft.fftshift(fb.littlewood_paley())
    np.savetxt(out / "littlewood_paley_J6.csv", lp, delimiter=",")
    print(f"wrote {out / 'littlewood_paley_J6.csv'}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-out"))
