"""Dirichlet diffusion: LPI verdicts around the analytic threshold pi^2.

    python3 scripts/diffusion_threshold.py --values 9 9.5 9.8 10 10.5 12 --max-deg 2
"""

import argparse
import logging

import numpy as np

from piestab import lpi
from piestab.convert import convert
from piestab.fixtures import dirichlet_diffusion
from piestab.numeric import spectrum


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--values", type=float, nargs="+", default=[9.0, 9.5, 9.8, 10.0, 10.5, 12.0])
    p.add_argument("--max-deg", type=int, default=2)
    p.add_argument("--grid", type=int, default=64)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    print(f"pi^2 = {np.pi ** 2:.6f}")
    print(f"{'lam':>6} {'rightmost':>12} {'verdict':>22} {'d_P':>4} {'margin bound':>13}")
    for lam in args.values:
        pie = convert(dirichlet_diffusion(lam))
        cert = lpi.certify(pie, max_d_P=args.max_deg)
        rm = spectrum(pie, N=args.grid).rightmost
        print(f"{lam:6.3f} {rm:12.6f} {cert.verdict:>22} {cert.d_P:4d} {cert.margin_bound:13.3e}")


if __name__ == "__main__":
    main()
