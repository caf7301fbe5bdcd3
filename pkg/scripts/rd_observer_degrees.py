"""Observer-kernel degree study for the reaction-diffusion observer fixture.

For each (lam, degree) pair reports the LPI verdict (d_P escalating to
--max-deg), the time taken and the rightmost eigenvalue of the closed loop.

    python3 scripts/rd_observer_degrees.py --lams 5 6 --degrees 0 1 4
"""

import argparse
import logging
import time

from piestab import lpi
from piestab.convert import convert
from piestab.fixtures import fit_observer_gain, rd_observer
from piestab.numeric import spectrum


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lams", type=float, nargs="+", default=[5.0, 6.0])
    p.add_argument("--degrees", type=int, nargs="+", default=[1, 4])
    p.add_argument("--max-deg", type=int, default=3)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    for lam in args.lams:
        for deg in args.degrees:
            pie = convert(rd_observer(lam, deg))
            t0 = time.perf_counter()
            cert = lpi.certify(pie, max_d_P=args.max_deg)
            secs = time.perf_counter() - t0
            rm = spectrum(pie, N=48).rightmost
            gain = ", ".join(f"{c:.4g}" for c in fit_observer_gain(lam, deg))
            print(f"lam={lam:g} degree={deg}: {cert.verdict} (d_P={cert.d_P}, d_H={cert.d_H}, "
                  f"{secs:.0f} s), rightmost {rm:.6f}, gain coefficients [{gain}]")


if __name__ == "__main__":
    main()
