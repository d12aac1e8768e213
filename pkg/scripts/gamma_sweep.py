"""Convergence of J_eps and the reduced energy for an equatorial interface.

Prints one table for Lambda = 0 (line energy only) and one for Lambda = 1.

    python scripts/gamma_sweep.py --eps 0.1 0.05 0.025 --out runs/gamma
"""

import argparse
import math
from pathlib import Path

from membrane_sphere import io
from membrane_sphere.axisym import CapSet
from membrane_sphere.operators import ModelParams
from membrane_sphere.studies import gamma_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    ap.add_argument("--theta0", type=float, default=math.pi / 2)
    ap.add_argument("--out", default="runs/gamma")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    caps = CapSet.single(args.theta0)
    for Lam in (0.0, 1.0):
        rows = gamma_study(caps, ModelParams(Lambda=Lam), args.eps)
        cols = list(rows[0])
        io.write_csv(out / f"gamma_Lambda{Lam:g}.csv", cols, ["1"] * len(cols), [[r[c] for c in cols] for r in rows])
        print(f"Lambda = {Lam:g}")
        print(f"{'eps':>8} {'L_max':>6} {'err_J':>10} {'rate':>6} {'err_E':>10} {'rate':>6}")
        for r in rows:
            print(f"{r['eps']:8g} {r['L_max']:6d} {r['err_J']:10.3e} {r['rate_J']:6.2f} {r['err_E']:10.3e} {r['rate_E']:6.2f}")


if __name__ == "__main__":
    main()
