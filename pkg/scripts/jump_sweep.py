"""Interface jumps of the height field for a relaxed polar cap across eps.

    python scripts/jump_sweep.py --theta0 1.047 --eps 0.1 0.05 0.025
"""

import argparse
import math
from pathlib import Path

from membrane_sphere import io
from membrane_sphere.axisym import CapSet
from membrane_sphere.operators import ModelParams
from membrane_sphere.studies import jump_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    ap.add_argument("--theta0", type=float, default=math.pi / 3)
    ap.add_argument("--Lambda", type=float, default=1.0)
    ap.add_argument("--out", default="runs/jump")
    args = ap.parse_args()
    p = ModelParams(Lambda=args.Lambda, alpha=-math.cos(args.theta0))
    rows = jump_study(CapSet.single(args.theta0), p, args.eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = [c for c in rows[0] if c != "status"]
    io.write_csv(out / "jump_study.csv", cols, ["1"] * len(cols), [[r[c] for c in cols] for r in rows])
    print(f"{'eps':>8} {'steps':>6} {'ratio':>8} {'[u]/|u|':>10} {'[du]':>10}")
    for r in rows:
        print(f"{r['eps']:8g} {r['steps']:6d} {r['ratio']:8.4f} {abs(r['jump_u']) / r['u_scale']:10.2e} {abs(r['jump_grad']):10.2e}")


if __name__ == "__main__":
    main()
