"""Monte Carlo split fraction of the oscillating drift along an eps ladder.

    python scripts/split_fractions.py --rho 0.5 --paths 2000
"""

import argparse
import math

from zeronoise import analysis as an
from zeronoise.dsl import builtin_example1
from zeronoise.montecarlo import SimConfig, simulate_ensemble
from zeronoise.report import format_table


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--rho", type=float, default=0.5)
    ap.add_argument("--paths", type=int, default=2000)
    args = ap.parse_args(argv)
    d = builtin_example1(args.rho)
    eps = [3.0 ** -i / math.e for i in range(2, 10)]
    s = simulate_ensemble(d, SimConfig(eps, dt=2.5e-3, t_final=0.5, n_paths=args.paths))
    band = 3 * math.sqrt(0.25 / args.paths)
    rows = [(f"{e.eps:.4g}", f"{e.split_fraction:.4f}", f"{an.weight_p_eps(d, e.eps, -0.5, 0.5):.6f}")
            for e in s.per_eps]
    print(format_table(rows, ["eps", "MC fraction > 0", "p_eps"]))
    print(f"3-sigma band around 1/2: +-{band:.3f}")


if __name__ == "__main__":
    main()
