"""Where the Monte Carlo paths of the non-Osgood example end up.

For several step sizes, reports the fraction of paths near 0 at T, the
fraction on each side, and the most common final position on the left.

    python scripts/example2_trapping.py --dts 2.5e-3,1e-4,1e-5
"""

import argparse

import numpy as np

from zeronoise.deterministic import extremal_solution
from zeronoise.dsl import builtin_example2, example2_intervals
from zeronoise.montecarlo import SimConfig, simulate_ensemble
from zeronoise.report import format_table


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--dts", default="2.5e-3,1e-4,1e-5")
    ap.add_argument("--eps", type=float, default=2.0 ** -16)
    ap.add_argument("--paths", type=int, default=2000)
    args = ap.parse_args(argv)
    d = builtin_example2(0.5)
    T = 0.5
    thr = 0.1 * float(extremal_solution(d, "plus", T).at(T))
    rows = []
    for dt in (float(v) for v in args.dts.split(",")):
        cfg = SimConfig([args.eps], dt=dt, t_final=T, n_paths=args.paths, chunk_size=500)
        fin = simulate_ensemble(d, cfg).per_eps[0].final
        left = fin[fin < -thr]
        mode = float(np.median(left)) if len(left) else float("nan")
        rows.append((f"{dt:g}", f"{np.mean(np.abs(fin) < thr):.4f}", f"{np.mean(fin < 0):.4f}",
                     f"{np.mean(fin > thr):.4f}", f"{mode:.5f}"))
    print(format_table(rows, ["dt", "|X(T)| < thr", "X(T) < 0", "X(T) > thr", "median left"]))
    print(f"threshold {thr:g}; trap intervals I_k = " +
          ", ".join(f"[{a:.5f}, {b:.5f}]" for a, b in (example2_intervals(k) for k in range(5, 9))))


if __name__ == "__main__":
    main()
