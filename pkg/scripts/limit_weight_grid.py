"""Limit weights of power drifts against the regular-variation formula.

    python scripts/limit_weight_grid.py
"""

import itertools
import time

from zeronoise import analysis as an
from zeronoise.dsl import builtin_drift, builtin_example1
from zeronoise.report import format_table


def main():
    rows = []
    for rho, c in itertools.product((0.3, 0.5, 0.8, 1.0), (0.25, 1.0, 4.0)):
        t0 = time.perf_counter()
        lw = an.limit_weight(builtin_drift("power", rho=rho, c=c))
        ref = an.limit_weight_regvar("a", rho, rho, c)
        rows.append((rho, c, f"{lw.p:.8f}", f"{ref:.8f}", f"{abs(lw.p - ref):.1e}", lw.status,
                     f"{time.perf_counter() - t0:.2f}"))
    for rho in (0.3, 0.5, 0.8):
        lw = an.limit_weight(builtin_example1(rho))
        rows.append((rho, "osc", f"{lw.p:.8f}", "0.50000000", f"{abs(lw.p - 0.5):.1e}", lw.status, ""))
    print(format_table(rows, ["rho", "c", "p", "closed form", "|diff|", "status", "s"]))


if __name__ == "__main__":
    main()
