"""L1 error of the approximate identity for f = 2 sqrt(x), g = 1/sqrt(x) on (0, 1).

Fits the observed rate in eps and reports where the error would drop
below a target.

    python scripts/approx_identity_rate.py --target 0.05
"""

import argparse

import numpy as np

from zeronoise import analysis as an
from zeronoise.report import format_table


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--target", type=float, default=0.05)
    args = ap.parse_args(argv)
    op = an.ApproxIdentity(lambda x: 2 * np.abs(x) ** 0.5, lambda x: 1 / np.abs(x) ** 0.5, 0.0, 1.0)
    ks = np.arange(1, args.kmax + 1)
    eps = 2.0 ** -ks
    l1 = np.array([an.approx_identity_l1(op, e) for e in eps])
    slope, icpt = np.polyfit(np.log(eps[2:]), np.log(l1[2:]), 1)
    print(format_table([(int(k), f"{e:.5g}", f"{v:.6f}") for k, e, v in zip(ks, eps, l1)],
                       ["k", "eps = 2^-k", "L1"]))
    need = np.exp((np.log(args.target) - icpt) / slope)
    print(f"fitted L1 ~ {np.exp(icpt):.3f} eps^{slope:.3f}; L1 <= {args.target} needs eps <= "
          f"{need:.4g} (2^{np.log2(need):.2f})")


if __name__ == "__main__":
    main()
