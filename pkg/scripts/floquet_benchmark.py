"""Exact and truncated benchmark values, small-N MPS cross-checks and the advantage table."""

import argparse
import math

from qemscope.floquet import (FloquetConfig, advantage_comparison, dual_unitary_exact, dual_unitary_truncated,
                              mps_evolve, mps_simulate)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=122)
    ap.add_argument("--t", type=int, default=30)
    ap.add_argument("--theta", type=float, default=1.5)
    ap.add_argument("--phi", type=float, default=2.63)
    ap.add_argument("--eps", type=float, default=0.0014, help="error density for the advantage table")
    args = ap.parse_args()

    c = FloquetConfig(args.n, args.t, math.pi / 4, args.theta, args.phi)
    print(f"N={c.N} t={c.t} L={c.L}: exact {dual_unitary_exact(c):.6f}  truncated {dual_unitary_truncated(c):.6f}")

    print("\nsmall-N MPS (open chain, measured chi_exact):")
    for N, t in ((6, 1), (10, 1), (10, 2), (14, 3)):
        s = FloquetConfig(N, t, math.pi / 4, args.theta, args.phi)
        chi = max(mps_evolve(s, None).bond_dims)
        print(f"  N={N:2d} t={t} chi_exact={chi:4d}  exact {dual_unitary_exact(s):+.10f} mps {mps_simulate(s, chi):+.10f}"
              f"  truncated {dual_unitary_truncated(s):+.10f} mps(chi/2) {mps_simulate(s, chi // 2):+.10f}")

    print(f"\nadvantage table at eps={args.eps}:")
    print("   t    L   err_c    err_C    err_q    err_q+c")
    for r in advantage_comparison(c, args.eps):
        print(f"  {r['t']:2d} {r['L']:4d}  {r['error_c']:.4f}  {r['error_C']:.4f}  {r['error_q']:.4f}  {r['error_qc']:.4f}")


if __name__ == "__main__":
    main()
