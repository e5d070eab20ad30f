"""First-order threshold bond dimension chi* of random brickwork circuits versus depth."""

import argparse

import numpy as np

from qemscope.clifford import NoisyCircuit, random_brickwork
from qemscope.noise import sample_model
from qemscope.tem import threshold_bond_dimension


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[8, 12, 16])
    ap.add_argument("--l", type=int, nargs="+", default=[6, 8, 10, 12])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--eps", type=float, default=0.01)
    args = ap.parse_args()
    print("N   L   mean chi*   chi*/L^2")
    for n in args.n:
        for L in args.l:
            vals = []
            for s in range(args.seeds):
                rng = np.random.default_rng(1000 * n + 10 * L + s)
                c = NoisyCircuit(tuple(random_brickwork(n, L, rng)), sample_model(n, L, args.eps, rng))
                vals.append(threshold_bond_dimension(c))
            m = float(np.mean(vals))
            print(f"{n:<3d} {L:<3d} {m:9.1f}   {m / L ** 2:.3f}")


if __name__ == "__main__":
    main()
