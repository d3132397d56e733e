"""Random-start uniqueness survey across the proven range and beyond the conjectured threshold.

For each (q, a) cell, minimize the quotient and run Newton from seeded random
positive data, then report how many converged and how far the solutions are
from the constant a^{1/(q-1)}.

    python3 scripts/theorem_range_sweep.py --n 3 --starts 20
"""

import argparse
import math

import numpy as np

from steklov_lab.params import ProblemParams
from steklov_lab.solver import SolverOptions, minimize_quotient, newton_solve
from steklov_lab.spectral import random_positive_function


def survey(n, q, a, starts, L, seed):
    p = ProblemParams(n, a, q).validate()
    uc = p.constant_solution()
    rng = np.random.default_rng(seed)
    grid = np.cos(np.linspace(0, math.pi, 401))
    out = {"minimize": [], "newton": []}
    for _ in range(starts):
        f0 = random_positive_function(n, L, rng, degree=int(rng.integers(1, 13)),
                                      amplitude=float(rng.uniform(0.05, 0.9)),
                                      level=uc * 10 ** float(rng.uniform(-0.5, 0.5)))
        for name, solve in (("minimize", minimize_quotient), ("newton", newton_solve)):
            if name == "minimize" and q >= p.q_crit:
                continue
            res = solve(f0, p, SolverOptions(L=L))
            if res.converged:
                out[name].append(float(np.max(np.abs(res.solution(grid) - uc))))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--starts", type=int, default=20)
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'q':>5} {'a':>5} {'region':>12} {'min conv':>9} {'nwt conv':>9} {'max dist':>10}")
    for q in (1.5, 2.0, 2.5):
        p = ProblemParams(args.n, 1.0, q)
        for a in (0.1, 0.3, 0.5, 0.8 * p.conjecture_threshold, 1.1 * p.conjecture_threshold):
            region = ("theorem" if a <= p.theorem_threshold else
                      "open" if a <= p.conjecture_threshold else "past a*")
            r = survey(args.n, q, a, args.starts, args.L, args.seed)
            dists = r["minimize"] + r["newton"]
            print(f"{q:5.2f} {a:5.2f} {region:>12} {len(r['minimize']):9d} {len(r['newton']):9d} "
                  f"{max(dists) if dists else math.nan:10.2e}")


if __name__ == "__main__":
    main()
