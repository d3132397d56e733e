"""Trace the constant and bifurcating branches through a* = 1/(q-1) and write a CSV.

    python3 scripts/branch_continuation.py --n 3 --q 2 --out branches.csv
"""

import argparse
import csv

from steklov_lab.identities import pohozaev_scaled
from steklov_lab.params import ProblemParams
from steklov_lab.solver import SolverOptions, continue_branch, find_bifurcation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--steps", type=int, default=14)
    ap.add_argument("--out", default="branches.csv")
    args = ap.parse_args()

    a_star = find_bifurcation(args.n, args.q, (0.5 / (args.q - 1), 1.5 / (args.q - 1)))
    opts = SolverOptions(L=args.L)
    traces = [continue_branch(args.n, args.q, 0.2 * a_star, 0.9 * a_star, args.steps, opts),
              continue_branch(args.n, args.q, 1.02 * a_star, 1.3 * a_star, args.steps, opts)]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch", "a", "amplitude", "min_eigenvalue", "residual_norm", "pohozaev_scaled"])
        for tr in traces:
            for pt in tr.points:
                kws = pohozaev_scaled(pt.solution, ProblemParams(args.n, pt.a, args.q))
                w.writerow([tr.branch, f"{pt.a:.17g}", f"{pt.amplitude:.17g}", f"{pt.min_eigenvalue:.17g}",
                            f"{pt.residual_norm:.17g}", f"{kws:.17g}"])
    print(f"a* = {a_star:.15g}; wrote {sum(len(t.points) for t in traces)} points to {args.out}")
    bif = traces[1].points
    # a - a* against amplitude^2 along the new branch: a positive ratio means supercritical
    print("a - a*   amplitude^2   ratio")
    for pt in bif[:4]:
        print(f"{pt.a - a_star:.4f}   {pt.amplitude ** 2:.4f}   {(pt.a - a_star) / pt.amplitude ** 2:.4f}")


if __name__ == "__main__":
    main()
