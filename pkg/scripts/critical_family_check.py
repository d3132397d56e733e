"""Certify members of the critical-exponent family with every available oracle.

    python3 scripts/critical_family_check.py --L 80
"""

import argparse

import numpy as np

from steklov_lab.halfspace import er_residual, halfspace_sampler, reflection_probe
from steklov_lab.identities import CriticalFamily, critical_trace
from steklov_lab.solver import residual


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=80)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'n':>2} {'s':>4} {'kappa':>8} {'eq resid':>9} {'ER max':>9} {'refl min':>10} {'trunc ok':>8}")
    for n in (3, 4, 5, 6):
        for s in (0.0, 0.3, 0.6, 0.8):
            fam = CriticalFamily(n, s)
            f = critical_trace(n, s, args.L)
            eq = residual(f, fam.params).l2_norm() / f.l2_norm()
            er = max(abs(er_residual(f, fam.params, x)) for x in rng.uniform(-10, 10, (50, n - 1)))
            v = halfspace_sampler(f)
            refl = min(reflection_probe(v, lam, n, count=1024, seed=args.seed).min_difference
                       for lam in (0.25, 1.0, 4.0))
            print(f"{n:2d} {s:4.1f} {fam.kappa:8.5f} {eq:9.1e} {er:9.1e} {refl:10.1e} {str(fam.truncation_ok(args.L)):>8}")


if __name__ == "__main__":
    main()
