"""Count the algebraic degree of the small crosslink problems.

Builds each problem over a random family model, solves three generic
instances from total-degree starts, and compares the stabilized count
against the Bezout bound.
"""

import time

import numpy as np

from cr3bp_nav import homotopy as ho
from cr3bp_nav import problems as pr

CASES = [
    ("TwoS_RangeLOS", "LyapunovQuartic"),
    ("TwoS_RangeLOS", "LyapunovSextic"),
    ("M2S_SameOrbit", "LyapunovQuartic"),
    ("ThreeS_KnownCA_SameBD", "LyapunovQuartic"),
]


def main():
    print(f"{'problem':<24} {'model':<16} {'bezout':>7} {'degree':>7} "
          f"{'time':>7}")
    for name, kind in CASES:
        fam = pr.random_family_model(kind, np.random.default_rng(2))
        spec = pr.build_problem(name, fam)
        bez = pr.random_generic_instance(spec, 0).instantiated() \
            .bezout_number()
        t0 = time.time()
        degree = ho.count_degree(spec, [0, 1, 2])
        print(f"{name:<24} {kind:<16} {bez:>7} {degree:>7} "
              f"{time.time() - t0:>6.1f}s")


if __name__ == "__main__":
    main()
