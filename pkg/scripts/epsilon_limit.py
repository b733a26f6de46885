"""Distance between runs with small diffusivity ratio and the run without v-diffusion.

    python3 scripts/epsilon_limit.py --k 100 --eps 0.5 0.1 0.02 0.004
"""

import argparse

import numpy as np

from fastreact.problem import ProblemSpec
from fastreact.system import solve_system


def space_time_l1(a, b):
    h = a.grid.h
    t = a.time_array
    d = (np.sum(np.abs(a.array("u") - b.array("u")), axis=1)
         + np.sum(np.abs(a.array("v") - b.array("v")), axis=1)) * h
    return float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(t)))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--domain", default="half_line", choices=["half_line", "whole_line"])
    p.add_argument("--k", type=float, default=100.0)
    p.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.1, 0.02])
    args = p.parse_args()

    ref = solve_system(ProblemSpec(domain=args.domain, epsilon=0.0, k=args.k))
    print(f"{'eps':>7} {'distance':>10}")
    for eps in args.eps:
        run = solve_system(ProblemSpec(domain=args.domain, epsilon=eps, k=args.k))
        print(f"{eps:>7g} {space_time_l1(run, ref):>10.5f}")


if __name__ == "__main__":
    main()
