"""Reaction mass, segregation and distance to the limit across k.

    python3 scripts/k_sweep.py --domain whole_line --eps 0.5
"""

import argparse
import time

from fastreact.diagnostics import limit_trajectory_for, measure
from fastreact.problem import ProblemSpec
from fastreact.system import solve_system


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--domain", default="half_line", choices=["half_line", "whole_line"])
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--k", type=float, nargs="+", default=[10.0, 1e2, 1e3, 1e4])
    p.add_argument("--resolution", type=float, default=200.0)
    args = p.parse_args()

    base = ProblemSpec(domain=args.domain, epsilon=args.eps, resolution=args.resolution)
    limit = limit_trajectory_for(base)
    print(f"{'k':>8} {'mass':>8} {'segregation':>12} {'k*seg':>8} {'grad_sq':>8} {'distance':>9} {'secs':>6}")
    for k in args.k:
        spec = base.with_(k=k)
        t0 = time.perf_counter()
        rep = measure(solve_system(spec), spec, limit)
        print(f"{k:>8g} {rep.reaction_mass:>8.4f} {rep.segregation_norm:>12.4e} "
              f"{k * rep.segregation_norm:>8.4f} {rep.grad_sq:>8.4f} "
              f"{rep.convergence_to_limit['total']:>9.4f} {time.perf_counter() - t0:>6.1f}")


if __name__ == "__main__":
    main()
