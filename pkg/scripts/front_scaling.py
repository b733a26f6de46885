"""Free-boundary scaling of the limit problem: fitted exponent, coefficient and collapse.

    python3 scripts/front_scaling.py --resolution 100 200 400
"""

import argparse

from fastreact.limit import extract_front, limit_spec_from, self_similar_collapse, solve_limit
from fastreact.problem import ProblemSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--domain", default="half_line", choices=["half_line", "whole_line"])
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.5])
    p.add_argument("--U0", type=float, default=1.0)
    p.add_argument("--V0", type=float, default=1.0)
    p.add_argument("--resolution", type=float, nargs="+", default=[100.0, 200.0, 400.0])
    args = p.parse_args()

    print(f"{'eps':>5} {'res':>6} {'exponent':>9} {'a':>8} {'fit rms':>9} {'collapse':>9}")
    for eps in args.eps:
        for res in args.resolution:
            spec = ProblemSpec(domain=args.domain, epsilon=eps, U0=args.U0, V0=args.V0, resolution=res)
            traj = solve_limit(limit_spec_from(spec), dt_first=spec.dt_init)
            fit = extract_front(traj)
            print(f"{eps:>5g} {res:>6g} {fit.exponent:>9.4f} {fit.coefficient:>+8.4f} "
                  f"{fit.residual:>9.2e} {self_similar_collapse(traj):>9.2e}")


if __name__ == "__main__":
    main()
