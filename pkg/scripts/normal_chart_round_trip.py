"""Build and verify normal charts on seeded distortions of the normal form.

    python3 scripts/normal_chart_round_trip.py --seeds 5 --alphas 0.5,1,2
"""

import argparse

from sigmaspace.catalog import builtin_space
from sigmaspace.errors import SigmaSpaceError
from sigmaspace.metric import SigmaPatch
from sigmaspace.normal_coords import build_normal_chart, verify_normal_chart


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--alphas", default="0.5,1,2")
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--grid", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-4)
    args = ap.parse_args(argv)

    print(f"{'seed':>4} {'alpha':>5} {'field':>10}  {'gmm':>9} {'gim':>9} {'sigma gim':>9}  verdict")
    failures = 0
    for seed in range(args.seeds):
        for alpha in map(float, args.alphas.split(",")):
            sp = builtin_space("distorted_normal", m=args.m, alpha=alpha, seed=seed)
            k = args.m - 1
            patch = SigmaPatch.located(sp.metric, [-0.5] * k, [0.5] * k, args.grid)
            for name in ("rho", "rho_scaled"):
                try:
                    rep = verify_normal_chart(build_normal_chart(sp.metric, sp.fields[name], patch), tol=args.tol)
                except SigmaSpaceError as exc:
                    failures += 1
                    print(f"{seed:>4} {alpha:>5g} {name:>10}  {type(exc).__name__}: {exc}")
                    continue
                failures += not rep.passed
                print(f"{seed:>4} {alpha:>5g} {name:>10}  {rep.gmm_error:9.1e} {rep.gim_error:9.1e} "
                      f"{rep.sigma_gim_error:9.1e}  {rep.verdict}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
