"""Mean first exit time fields (f = 1) for several beta and lambda, as x,y,u CSV."""
import argparse
from pathlib import Path

from tflap.studies import center_value, exit_time_field


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.5, 0.8, 1.2, 1.5])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--out", type=Path, default=Path("results/exit_time"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'beta':>6} {'lambda':>7} {'u(0,0)':>10}")
    for lam in args.lambdas:
        for beta in args.betas:
            path = args.out / f"exit_b{beta:g}_l{lam:g}_n{args.n}.csv"
            field = exit_time_field(beta, lam, None, args.n, out=path)
            print(f"{beta:6.2f} {lam:7.2f} {center_value(field):10.6f}")


if __name__ == "__main__":
    main()
