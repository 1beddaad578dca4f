"""Regenerate every convergence table as CSV under --out (default results/tables).

CI grids stop at h = 1/64; --deep extends to h = 1/256 (several minutes).
"""
import argparse
from pathlib import Path

from tflap.manufactured import u1, u2
from tflap.studies import poisson_study, self_convergence_study, truncation_study

BETAS = (0.5, 0.8, 1.2, 1.5)

# (file stem, kind, lambda, gamma rule, test function)
STUDIES = [
    ("truncation_lam0", "truncation", 0.0, "half", u1),
    ("truncation_lam05", "truncation", 0.5, "half", u1),
    ("poisson_lam0", "poisson", 0.0, "half", u1),
    ("poisson_lam05", "poisson", 0.5, "half", u1),
    ("poisson_gamma2_lam0", "poisson", 0.0, "two", u1),
    ("poisson_gamma2_lam05", "poisson", 0.5, "two", u1),
    ("poisson_c1_lam0", "poisson", 0.0, "half", u2),
    ("poisson_c1_lam05", "poisson", 0.5, "half", u2),
    ("selfconv_lam0", "selfconv", 0.0, "half", None),
    ("selfconv_gamma2_lam05", "selfconv", 0.5, "two", None),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/tables"))
    ap.add_argument("--cache-dir", type=Path, default=Path("results/source_cache"))
    ap.add_argument("--deep", action="store_true")
    ap.add_argument("--norm", choices=["area", "h"], default="area")
    ap.add_argument("--only", nargs="*", help="subset of table stems")
    args = ap.parse_args()

    levels = [16, 32, 64, 128, 256, 512] if args.deep else [16, 32, 64, 128]
    args.out.mkdir(parents=True, exist_ok=True)
    for stem, kind, lam, rule, make in STUDIES:
        if args.only and stem not in args.only:
            continue
        for beta in BETAS:
            gamma = 2.0 if rule == "two" else 1 + beta / 2
            if kind == "truncation":
                table = truncation_study(beta, lam, gamma, levels, make(), norm=args.norm, cache_dir=args.cache_dir)
            elif kind == "poisson":
                table = poisson_study(beta, lam, gamma, make(), levels, norm=args.norm, cache_dir=args.cache_dir)
            else:
                table = self_convergence_study(beta, lam, gamma, levels, norm=args.norm)
            print(table.format(), end="\n\n", flush=True)
            table.to_csv(args.out / f"{stem}_b{beta:g}.csv")


if __name__ == "__main__":
    main()
