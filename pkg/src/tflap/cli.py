"""Command line driver: ``python3 -m tflap <command> [flags]``.

Exit codes: 0 success, 1 invalid arguments, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .manufactured import BUILTIN, source_term
from .operator import GridFunction, build_fast_operator, node_coordinates
from .solver import cg_solve
from .studies import (NumericalFailure, exit_time_field, poisson_study, self_convergence_study,
                      truncation_study, center_value)
from .weights import ProblemConfig, assemble_stencil

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC = 0, 1, 2

# values used when neither a flag nor the config file sets a key
DEFAULTS = dict(beta=0.5, lam=0.0, gamma=None, l=1.0, n=None, levels=None, tol=1e-10,
                norm="area", constant="standard", out=None, cache_dir=None, deep=False,
                tf="u1", rhs="one")
CI_LEVELS = [16, 32, 64, 128]
DEEP_LEVELS = [16, 32, 64, 128, 256, 512]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _levels(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}")


def _shared(p: argparse.ArgumentParser) -> None:
    # every shared flag defaults to None so the config file can fill it
    p.add_argument("--config", type=Path, help="JSON file with flag values; flags win")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float, help="splitting exponent in (beta, 2]; default 1 + beta/2")
    p.add_argument("--l", type=float, help="domain half-width")
    p.add_argument("--n", type=int, help="grid cells per side")
    p.add_argument("--levels", type=_levels, help="comma separated doubling n values")
    p.add_argument("--tol", type=float)
    p.add_argument("--norm", choices=["area", "h"])
    p.add_argument("--constant", choices=["standard", "tempered", "auto"])
    p.add_argument("--out", type=Path)
    p.add_argument("--cache-dir", dest="cache_dir", type=Path)
    p.add_argument("--deep", action="store_const", const=True, help="extend studies to h = 1/256")
    p.add_argument("--tf", choices=sorted(BUILTIN), help="manufactured solution")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tflap", description="Tempered fractional Laplacian finite differences")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "weights": "assemble the weight stencil, write i,j,w CSV",
        "apply": "apply the operator to a manufactured solution, write p,q,Bu,f CSV",
        "solve": "solve B U = F, write x,y,u CSV",
        "truncation": "truncation error study",
        "poisson": "manufactured-solution Poisson study",
        "selfconv": "self-convergence study with f = 1",
        "exittime": "mean first exit time field",
        "bench": "time one FFT apply per n",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _shared(p)
        if name == "solve":
            p.add_argument("--rhs", choices=["one", "manufactured"],
                           help="f = 1 or the exact source of --tf")
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if ns.config is not None:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        data = {("lam" if k == "lambda" else k.replace("-", "_")): v for k, v in data.items()}
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(data)
    for key in DEFAULTS:
        val = getattr(ns, key, None)
        if val is not None:
            opts[key] = val
    if opts["levels"] is None:
        opts["levels"] = DEEP_LEVELS if opts["deep"] else CI_LEVELS
    return opts


def _config(o: dict, n: int | None = None) -> ProblemConfig:
    return ProblemConfig(o["beta"], o["lam"], o["gamma"], o["l"], n or o["n"] or 16, o["constant"])


def _emit_table(table, o) -> int:
    print(table.format())
    if o["out"] is not None:
        table.to_csv(o["out"])
    if not all(r.converged for r in table.rows):
        print("CG did not converge on at least one level", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _write_xyu(path, n, l, values) -> None:
    X, Y = node_coordinates(n, l)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "u"])
        for row in zip(X.ravel(), Y.ravel(), np.asarray(values).ravel()):
            writer.writerow([repr(float(v)) for v in row])


def run(o: dict, command: str) -> int:
    tf = BUILTIN[o["tf"]](o["l"])
    if command == "weights":
        st = assemble_stencil(_config(o))
        print(f"c={st.config.c:.12g} G_inf={st.g_inf:.12g} w00={st.w[0, 0]:.12g} "
              f"dominance_gap={st.dominance_gap():.12g}")
        if o["out"] is not None:
            st.to_csv(o["out"])
        return EXIT_OK
    if command == "apply":
        cfg = _config(o)
        op = build_fast_operator(assemble_stencil(cfg))
        bu = op.matvec(GridFunction.sample(tf.value, cfg.n, cfg.l).values)
        f = source_term(tf, cfg, cache_dir=o["cache_dir"]).values
        print(f"max |Bu - f| = {np.max(np.abs(bu - f)):.6e}")
        if o["out"] is not None:
            with Path(o["out"]).open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["p", "q", "Bu", "f"])
                for (p, q), v in np.ndenumerate(bu):
                    writer.writerow([p + 1, q + 1, repr(float(v)), repr(float(f[p, q]))])
        return EXIT_OK
    if command == "solve":
        cfg = _config(o)
        op = build_fast_operator(assemble_stencil(cfg))
        if o["rhs"] == "one":
            rhs = GridFunction(cfg.n, np.ones((cfg.n - 1, cfg.n - 1)))
        else:
            rhs = source_term(tf, cfg, cache_dir=o["cache_dir"])
        rep = cg_solve(op, rhs, tol=o["tol"])
        print(f"iterations={rep.iterations} residual={rep.final_relative_residual:.3e} "
              f"converged={rep.converged}")
        if o["out"] is not None:
            _write_xyu(o["out"], cfg.n, cfg.l, rep.solution.values)
        return EXIT_OK if rep.converged else EXIT_NUMERIC
    if command == "truncation":
        t = truncation_study(o["beta"], o["lam"], o["gamma"], o["levels"], tf, o["l"], o["norm"],
                             o["constant"], o["cache_dir"])
        return _emit_table(t, o)
    if command == "poisson":
        t = poisson_study(o["beta"], o["lam"], o["gamma"], tf, o["levels"], o["l"], o["tol"],
                          o["norm"], o["constant"], o["cache_dir"])
        return _emit_table(t, o)
    if command == "selfconv":
        t = self_convergence_study(o["beta"], o["lam"], o["gamma"], o["levels"], o["l"], o["tol"],
                                   o["norm"], o["constant"])
        return _emit_table(t, o)
    if command == "exittime":
        n = o["n"] or 128
        field = exit_time_field(o["beta"], o["lam"], o["gamma"], n, o["l"], o["tol"], o["out"],
                                o["constant"])
        print(f"n={n} max={field.values.max():.6e}"
              + (f" center={center_value(field):.6e}" if n % 2 == 0 else ""))
        return EXIT_OK
    if command == "bench":
        rows = []
        for n in o["levels"]:
            op = build_fast_operator(assemble_stencil(_config(o, n)))
            u = np.random.default_rng(0).standard_normal((n - 1) ** 2)
            op.matvec(u)
            reps = 5
            t0 = time.perf_counter()
            for _ in range(reps):
                op.matvec(u)
            dt = (time.perf_counter() - t0) / reps
            rows.append((n, dt))
            print(f"n={n:5d} apply={dt * 1e3:9.3f} ms")
        if o["out"] is not None:
            with Path(o["out"]).open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["n", "seconds"])
                writer.writerows(rows)
        return EXIT_OK
    raise UsageError(f"unknown command {command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        opts = resolve(ns)
        _config(opts)  # validate parameters up front
        return run(opts, ns.command)
    except (UsageError, ValueError, MemoryError) as exc:
        print(f"tflap: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"tflap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
