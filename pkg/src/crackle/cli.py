"""Command line front end.

Every subcommand writes its data files (CSV with a header row, or JSON with
sorted keys) into ``--out`` together with ``manifest.json``. The manifest
records the argument vector, the package version, the master seed, the
wall-clock time and a SHA-256 digest of every output; ``crackle replay
manifest.json`` re-runs the same command. Data files never contain timing
information, so identical arguments give byte-identical outputs.

Exit codes: 0 success, 1 other package error, 2 usage, 3 configuration,
4 parameter domain, 5 solver failure, 6 malformed structure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .census import (annuli_census, contractibility_event, maxima_path, palm_crosscheck,
                     partial_sum_statistic, run_replications, PalmConfig)
from .config import GRAPHS, load_config
from .distributions import derive_seed, heavy_polynomial, light_von_mises, sample_cloud
from .errors import ConfigError, CrackleError, ParameterError, SolverError, StructureError
from .geometry import cech_complex
from .limits import StableSeriesSpec, frechet_lambda, integrate_h, stable_series_sample
from .scaling import (RnRule, contractibility_radii, heavy_closed_form, light_closed_form, solve_R)
from .topology import betti_cycle, betti_numbers, connected, gamma_iso

EXIT_OK, EXIT_OTHER, EXIT_USAGE, EXIT_CONFIG, EXIT_DOMAIN, EXIT_SOLVER, EXIT_STRUCTURE = 0, 1, 2, 3, 4, 5, 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ output helpers


class Outputs:
    def __init__(self, directory: str):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files.append(path)
        return path

    def write_csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        return self.write_text(name, buf.getvalue())

    def write_json(self, name: str, payload) -> Path:
        return self.write_text(name, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")

    def manifest(self, argv, seed, elapsed: float, config_echo=None) -> Path:
        entries = []
        for path in self.files:
            entries.append({"path": path.name, "sha256": hashlib.sha256(path.read_bytes()).hexdigest()})
        payload = {"tool": "crackle", "version": __version__, "argv": list(argv), "seed": seed,
                   "config": config_echo, "wall_clock_seconds": round(elapsed, 6), "outputs": entries}
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ------------------------------------------------------------------ shared options


def _add_density(p, default_family="heavy_polynomial"):
    p.add_argument("--family", choices=["heavy_polynomial", "light_von_mises"], default=default_family)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--dim", type=int, default=1)


def _density(args):
    if args.family == "heavy_polynomial":
        if args.alpha is None:
            raise ParameterError("--alpha is required for heavy_polynomial")
        return heavy_polynomial(args.alpha, args.dim)
    if args.tau is None:
        raise ParameterError("--tau is required for light_von_mises")
    return light_von_mises(args.tau, args.dim)


def _add_rn(p):
    p.add_argument("--rn-rule", choices=["constant", "power", "log_power"], default="constant")
    p.add_argument("--rn-exponent", type=float, default=0.0)
    p.add_argument("--rn-scale", type=float, default=1.0)


def _rn(args) -> RnRule:
    return RnRule(args.rn_rule, args.rn_exponent, args.rn_scale)


def _constraint(kind: str, k: int, graph: str = "path"):
    if kind == "connected":
        return connected(k)
    if kind == "betti_cycle":
        return betti_cycle(k)
    if kind == "gamma_iso":
        return gamma_iso(GRAPHS[graph](k))
    raise ParameterError(f"unknown constraint {kind!r}")


def _add_constraint(p):
    p.add_argument("--constraint", choices=["connected", "betti_cycle", "gamma_iso"], default="connected")
    p.add_argument("--graph", choices=sorted(GRAPHS), default="path")


# ------------------------------------------------------------------ subcommands


def cmd_sample(args, out: Outputs):
    density = _density(args)
    cloud = sample_cloud(args.n, density, args.seed)
    header = [f"x{i + 1}" for i in range(density.dim)]
    out.write_csv("points.csv", header, cloud.points.tolist())
    out.write_json("sample.json", {"n": args.n, "count": len(cloud), "seed": args.seed,
                                   "density": density.describe()})


def cmd_solve_scaling(args, out: Outputs):
    density = _density(args)
    rule = _rn(args)
    rows = []
    for n in args.n:
        r_n = rule(n)
        sol = solve_R(n, args.k, density, r_n, args.scale_C)
        if args.family == "heavy_polynomial":
            closed = heavy_closed_form(n, args.k, args.dim, density, r_n, args.scale_C)
        else:
            closed = light_closed_form(n, args.k, args.dim, density, r_n, args.scale_C)
        rows.append([n, args.k, r_n, sol.R_kn, sol.c_kn, sol.d_kn, closed, sol.residual])
    out.write_csv("scaling.csv", ["n", "k", "r_n", "R_kn", "c_kn", "d_kn", "closed_form", "residual"], rows)


def cmd_integrate_h(args, out: Outputs):
    constraint = _constraint(args.constraint, args.k, args.graph)
    est, se = integrate_h(constraint, args.k, args.dim, args.mc_samples, args.seed)
    out.write_json("integral.json", {"constraint": constraint.describe(), "dim": args.dim,
                                     "estimate": est, "stderr": se, "mc_samples": args.mc_samples,
                                     "seed": args.seed})


def cmd_census(args, out: Outputs):
    config = load_config(args.config)
    report = run_replications(config, workers=args.workers)
    out.write_csv("counts.csv", ["replication", "n", "k", "count", "R_kn", "seed"],
                  [[r["replication"], r["n"], r["k"], r["count"], r["R_kn"], r["seed"]] for r in report.rows])
    out.write_json("report.json", {"tool_version": __version__, "config": report.config,
                                   "summaries": report.summaries})
    return config


def _read_points(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path} is empty")
    return np.array([[float(x) for x in row] for row in rows[1:]], dtype=float).reshape(len(rows) - 1, -1)


def cmd_betti(args, out: Outputs):
    if args.points:
        pts = _read_points(args.points)
    else:
        pts = sample_cloud(args.n, _density(args), args.seed).points
    cx = cech_complex(pts, args.r, args.max_dim)
    betti = betti_numbers(cx, args.max_dim)
    counts = [cx.count(p) for p in range(args.max_dim + 1)]
    out.write_json("betti.json", {"num_points": int(len(pts)), "r": args.r, "max_dim": args.max_dim,
                                  "simplex_counts": counts, "betti": list(betti.betti),
                                  "euler_characteristic": cx.euler_characteristic()})


def cmd_maxima(args, out: Outputs):
    config = load_config(args.config)
    density, constraint, rule = config.density(), config.constraint(), config.rn()
    t_grid = np.linspace(0.0, 1.0, args.t_points)
    end_rows, path_rows, ks = [], [], []
    for g, n in enumerate(config.n_grid):
        sol = solve_R(n, config.k, density, rule(n))
        ends = []
        for rep in range(config.replications):
            seed = derive_seed(config.seed, g, rep)
            path = maxima_path(sample_cloud(n, density, seed), config.k, constraint, rule(n), sol, t_grid)
            ends.append(path.endpoint)
            end_rows.append([rep, n, seed, path.endpoint])
            path_rows += [[t, v, f"n={n:g}/rep={rep}"] for t, v in zip(t_grid, path.values)]
        if density.family.value == "heavy_polynomial":
            H, _ = integrate_h(constraint, config.k, config.dim, config.mc_samples, derive_seed(config.seed, 10**6))
            lam = frechet_lambda(config.k, config.dim, density.alpha, H)
            beta = density.alpha * config.k - config.dim
            x = np.maximum(np.array(ends), 0.0)
            ks_stat = stats.kstest(x, lambda e: _frechet_cdf(e, lam, beta)).statistic
            ks.append({"n": n, "lambda": lam, "index": beta, "ks_distance": float(ks_stat)})
    out.write_csv("maxima.csv", ["replication", "n", "seed", "endpoint"], end_rows)
    out.write_csv("maxima_paths.csv", ["x", "y", "series"], path_rows)
    out.write_json("maxima.json", {"config": config.as_dict(), "frechet_fit": ks})
    return config


def _frechet_cdf(e, lam, beta):
    e = np.asarray(e, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(e > 0, np.exp(-lam * np.where(e > 0, e, 1.0) ** (-beta)), 0.0)


def cmd_sums(args, out: Outputs):
    density = heavy_polynomial(args.alpha, 1)
    constraint = connected(2)
    sol = solve_R(args.n, 2, density, 1.0)
    H, _ = integrate_h(constraint, 2, 1, 10_000, derive_seed(args.seed, 10**6))
    spec = StableSeriesSpec.from_h_integral(args.alpha, H, args.n_terms)
    rows = []
    sums, draws = [], []
    for rep in range(args.reps):
        seed = derive_seed(args.seed, 0, rep)
        s = partial_sum_statistic(sample_cloud(args.n, density, seed), 1.0, sol.R_kn, constraint)
        sums.append(s)
        rows.append(["partial_sum", rep, seed, s])
    for rep in range(args.reps):
        seed = derive_seed(args.seed, 1, rep)
        v = stable_series_sample(spec, seed)
        draws.append(v)
        rows.append(["stable_series", rep, seed, v])
    out.write_csv("sums.csv", ["series", "replication", "seed", "value"], rows)
    ks = stats.ks_2samp(sums, draws)
    out.write_json("sums.json", {"alpha": args.alpha, "n": args.n, "R_2n": sol.R_kn, "C_alpha": spec.C_alpha,
                                 "n_terms": args.n_terms, "ks_distance": float(ks.statistic),
                                 "ks_p_value": float(ks.pvalue)})


def cmd_annuli(args, out: Outputs):
    density = _density(args)
    sizes = list(range(2, args.max_size + 1))
    radii = [solve_R(args.n, m, density, args.r).R_kn for m in sizes]
    constraints = [_constraint(args.constraint, m, args.graph) for m in sizes]
    rows = []
    total = np.zeros((len(radii), len(sizes)), dtype=np.int64)
    for rep in range(args.reps):
        seed = derive_seed(args.seed, 0, rep)
        table = annuli_census(sample_cloud(args.n, density, seed), args.r, radii, constraints)
        total += table.counts
        for i, label in enumerate(table.row_labels()):
            for j, m in enumerate(sizes):
                rows.append([rep, seed, i, label, m, int(table.counts[i, j])])
    out.write_csv("annuli.csv", ["replication", "seed", "annulus", "interval", "size", "count"], rows)
    out.write_json("annuli.json", {"radii": radii, "sizes": sizes, "n": args.n, "r": args.r,
                                   "mean_counts": (total / args.reps).tolist()})


def cmd_contractibility(args, out: Outputs):
    density = light_von_mises(args.tau, args.dim)
    rule = RnRule("log_power", args.rn_exponent, args.rn_scale)
    rows = []
    for g, n in enumerate(args.n):
        r_n = rule(n)
        radii = contractibility_radii(n, density, r_n, args.delta, args.g, rule)
        row = [n, r_n, radii.R0, radii.R1, (radii.R1 - radii.R0) / r_n, radii.stronger_condition]
        if args.reps:
            cover = empty = joint = 0
            for rep in range(args.reps):
                c, e = contractibility_event(sample_cloud(n, density, derive_seed(args.seed, g, rep)),
                                             radii.R0, radii.R1, r_n)
                cover, empty, joint = cover + c, empty + e, joint + (c and e)
            row += [cover / args.reps, empty / args.reps, joint / args.reps]
        rows.append(row)
    header = ["n", "r_n", "R0", "R1", "scaled_gap", "stronger_condition"]
    if args.reps:
        header += ["p_cover", "p_empty", "p_joint"]
    out.write_csv("contractibility.csv", header, rows)


def cmd_palm_check(args, out: Outputs):
    density = _density(args)
    constraint = _constraint(args.constraint, args.k, args.graph)
    results = []
    for g, n in enumerate(args.n):
        sol = solve_R(n, args.k, density, args.r)
        res = palm_crosscheck(PalmConfig(density, n, args.k, constraint, args.r, sol.R_kn,
                                         args.reps, args.palm_samples, derive_seed(args.seed, g)))
        results.append({"n": n, "R_kn": sol.R_kn, "direct": res.direct, "direct_stderr": res.direct_stderr,
                        "palm": res.palm, "palm_stderr": res.palm_stderr,
                        "combined_stderr": res.combined_stderr, "agree_3se": res.agree()})
    out.write_json("palm.json", {"density": density.describe(), "k": args.k, "r": args.r, "results": results})


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crackle", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"crackle {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        return p

    p = add("sample", cmd_sample, "sample a Poisson cloud")
    _add_density(p)
    p.add_argument("--n", type=float, required=True)

    p = add("solve-scaling", cmd_solve_scaling, "solve for R_{k,n}")
    _add_density(p)
    _add_rn(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=float, nargs="+", required=True)
    p.add_argument("--scale-C", type=float, default=None, help="override the normalising constant")

    p = add("integrate-h", cmd_integrate_h, "Monte Carlo integral of h(0, y)")
    _add_constraint(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--mc-samples", type=int, default=200_000)

    p = add("census", cmd_census, "replicated crackle counts from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)

    p = add("betti", cmd_betti, "Betti numbers of a Čech complex")
    _add_density(p)
    p.add_argument("--points", help="CSV file with a header row; otherwise a cloud is sampled")
    p.add_argument("--n", type=float, default=50.0)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--max-dim", type=int, default=2)

    p = add("maxima", cmd_maxima, "running maxima of isolated tuples from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--t-points", type=int, default=11)

    p = add("sums", cmd_sums, "partial sums against the stable series (d = 1, k = 2)")
    p.add_argument("--alpha", type=float, default=1.3)
    p.add_argument("--n", type=float, default=1e5)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--n-terms", type=int, default=100_000)

    p = add("annuli", cmd_annuli, "isolated components by annulus")
    _add_density(p)
    _add_constraint(p)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--max-size", type=int, default=4)
    p.add_argument("--reps", type=int, default=10)

    p = add("contractibility", cmd_contractibility, "contractibility radii and coverage events")
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=float, nargs="+", required=True)
    p.add_argument("--rn-exponent", type=float, default=-0.25)
    p.add_argument("--rn-scale", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--g", type=float, default=0.5)
    p.add_argument("--reps", type=int, default=0)

    p = add("palm-check", cmd_palm_check, "direct versus Palm estimates of the mean count")
    _add_density(p)
    _add_constraint(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=float, nargs="+", default=[200.0, 500.0])
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=20_000)
    p.add_argument("--palm-samples", type=int, default=200_000)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=None)
    return parser


def _error_record(exc: BaseException, code: int) -> str:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        record.update({"line": exc.line, "field": exc.field})
    return json.dumps(record, sort_keys=True)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, StructureError):
        return EXIT_STRUCTURE
    if isinstance(exc, ParameterError):
        return EXIT_DOMAIN
    return EXIT_OTHER


def dispatch(argv) -> int:
    argv = list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.command == "replay":
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            return dispatch(manifest["argv"])
        start = time.perf_counter()
        out = Outputs(args.out)
        config = args.func(args, out)
        echo = config.as_dict() if config is not None else None
        out.manifest(argv, args.seed, time.perf_counter() - start, echo)
        return EXIT_OK
    except (UsageError, CrackleError, OSError, json.JSONDecodeError, KeyError) as exc:
        code = _exit_code(exc) if not isinstance(exc, (OSError, json.JSONDecodeError, KeyError)) else EXIT_OTHER
        print(_error_record(exc, code), file=sys.stderr)
        return code


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
