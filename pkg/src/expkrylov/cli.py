"""Command-line harness: convergence and work-precision sweeps, verification, tables.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numeric instability.
"""
import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kvformat
from .bseries import REFERENCE_COEFFICIENTS, TW_TREES, classify_order, exact_solution_bseries, scheme_bseries
from .checks import bseries_checks, lemma_checks, tableau_checks
from .errors import CacheCorruptionError, ExpKError, InstabilityError, UnknownSchemeError
from .integrators import AdaptiveKrylov, SchemeSpec, integrate, rk4_integrate
from .problems import PROBLEMS, make_problem
from .tableaux import ExpKTableau, check_expk_order4, expk4_tableau, expk4_tableau_as_printed

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_UNSTABLE = 0, 1, 2, 3

CSV_COLUMNS = ("method", "variant", "h", "error", "wall_s",
               "f_evals", "jv_products", "arnoldi_vectors", "phi_evals")

# Krylov dimension for ktype / sp / expK runs, keyed by (problem, grid size).
DEFAULT_M = {
    ("lorenz96", 40): 5,
    ("shallow_water", 32): 10,
    ("allen_cahn", 50): 20,
}
FALLBACK_M = {"lorenz96": 5, "shallow_water": 10, "allen_cahn": 20}

# Step counts per interval for the default sweeps.
DEFAULT_STEPS = {
    "lorenz96": (20, 40, 80, 160),
    "shallow_water": (10, 20, 40, 80),
    "allen_cahn": (10, 20, 40, 80),
}

REFERENCE = {
    "lorenz96": ("rk4", 100),
    "shallow_water": ("rk4", 100),
    "allen_cahn": ("exp4", 20),
}
REFERENCE_TOL = 1e-12


class UsageError(ExpKError):
    pass


def default_krylov_dim(problem_name, params):
    size = params.get("N") or params.get("nx") or params.get("n")
    return DEFAULT_M.get((problem_name, size), FALLBACK_M.get(problem_name, 20))


@dataclass(frozen=True)
class RunRecord:
    method: str
    variant: str
    h: float
    error: float
    wall_s: float
    f_evals: int
    jv_products: int
    arnoldi_vectors: int
    phi_evals: int

    def row(self):
        return [self.method, self.variant, repr(self.h), f"{self.error:.16e}", f"{self.wall_s:.6f}",
                self.f_evals, self.jv_products, self.arnoldi_vectors, self.phi_evals]


@dataclass
class RunConfig:
    problem: str = "lorenz96"
    params: dict = field(default_factory=dict)
    methods: tuple = ("expK",)
    variant: str = None
    M: int = None
    adaptive: AdaptiveKrylov = AdaptiveKrylov()
    h_list: tuple = None
    tspan: tuple = None
    out: str = None
    seed: int = 0
    no_timing: bool = False
    cache_dir: str = None

    def schemes(self):
        if not self.methods:
            raise UsageError("no methods selected")
        M = self.M or default_krylov_dim(self.problem, self.params)
        out = []
        for name in self.methods:
            if self.variant and name in ("exp4", "erow4"):
                suffix = {"standard": "", "ktype": "k", "sp": "sp"}.get(self.variant)
                if suffix is None:
                    raise UsageError(f"unknown variant {self.variant!r}")
                name += suffix
            out.append(SchemeSpec.parse(name, M=M, adaptive=self.adaptive))
        return out


def _number(text):
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _number_list(text):
    return tuple(_number(x) for x in text.split(",") if x.strip())


def _param_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def load_config(path):
    """Read a key=value run file (``problem.name``, ``scheme.M``, ``run.h_list``, ...)."""
    kv = kvformat.load(path)
    cfg = RunConfig()
    adaptive = {}
    for key, val in kv.items():
        section, _, name = key.partition(".")
        if key == "problem.name":
            cfg.problem = val
        elif section == "problem":
            cfg.params[name] = _param_value(val)
        elif key == "scheme.method":
            cfg.methods = tuple(x.strip() for x in val.split(",") if x.strip())
        elif key == "scheme.variant":
            cfg.variant = val
        elif key == "scheme.M":
            cfg.M = int(val)
        elif key in ("scheme.m_min", "scheme.m_max"):
            adaptive[name] = int(val)
        elif key == "scheme.tol":
            adaptive["tol"] = float(val)
        elif key == "run.h_list":
            cfg.h_list = _number_list(val)
        elif key == "run.tspan":
            cfg.tspan = _number_list(val)
        elif key == "run.out":
            cfg.out = val
        elif key == "run.seed":
            cfg.seed = int(val)
        elif key == "run.no_timing":
            cfg.no_timing = val.lower() in ("1", "true", "yes")
        elif key == "run.cache_dir":
            cfg.cache_dir = val
        else:
            raise UsageError(f"unknown config key {key!r}")
    if adaptive:
        cfg.adaptive = replace(cfg.adaptive, **adaptive)
    return cfg


def build_problem(cfg):
    if cfg.problem not in PROBLEMS:
        raise UsageError(f"unknown problem {cfg.problem!r}; choose from {sorted(PROBLEMS)}")
    params = dict(cfg.params)
    if cfg.tspan is not None:
        if len(cfg.tspan) != 2 or cfg.tspan[1] <= cfg.tspan[0]:
            raise UsageError("tspan must be 't0,tF' with tF > t0")
        params["tspan"] = tuple(cfg.tspan)
    try:
        return make_problem(cfg.problem, **params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {cfg.problem}: {exc}") from None


def step_sizes(cfg, problem):
    t0, tF = problem.tspan
    hs = cfg.h_list or tuple((tF - t0) / n for n in DEFAULT_STEPS[cfg.problem])
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise UsageError("step sizes must be strictly decreasing")
    for h in hs:
        n = round((tF - t0) / h)
        if h <= 0 or n < 1 or abs(n * h - (tF - t0)) > 1e-9 * (tF - t0):
            raise UsageError(f"step size {h!r} does not divide [{t0}, {tF}]")
    return hs


# -- reference solutions -----------------------------------------------------
def _cache_dir(cfg):
    return Path(cfg.cache_dir or os.environ.get("EXPKRYLOV_CACHE", ".expkrylov_cache"))


def reference_key(problem, h_ref, method):
    payload = {"problem": problem.name, "params": problem.params, "tspan": problem.tspan,
               "h_ref": repr(h_ref), "method": method,
               "tol": REFERENCE_TOL if method != "rk4" else None}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _read_cached(path, dim):
    try:
        with np.load(path) as data:
            y = np.array(data["y"])
            digest = str(data["digest"])
    except Exception as exc:
        raise CacheCorruptionError(f"unreadable cache file {path}: {exc}") from None
    if y.shape != (dim,) or hashlib.sha256(y.tobytes()).hexdigest() != digest:
        raise CacheCorruptionError(f"cache file {path} failed its integrity check")
    return y


def _write_cached(path, y):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, y=y, digest=hashlib.sha256(y.tobytes()).hexdigest())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def reference_solution(problem, h_min, cache_dir=None):
    """Endpoint of a fine reference run, cached on disk by a content hash."""
    kind = next((k for k in REFERENCE if problem.name.startswith(k)), None)
    if kind is None:
        raise UsageError(f"no reference recipe for problem {problem.name!r}")
    method, divisor = REFERENCE[kind]
    h_ref = h_min / divisor
    t0, tF = problem.tspan
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"ref-{reference_key(problem, h_ref, method)}.npz"
        if path.exists():
            try:
                return _read_cached(path, problem.dim)
            except CacheCorruptionError as exc:
                print(f"warning: {exc}; recomputing", file=sys.stderr)
    y0 = problem.initial_state()
    if method == "rk4":
        y = rk4_integrate(problem, h_ref, t0, tF, y0)
    else:
        spec = SchemeSpec.parse(method, adaptive=AdaptiveKrylov(4, 400, REFERENCE_TOL))
        y, _ = integrate(problem, spec, h_ref, t0, tF, y0)
    if path is not None:
        _write_cached(path, y)
    return y


# -- sweeps ------------------------------------------------------------------
def run_sweep(cfg):
    """Run every (method, h) pair; returns (problem, list of RunRecord)."""
    problem = build_problem(cfg)
    schemes = cfg.schemes()
    hs = step_sizes(cfg, problem)
    ref = reference_solution(problem, min(hs), _cache_dir(cfg))
    ref_norm = np.linalg.norm(ref)
    t0, tF = problem.tspan
    y0 = problem.initial_state()
    records = []
    for scheme in schemes:
        for h in hs:
            y, st = integrate(problem, scheme, h, t0, tF, y0)
            records.append(RunRecord(scheme.name, scheme.variant, h,
                                     float(np.linalg.norm(y - ref) / ref_norm),
                                     0.0 if cfg.no_timing else st.wall_time,
                                     st.f_evals, st.jv_products, st.arnoldi_vectors, st.phi_evals))
    return problem, records


def observed_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[keep]), np.log(errors[keep]), 1)[0])


def write_csv(records, out):
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())

    if out in (None, "-"):
        emit(sys.stdout)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            emit(fh)


def _by_method(records):
    groups = {}
    for r in records:
        groups.setdefault(r.method, []).append(r)
    return groups


def cmd_converge(cfg, stream=None):
    stream = stream or sys.stdout
    if cfg.h_list is not None and len(cfg.h_list) < 3:
        raise UsageError("a convergence study needs at least 3 step sizes")
    _, records = run_sweep(cfg)
    write_csv(records, cfg.out)
    report = sys.stderr if cfg.out in (None, "-") else stream
    slopes = {}
    for name, rs in _by_method(records).items():
        slopes[name] = observed_order([r.h for r in rs], [r.error for r in rs])
        print(f"{name:8s} {rs[0].variant:8s} observed order {slopes[name]:.2f}", file=report)
    return slopes


def cmd_workprec(cfg):
    _, records = run_sweep(cfg)
    write_csv(records, cfg.out)
    return records


def cmd_verify(suite="all", seed=0, fault=None, stream=None):
    """Run the verification suites; returns the exit code."""
    stream = stream or sys.stdout
    tab = expk4_tableau()
    if fault:
        key, _, value = fault.partition("=")
        kv = kvformat.loads(tab.dumps())
        if key not in kv:
            raise UsageError(f"cannot inject fault into unknown key {key!r}")
        kv[key] = value
        tab = ExpKTableau.loads(kvformat.dumps(kv.items()))
    results = []
    if suite in ("all", "tableaux"):
        results += tableau_checks(tab)
    if suite in ("all", "bseries"):
        results += bseries_checks()
        print_reference_table(stream)
    if suite in ("all", "lemmas"):
        results += lemma_checks(seed)
    for r in results:
        print(r.line(), file=stream)
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"verification failed: first failing check is {failed[0].name}", file=stream)
        return EXIT_VERIFY
    return EXIT_OK


def print_reference_table(stream=None):
    """CSV of the four single-projection columns next to the exact solution."""
    stream = stream or sys.stdout
    names = list(REFERENCE_COEFFICIENTS)
    exact = exact_solution_bseries()
    cols = {n: scheme_bseries(n) for n in names}
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["tree", "elementary_differential"] + names + ["exact"])
    for t in TW_TREES:
        w.writerow([t.id, t.label] + [str(cols[n][t.id]) for n in names] + [str(exact[t.id])])


def cmd_bseries(method, M=4, stream=None):
    stream = stream or sys.stdout
    if method is None:
        print_reference_table(stream)
        return EXIT_OK
    a = scheme_bseries(method)
    exact = exact_solution_bseries()
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["tree", "elementary_differential", method, "exact"])
    for t in TW_TREES:
        w.writerow([t.id, t.label, str(a[t.id]), str(exact[t.id])])
    print(f"# order with Krylov dimension M={M}: {classify_order(a, M)}", file=stream)
    return EXIT_OK


def cmd_tableau(check=None, as_printed=False, stream=None):
    stream = stream or sys.stdout
    if check:
        tab = ExpKTableau.loads(Path(check).read_text())
    else:
        tab = expk4_tableau_as_printed() if as_printed else expk4_tableau()
        stream.write(tab.dumps())
    if tab.s != 4:
        print(f"{tab.s}-stage tableau: only the four-stage conditions are tabulated", file=stream)
        return EXIT_OK
    report = check_expk_order4(tab)
    for label, r in report:
        print(f"# condition ({label}): residual {r}", file=stream)
    return EXIT_OK if report.passed else EXIT_VERIFY


# -- argument handling ---------------------------------------------------------
def _add_run_args(p):
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--method", help="comma-separated method ids (expK, exp4, exp4k, erow4sp, ...)")
    p.add_argument("--variant", choices=("standard", "ktype", "sp"),
                   help="variant applied to bare exp4 / erow4 ids")
    p.add_argument("--M", type=int, help="fixed Krylov dimension for expK and ktype/sp variants")
    p.add_argument("--h-list", help="comma-separated step sizes; 'a/b' fractions allowed")
    p.add_argument("--tspan", help="'t0,tF'")
    p.add_argument("--out", help="CSV output path ('-' or omitted: stdout)")
    p.add_argument("--config", help="key=value run file")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-timing", action="store_true", help="write wall_s as 0 for reproducible CSVs")
    p.add_argument("--cache-dir", help="reference-solution cache directory")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="problem parameter, e.g. nx=64 or F=8")


def build_parser():
    parser = argparse.ArgumentParser(prog="expkrylov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    conv = sub.add_parser("converge", help="observed orders over a step-size sweep")
    _add_run_args(conv)
    wp = sub.add_parser("workprec", help="work-precision sweep to CSV")
    _add_run_args(wp)
    ver = sub.add_parser("verify", help="order conditions, B-series table and lemma checks")
    ver.add_argument("--suite", choices=("all", "tableaux", "bseries", "lemmas"), default="all")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--inject-fault", nargs="?", const="b.1=1/5", default=None,
                     help=argparse.SUPPRESS)
    bs = sub.add_parser("bseries", help="B-series coefficients of a scheme")
    bs.add_argument("--method", help="scheme id; omitted prints the four-column comparison table")
    bs.add_argument("--M", type=int, default=4)
    tb = sub.add_parser("tableau", help="print or check an exponential-K tableau")
    tb.add_argument("--check", metavar="FILE", help="key=value tableau file to check")
    tb.add_argument("--as-printed", action="store_true",
                    help="show the variant with alpha_32 = +1/80")
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.problem:
        if args.problem != cfg.problem:
            cfg.params = {}
        cfg.problem = args.problem
    for item in args.param:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        cfg.params[key] = _param_value(val)
    if args.method is not None:
        cfg.methods = tuple(x.strip() for x in args.method.split(",") if x.strip())
    elif args.command == "workprec" and not args.config:
        cfg.methods = ("expK", "exp4", "exp4k", "erow4")
    for attr in ("variant", "M", "out", "seed", "cache_dir"):
        if getattr(args, attr) is not None:
            setattr(cfg, attr, getattr(args, attr))
    if args.h_list is not None:
        cfg.h_list = _number_list(args.h_list)
    if args.tspan is not None:
        cfg.tspan = _number_list(args.tspan)
    cfg.no_timing = cfg.no_timing or args.no_timing
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command in ("converge", "workprec"):
            cfg = config_from_args(args)
            (cmd_converge if args.command == "converge" else cmd_workprec)(cfg)
            return EXIT_OK
        if args.command == "verify":
            return cmd_verify(args.suite, args.seed, args.inject_fault)
        if args.command == "bseries":
            return cmd_bseries(args.method, args.M)
        return cmd_tableau(args.check, args.as_printed)
    except InstabilityError as exc:
        print(f"numeric instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (UsageError, UnknownSchemeError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
