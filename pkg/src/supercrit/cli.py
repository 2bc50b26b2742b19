"""Command-line driver.

    supercrit exponents --n 6 --p 3
    supercrit ground-state --n 6 --p 3 --out run/
    supercrit linsolve --n 6 --p 3 --source 0:gauss-1 --source 2:wave
    supercrit solve --n 6 --p 3 --mu 4 --r1 20 --lambda 0.05 --out run/
    supercrit sweep --n 6 --p 3 --lambda 0.1,0.05,0.025 --out sweep/
    supercrit verify --n 6 --p 3 --mu 4 --r1 20 --lambda 0.05 --out run/

Settings come from built-in defaults, then a key=value ``--config`` file,
then flags.  Exit codes: 0 ok, 2 bad input, 3 integration failure,
4 non-contraction, 5 ball escape, 6 residual or positivity failure.
"""

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .constants import DomainError, classify_regime, derive_exponents
from .fixedpoint import (
    BallEscape,
    FixedPointError,
    SolutionFamily,
    SolveConfig,
    SourceSpec,
    resolving_grid,
    solve,
    verify_solution,
)
from .fowler import IntegrationError, ode_residual
from .linop import (
    ContractViolation,
    LinearSolver,
    ModeExpansion,
    SolverError,
    WeightedNormConfig,
    reference_sources,
    right_inverse_residual,
)
from .persist import GroundStateCache, atomic_write, jsonl
from .radialgrid import DEFAULT_COUNT, DEFAULT_S_MAX, DEFAULT_S_MIN, RadialProfile, build_grid

log = logging.getLogger("supercrit")

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_INTEGRATION = 3
EXIT_NONCONTRACTION = 4
EXIT_BALL = 5
EXIT_RESIDUAL = 6

SOLUTION_HEADER = ["s", "r", "u", "phi"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 6
    p: float = 3.0
    sigma: float | None = None
    smin: float = DEFAULT_S_MIN
    smax: float = DEFAULT_S_MAX
    points: int = DEFAULT_COUNT
    kmax: int = 0
    mu: float = 4.0
    r1: float = 20.0
    lam: tuple = (0.05,)
    rho: float = 0.1
    tol: float = 1e-10
    max_iter: int = 50
    symmetric: bool = False
    modes: tuple = ((0, 1.0),)
    sources: tuple = ()
    residual_tol: float = 1e-6
    ramp_nodes: int = 64
    jobs: int = 1
    out: str = "."
    cache_dir: str | None = None

    @property
    def exponents(self):
        return derive_exponents(self.n, self.p, self.sigma)

    @property
    def grid(self):
        return build_grid(self.smin, self.smax, self.points)

    @property
    def source(self):
        return SourceSpec(self.mu, self.r1, dict(self.modes))

    def solve_config(self, lam):
        return SolveConfig(lam, self.rho, self.tol, self.max_iter, self.symmetric, self.kmax)


# key in the config file / flag dest -> (RunConfig field, parser)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    x = float(text)
    if x != int(x):
        raise ValueError(f"not an integer: {text!r}")
    return int(x)


def _float_list(text):
    if isinstance(text, (list, tuple)):
        items = [str(t) for t in text]
    else:
        items = [text]
    out = []
    for item in items:
        out += [float(x) for x in str(item).replace(" ", "").split(",") if x]
    return tuple(out)


def _modes(text):
    pairs = []
    for item in str(text).replace(" ", "").split(","):
        if not item:
            continue
        k, _, a = item.partition(":")
        pairs.append((_int(k), float(a) if a else 1.0))
    return tuple(pairs)


def _sources(text):
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    out = []
    for item in items:
        item = str(item).strip()
        if not item:
            continue
        k, _, name = item.partition(":")
        out.append((_int(k), name or "gauss-1"))
    return tuple(out)


KEYS = {
    "n": ("n", _int),
    "p": ("p", float),
    "sigma": ("sigma", float),
    "smin": ("smin", float),
    "smax": ("smax", float),
    "points": ("points", _int),
    "kmax": ("kmax", _int),
    "mu": ("mu", float),
    "r1": ("r1", float),
    "lambda": ("lam", _float_list),
    "rho": ("rho", float),
    "tol": ("tol", float),
    "max-iter": ("max_iter", _int),
    "symmetric": ("symmetric", _bool),
    "modes": ("modes", _modes),
    "source": ("sources", _sources),
    "residual-tol": ("residual_tol", float),
    "ramp-nodes": ("ramp_nodes", _int),
    "jobs": ("jobs", _int),
    "out": ("out", str),
    "cache-dir": ("cache_dir", str),
}


def read_config_file(path):
    """key=value lines; '#' starts a comment; keys may use '-' or '_'."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower().replace("_", "-")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        if key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = value.strip()
    return values


def build_config(args):
    raw = read_config_file(args.config) if args.config else {}
    for key in KEYS:
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None and v is not False:
            raw[key] = v
    cfg = RunConfig()
    for key, value in raw.items():
        attr, parse = KEYS[key]
        try:
            setattr(cfg, attr, parse(value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{key}': {value!r} ({exc})") from exc
    _validate(cfg)
    return cfg


def _validate(cfg):
    def bad(key, why):
        raise ConfigError(f"invalid '{key}': {why}")

    if cfg.points < 64:
        bad("points", "need at least 64 nodes")
    if not cfg.smin < 0 < cfg.smax:
        bad("smin" if cfg.smin >= 0 else "smax", "grid must contain r = 1 (smin < 0 < smax)")
    if cfg.kmax < 0:
        bad("kmax", "must be >= 0")
    if not 0 < cfg.rho < 1:
        bad("rho", "must lie in (0, 1)")
    if not cfg.tol > 0:
        bad("tol", "must be positive")
    if cfg.max_iter < 1:
        bad("max-iter", "must be >= 1")
    if not cfg.r1 > 0:
        bad("r1", "must be positive")
    if any(not lam > 0 for lam in cfg.lam):
        bad("lambda", "must be positive")
    if cfg.jobs < 1:
        bad("jobs", "must be >= 1")
    if cfg.ramp_nodes < 0:
        bad("ramp-nodes", "must be >= 0")
    for k, a in cfg.modes:
        if k < 0:
            bad("modes", f"negative mode index {k}")
    try:
        e = cfg.exponents
    except DomainError as exc:
        key = "sigma" if "sigma" in str(exc) else ("n" if "n=" in str(exc) or "dimension" in str(exc) else "p")
        raise ConfigError(f"invalid '{key}': {exc}") from exc
    return e


# -- helpers ----------------------------------------------------------------


def _out(cfg, name):
    return Path(cfg.out) / name


def _ground_state(cfg, grid=None):
    cache = GroundStateCache.resolve(cfg.cache_dir)
    gs, hit = cache.ground_state(cfg.exponents, cfg.grid if grid is None else grid)
    log.info("ground state %s", "from cache" if hit else "computed")
    return gs


def _fmt(x):
    return repr(float(x))


def solution_csv(fam):
    """Rows in the ground-state frame: s = log r, u = w + phi_0, phi = phi_0."""
    g = fam.gs.grid
    psi = fam.psi(0).values
    phi = fam.phi.mode(0).values
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SOLUTION_HEADER)
    for row in zip(g.nodes, g.r_nodes, psi, phi):
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_solution_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != SOLUTION_HEADER:
        raise ConfigError(f"unexpected solution header {rows[0] if rows else None}")
    data = np.array(rows[1:], dtype=float)
    return data[:, 0], data[:, 3]


def _status_code(report, residual_tol):
    if report.status == BallEscape.reason:
        return EXIT_BALL
    if report.status in ("non-contraction", "max_iter exceeded"):
        return EXIT_NONCONTRACTION
    if not report.positivity_ok or not report.pde_residual_starstar <= residual_tol:
        return EXIT_RESIDUAL
    return EXIT_OK


def _solve_one(cfg, lam):
    """One full solve; returns (exit code, report, csv text or None)."""
    src = cfg.source
    base = cfg.grid
    grid = resolving_grid(base, src, cfg.ramp_nodes) if cfg.ramp_nodes else base
    gs = _ground_state(cfg, grid)
    e = gs.exponents
    ncfg = WeightedNormConfig.for_exponents(e)
    fam, report = solve(gs, src, cfg.solve_config(lam), cfg.residual_tol, ncfg)
    code = _status_code(report, cfg.residual_tol)
    if code == EXIT_RESIDUAL and report.status == "converged":
        report.status = "residual criterion failed" if report.positivity_ok else "positivity failed"
    return code, report, solution_csv(fam)


# -- subcommands ------------------------------------------------------------


def cmd_exponents(cfg):
    e = cfg.exponents
    regime = classify_regime(e)
    rows = [
        ("n", e.n),
        ("p", e.p),
        ("m", e.m),
        ("alpha", e.alpha),
        ("beta", e.beta),
        ("L", e.L),
        ("sigma", e.sigma),
        ("p_serrin", e.p_serrin),
        ("p_mode1", e.p_mode1),
        ("p_c", e.p_c),
        ("lambda2", "undefined" if e.lambda2 is None else e.lambda2),
        ("regime", regime.value),
    ]
    for key, value in rows:
        text = f"{value:.12g}" if isinstance(value, float) else str(value)
        print(f"{key:<9} {text}")
    return EXIT_OK


def cmd_ground_state(cfg):
    gs = _ground_state(cfg)
    path = _out(cfg, "ground_state.csv")
    atomic_write(path, gs.profile.to_csv())
    res = float(np.max(ode_residual(gs)))
    e = gs.exponents
    print(
        f"n={e.n} p={e.p:g} L_measured={gs.L_measured:.10g} L={e.L:.10g} "
        f"max_weighted_residual={res:.3e} points={gs.grid.count} csv={path}"
    )
    return EXIT_OK


def cmd_linsolve(cfg):
    gs = _ground_state(cfg)
    e = gs.exponents
    g = gs.grid
    ncfg = WeightedNormConfig.for_exponents(e)
    sources = cfg.sources or ((0, "gauss-1"),)
    coeffs = {}
    for k, name in sources:
        family = dict(reference_sources(k, g, e.m))
        if name not in family:
            raise ConfigError(f"invalid 'source': unknown profile {name!r}; choose from {sorted(family)}")
        coeffs[k] = coeffs[k] + family[name] if k in coeffs else family[name]
    kmax = max(cfg.kmax, *coeffs)
    solver = LinearSolver(gs, ncfg, symmetric=cfg.symmetric)
    records = []
    for k in sorted(coeffs):
        h = ModeExpansion.single(k, coeffs[k], e.n, kmax)
        phi = solver(h)
        res = right_inverse_residual(h, phi, gs, ncfg)
        atomic_write(_out(cfg, f"linsolve_mode{k}.csv"), phi.mode(k).to_csv())
        records.append(
            {
                "k": k,
                "starstar_in": phi.info["starstar_in"],
                "star_out": phi.info["star_out"],
                "residual": res,
                "C_k": phi.info["C_T"],
            }
        )
    atomic_write(_out(cfg, "linsolve.jsonl"), jsonl(records))
    for r in records:
        print(f"k={r['k']} ||h||_**={r['starstar_in']:.4e} ||phi||_*={r['star_out']:.4e} "
              f"residual={r['residual']:.2e} C_k={r['C_k']:.4f}")
    return EXIT_OK


def cmd_solve(cfg):
    if len(cfg.lam) != 1:
        raise ConfigError("invalid 'lambda': solve takes one value (use sweep for several)")
    code, report, text = _solve_one(cfg, cfg.lam[0])
    atomic_write(_out(cfg, "solution.csv"), text)
    atomic_write(_out(cfg, "report.jsonl"), report.to_json() + "\n")
    print(
        f"status={report.status} iterations={report.iterations} "
        f"phi_star={report.phi_star_norm:.3e} residual={report.pde_residual_starstar:.3e} "
        f"positive={report.positivity_ok} skipped_modes={report.skipped_modes}"
    )
    return code


def _sweep_worker(args):
    cfg, lam = args
    try:
        code, report, _ = _solve_one(cfg, lam)
        return code, report.to_json(), report.u_sup_on_annulus, report.status
    except (IntegrationError, SolverError) as exc:
        return EXIT_INTEGRATION, None, math.nan, f"integration failure: {exc}"


def cmd_sweep(cfg):
    lams = []
    for lam in cfg.lam:
        if lam in lams:
            log.warning("duplicate lambda %g dropped", lam)
            continue
        lams.append(lam)
    if not lams:
        raise ConfigError("invalid 'lambda': empty list")
    tasks = [(cfg, lam) for lam in lams]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    lines = []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda", "u_sup_on_annulus", "exit_code", "status"])
    for lam, (code, line, sup, status) in zip(lams, results):
        lines.append(line if line is not None else f'{{"lam": {lam!r}, "status": "{status}"}}')
        writer.writerow([_fmt(lam), _fmt(sup), code, status])
        print(f"lambda={lam:g} exit={code} sup_annulus={sup:.6g} status={status}")
    atomic_write(_out(cfg, "sweep.jsonl"), jsonl(lines))
    atomic_write(_out(cfg, "sweep.csv"), buf.getvalue())
    sups = [r[2] for r in results]
    ordered = sorted(zip(lams, sups), reverse=True)
    trend = all(b < a for (_, a), (_, b) in zip(ordered, ordered[1:]))
    print(f"annulus sup strictly decreasing as lambda decreases: {trend}")
    failures = [r[0] for r in results if r[0] != EXIT_OK]
    return failures[0] if failures else EXIT_OK


def cmd_verify(cfg, input_path=None):
    """Re-check a solution.csv written by ``solve`` against the same settings."""
    if len(cfg.lam) != 1:
        raise ConfigError("invalid 'lambda': verify takes one value")
    path = Path(input_path) if input_path else _out(cfg, "solution.csv")
    try:
        s, phi0 = read_solution_csv(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    grid = build_grid(s[0], s[-1], len(s))
    if not np.allclose(grid.nodes, s, rtol=0, atol=1e-12):
        raise ConfigError(f"{path}: s column is not a uniform grid")
    gs = _ground_state(cfg, grid)
    prof = RadialProfile.from_function(grid, lambda r: phi0)
    phi = ModeExpansion.single(0, prof, gs.exponents.n)
    fam = SolutionFamily(gs, phi, cfg.lam[0])
    report = verify_solution(fam, cfg.source, cfg.solve_config(cfg.lam[0]))
    report.grid_points = grid.count
    ok = report.positivity_ok and report.pde_residual_starstar <= cfg.residual_tol
    report.status = "verified" if ok else ("positivity failed" if not report.positivity_ok else "residual criterion failed")
    atomic_write(_out(cfg, "verify.jsonl"), report.to_json() + "\n")
    print(f"status={report.status} residual={report.pde_residual_starstar:.3e} "
          f"phi_star={report.phi_star_norm:.3e} positive={report.positivity_ok}")
    return EXIT_OK if ok else EXIT_RESIDUAL


COMMANDS = {
    "exponents": cmd_exponents,
    "ground-state": cmd_ground_state,
    "linsolve": cmd_linsolve,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=str, help="dimension (default 6)")
    common.add_argument("--p", type=str, help="exponent (default 3)")
    common.add_argument("--sigma", type=str, help="inner weight exponent (default m)")
    common.add_argument("--smin", type=str, help="grid start in s = log r (default -12)")
    common.add_argument("--smax", type=str, help="grid end in s (default 12)")
    common.add_argument("--points", type=str, help="grid nodes (default 4801)")
    common.add_argument("--kmax", type=str, help="highest angular mode kept (default 0)")
    common.add_argument("--mu", type=str, help="source decay exponent, > 2+m (default 4)")
    common.add_argument("--r1", type=str, help="source ramp radius (default 20)")
    common.add_argument("--lambda", dest="lambda", action="append", help="scale, value or comma list (default 0.05)")
    common.add_argument("--rho", type=str, help="contraction ball radius (default 0.1)")
    common.add_argument("--tol", type=str, help="Picard step tolerance (default 1e-10)")
    common.add_argument("--max-iter", type=str, help="Picard step cap (default 50)")
    common.add_argument("--symmetric", action="store_true", default=None, help="radial symmetry, mode 1 off")
    common.add_argument("--modes", type=str, help="source amplitudes, e.g. 0:1,2:0.1")
    common.add_argument("--source", action="append", help="linsolve input k:name, repeatable")
    common.add_argument("--residual-tol", type=str, help="PDE residual gate (default 1e-6)")
    common.add_argument("--ramp-nodes", type=str, help="min nodes across the source ramp (0: no refinement)")
    common.add_argument("--jobs", type=str, help="sweep worker processes (default 1)")
    common.add_argument("--config", type=str, help="key=value file, flags override it")
    common.add_argument("--out", type=str, help="output directory (default .)")
    common.add_argument("--cache-dir", type=str, help="ground-state cache (default $SUPERCRIT_CACHE_DIR)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="supercrit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "verify":
            sp.add_argument("--input", type=str, help="solution CSV (default: <out>/solution.csv)")
    return parser


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    # argparse stores '--lambda' under the key 'lambda'
    try:
        cfg = build_config(args)
        if args.command == "verify":
            return cmd_verify(cfg, args.input)
        return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (IntegrationError, SolverError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except FixedPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONTRACTION


if __name__ == "__main__":
    sys.exit(main())
