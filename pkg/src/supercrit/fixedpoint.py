"""Fixed point phi = T(N(phi) - f_lambda) and the assembled family u_lambda.

All iteration happens in the ground-state frame rho = lambda |x|, where
psi = w + phi solves Delta psi + psi^p + f_lambda(rho) = 0.  The physical
solution is u_lambda(x) = lambda^m psi(lambda x).
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import mode1_solvable
from .linop import (
    ContractViolation,
    LinearSolver,
    ModeExpansion,
    WeightedNormConfig,
    star_norm,
    starstar_norm,
)
from .radialgrid import RadialProfile, operator_matrix


class GridCoverageError(ValueError):
    pass


class FixedPointError(RuntimeError):
    reason = "failed"

    def __init__(self, message, phi=None, report=None):
        super().__init__(message)
        self.phi = phi
        self.report = report


class NonContraction(FixedPointError):
    reason = "non-contraction"


class BallEscape(FixedPointError):
    reason = "left contraction ball"


class MaxIterExceeded(FixedPointError):
    reason = "max_iter exceeded"


def smooth_ramp(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class SourceSpec:
    """f = sum_k a_k eta(r) r^(-mu) Y_k, eta rising from 0 to 1 on [R1, R1 + 1].

    ``modes`` maps degree k to the amplitude a_k.
    """

    mu: float = 4.0
    R1: float = 20.0
    modes: dict = field(default_factory=lambda: {0: 1.0})

    def __post_init__(self):
        if not self.R1 > 0:
            raise ValueError("R1 must be positive")
        for k, a in self.modes.items():
            if int(k) != k or k < 0:
                raise ValueError(f"mode index {k!r} must be a non-negative integer")
            if not math.isfinite(a):
                raise ValueError(f"amplitude of mode {k} is not finite")
        if self.modes.get(0, 0.0) < 0:
            raise ValueError("mode-0 amplitude must be >= 0 (f >= 0)")
        if sum(abs(a) for k, a in self.modes.items() if k) > self.modes.get(0, 0.0):
            raise ValueError("higher-mode amplitudes would make f negative")

    def validate(self, e):
        if not self.mu > 2 + e.m:
            raise ValueError(f"mu={self.mu} must exceed 2 + 2/(p-1) = {2 + e.m:.6g}")

    def eta(self, r):
        return smooth_ramp(np.asarray(r, dtype=float) - self.R1)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.eta(r) * r ** (-self.mu)

    @property
    def is_zero(self):
        return not any(self.modes.values())


@dataclass(frozen=True)
class SolveConfig:
    lam: float
    rho: float = 0.1
    tol: float = 1e-10
    max_iter: int = 50
    symmetric: bool = False
    kmax: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.kmax < 0:
            raise ValueError("kmax must be >= 0")


@dataclass
class SolveReport:
    n: int
    p: float
    lam: float
    mu: float
    R1: float
    rho: float
    iterations: int = 0
    contraction_ratios: list = field(default_factory=list)
    phi_star_norm: float = math.nan
    f_starstar_norm: float = math.nan
    f_bound: float = math.nan  # R1^-(mu-2-sigma) + lambda^(mu-2-m)
    f_bound_as_printed: float = math.nan  # R1^(mu-2-sigma) + lambda^(mu-2-m)
    fixed_point_residual: float = math.nan
    pde_residual_starstar: float = math.nan
    positivity_ok: bool = False
    u_sup_on_annulus: float = math.nan
    converged: bool = False
    status: str = "not run"
    skipped_modes: list = field(default_factory=list)
    C_T: float = math.nan
    grid_points: int = 0

    def to_json(self):
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None
            if isinstance(x, list):
                return [clean(y) for y in x]
            return x

        return json.dumps({k: clean(v) for k, v in asdict(self).items()}, sort_keys=True)


# -- source and nonlinearity ------------------------------------------------


def rescaled_source(src, e, lam, g, kmax=None):
    """f_lambda(r) = lambda^(-2p/(p-1)) f(r/lambda), mode by mode."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r = g.r_nodes
    if r[0] > lam * src.R1 / math.e:
        raise GridCoverageError(
            f"grid starts at r={r[0]:.3g}, above lambda*R1/e={lam * src.R1 / math.e:.3g}"
        )
    if r[-1] < lam * (src.R1 + 1) * math.e:
        raise GridCoverageError(f"grid ends at r={r[-1]:.3g}, inside the support ramp of f")
    scale = lam ** (-2.0 * e.p / (e.p - 1))
    x = r / lam
    base = scale * src.radial(x)
    eta_p = smooth_ramp_derivative(x - src.R1)
    dbase = scale / lam * (eta_p * x ** (-src.mu) - src.mu * src.eta(x) * x ** (-src.mu - 1))
    coeffs = {}
    for k, a in sorted(src.modes.items()):
        if a:
            coeffs[int(k)] = RadialProfile(g, a * base, a * dbase, tail_exponent=-src.mu)
    top = max([0, *coeffs]) if kmax is None else kmax
    return ModeExpansion(g, e.n, coeffs, top)


RAMP_NODES = 64


def resolving_grid(g, src, min_nodes=RAMP_NODES):
    """``g`` refined by a power of two until the ramp of f spans ``min_nodes`` nodes.

    The ramp occupies log(1 + 1/R1) in s whatever lambda is; at R1 = 20 that
    is under ten nodes of the default grid, too few for a 1e-6 residual.
    """
    width = math.log1p(1.0 / src.R1)
    factor = 1
    while width / (g.h / factor) < min_nodes:
        factor *= 2
    return g if factor == 1 else g.refined(factor)


def smooth_ramp_derivative(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    out = np.zeros_like(t)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    da = a / ti**2
    db = -b / (1.0 - ti) ** 2
    out[inside] = (da * b - a * db) / (a + b) ** 2
    return out


def _pos_power(x, q):
    return np.where(x > 0, np.maximum(x, 0.0) ** q, 0.0)


def nonlinear_remainder(gs, phi):
    """N(phi) = -(w + phi)^p + w^p + p w^(p-1) phi.

    Exact for mode 0.  A mode-k coefficient (k >= 1) picks up the product of
    mode 0 and mode k only, i.e. products of two higher modes are dropped.
    """
    e = gs.exponents
    g = gs.grid
    if phi.grid != g:
        raise ValueError("phi and ground state live on different grids")
    p = e.p
    w = gs.w
    phi0 = phi.mode(0).values
    base = w + phi0
    coeffs = {}
    if 0 in phi.coefficients:
        coeffs[0] = _profile(g, -_pos_power(base, p) + w**p + p * w ** (p - 1) * phi0)
    slope = p * w ** (p - 1) - p * _pos_power(base, p - 1)
    for k, prof in phi.coefficients.items():
        if k:
            coeffs[k] = _profile(g, slope * prof.values)
    return ModeExpansion(g, phi.n, coeffs, phi.kmax)


def _profile(g, values):
    # derivative info is not needed downstream of N; keep it consistent anyway
    return RadialProfile.from_function(g, lambda r: values)


# -- iteration --------------------------------------------------------------


def _check_regime(e, src, cfg):
    if src.modes.get(1, 0.0):
        if cfg.symmetric:
            raise ContractViolation("symmetric run with a nonzero mode-1 source")
        if not mode1_solvable(e):
            raise ContractViolation(
                f"p={e.p} <= (n+1)/(n-3)={e.p_mode1:.6g}: mode-1 source must vanish (use a symmetric source)"
            )


def hbar(phi, f_lam, gs, solver):
    """T(N(phi) - f_lambda)."""
    return solver(nonlinear_remainder(gs, phi) - f_lam)


def _new_report(e, src, cfg):
    return SolveReport(n=e.n, p=e.p, lam=cfg.lam, mu=src.mu, R1=src.R1, rho=cfg.rho)


def picard_solve(gs, src, cfg, norm_cfg=None, solver=None):
    """Iterate phi_{j+1} = T(N(phi_j) - f_lambda) from phi_0 = 0.

    Returns (phi, report).  Failures raise a FixedPointError subclass whose
    ``phi`` and ``report`` hold the last iterate.
    """
    e = gs.exponents
    src.validate(e)
    _check_regime(e, src, cfg)
    norm_cfg = WeightedNormConfig.for_exponents(e) if norm_cfg is None else norm_cfg
    kmax = max(cfg.kmax, *src.modes) if src.modes else cfg.kmax
    solver = LinearSolver(gs, norm_cfg, symmetric=cfg.symmetric) if solver is None else solver
    f_lam = rescaled_source(src, e, cfg.lam, gs.grid, kmax)
    report = _new_report(e, src, cfg)
    report.grid_points = gs.grid.count
    report.f_starstar_norm = starstar_norm(f_lam, norm_cfg)
    report.f_bound = src.R1 ** -(src.mu - 2 - norm_cfg.sigma) + cfg.lam ** (src.mu - 2 - e.m)
    report.f_bound_as_printed = src.R1 ** (src.mu - 2 - norm_cfg.sigma) + cfg.lam ** (src.mu - 2 - e.m)
    if cfg.symmetric or not mode1_solvable(e):
        report.skipped_modes = [1]  # lambda_1 = n - 1: the mode-1 solver is off

    phi = ModeExpansion.zeros(gs.grid, e.n, kmax)
    last_step = None
    bad_run = 0
    for j in range(1, cfg.max_iter + 1):
        new = hbar(phi, f_lam, gs, solver)
        if j == 1:
            report.C_T = new.info["C_T"]
        step = star_norm(new - phi, norm_cfg)
        phi = new
        report.iterations = j
        size = star_norm(phi, norm_cfg)
        report.phi_star_norm = size
        if last_step is not None and last_step > 0:
            ratio = step / last_step
            report.contraction_ratios.append(ratio)
            bad_run = bad_run + 1 if ratio >= 1 else 0
        if size > cfg.rho:
            report.status = BallEscape.reason
            raise BallEscape(f"||phi||_* = {size:.3e} > rho = {cfg.rho}", phi, report)
        if bad_run >= 3:
            report.status = NonContraction.reason
            raise NonContraction("three consecutive ratios >= 1", phi, report)
        if step < cfg.tol:
            report.converged = True
            report.status = "converged"
            break
        last_step = step
    else:
        report.status = MaxIterExceeded.reason
        raise MaxIterExceeded(f"no convergence in {cfg.max_iter} iterations", phi, report)

    check = hbar(phi, f_lam, gs, solver)
    report.fixed_point_residual = star_norm(check - phi, norm_cfg)
    return phi, report


# -- the assembled family ---------------------------------------------------


class SolutionFamily:
    """u_lambda(x) = lambda^m (w + phi)(lambda x), per mode."""

    def __init__(self, gs, phi, lam):
        self.gs = gs
        self.phi = phi
        self.lam = lam
        self.m = gs.exponents.m

    def psi(self, k=0):
        """w + phi in the ground-state frame (mode k)."""
        prof = self.phi.mode(k)
        return prof + self.gs.profile if k == 0 else prof

    def __call__(self, r, mode=0):
        x = self.lam * np.asarray(r, dtype=float)
        return self.lam**self.m * self.psi(mode)(x)

    def lower_bound(self, r):
        """Mode 0 minus the sum of |higher modes|: a floor for u over each sphere."""
        x = self.lam * np.asarray(r, dtype=float)
        out = self.psi(0)(x)
        for k in self.phi.modes():
            if k:
                out = out - np.abs(self.phi.mode(k)(x))
        return self.lam**self.m * out

    def upper_bound(self, r):
        x = self.lam * np.asarray(r, dtype=float)
        out = self.psi(0)(x)
        for k in self.phi.modes():
            if k:
                out = out + np.abs(self.phi.mode(k)(x))
        return self.lam**self.m * out

    def annulus_sup(self, r_in=0.5, r_out=2.0, samples=401):
        r = np.geomspace(r_in, r_out, samples)
        return float(np.max(self.upper_bound(r)))


def assemble_family(gs, phi, e, lam):
    if e is not gs.exponents and (e.n, e.p) != (gs.exponents.n, gs.exponents.p):
        raise ValueError("exponents do not match the ground state")
    return SolutionFamily(gs, phi, lam)


def pde_residual(fam, src):
    """Delta psi + psi^p + f_lambda mode by mode in the ground-state frame."""
    gs = fam.gs
    e = gs.exponents
    g = gs.grid
    phi = fam.phi
    f_lam = rescaled_source(src, e, fam.lam, g, phi.kmax)
    nl = nonlinear_remainder(gs, phi)
    coeffs = {}
    zero = np.zeros(g.count)
    for k in sorted(set(phi.modes()) | set(f_lam.modes()) | {0}):
        psi = fam.psi(k).values
        lap = operator_matrix(g, e.n, k, zero) @ psi
        if k == 0:
            powers = _pos_power(psi, e.p)
        else:
            powers = e.p * gs.w ** (e.p - 1) * psi - nl.mode(k).values
        coeffs[k] = _profile(g, lap + powers + f_lam.mode(k).values)
    return ModeExpansion(g, e.n, coeffs, max(phi.kmax, f_lam.kmax))


def verify_solution(fam, src, cfg, report=None, norm_cfg=None):
    """Fill the a-posteriori fields of ``report`` (a fresh one if None)."""
    gs = fam.gs
    e = gs.exponents
    norm_cfg = WeightedNormConfig.for_exponents(e) if norm_cfg is None else norm_cfg
    if report is None:
        report = _new_report(e, src, cfg)
        f_lam = rescaled_source(src, e, cfg.lam, gs.grid, fam.phi.kmax)
        report.f_starstar_norm = starstar_norm(f_lam, norm_cfg)
    res = pde_residual(fam, src)
    report.pde_residual_starstar = starstar_norm(res, norm_cfg)
    report.phi_star_norm = star_norm(fam.phi, norm_cfg)
    floor = fam.psi(0).values - sum(
        (np.abs(fam.phi.mode(k).values) for k in fam.phi.modes() if k), np.zeros(gs.grid.count)
    )
    report.positivity_ok = bool(np.all(floor > 0))
    report.u_sup_on_annulus = fam.annulus_sup()
    return report


def solve(gs, src, cfg, residual_tol=1e-6, norm_cfg=None, solver=None):
    """picard_solve + verify_solution.  Returns (family, report); never raises
    on a failed run, the report's ``status`` says what went wrong."""
    try:
        phi, report = picard_solve(gs, src, cfg, norm_cfg, solver)
    except FixedPointError as exc:
        report = exc.report
        fam = SolutionFamily(gs, exc.phi, cfg.lam)
        verify_solution(fam, src, cfg, report, norm_cfg)
        return fam, report
    fam = assemble_family(gs, phi, gs.exponents, cfg.lam)
    verify_solution(fam, src, cfg, report, norm_cfg)
    if not report.positivity_ok:
        report.converged = False
        report.status = "positivity failed"
    elif not report.pde_residual_starstar <= residual_tol:
        report.status = "residual criterion failed"
    return fam, report
