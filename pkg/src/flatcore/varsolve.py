"""Ground states by minimisation on the stable Nehari branch.

A field u is always kept on the branch t_min of its fibering map, where
E'(u) = 0 and E''(u) >= 0.  The energy is then lowered by H^1-preconditioned
gradient steps followed by re-projection.  The sign of the Pohozaev functional
at the minimiser separates "usual" solutions (P < 0, nonzero boundary flux)
from flat or compactly supported ones (P = 0).
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import scalar_core as sc
from .errors import (BracketFailure, MaxIterations, NoRoot, ValidationError,
                     ZeroField)
from .grid import (DomainSpec, Grid, boundary_flux_integral, inscribed_balls,
                   residual_vector, vector_triple)
from .scalar_core import Exponents, IntegralTriple, RootKind

log = logging.getLogger(__name__)

C_CLS = 1.0
ARMIJO = 1e-4
WOLFE = 0.9
ROUNDOFF = 1e-12


class Classification(str, Enum):
    USUAL = "Usual"
    FLAT_OR_COMPACT = "FlatOrCompact"
    INDETERMINATE = "Indeterminate"


@dataclass
class SolverOptions:
    tol: float = 1e-8           # relative H^-1 norm of the residual
    max_iter: int = 2000
    step0: float = 1.0
    step_max: float = 8.0
    step_min: float = 1e-10
    # CG tolerance of the preconditioner solve; None applies one AMG V-cycle,
    # itself a symmetric positive definite approximation of (I - Delta_h)^-1.
    inner_rtol: float | None = None
    memory: int = 8             # L-BFGS pairs; 0 gives plain preconditioned gradient
    raise_on_max_iter: bool = False


@dataclass
class GroundStateResult:
    field: np.ndarray
    lam: float
    energy: float
    pohozaev: float
    energy_second: float
    residual: float
    boundary_flux: float
    classification: Classification
    support_fraction: float
    grad2: float
    rel_residual: float
    iterations: int
    converged: bool
    energy_history: list = field(default_factory=list, repr=False)

    def scalars(self) -> dict:
        return {"lambda": self.lam, "energy": self.energy, "pohozaev": self.pohozaev,
                "energy_second": self.energy_second, "residual": self.residual,
                "boundary_flux": self.boundary_flux,
                "classification": self.classification.value,
                "support_fraction": self.support_fraction, "grad2": self.grad2,
                "rel_residual": self.rel_residual, "iterations": self.iterations,
                "converged": self.converged}


def _triple(g: Grid, vec: np.ndarray, exp: Exponents) -> IntegralTriple:
    A, B, C = vector_triple(g, vec, exp)
    if B <= 0.0:
        raise ZeroField("zero field has no fibering map")
    return IntegralTriple(A, B, C)


def _project_vec(g: Grid, vec: np.ndarray, exp: Exponents, lam: float):
    tr = _triple(g, vec, exp)
    roots = sc.fibering_roots(tr, exp, lam)
    if roots.kind == RootKind.NO_ROOT:
        raise NoRoot(f"lambda={lam:.6g} lies below min_t R1(tu)={sc.lambda_1_min(tr, exp):.6g}")
    t = roots.t_min
    return t * vec, tr.scaled(t, exp)


def nehari_project(g: Grid, u: np.ndarray, exp: Exponents, lam: float) -> np.ndarray:
    """Rescale u to the t_min critical point of its fibering map."""
    vec, _ = _project_vec(g, g.gather(u), exp, lam)
    return g.scatter(vec)


def default_seed(g: Grid, center=None, radius=None) -> np.ndarray:
    """cos^2 bump on the given ball, or the pointwise max of bumps on all inscribed balls."""
    if center is None and radius is None:
        bumps = [g.gather(default_seed(g, c, r)) for c, r in inscribed_balls(g.spec, g)]
        return g.scatter(np.max(bumps, axis=0))
    if center is None or radius is None:
        c0, r0 = inscribed_balls(g.spec, g)[0]
        center = c0 if center is None else center
        radius = r0 if radius is None else radius
    c = np.asarray(center, dtype=float)
    r = np.linalg.norm(g.centers - c, axis=-1)
    vals = np.where(r < radius, np.cos(0.5 * np.pi * r / radius) ** 2, 0.0)
    return g.scatter(vals)


def _precondition(g: Grid, r: np.ndarray, rtol, x0=None) -> np.ndarray:
    if rtol is None:
        return g.solver(1.0)[1].matvec(r)
    return g.solve(1.0, r, rtol=rtol, x0=x0)


def _relative_residual(A: float, r: np.ndarray, G: np.ndarray, w: float) -> float:
    return math.sqrt(max(float(r @ G) * w, 0.0) / A)


@dataclass
class _Descent:
    vec: np.ndarray
    aux: object
    value: float
    iterations: int
    converged: bool
    history: list


def _descend(g: Grid, vec: np.ndarray, project, evaluate, opts: SolverOptions) -> _Descent:
    """Projected, H^1-preconditioned L-BFGS with Armijo backtracking.

    ``project(vec) -> (vec, aux)`` maps onto the constraint set (it may raise
    NoRoot or ZeroField); ``evaluate(vec, aux) -> (value, grad, scale)``
    returns the objective, its gradient per unit cell volume, and the factor
    making ``sqrt(scale * <grad, G>)`` a dimensionless stopping measure.
    """
    w = g.cell_volume
    vec, aux = project(vec)
    f, grad, scale = evaluate(vec, aux)
    history = [f]
    memory: list[tuple[np.ndarray, np.ndarray, float]] = []
    s = opts.step0
    it = 0
    for it in range(1, opts.max_iter + 1):
        G = _precondition(g, grad, opts.inner_rtol)
        if math.sqrt(max(float(grad @ G) * w * scale, 0.0)) <= opts.tol:
            return _Descent(vec, aux, f, it, True, history)
        d = _lbfgs_direction(g, grad, memory, opts.inner_rtol) if memory else G
        slope = float(grad @ d) * w
        if slope <= 0.0:
            memory.clear()
            d, slope = G, float(grad @ G) * w
        step = s if memory else min(s, opts.step0)
        accepted = False
        while step >= opts.step_min:
            try:
                t_vec, t_aux = project(np.abs(vec - step * d))
            except (NoRoot, ZeroField):
                step *= 0.5
                continue
            t_f, t_grad, t_scale = evaluate(t_vec, t_aux)
            if t_f <= f - ARMIJO * step * slope:
                accepted = True
                break
            # Once the decrease is below summation roundoff, fall back on the
            # curvature condition alone.
            noise = ROUNDOFF * (abs(f) + 1.0 / scale)
            if t_f <= f + noise and abs(float(t_grad @ d) * w) <= WOLFE * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if memory:
                memory.clear()
                continue
            break
        if opts.memory:
            s_k, y_k = t_vec - vec, t_grad - grad
            sy = float(s_k @ y_k)
            if sy > 1e-14 * float(np.linalg.norm(s_k) * np.linalg.norm(y_k)):
                memory.append((s_k, y_k, 1.0 / sy))
                if len(memory) > opts.memory:
                    memory.pop(0)
        vec, aux, f, grad, scale = t_vec, t_aux, t_f, t_grad, t_scale
        history.append(f)
        s = 1.0 if opts.memory else min(2.0 * step, opts.step_max)
    if opts.raise_on_max_iter and it >= opts.max_iter:
        raise MaxIterations(f"no convergence in {opts.max_iter} iterations")
    return _Descent(vec, aux, f, it, False, history)


def _lbfgs_direction(g, grad, memory, rtol):
    """Two-loop recursion with the H^1 preconditioner as initial inverse Hessian."""
    q = grad.copy()
    alphas = []
    for s_k, y_k, rho in reversed(memory):
        a = rho * float(s_k @ q)
        alphas.append(a)
        q -= a * y_k
    z = _precondition(g, q, rtol)
    for (s_k, y_k, rho), a in zip(memory, reversed(alphas)):
        b = rho * float(y_k @ z)
        z += (a - b) * s_k
    return z


def minimize_ground_state(g: Grid, exp: Exponents, lam: float, seed: np.ndarray,
                          opts: SolverOptions | None = None,
                          spec: DomainSpec | None = None) -> GroundStateResult:
    """Minimise E_lam over the t_min Nehari branch starting from seed.

    Each iteration takes |u|, moves along a descent direction built from the
    H^1 gradient G = (I - Delta_h)^-1 grad E (limited-memory BFGS on top of
    that metric unless ``opts.memory == 0``), re-projects onto the branch and
    backtracks until the energy decreases.  Below the fold the iterate slides
    towards the tangency of its fibering map and the run ends unconverged.
    """
    opts = opts or SolverOptions()
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    vec = np.abs(g.gather(seed))
    if not np.any(vec):
        raise ZeroField("seed is identically zero")

    def project(v):
        return _project_vec(g, v, exp, lam)

    def evaluate(v, tr):
        return sc.energy(tr, exp, lam), residual_vector(g, v, exp, lam), 1.0 / tr.grad2

    run = _descend(g, vec, project, evaluate, opts)
    if opts.raise_on_max_iter and not run.converged:
        raise MaxIterations(f"ground state at lambda={lam:.6g} did not converge "
                            f"in {run.iterations} iterations")
    return _result(g, exp, lam, run.vec, run.iterations, run.converged, run.history, spec)


def _result(g, exp, lam, vec, iterations, converged, history, spec=None) -> GroundStateResult:
    w = g.cell_volume
    tr = _triple(g, vec, exp)
    r = residual_vector(g, vec, exp, lam)
    G = g.solve(1.0, r, rtol=1e-8)
    u = g.scatter(vec)
    res = GroundStateResult(
        field=u, lam=lam,
        energy=sc.energy(tr, exp, lam),
        pohozaev=sc.pohozaev(tr, exp, lam) if exp.dim >= 3 else float("nan"),
        energy_second=sc.energy_second(tr, exp, lam),
        residual=float(np.sqrt(np.sum(r * r) * w)),
        boundary_flux=boundary_flux_integral(g, u, spec),
        classification=Classification.INDETERMINATE,
        support_fraction=float(np.count_nonzero(vec > 1e-10 * vec.max()) / vec.size),
        grad2=tr.grad2,
        rel_residual=_relative_residual(tr.grad2, r, G, w),
        iterations=iterations, converged=converged, energy_history=history)
    res.classification = classify_solution(res, g.h, exp.dim)
    return res


def classify_solution(r: GroundStateResult, h: float, dim: int | None = None,
                      c_cls: float = C_CLS, res_tol: float | None = None) -> Classification:
    """Flat/compact versus usual from the Pohozaev value and the boundary flux.

    Both indicators are made dimensionless with grad2 = int |grad u|^2:
    p = N*P/grad2 (E - P = grad2/N) and f = flux/(2*grad2) (for a solution
    P = -flux/(2N), so p = -f).  The residual guard defaults to c_cls*h, the
    consistency order of an embedded exact profile.
    """
    res_tol = c_cls * h if res_tol is None else res_tol
    if not r.converged or not (r.rel_residual <= res_tol) or not np.isfinite(r.pohozaev):
        return Classification.INDETERMINATE
    N = dim if dim is not None else r.field.ndim
    p = N * r.pohozaev / r.grad2
    f = r.boundary_flux / (2.0 * r.grad2)
    thr = c_cls * h
    if abs(p) <= thr and f <= thr:
        return Classification.FLAT_OR_COMPACT
    if p < -thr and f > thr:
        return Classification.USUAL
    return Classification.INDETERMINATE


def pohozaev_check(g: Grid, u: np.ndarray, exp: Exponents, lam: float,
                   spec: DomainSpec | None = None) -> float:
    """|P(u) + flux/(2N)|, which vanishes for exact solutions."""
    vec = g.gather(u)
    tr = _triple(g, vec, exp)
    return abs(sc.pohozaev(tr, exp, lam) + boundary_flux_integral(g, u, spec) / (2 * exp.dim))


# ------------------------------------------------------------ extremal values

@dataclass
class ExtremalReport:
    value: float
    minimizer: np.ndarray
    iterations: int
    certificate: dict
    kind: str
    lambda_u: float
    converged: bool

    def scalars(self) -> dict:
        return {"kind": self.kind, "value": self.value, "lambda_u": self.lambda_u,
                "iterations": self.iterations, "converged": self.converged,
                "certificate": self.certificate}


def _quotient_value(tr: IntegralTriple, exp: Exponents, kind: str) -> float:
    rep = sc.rayleigh_report(tr, exp)
    return rep.lambda_0 if kind == "lambda0" else rep.lambda_1P


def _minimize_quotient(g: Grid, exp: Exponents, seed: np.ndarray, kind: str,
                       opts: SolverOptions | None = None, n_probes: int = 32,
                       rng_seed: int = 0) -> ExtremalReport:
    opts = opts or SolverOptions(tol=1e-7)
    if exp.dim < 3:
        raise ValidationError("extremal quotients need dim >= 3")
    a = (1 - exp.beta) / (1 - exp.alpha)
    b = exp.gamma
    L = g.laplacian

    def project(v):
        A, B, C = vector_triple(g, v, exp)
        if B <= 0.0 or A <= 0.0:
            raise ZeroField("zero field has no Rayleigh quotient")
        v = v / math.sqrt(A)
        return v, IntegralTriple(1.0, B / A ** ((exp.alpha + 1) / 2), C / A ** ((exp.beta + 1) / 2))

    def evaluate(v, tr):
        val = _quotient_value(tr, exp, kind)
        av = np.abs(v)
        # Gradient of log lambda(u) per unit cell volume.
        grad = (2 * b / tr.grad2) * (L @ v) \
            + (a * (exp.alpha + 1) / tr.pow_alpha) * av ** exp.alpha \
            - ((exp.beta + 1) / tr.pow_beta) * av ** exp.beta
        return math.log(val), grad, tr.grad2

    vec = np.abs(g.gather(seed))
    if not np.any(vec):
        raise ZeroField("seed is identically zero")
    run = _descend(g, vec, project, evaluate, opts)
    tr = run.aux
    value = _quotient_value(tr, exp, kind)
    cert = _certificate(g, exp, run.vec, value, kind, n_probes, rng_seed)
    return ExtremalReport(value, g.scatter(run.vec), run.iterations, cert, kind,
                          sc.lambda_u(tr, exp), run.converged)


def _certificate(g, exp, vec, value, kind, n_probes, rng_seed) -> dict:
    """Evaluate the quotient on random probes: perturbations and random bumps."""
    rng = np.random.default_rng(rng_seed)
    vals = []
    scale = np.max(np.abs(vec))
    for k in range(n_probes):
        if k % 2 == 0:
            p = np.abs(vec + 0.05 * scale * rng.standard_normal(vec.size))
        else:
            c = g.centers[rng.integers(g.n_interior)]
            rad = rng.uniform(0.2, 1.0)
            r = np.linalg.norm(g.centers - c, axis=-1)
            p = np.where(r < rad, np.cos(0.5 * np.pi * r / rad) ** 2, 0.0)
            if not np.any(p):
                continue
        A, B, C = vector_triple(g, p, exp)
        vals.append(_quotient_value(IntegralTriple(A, B, C), exp, kind))
    vals = np.array(vals)
    return {"n_probes": int(vals.size), "min_probe_value": float(vals.min()),
            "passed": bool(np.all(value <= vals * (1 + 1e-12)))}


def extremal_lambda0(g: Grid, exp: Exponents, seed: np.ndarray | None = None,
                     opts: SolverOptions | None = None) -> ExtremalReport:
    """Infimum over u of the zero-energy quotient lambda_0(u)."""
    seed = default_seed(g) if seed is None else seed
    return _minimize_quotient(g, exp, seed, "lambda0", opts)


def extremal_lambda1P(g: Grid, exp: Exponents, seed: np.ndarray | None = None,
                      opts: SolverOptions | None = None) -> ExtremalReport:
    """Infimum over u of the Nehari-Pohozaev quotient lambda_1P(u)."""
    seed = default_seed(g) if seed is None else seed
    return _minimize_quotient(g, exp, seed, "lambda1P", opts)


def critical_point_of_lambda0(g: Grid, exp: Exponents, rep: ExtremalReport) -> np.ndarray:
    """The lambda_0 minimiser rescaled by its t_0, a solution at lambda = Lambda_0."""
    tr = integral_triple_vec(g, g.gather(rep.minimizer), exp)
    t0 = sc.rayleigh_report(tr, exp).t_0
    return rep.minimizer * t0


def integral_triple_vec(g: Grid, vec: np.ndarray, exp: Exponents) -> IntegralTriple:
    return _triple(g, vec, exp)


# ------------------------------------------------------------ lambda star

@dataclass
class LambdaStarResult:
    lambda_star: float
    flat_point: GroundStateResult
    bracket: tuple
    evaluations: list
    radial_value: float | None = None
    radial_gap: float | None = None
    lambda_1P: float | None = None
    lambda_0: float | None = None

    def __iter__(self):
        yield self.lambda_star
        yield self.flat_point

    def scalars(self) -> dict:
        return {"lambda_star": self.lambda_star, "bracket": list(self.bracket),
                "radial_value": self.radial_value, "radial_gap": self.radial_gap,
                "Lambda_1P": self.lambda_1P, "Lambda_0": self.lambda_0,
                "evaluations": self.evaluations,
                "flat_point": self.flat_point.scalars()}


def in_Z(r: GroundStateResult, h: float, dim: int, c_cls: float = C_CLS) -> bool:
    """Converged with a Pohozaev value clearly below zero."""
    return bool(r.converged and dim * r.pohozaev / r.grad2 < -c_cls * h)


def lambda_star(g: Grid, exp: Exponents, spec: DomainSpec | None = None,
                bracket: tuple | None = None, rtol: float = 1e-4,
                opts: SolverOptions | None = None, seed: np.ndarray | None = None,
                margin: float = 0.05, eps: float = 1e-3) -> LambdaStarResult:
    """Bisect the smallest lambda whose ground state is a usual solution.

    The default bracket is [Lambda_1P, Lambda_0 (1 + margin)] from the
    extremal quotients.  Each trial solve is warm-started from the solution at
    the current upper end.
    """
    from .radial import lambda_star_radial
    from .grid import Ball

    spec = g.spec if spec is None else spec
    opts = opts or SolverOptions()
    if sc.es_margin(exp) >= 0:
        log.warning("exponents (%g, %g, N=%d) lie outside the stable region; "
                    "no flat limit is expected", exp.alpha, exp.beta, exp.dim)
    L1P = L0 = None
    if bracket is None:
        L1P = extremal_lambda1P(g, exp, seed).value
        L0 = extremal_lambda0(g, exp, seed).value
        bracket = (L1P, L0 * (1 + margin))
    lo, hi = map(float, bracket)
    evaluations = []

    def trial(lam, start):
        t0 = time.perf_counter()
        try:
            res = minimize_ground_state(g, exp, lam, start, opts, spec)
        except NoRoot:
            evaluations.append({"lambda": lam, "in_Z": False, "reason": "NoRoot",
                                "seconds": time.perf_counter() - t0})
            return False, None
        ok = in_Z(res, g.h, exp.dim)
        evaluations.append({"lambda": lam, "in_Z": ok, "iterations": res.iterations,
                            "converged": res.converged,
                            "pohozaev_rel": exp.dim * res.pohozaev / res.grad2,
                            "seconds": time.perf_counter() - t0})
        return ok, res

    start = default_seed(g) if seed is None else seed
    ok, best = trial(hi, start)
    if not ok:
        raise BracketFailure(f"upper end lambda={hi:.6g} is not in Z")
    # The extremal estimate of the lower end can sit above the true fold;
    # step it down a few times before giving up.
    for _ in range(5):
        ok_lo, res_lo = trial(lo, best.field)
        if not ok_lo:
            break
        hi, best = lo, res_lo
        lo *= 1 - margin
    else:
        raise BracketFailure(f"lower end lambda={lo:.6g} is still in Z")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        ok, res = trial(mid, best.field)
        if ok:
            hi, best = mid, res
        else:
            lo = mid
    lam_star = 0.5 * (lo + hi)
    target = lam_star * (1 + eps)
    flat = minimize_ground_state(g, exp, target, best.field, opts, spec)
    out = LambdaStarResult(lam_star, flat, (lo, hi), evaluations, lambda_1P=L1P, lambda_0=L0)
    if isinstance(spec, Ball):
        rad = lambda_star_radial(exp, spec.radius)
        out.radial_value = rad
        out.radial_gap = abs(lam_star - rad) / lam_star
    return out


# ------------------------------------------------------------ branch

@dataclass
class BifurcationDiagram:
    points: list
    lambda_star: float
    flat_point: GroundStateResult | None
    results: list = field(default_factory=list, repr=False)

    def rows(self) -> list[dict]:
        return [dict(p) for p in self.points]


def branch_continuation(g: Grid, exp: Exponents, lambda_grid, seed: np.ndarray,
                        opts: SolverOptions | None = None,
                        lambda_star_value: float | None = None,
                        spec: DomainSpec | None = None) -> BifurcationDiagram:
    """Warm-started ground states along a decreasing list of lambda values."""
    grid_vals = [float(v) for v in lambda_grid]
    if any(b >= a for a, b in zip(grid_vals, grid_vals[1:])):
        raise ValidationError("lambda_grid must be strictly decreasing")
    results = []
    current = seed
    prev = None
    for lam in grid_vals:
        res = minimize_ground_state(g, exp, lam, current, opts, spec)
        step = None
        if prev is not None:
            diff = res.field - prev.field
            step = math.sqrt(float(np.sum(diff ** 2)) * g.cell_volume)
        results.append((res, step))
        if res.converged:
            current = res.field
        prev = res
    points = []
    for res, step in sorted(results, key=lambda rs: rs[0].lam):
        points.append({"lambda": res.lam, "energy": res.energy, "pohozaev": res.pohozaev,
                       "boundary_flux": res.boundary_flux,
                       "support_fraction": res.support_fraction,
                       "energy_second": res.energy_second, "converged": res.converged,
                       "step_l2": step})
    lam_star = lambda_star_value if lambda_star_value is not None else min(grid_vals)
    terminal = results[-1][0]
    return BifurcationDiagram(points, lam_star, terminal, [r for r, _ in results])


# ------------------------------------------------------------ multiplicity

def l2_distance(g: Grid, u: np.ndarray, v: np.ndarray) -> float:
    return math.sqrt(float(np.sum((g.gather(u) - g.gather(v)) ** 2)) * g.cell_volume)


def l2_norm(g: Grid, u: np.ndarray) -> float:
    return math.sqrt(float(np.sum(g.gather(u) ** 2)) * g.cell_volume)


def continue_to(g: Grid, exp: Exponents, lam: float, seed: np.ndarray,
                opts: SolverOptions | None = None, spec: DomainSpec | None = None,
                steps: int = 6, lift: float = 1.05) -> GroundStateResult:
    """Ground state at lam reached by warm-started descent from above.

    If lam lies below the seed's minimal Nehari level the solve starts at
    ``lift`` times that level and steps down geometrically, so the seed's
    shape is kept as long as the branch it lies on survives.
    """
    level = sc.lambda_1_min(_triple(g, np.abs(g.gather(seed)), exp), exp)
    if lam > level * (1 + 1e-6):
        return minimize_ground_state(g, exp, lam, seed, opts, spec)
    current = seed
    for lam_k in np.geomspace(level * lift, lam, steps + 1):
        res = minimize_ground_state(g, exp, float(lam_k), current, opts, spec)
        current = res.field
    return res


@dataclass
class MultiplicityResult:
    lambda_star: float
    lam: float
    states: list
    seeds_tried: int
    distances: list
    balls: list


def bump_seeds(g: Grid, balls, n_seeds: int | None = None, rng_seed: int = 0) -> list[np.ndarray]:
    """cos^2 bumps at each inscribed ball centre, then jittered copies up to n_seeds."""
    seeds = [default_seed(g, c, r) for c, r in balls]
    rng = np.random.default_rng(rng_seed)
    k = 0
    while n_seeds is not None and len(seeds) < n_seeds:
        c, r = balls[k % len(balls)]
        jitter = np.zeros(g.dim)
        jitter[0] = rng.uniform(-0.15, 0.15) * r
        c = np.asarray(c) + jitter
        rad = r * rng.uniform(0.6, 1.0)
        amp = rng.uniform(0.5, 2.0)
        seeds.append(amp * default_seed(g, c, rad))
        k += 1
    return seeds


def multiplicity_scan(g: Grid, exp: Exponents, spec: DomainSpec | None = None,
                      lambda_star_value: float | None = None, eps: float = 1e-3,
                      n_seeds: int | None = None, opts: SolverOptions | None = None,
                      lambda_star_kwargs: dict | None = None) -> MultiplicityResult:
    """Distinct ground states at lambda* (1 + eps) from bumps on the inscribed balls."""
    spec = g.spec if spec is None else spec
    if lambda_star_value is None:
        lambda_star_value = lambda_star(g, exp, spec, opts=opts,
                                        **(lambda_star_kwargs or {})).lambda_star
    lam = lambda_star_value * (1 + eps)
    balls = inscribed_balls(spec, g)
    seeds = bump_seeds(g, balls, n_seeds)
    found: list[GroundStateResult] = []
    for s in seeds:
        try:
            res = continue_to(g, exp, lam, s, opts, spec)
        except NoRoot:
            continue
        if not res.converged:
            continue
        thr = 10 * g.h * l2_norm(g, res.field)
        if all(l2_distance(g, res.field, f.field) > thr for f in found):
            found.append(res)
    dists = [[l2_distance(g, a.field, b.field) for b in found] for a in found]
    return MultiplicityResult(lambda_star_value, lam, found, len(seeds), dists, balls)
