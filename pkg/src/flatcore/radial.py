"""Radial shooting for the compactly supported solution of -Lap u + u^a = u^b.

The radial ODE u'' + (N-1)/r u' = u^a - u^b is started from u(0) = a with a
series expansion and integrated until either u reaches zero moving down
(Crossing) or u' returns to zero (Turning).  The height a* separating the two
outcomes gives the profile that touches zero with zero slope, whose support
radius is R*.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp, simpson
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .errors import (NoEventBeforeRmax, NoSignChange, StepFailure,
                     SupportExceedsDomain, ToleranceNotMet, ValidationError)
from .scalar_core import Exponents, IntegralTriple

U_FLOOR = 1e-12
FLAT_TOL = 1e-8
A_RTOL = 1e-12
R_START = 1e-6


class OutcomeKind(str, Enum):
    CROSSING = "Crossing"
    TURNING = "Turning"
    EQUILIBRIUM = "Equilibrium"
    FLAT = "Flat"


@dataclass(frozen=True)
class ShootOutcome:
    kind: OutcomeKind
    event_radius: float
    u_event: float = 0.0
    du_event: float = 0.0
    # Which event stopped the integration; Flat outcomes keep their side.
    side: OutcomeKind | None = None

    @property
    def defect(self) -> float:
        return abs(self.u_event) + abs(self.du_event)


@dataclass(frozen=True)
class Trajectory:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    dense: object = None


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    support_radius: float
    lam: float
    exp: Exponents
    height: float = float("nan")
    defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.exp.dim

    def interpolant(self):
        return PchipInterpolator(self.r, self.u, extrapolate=False)


def reaction(u, exp: Exponents, u_floor: float = U_FLOOR):
    """sign(u)(|u|^a - |u|^b), switched off below u_floor."""
    au = np.abs(u)
    val = np.sign(u) * (au ** exp.alpha - au ** exp.beta)
    return np.where(au < u_floor, 0.0, val)


def shoot(exp: Exponents, a: float, r_max: float = 200.0, dr: float = 0.05,
          method: str = "DOP853", flat_tol: float = FLAT_TOL,
          rtol: float = 1e-12, atol: float = 1e-15) -> tuple[Trajectory, ShootOutcome]:
    """Integrate from u(0)=a, u'(0)=0 up to the first event.

    ``dr`` is both the maximum integrator step and the spacing of the
    returned mesh.
    """
    if not (a > 0 and math.isfinite(a)):
        raise ValidationError(f"initial height must be positive, got {a}")
    N = exp.dim
    if a == 1.0:
        r = np.arange(0.0, r_max + 0.5 * dr, dr)
        return (Trajectory(r, np.ones_like(r), np.zeros_like(r)),
                ShootOutcome(OutcomeKind.EQUILIBRIUM, r_max, 1.0, 0.0))

    def rhs(r, y):
        return [y[1], float(reaction(y[0], exp)) - (N - 1) / r * y[1]]

    def hit_zero(r, y):
        return y[0]
    hit_zero.terminal, hit_zero.direction = True, -1

    def turn(r, y):
        return y[1]
    turn.terminal, turn.direction = True, 1

    c2 = (a ** exp.alpha - a ** exp.beta) / (2 * N)
    y0 = [a + c2 * R_START ** 2, 2 * c2 * R_START]
    sol = solve_ivp(rhs, (R_START, r_max), y0, method=method, rtol=rtol, atol=atol,
                    max_step=dr, events=(hit_zero, turn), dense_output=True)
    if sol.status == -1:
        raise StepFailure(f"integrator failed at a={a}: {sol.message}")

    if sol.t_events[0].size:
        kind, r_ev, y_ev = OutcomeKind.CROSSING, sol.t_events[0][0], sol.y_events[0][0]
    elif sol.t_events[1].size:
        kind, r_ev, y_ev = OutcomeKind.TURNING, sol.t_events[1][0], sol.y_events[1][0]
    else:
        raise NoEventBeforeRmax(f"no event for a={a} before r_max={r_max}")
    u_ev, du_ev = float(y_ev[0]), float(y_ev[1])
    side = kind
    if abs(u_ev) + abs(du_ev) <= flat_tol:
        kind = OutcomeKind.FLAT

    r = np.append(np.arange(0.0, r_ev, dr), r_ev)
    y = sol.sol(np.clip(r, R_START, None))
    u, du = y[0], y[1]
    near0 = r < R_START
    u[near0] = a + c2 * r[near0] ** 2
    du[near0] = 2 * c2 * r[near0]
    return Trajectory(r, u, du, sol.sol), ShootOutcome(kind, float(r_ev), u_ev, du_ev, side)


def _classify_side(out: ShootOutcome) -> OutcomeKind:
    return out.side if out.kind == OutcomeKind.FLAT else out.kind


def find_flat(exp: Exponents, a_hi: float = 10.0, flat_tol: float = FLAT_TOL,
              dr: float = 0.05, method: str = "DOP853", r_max: float | None = None,
              a_rtol: float = A_RTOL) -> RadialProfile:
    """Bisect the initial height between Turning and Crossing outcomes.

    The returned profile is the Turning-side trajectory at the converged
    height, which stays nonnegative and ends with a double zero.
    """
    eps = 1e-6
    r_max = r_max or 200.0

    def side(a):
        rm = r_max
        while True:
            try:
                return shoot(exp, a, r_max=rm, dr=dr, method=method, flat_tol=flat_tol)
            except NoEventBeforeRmax:
                if rm > 1e6:
                    raise
                rm *= 4

    ref = _classify_side(side(1.0 + eps)[1])
    lo = 1.0 + eps
    hi = a_hi
    while _classify_side(side(hi)[1]) == ref:
        lo = hi
        hi *= 2.0
        if hi > 1e6:
            raise NoSignChange("initial heights up to 1e6 do not change the shooting outcome")

    best = {}
    while hi - lo > a_rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        traj, out = side(mid)
        if _classify_side(out) == ref:
            lo = mid
            best["lo"] = (mid, traj, out)
        else:
            hi = mid
            best["hi"] = (mid, traj, out)

    # Prefer the side whose trajectory stays nonnegative (Turning).
    cands = [v for v in best.values() if _classify_side(v[2]) == OutcomeKind.TURNING]
    if not cands:
        cands = list(best.values())
    a_star, traj, out = min(cands, key=lambda v: v[2].defect)
    if out.defect > flat_tol:
        raise ToleranceNotMet(f"double-zero defect {out.defect:.3g} exceeds {flat_tol:g}")
    u = np.maximum(traj.u, 0.0)
    u[-1] = 0.0
    du = traj.du.copy()
    du[-1] = 0.0
    return RadialProfile(traj.r, u, du, out.event_radius, 1.0, exp, a_star, out.defect)


@lru_cache(maxsize=32)
def _flat_cached(alpha: float, beta: float, dim: int) -> RadialProfile:
    return find_flat(Exponents(alpha, beta, dim))


def flat_profile(exp: Exponents) -> RadialProfile:
    """find_flat with default settings, memoised per exponent set."""
    return _flat_cached(exp.alpha, exp.beta, exp.dim)


def rescale(p: RadialProfile, sigma: float) -> RadialProfile:
    """Profile of x -> k u(x/sigma), k = sigma^(2/(1-a)), at lam * sigma^(-2(b-a)/(1-a)).

    This is the amplitude for which the rescaled profile again solves the
    equation; the support radius becomes sigma*R.
    """
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    exp = p.exp
    k = sigma ** (2.0 / (1.0 - exp.alpha))
    return replace(p, r=p.r * sigma, u=p.u * k, du=p.du * (k / sigma),
                   support_radius=p.support_radius * sigma,
                   lam=p.lam * sigma ** (-2.0 * exp.gamma), height=p.height * k)


def lambda_star_radial(exp: Exponents, R_target: float, profile: RadialProfile | None = None) -> float:
    """The lam at which the rescaled flat profile exactly fills a ball of radius R_target."""
    if not R_target > 0:
        raise ValidationError(f"R_target must be positive, got {R_target}")
    p = flat_profile(exp) if profile is None else profile
    return p.lam * (p.support_radius / R_target) ** (2.0 * exp.gamma)


def fit_to_radius(exp: Exponents, R_target: float, profile: RadialProfile | None = None) -> RadialProfile:
    p = flat_profile(exp) if profile is None else profile
    return rescale(p, R_target / p.support_radius)


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / gamma_fn(dim / 2)


def radial_triple(p: RadialProfile) -> IntegralTriple:
    exp = p.exp
    w = sphere_area(p.dim) * p.r ** (p.dim - 1)
    u = np.maximum(p.u, 0.0)
    return IntegralTriple(simpson(w * p.du ** 2, x=p.r),
                          simpson(w * u ** (exp.alpha + 1), x=p.r),
                          simpson(w * u ** (exp.beta + 1), x=p.r))


def radial_residual(p: RadialProfile, dense, r_check: np.ndarray) -> np.ndarray:
    """Residual of the integrated radial equation at r_check.

    u'(r) r^(N-1) must equal the integral of s^(N-1) f(u(s)) over (0, r);
    the integral is taken by adaptive quadrature on the dense interpolant.
    """
    from scipy.integrate import quad

    N, exp = p.dim, p.exp
    out = []
    for r in r_check:
        val, _ = quad(lambda s: s ** (N - 1) * float(reaction(dense(max(s, R_START))[0], exp)),
                      0.0, r, limit=200, epsabs=1e-14, epsrel=1e-12)
        out.append(dense(r)[1] - val / r ** (N - 1))
    return np.array(out)


def embed(p: RadialProfile, g, center=None) -> np.ndarray:
    """Interpolate u(|x - center|) onto the cell centres of g; zero outside the support."""
    center = np.array(g.spec.star_center if center is None else center, dtype=float)
    R = p.support_radius
    all_x = g.all_centers()
    dist = np.linalg.norm(all_x - center, axis=-1)
    inside_support = dist < R
    if np.any(inside_support & ~g.mask):
        raise SupportExceedsDomain(f"support ball of radius {R:.6g} leaves the grid domain")
    if g.spec.level(center) >= 0:
        raise SupportExceedsDomain("profile centre lies outside the domain")
    sc = np.array(g.spec.star_center)
    for d in range(g.dim):
        if g.mirror[d] and abs(center[d] - sc[d]) > 1e-12:
            raise ValidationError(f"centre must lie on the mirror plane of axis {d}")
    r = np.linalg.norm(g.centers - center, axis=-1)
    vals = np.where(r < R, p.interpolant()(np.minimum(r, R)), 0.0)
    return g.scatter(np.maximum(np.nan_to_num(vals), 0.0))


def write_profile_csv(path, p: RadialProfile) -> None:
    from .fieldio import atomic_open

    with atomic_open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "u", "du"])
        for row in zip(p.r, p.u, p.du):
            w.writerow([repr(float(v)) for v in row])
