"""Fibering maps and scale-invariant Rayleigh quotients.

Every quantity here depends on a field u only through the triple
``A = int |grad u|^2``, ``B = int |u|^(alpha+1)``, ``C = int |u|^(beta+1)``,
so the functions below are plain scalar algebra in (A, B, C) and the scaling t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DimensionTooSmall, ValidationError

# Width at which 1-D bisections stop (relative in t).
BISECT_RTOL = 1e-13
TANGENT_RTOL = 1e-9


@dataclass(frozen=True)
class Exponents:
    """Exponent pair 0 < alpha < beta < 1 and spatial dimension."""

    alpha: float
    beta: float
    dim: int

    def __post_init__(self):
        bad = []
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            bad.append("alpha and beta must be finite")
        elif not 0.0 < self.alpha < self.beta < 1.0:
            bad.append(f"need 0 < alpha < beta < 1, got alpha={self.alpha}, beta={self.beta}")
        if int(self.dim) != self.dim or self.dim < 1:
            bad.append(f"dim must be a positive integer, got {self.dim}")
        if bad:
            raise ValidationError(bad)

    @property
    def gamma(self) -> float:
        """Exponent (beta - alpha)/(1 - alpha) of A in lambda(u)."""
        return (self.beta - self.alpha) / (1.0 - self.alpha)


@dataclass(frozen=True)
class IntegralTriple:
    """(A, B, C) = (int |grad u|^2, int |u|^(alpha+1), int |u|^(beta+1))."""

    grad2: float
    pow_alpha: float
    pow_beta: float

    def __post_init__(self):
        for name in ("grad2", "pow_alpha", "pow_beta"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ValidationError(f"{name} must be finite and > 0, got {v}")

    def scaled(self, c: float, exp: Exponents) -> "IntegralTriple":
        """Triple of c*u given the triple of u."""
        return IntegralTriple(c * c * self.grad2,
                              c ** (exp.alpha + 1) * self.pow_alpha,
                              c ** (exp.beta + 1) * self.pow_beta)


class RootKind(str, Enum):
    NO_ROOT = "NoRoot"
    TANGENT = "Tangent"
    PAIR = "Pair"


@dataclass(frozen=True)
class FiberingRoots:
    kind: RootKind
    t_max: float | None = None
    t_min: float | None = None


@dataclass(frozen=True)
class RayleighReport:
    t_0: float
    t_1: float
    t_P: float
    t_1P: float
    lambda_u: float
    lambda_0: float
    lambda_1P: float
    lambda_1_min: float


def critical_exponent(exp: Exponents) -> float:
    """Sobolev exponent 2N/(N-2)."""
    if exp.dim < 3:
        raise DimensionTooSmall(f"critical exponent needs dim >= 3, got {exp.dim}")
    return 2.0 * exp.dim / (exp.dim - 2.0)


def es_margin(exp: Exponents) -> float:
    """2(1+a)(1+b) - N(1-a)(1-b); the exponents lie in the stable region iff < 0."""
    a, b = exp.alpha, exp.beta
    return 2.0 * (1 + a) * (1 + b) - exp.dim * (1 - a) * (1 - b)


def energy(tr: IntegralTriple, exp: Exponents, lam: float, t: float = 1.0) -> float:
    a, b = exp.alpha, exp.beta
    return (0.5 * t * t * tr.grad2 + t ** (a + 1) / (a + 1) * tr.pow_alpha
            - lam * t ** (b + 1) / (b + 1) * tr.pow_beta)


def energy_prime(tr: IntegralTriple, exp: Exponents, lam: float, t: float = 1.0) -> float:
    return t * tr.grad2 + t ** exp.alpha * tr.pow_alpha - lam * t ** exp.beta * tr.pow_beta


def energy_second(tr: IntegralTriple, exp: Exponents, lam: float, t: float = 1.0) -> float:
    a, b = exp.alpha, exp.beta
    return (tr.grad2 + a * t ** (a - 1) * tr.pow_alpha
            - lam * b * t ** (b - 1) * tr.pow_beta)


def pohozaev(tr: IntegralTriple, exp: Exponents, lam: float, t: float = 1.0) -> float:
    a, b = exp.alpha, exp.beta
    ts = critical_exponent(exp)
    return (t * t / ts * tr.grad2 + t ** (a + 1) / (a + 1) * tr.pow_alpha
            - lam * t ** (b + 1) / (b + 1) * tr.pow_beta)


def pohozaev_prime(tr: IntegralTriple, exp: Exponents, lam: float, t: float = 1.0) -> float:
    ts = critical_exponent(exp)
    return (2.0 * t / ts * tr.grad2 + t ** exp.alpha * tr.pow_alpha
            - lam * t ** exp.beta * tr.pow_beta)


def lambda_u(tr: IntegralTriple, exp: Exponents) -> float:
    """Scale-invariant quotient B^((1-b)/(1-a)) A^((b-a)/(1-a)) / C."""
    a, b = exp.alpha, exp.beta
    return (tr.pow_alpha ** ((1 - b) / (1 - a)) * tr.grad2 ** ((b - a) / (1 - a))
            / tr.pow_beta)


# Rayleigh quotients along the ray t*u: each is the lambda making the
# corresponding functional (E, P or E') vanish at t*u.

def r_zero(tr: IntegralTriple, exp: Exponents, t: float) -> float:
    a, b = exp.alpha, exp.beta
    num = 0.5 * t ** (1 - b) * tr.grad2 + t ** (a - b) / (a + 1) * tr.pow_alpha
    return num / (tr.pow_beta / (b + 1))


def r_pohozaev(tr: IntegralTriple, exp: Exponents, t: float) -> float:
    a, b = exp.alpha, exp.beta
    ts = critical_exponent(exp)
    num = t ** (1 - b) / ts * tr.grad2 + t ** (a - b) / (a + 1) * tr.pow_alpha
    return num / (tr.pow_beta / (b + 1))


def r_one(tr: IntegralTriple, exp: Exponents, t: float) -> float:
    a, b = exp.alpha, exp.beta
    return (t ** (1 - b) * tr.grad2 + t ** (a - b) * tr.pow_alpha) / tr.pow_beta


def _kappas(exp: Exponents) -> dict[str, float]:
    a, b = exp.alpha, exp.beta
    k = {"t_0": 2 * (b - a) / ((a + 1) * (1 - b)),
         "t_1": (b - a) / (1 - b)}
    if exp.dim >= 3:
        ts = critical_exponent(exp)
        k["t_P"] = ts * (b - a) / ((a + 1) * (1 - b))
        k["t_1P"] = ts * (b - a) / ((ts - b - 1) * (a + 1))
    return k


def critical_scaling(tr: IntegralTriple, exp: Exponents, kappa: float) -> float:
    """Solve t^(1-alpha) = kappa*B/A."""
    return (kappa * tr.pow_alpha / tr.grad2) ** (1.0 / (1.0 - exp.alpha))


def rayleigh_report(tr: IntegralTriple, exp: Exponents) -> RayleighReport:
    if exp.dim < 3:
        raise DimensionTooSmall(f"rayleigh_report needs dim >= 3, got {exp.dim}")
    t = {name: critical_scaling(tr, exp, k) for name, k in _kappas(exp).items()}
    return RayleighReport(
        t_0=t["t_0"], t_1=t["t_1"], t_P=t["t_P"], t_1P=t["t_1P"],
        lambda_u=lambda_u(tr, exp),
        lambda_0=r_zero(tr, exp, t["t_0"]),
        lambda_1P=r_pohozaev(tr, exp, t["t_1P"]),
        lambda_1_min=r_one(tr, exp, t["t_1"]),
    )


def lambda_1_min(tr: IntegralTriple, exp: Exponents) -> float:
    """min over t of R^1(tu): the smallest lambda admitting a Nehari scaling."""
    return r_one(tr, exp, critical_scaling(tr, exp, _kappas(exp)["t_1"]))


def _bisect_log(f, s_lo: float, s_hi: float) -> float:
    """Root in s = log t of f on [s_lo, s_hi], given opposite signs at the ends."""
    f_lo = f(s_lo)
    width = math.log1p(BISECT_RTOL)
    while s_hi - s_lo > width:
        s_mid = 0.5 * (s_lo + s_hi)
        if s_mid in (s_lo, s_hi):
            break
        f_mid = f(s_mid)
        if (f_mid > 0) == (f_lo > 0):
            s_lo, f_lo = s_mid, f_mid
        else:
            s_hi = s_mid
    return 0.5 * (s_lo + s_hi)


def _exp_or_inf(s: float) -> float:
    try:
        return math.exp(s)
    except OverflowError:
        return math.inf


def fibering_roots(tr: IntegralTriple, exp: Exponents, lam: float) -> FiberingRoots:
    """Critical points t_max < t_min of t -> E(tu), i.e. roots of R^1(tu) = lam.

    R^1 decreases on (0, t_1) and increases on (t_1, inf); each branch is
    bracketed by stepping outward in log t and then bisected.  The search
    works with log R^1 as a function of log t, so it cannot overflow; a root
    beyond the float range is returned as inf.
    """
    a, b = exp.alpha, exp.beta
    lnA, lnB, lnC = math.log(tr.grad2), math.log(tr.pow_alpha), math.log(tr.pow_beta)
    s1 = (math.log(_kappas(exp)["t_1"]) + lnB - lnA) / (1.0 - a)
    t1 = _exp_or_inf(s1)
    level = r_one(tr, exp, t1) if math.isfinite(t1) and t1 > 0 else math.nan
    if abs(lam - level) <= TANGENT_RTOL * max(1.0, abs(lam)):
        return FiberingRoots(RootKind.TANGENT, t1, t1)
    if lam < level:
        return FiberingRoots(RootKind.NO_ROOT)
    ln_lam = math.log(lam)

    def g(s):
        # log R^1(e^s u) - log lam
        x, y = (1 - b) * s + lnA, (a - b) * s + lnB
        return max(x, y) + math.log1p(math.exp(-abs(x - y))) - lnC - ln_lam

    if not g(s1) < 0:
        return FiberingRoots(RootKind.NO_ROOT)
    roots = []
    for direction in (-1.0, 1.0):
        step = 1.0
        while g(s1 + direction * step) <= 0.0:
            step *= 2.0
        s_out = s1 + direction * step
        lo, hi = (s_out, s1) if direction < 0 else (s1, s_out)
        roots.append(_exp_or_inf(_bisect_log(g, lo, hi)))
    return FiberingRoots(RootKind.PAIR, roots[0], roots[1])


# Closed-form constants relating the extremal quotients to lambda(u).

def c_zero(exp: Exponents) -> float:
    a, b = exp.alpha, exp.beta
    pref = (1 - a) * (b + 1) / ((1 - b) * (1 + a))
    return pref * ((1 - b) * (a + 1) / (2 * (b - a))) ** exp.gamma


def c_one_p_printed(exp: Exponents) -> float:
    """Constant for lambda_1P(u)/lambda(u) in the form found in the literature.

    Kept only for the diagnostic below; it does not match direct evaluation.
    """
    a, b = exp.alpha, exp.beta
    ts = critical_exponent(exp)
    pref = (b + 1) * (ts - a + 1) / ((b - a) * ts)
    return pref * (ts * (b - a) / ((ts - b - 1) * (a + 1))) ** exp.gamma


def c_one_p(exp: Exponents) -> float:
    """lambda_1P(u)/lambda(u), obtained from R^1 at the t_1P scaling."""
    a, b = exp.alpha, exp.beta
    ts = critical_exponent(exp)
    kappa = ts * (b - a) / ((ts - b - 1) * (a + 1))
    pref = (b + 1) * (ts - a - 1) / ((ts - b - 1) * (a + 1))
    return pref * kappa ** (-exp.gamma)


@dataclass(frozen=True)
class ConstantCheck:
    direct: float
    printed: float
    derived: float
    printed_rel_err: float
    derived_rel_err: float


def c_one_p_diagnostic(tr: IntegralTriple, exp: Exponents) -> ConstantCheck:
    """Compare direct lambda_1P(u) with both closed forms c * lambda(u)."""
    direct = rayleigh_report(tr, exp).lambda_1P
    lu = lambda_u(tr, exp)
    printed = c_one_p_printed(exp) * lu
    derived = c_one_p(exp) * lu
    return ConstantCheck(direct, printed, derived,
                         abs(printed - direct) / direct, abs(derived - direct) / direct)
