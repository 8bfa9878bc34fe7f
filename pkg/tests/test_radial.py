import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatcore.errors import SupportExceedsDomain, ValidationError
from flatcore.grid import Ball, build_grid, integral_triple
from flatcore.radial import (OutcomeKind, embed, fit_to_radius, lambda_star_radial, radial_residual,
                             radial_triple, reaction, rescale, shoot, sphere_area)
from flatcore.scalar_core import Exponents, energy, energy_prime, pohozaev

# tests/oracles/gen_radial_oracle.py (RK45, own bisection) for a = 0.05, b = 0.1, N = 3.
ORACLE = {"a_star": 7.055721340479067, "R_star": 24.682912487375177,
          "A": 7380.730328575683, "B": 126579.52513509321, "C": 133960.25546366887}


# ---------------------------------------------------------------- shooting

def test_shoot_outcomes(exp3):
    assert shoot(exp3, 1.0)[1].kind is OutcomeKind.EQUILIBRIUM
    for a in (0.5, 2.0, 7.0):
        assert shoot(exp3, a)[1].kind is OutcomeKind.TURNING
    for a in (7.1, 20.0):
        assert shoot(exp3, a)[1].kind is OutcomeKind.CROSSING


def test_shoot_rejects_bad_height(exp3):
    with pytest.raises(ValidationError):
        shoot(exp3, -1.0)


def test_reaction_floor(exp3):
    assert reaction(np.array([1e-13]), exp3)[0] == 0.0
    assert reaction(np.array([-0.5]), exp3)[0] == -reaction(np.array([0.5]), exp3)[0]


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


# ---------------------------------------------------------------- flat profile

def test_flat_profile_regression(flat3):
    assert flat3.height == pytest.approx(7.0557213405, rel=1e-10)
    assert flat3.support_radius == pytest.approx(24.6829122468, rel=1e-10)
    assert flat3.defect <= 1e-8


def test_flat_profile_against_independent_oracle(flat3):
    assert flat3.height == pytest.approx(ORACLE["a_star"], rel=1e-10)
    assert flat3.support_radius == pytest.approx(ORACLE["R_star"], rel=1e-6)
    tr = radial_triple(flat3)
    assert tr.grad2 == pytest.approx(ORACLE["A"], rel=1e-5)
    assert tr.pow_alpha == pytest.approx(ORACLE["B"], rel=1e-5)
    assert tr.pow_beta == pytest.approx(ORACLE["C"], rel=1e-5)


def test_flat_profile_shape(flat3):
    assert np.all(flat3.u >= 0)
    assert np.all(np.diff(flat3.u) <= 1e-12)
    assert flat3.u[-1] == 0 and flat3.du[-1] == 0


def test_flat_profile_pohozaev(flat3):
    tr = radial_triple(flat3)
    assert abs(pohozaev(tr, flat3.exp, 1.0, 1.0)) <= 1e-6 * tr.grad2
    # A solution is a critical point of the fibering map at t = 1.
    assert abs(energy_prime(tr, flat3.exp, 1.0, 1.0)) <= 1e-6 * tr.grad2


def test_flat_profile_ode_residual(flat3):
    traj, _ = shoot(flat3.exp, flat3.height)
    r_check = np.linspace(1.0, 0.95 * flat3.support_radius, 6)
    res = radial_residual(flat3, traj.dense, r_check)
    assert np.abs(res).max() <= 1e-8


# ---------------------------------------------------------------- rescaling

@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5.0))
def test_rescale_properties(flat3, sigma):
    q = rescale(flat3, sigma)
    e = flat3.exp
    assert q.support_radius == pytest.approx(sigma * flat3.support_radius, rel=1e-14)
    assert q.height == pytest.approx(flat3.height * sigma ** (2 / (1 - e.alpha)), rel=1e-14)
    assert q.lam == pytest.approx(sigma ** (-2 * e.gamma), rel=1e-14)
    # E and P of the rescaled profile, at its own lambda, scale like the profile.
    t0, t1 = radial_triple(flat3), radial_triple(q)
    assert abs(pohozaev(t1, e, q.lam, 1.0)) <= 1e-6 * t1.grad2
    k = sigma ** (2 / (1 - e.alpha))
    ratio = energy(t1, e, q.lam, 1.0) / energy(t0, e, 1.0, 1.0)
    assert ratio == pytest.approx(k ** 2 * sigma ** (e.dim - 2), rel=1e-8)


def test_rescale_rejects_nonpositive(flat3):
    with pytest.raises(ValidationError):
        rescale(flat3, 0.0)


def test_lambda_star_radial(flat3):
    e = flat3.exp
    assert lambda_star_radial(e, flat3.support_radius, flat3) == pytest.approx(1.0, rel=1e-14)
    unit = lambda_star_radial(e, 1.0, flat3)
    assert unit == pytest.approx(1.4014191316, rel=1e-9)
    assert lambda_star_radial(e, 2.0, flat3) == pytest.approx(unit * 2 ** (-2 * e.gamma), rel=1e-14)
    q = fit_to_radius(e, 1.0, flat3)
    assert q.support_radius == pytest.approx(1.0, rel=1e-14)
    assert q.lam == pytest.approx(unit, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(1.05, 3.0))
def test_lambda_star_radial_decreasing(flat3, R, f):
    e = flat3.exp
    assert lambda_star_radial(e, R * f, flat3) < lambda_star_radial(e, R, flat3)


# ---------------------------------------------------------------- embedding

def test_embed_triple_matches_radial(flat3, ball16):
    q = fit_to_radius(flat3.exp, 0.9, flat3)
    u = embed(q, ball16)
    got = integral_triple(ball16, u, flat3.exp)
    ref = radial_triple(q)
    assert got.grad2 == pytest.approx(ref.grad2, rel=0.05)
    assert got.pow_alpha == pytest.approx(ref.pow_alpha, rel=0.05)
    assert got.pow_beta == pytest.approx(ref.pow_beta, rel=0.05)


def test_embed_rejects_large_support(flat3, ball16):
    with pytest.raises(SupportExceedsDomain):
        embed(fit_to_radius(flat3.exp, 1.2, flat3), ball16)


def test_embed_rejects_centre_off_mirror(flat3, ball16):
    with pytest.raises(ValidationError):
        embed(fit_to_radius(flat3.exp, 0.5, flat3), ball16, center=(0.2, 0.0, 0.0))


def test_embed_off_centre_without_mirror(flat3):
    g = build_grid(Ball((0.0, 0.0, 0.0), 1.0), 1 / 8)
    u = embed(fit_to_radius(flat3.exp, 0.4, flat3), g, center=(0.3, 0.0, 0.0))
    x = g.all_centers()
    com = np.sum(u * x[..., 0]) / np.sum(u)
    assert com == pytest.approx(0.3, abs=0.05)


# ---------------------------------------------------------------- energy along the IVP

def test_ivp_energy_monotone(exp3):
    # d/dr [u'^2/2 - F(u)] = -(N-1)/r u'^2 <= 0, F(u) = u^(a+1)/(a+1) - u^(b+1)/(b+1).
    traj, _ = shoot(exp3, 3.0)
    u = np.maximum(traj.u, 0.0)
    F = u ** (1 + exp3.alpha) / (1 + exp3.alpha) - u ** (1 + exp3.beta) / (1 + exp3.beta)
    H = 0.5 * traj.du ** 2 - F
    assert np.all(np.diff(H) <= 1e-10 * np.abs(H).max())


def test_dimension_two_profile():
    from flatcore.radial import flat_profile
    p = flat_profile(Exponents(0.05, 0.1, 2))
    assert p.height == pytest.approx(4.589249985771273, rel=1e-9)
    assert p.support_radius == pytest.approx(18.876218095276244, rel=1e-8)
