import csv
import json
import math

import numpy as np
import pytest
from scipy.sparse.linalg import eigsh

from flatcore.errors import ProbeOutsideDomain, ValidationError
from flatcore.grid import Ball, build_grid, pde_residual
from flatcore.parabolic import (ParabolicConfig, default_theta, empty_ball_radius, evolve, step,
                                sublevel_region, vanishing_time, waiting_time, write_metadata,
                                write_track_csv)
from flatcore.scalar_core import Exponents
from flatcore.varsolve import default_seed, minimize_ground_state

EXP2 = Exponents(0.05, 0.1, 2)


@pytest.fixture(scope="module")
def disk():
    return build_grid(Ball((0.0, 0.0), 1.0), 1 / 32, mirror=(0, 1))


@pytest.fixture(scope="module")
def disk_full():
    return build_grid(Ball((0.0, 0.0), 1.0), 1 / 32)


def bump(g, center, radius):
    r = np.linalg.norm(g.all_centers() - np.asarray(center), axis=-1)
    return np.where(g.mask & (r < radius), np.cos(0.5 * np.pi * r / radius) ** 2, 0.0)


# ---------------------------------------------------------------- config

def test_config_validation():
    with pytest.raises(ValidationError):
        ParabolicConfig(lam=1.0, dt=0.0, t_end=1.0)
    with pytest.raises(ValidationError):
        ParabolicConfig(lam=1.0, dt=0.1, t_end=-1.0)
    with pytest.raises(ValidationError):
        ParabolicConfig(lam=-1.0, dt=0.1, t_end=1.0)


def test_default_theta_condition():
    for lam in (0.5, 1.0, 3.0, 100.0):
        th = default_theta(lam, EXP2)
        assert th ** (EXP2.beta - EXP2.alpha) < 1 / lam


def test_large_theta_warns(disk):
    cfg = ParabolicConfig(lam=2.0, dt=0.01, t_end=0.01, theta=10.0)
    run = evolve(disk, disk.zeros(), cfg, EXP2)
    assert any("theta" in w for w in run.metadata["warnings"])


# ---------------------------------------------------------------- step

def test_zero_is_invariant(disk):
    cfg = ParabolicConfig(lam=2.0, dt=0.01, t_end=1.0)
    assert np.all(step(disk, disk.zeros(), cfg, EXP2) == 0)


def test_step_rejects_negative(disk):
    cfg = ParabolicConfig(lam=2.0, dt=0.01, t_end=1.0)
    with pytest.raises(ValidationError):
        step(disk, -np.where(disk.mask, 1.0, 0.0), cfg, EXP2)


def test_step_preserves_nonnegativity(disk):
    cfg = ParabolicConfig(lam=1.0, dt=0.05, t_end=1.0)
    v = 1e-4 * bump(disk, (0.0, 0.0), 0.5)
    out = step(disk, v, cfg, EXP2)
    assert np.all(out >= 0) and np.all(out[~disk.mask] == 0)


def test_stationary_consistency(disk):
    lam = 3.0
    u = minimize_ground_state(disk, EXP2, lam, default_seed(disk)).field
    dt = 1e-3
    cfg = ParabolicConfig(lam=lam, dt=dt, t_end=dt)
    v1 = step(disk, u, cfg, EXP2)
    drift = math.sqrt(np.sum((v1 - u) ** 2) * disk.cell_volume) / dt
    assert drift <= 10 * max(pde_residual(disk, u, EXP2, lam), 1e-6)


def test_heat_decay_rate(disk):
    # Linear heat limit: the discrete first eigenvector decays by 1/(1 + dt mu) per step.
    mu, vecs = eigsh(disk.laplacian.tocsc(), k=1, sigma=0.0)
    mu = float(mu[0])
    v0 = disk.scatter(np.abs(vecs[:, 0]))
    dt, n = 1e-3, 50
    cfg = ParabolicConfig(lam=1.0, dt=dt, t_end=n * dt, reaction=False)
    run = evolve(disk, v0, cfg, EXP2)
    ratio = np.sum(run.final * v0) / np.sum(v0 * v0)
    assert ratio == pytest.approx((1 + dt * mu) ** -n, rel=1e-6)
    # Continuum: the first Dirichlet eigenvalue of the unit disk is j_{0,1}^2.
    j01 = 2.404825557695773
    rate = -math.log(ratio) / (n * dt)
    assert rate == pytest.approx(j01 ** 2, rel=0.05)


# ---------------------------------------------------------------- geometry

def test_empty_ball_radius_of_zero_field(disk):
    for x0, d in (((0.0, 0.0), 1.0), ((0.5, 0.0), 0.5), ((0.3, -0.4), 0.5)):
        assert empty_ball_radius(disk, disk.zeros(), x0, 1e-12) == pytest.approx(d, abs=disk.h)


def test_empty_ball_radius_around_bump(disk_full):
    g = disk_full
    R = 0.3
    v = bump(g, (-0.3, 0.0), R)
    for x0 in ((0.3, 0.0), (0.1, 0.2), (-0.3, 0.5)):
        d = math.dist(x0, (-0.3, 0.0))
        expect = min(d - R, 1.0 - math.hypot(*x0))
        assert empty_ball_radius(g, v, x0, 1e-12) == pytest.approx(expect, abs=g.h)
    assert empty_ball_radius(g, v, (-0.3, 0.0), 1e-12) == 0.0


def test_empty_ball_radius_mirror_images(disk, disk_full):
    # A bump at the centre seen from a probe: mirrored and full storage agree.
    v_half, v_full = bump(disk, (0.0, 0.0), 0.4), bump(disk_full, (0.0, 0.0), 0.4)
    for x0 in ((0.7, 0.0), (-0.5, -0.3)):
        a = empty_ball_radius(disk, v_half, x0, 1e-12)
        b = empty_ball_radius(disk_full, v_full, x0, 1e-12)
        assert a == pytest.approx(b, abs=1e-12)


def test_probe_outside_domain(disk):
    with pytest.raises(ProbeOutsideDomain):
        empty_ball_radius(disk, disk.zeros(), (1.5, 0.0), 1e-12)
    with pytest.raises(ProbeOutsideDomain):
        evolve(disk, disk.zeros(), ParabolicConfig(lam=1.0, dt=0.1, t_end=0.1, probes=[(2.0, 0.0)]),
               EXP2)


def test_sublevel_region(disk):
    v = np.where(disk.mask, 5.0, 0.0)
    assert not sublevel_region(disk, v, 1.0).any()
    assert np.array_equal(sublevel_region(disk, disk.zeros(), 1.0), disk.mask)
    with pytest.raises(ValidationError):
        sublevel_region(disk, v, 0.0)


# ---------------------------------------------------------------- evolve

def test_small_data_dies_out_and_dissipates(disk):
    # Absorption dominates small data: finite extinction and decreasing energy.
    v0 = 1e-3 * bump(disk, (0.0, 0.0), 0.5)
    cfg = ParabolicConfig(lam=1.0, dt=1e-3, t_end=0.2, probes=[(0.0, 0.0)], output_every=5)
    run = evolve(disk, v0, cfg, EXP2)
    assert np.all(run.final == 0)
    e = np.array(run.track.energy)
    assert np.all(np.diff(e) <= 1e-12)
    assert waiting_time(run.track, 0) is not None
    assert run.track.times == sorted(set(run.track.times))


def test_clamp_flag(disk):
    v0 = 1e-3 * bump(disk, (0.0, 0.0), 0.5)
    run = evolve(disk, v0, ParabolicConfig(lam=1.0, dt=0.05, t_end=0.1), EXP2)
    assert run.metadata["dt_flagged"]
    assert run.metadata["clamp_max_fraction"] > 1e-3


def test_growth_above_stationary_state(disk):
    lam = 3.0
    u = minimize_ground_state(disk, EXP2, lam, default_seed(disk)).field
    cfg = ParabolicConfig(lam=2 * lam, dt=1e-3, t_end=0.02, probes=[(0.9, 0.0)],
                          snapshot_times=[0.01])
    run = evolve(disk, u, cfg, EXP2)
    assert min(run.track.min_drift[1:]) >= 0
    assert np.all(run.final >= u - 1e-12)
    assert 0.01 in run.snapshots
    assert vanishing_time(run.track, 0) == 0.0


def test_outputs(tmp_path, disk):
    cfg = ParabolicConfig(lam=1.0, dt=1e-3, t_end=5e-3, probes=[(0.0, 0.0), (0.5, 0.5)])
    run = evolve(disk, 1e-3 * bump(disk, (0.0, 0.0), 0.5), cfg, EXP2)
    write_track_csv(tmp_path / "t.csv", run.track)
    write_metadata(tmp_path / "m.json", run.metadata)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0][-2:] == ["probe_0", "probe_1"]
    assert len(rows) == len(run.track.times) + 1
    meta = json.loads((tmp_path / "m.json").read_text())
    assert meta["steps"] == 5 and meta["notes"]
    assert not list(tmp_path.glob("*.tmp*"))
