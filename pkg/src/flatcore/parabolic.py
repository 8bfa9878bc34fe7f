"""Semi-implicit time stepping of v_t - Lap v + v^a = lam v^b with support tracking.

Diffusion is implicit and the reaction explicit:

    (I/dt - Delta_h) v_new = v/dt + lam v^b - v^a,

after which negative values are clamped to zero.  The clamp is where finite
extinction happens (strong absorption drives small values through zero in one
step), so its mass is recorded at every step.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import ProbeOutsideDomain, ValidationError
from .fieldio import atomic_open
from .grid import Grid
from .scalar_core import Exponents

CLAMP_LIMIT = 1e-3


@dataclass
class ParabolicConfig:
    lam: float
    dt: float
    t_end: float
    theta: float | None = None
    supp_delta: float | None = None
    probes: list = field(default_factory=list)
    output_every: int = 1
    snapshot_times: list = field(default_factory=list)
    reaction: bool = True       # False switches to the pure heat equation

    def __post_init__(self):
        bad = []
        if not (self.dt > 0 and math.isfinite(self.dt)):
            bad.append(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            bad.append(f"t_end must be positive, got {self.t_end}")
        if not self.lam > 0:
            bad.append(f"lambda must be positive, got {self.lam}")
        if self.output_every < 1:
            bad.append("output_every must be >= 1")
        if bad:
            raise ValidationError(bad)


def default_theta(lam: float, exp: Exponents) -> float:
    """Half the level below which absorption beats the source: theta^(b-a) < 1/lam."""
    return 0.5 * (1.0 / lam) ** (1.0 / (exp.beta - exp.alpha))


@dataclass
class SupportTrack:
    times: list = field(default_factory=list)
    support_measure: list = field(default_factory=list)
    empty_ball_radius: list = field(default_factory=list)   # one list per time
    sublevel_measure: list = field(default_factory=list)
    min_drift: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    clamp_fraction: list = field(default_factory=list)

    def radii(self) -> np.ndarray:
        return np.array(self.empty_ball_radius, dtype=float).reshape(len(self.times), -1)


@dataclass
class ParabolicRun:
    track: SupportTrack
    snapshots: dict
    final: np.ndarray
    metadata: dict


def _reaction(vec, lam, exp):
    return lam * vec ** exp.beta - vec ** exp.alpha


def _step_vec(g: Grid, vec: np.ndarray, cfg: ParabolicConfig, exp: Exponents):
    rhs = vec / cfg.dt
    if cfg.reaction:
        rhs = rhs + _reaction(vec, cfg.lam, exp)
    new = g.solve(1.0 / cfg.dt, rhs, rtol=1e-10)
    neg = new < 0.0
    clamped = float(-new[neg].sum())
    new[neg] = 0.0
    return new, clamped


def step(g: Grid, v: np.ndarray, cfg: ParabolicConfig, exp: Exponents) -> np.ndarray:
    """One semi-implicit step; negative values are clamped to zero."""
    vec = g.gather(v)
    if np.any(vec < 0):
        raise ValidationError("parabolic data must be nonnegative")
    new, _ = _step_vec(g, vec, cfg, exp)
    return g.scatter(new)


def sublevel_region(g: Grid, v: np.ndarray, theta: float) -> np.ndarray:
    """Boolean mask of interior cells with v <= theta."""
    if not theta > 0:
        raise ValidationError(f"theta must be positive, got {theta}")
    return g.mask & (np.asarray(v) <= theta)


class _ProbeGeometry:
    """Distances from probe points to cell sets, accounting for mirrored storage."""

    def __init__(self, g: Grid):
        self.g = g
        sc = np.array(g.spec.star_center)
        axes = [d for d in range(g.dim) if g.mirror[d]]
        self.reflections = []
        for k in range(len(axes) + 1):
            for sub in itertools.combinations(axes, k):
                sign = np.ones(g.dim)
                sign[list(sub)] = -1.0
                self.reflections.append(sign)
        self.sc = sc
        # Exterior cells that touch the interior (the staircase boundary).
        ring = ndimage.binary_dilation(g.mask) & ~g.mask
        self.ring_tree = cKDTree(g.origin + g.h * np.argwhere(ring))
        self.cell_tree = cKDTree(g.centers)

    def images(self, x0):
        x0 = np.asarray(x0, dtype=float)
        return [self.sc + s * (x0 - self.sc) for s in self.reflections]

    def boundary_distance(self, x0) -> float:
        d = min(self.ring_tree.query(x)[0] for x in self.images(x0))
        return max(d - 0.5 * self.g.h, 0.0)

    def nearest_cell(self, x0) -> int:
        best = min((self.cell_tree.query(x) for x in self.images(x0)), key=lambda q: q[0])
        return int(best[1])

    def support_distance(self, x0, supported: np.ndarray) -> float:
        pts = self.g.centers[supported]
        if pts.size == 0:
            return math.inf
        tree = cKDTree(pts)
        d = min(tree.query(x)[0] for x in self.images(x0))
        return max(d - 0.5 * self.g.h, 0.0)


def empty_ball_radius(g: Grid, v: np.ndarray, x0, supp_delta: float,
                      _geom: _ProbeGeometry | None = None) -> float:
    """Largest r with v <= supp_delta on every cell of B_r(x0), capped at dist(x0, boundary)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.dim,) or not g.spec.contains(x0):
        raise ProbeOutsideDomain(f"probe {x0.tolist()} is not inside the domain")
    geom = _geom or _ProbeGeometry(g)
    vec = g.gather(v)
    if vec[geom.nearest_cell(x0)] > supp_delta:
        return 0.0
    supported = vec > supp_delta
    return min(geom.boundary_distance(x0), geom.support_distance(x0, supported))


def _energy(g: Grid, vec, lam, exp) -> float:
    w = g.cell_volume
    return float(0.5 * vec @ (g.laplacian @ vec) * w
                 + np.sum(vec ** (exp.alpha + 1)) * w / (exp.alpha + 1)
                 - lam * np.sum(vec ** (exp.beta + 1)) * w / (exp.beta + 1))


def evolve(g: Grid, v0: np.ndarray, cfg: ParabolicConfig, exp: Exponents) -> ParabolicRun:
    """Step from v0 to t_end, recording support, sublevel and empty-ball data."""
    vec = g.gather(v0).astype(float)
    if np.any(vec < 0) or not np.all(np.isfinite(vec)):
        raise ValidationError("initial data must be finite and nonnegative")
    warnings = []
    theta = cfg.theta if cfg.theta is not None else default_theta(cfg.lam, exp)
    if theta ** (exp.beta - exp.alpha) >= 1.0 / cfg.lam:
        warnings.append(f"theta={theta:g} violates theta^(b-a) < 1/lambda")
    vmax0 = float(vec.max()) if vec.size else 0.0
    supp_delta = cfg.supp_delta if cfg.supp_delta is not None else 1e-10 * max(vmax0, 1e-300)
    probes = [np.asarray(p[0] if isinstance(p, (tuple, list)) and len(p) == 2
                         and np.ndim(p[0]) == 1 else p, dtype=float) for p in cfg.probes]
    geom = _ProbeGeometry(g)
    for p in probes:
        if p.shape != (g.dim,) or not g.spec.contains(p):
            raise ProbeOutsideDomain(f"probe {p.tolist()} is not inside the domain")

    track = SupportTrack()
    w = g.cell_volume

    def record(t, drift):
        track.times.append(t)
        track.support_measure.append(float(np.count_nonzero(vec > supp_delta) * w))
        track.sublevel_measure.append(float(np.count_nonzero(vec <= theta) * w))
        full = g.scatter(vec)
        track.empty_ball_radius.append(
            [empty_ball_radius(g, full, p, supp_delta, geom) for p in probes])
        track.min_drift.append(drift)
        track.energy.append(_energy(g, vec, cfg.lam, exp) if cfg.reaction else float("nan"))

    snapshots = {}
    pending = sorted(float(s) for s in cfg.snapshot_times)
    n_steps = int(math.ceil(cfg.t_end / cfg.dt - 1e-9))
    record(0.0, float("nan"))
    track.clamp_fraction.append(0.0)
    clamp_max = 0.0
    flagged = False
    t = 0.0
    for n in range(1, n_steps + 1):
        new, clamped = _step_vec(g, vec, cfg, exp)
        mass = float(vec.sum())
        frac = clamped / mass if mass > 0 else 0.0
        clamp_max = max(clamp_max, frac)
        if frac > CLAMP_LIMIT and not flagged:
            warnings.append(f"clamped mass fraction {frac:.3g} exceeds {CLAMP_LIMIT:g} "
                            f"at t={n * cfg.dt:.6g}: dt too large")
            flagged = True
        drift = float(((new - vec) / cfg.dt).min()) if vec.size else 0.0
        vec = new
        t = n * cfg.dt
        while pending and pending[0] <= t + 1e-12:
            snapshots[pending.pop(0)] = g.scatter(vec)
        if n % cfg.output_every == 0 or n == n_steps:
            record(t, drift)
            track.clamp_fraction.append(frac)
    meta = {"lambda": cfg.lam, "dt": cfg.dt, "t_end": cfg.t_end, "theta": theta,
            "supp_delta": supp_delta, "steps": n_steps, "clamp_max_fraction": clamp_max,
            "dt_flagged": flagged, "warnings": warnings,
            "notes": ["uniqueness of the weak solution is only known for "
                      "non-degenerate initial data; not checked here"]}
    return ParabolicRun(track, snapshots, g.scatter(vec), meta)


def vanishing_time(track: SupportTrack, probe: int) -> float | None:
    """First recorded time at which the probe's empty-ball radius is zero."""
    radii = track.radii()[:, probe]
    hit = np.flatnonzero(radii <= 0.0)
    return float(track.times[hit[0]]) if hit.size else None


def waiting_time(track: SupportTrack, probe: int) -> float | None:
    """First recorded time at which the probe's empty-ball radius becomes positive."""
    radii = track.radii()[:, probe]
    hit = np.flatnonzero(radii > 0.0)
    return float(track.times[hit[0]]) if hit.size else None


def write_track_csv(path, track: SupportTrack) -> None:
    radii = track.radii()
    with atomic_open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "support_measure", "sublevel_measure", "min_drift", "energy"]
                    + [f"probe_{k}" for k in range(radii.shape[1])])
        for i, t in enumerate(track.times):
            wr.writerow([repr(t), repr(track.support_measure[i]), repr(track.sublevel_measure[i]),
                         repr(track.min_drift[i]), repr(track.energy[i])]
                        + [repr(float(x)) for x in radii[i]])


def write_metadata(path, meta: dict) -> None:
    with atomic_open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
