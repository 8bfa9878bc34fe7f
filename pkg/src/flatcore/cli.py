"""Command line front end: ``flatcore <subcommand> --config path [--h-study] [--out dir]``.

Configs are strict JSON.  Every run writes ``report.json`` (config echo,
scalar results, tolerances, package versions) plus subcommand-specific CSV
and field files, all atomically.  Exit codes: 0 success, 2 invalid input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import platform
import sys
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import grid as gr
from . import parabolic as pb
from . import radial as rd
from . import scalar_core as sc
from . import varsolve as vs
from .errors import NumericalError, ParseError, ValidationError
from .fieldio import atomic_open, write_field

SUBCOMMANDS = ("fibering", "radial", "ground-state", "lambda-star", "extremal",
               "branch", "multiplicity", "parabolic")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

# Allowed keys per block; values are (type check, description) pairs used for messages.
_TOP = {"exponents", "domain", "grid", "solver", "seed", "triple", "lambda",
        "lambda_grid", "radial", "lambda_star", "extremal", "multiplicity", "parabolic"}
_EXPONENTS = {"alpha", "beta", "dim"}
_DOMAIN = {"kind", "center", "radius", "balls", "semi_axes", "star_center"}
_GRID = {"h", "mirror"}
_SOLVER = {"tol", "max_iter", "inner_rtol", "memory", "step_min"}
_TRIPLE = {"grad2", "pow_alpha", "pow_beta"}
_RADIAL = {"R_target", "dr", "flat_tol", "method"}
_LSTAR = {"rtol", "bracket", "eps"}
_EXTREMAL = {"n_seeds"}
_MULT = {"eps", "n_seeds", "lambda_star"}
_PARABOLIC = {"lambda", "lambda_factor", "dt", "t_end", "theta", "supp_delta", "probes",
              "output_every", "snapshot_times", "initial", "initial_lambda_factor", "reaction"}


@dataclass
class RunConfig:
    raw: dict
    exp: sc.Exponents | None = None
    domain: gr.DomainSpec | None = None
    h: float | None = None
    mirror: tuple | None = None
    solver: vs.SolverOptions = field(default_factory=vs.SolverOptions)
    seed: int = 0


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _point(x, dim=None) -> bool:
    return (isinstance(x, list) and len(x) > 0 and all(_num(v) for v in x)
            and (dim is None or len(x) == dim))


class _Checker:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def keys(self, block, allowed, path):
        if not isinstance(block, dict):
            self.add(path, "must be an object")
            return False
        for k in sorted(set(block) - allowed):
            self.add(f"{path}.{k}" if path else k, "unknown key")
        return True

    def positive(self, block, key, path, required=True, integer=False):
        if key not in block:
            if required:
                self.add(f"{path}.{key}", "missing")
            return
        v = block[key]
        if not _num(v) or v <= 0 or (integer and int(v) != v):
            kind = "positive integer" if integer else "positive number"
            self.add(f"{path}.{key}", f"must be a {kind}, got {v!r}")


def _check_domain(ck: _Checker, d, dim):
    if not ck.keys(d, _DOMAIN, "domain"):
        return
    kind = d.get("kind")
    if kind not in ("ball", "union_of_balls", "ellipsoid"):
        ck.add("domain.kind", f"must be ball, union_of_balls or ellipsoid, got {kind!r}")
        return
    need = {"ball": {"center", "radius"}, "union_of_balls": {"balls"},
            "ellipsoid": {"center", "semi_axes"}}[kind]
    for k in sorted(need - set(d)):
        ck.add(f"domain.{k}", "missing")
    for k in sorted(set(d) - need - {"kind", "star_center"}):
        ck.add(f"domain.{k}", f"not valid for kind {kind}")
    if "center" in d and not _point(d["center"], dim):
        ck.add("domain.center", f"must be a list of {dim} numbers")
    if "star_center" in d and not _point(d["star_center"], dim):
        ck.add("domain.star_center", f"must be a list of {dim} numbers")
    if kind == "ball" and "radius" in d:
        ck.positive(d, "radius", "domain")
    if kind == "ellipsoid" and "semi_axes" in d:
        ax = d["semi_axes"]
        if not _point(ax, dim) or min(ax) <= 0:
            ck.add("domain.semi_axes", f"must be {dim} positive numbers")
    if kind == "union_of_balls" and "balls" in d:
        balls = d["balls"]
        if not isinstance(balls, list) or not balls:
            ck.add("domain.balls", "must be a nonempty list")
            return
        for i, b in enumerate(balls):
            p = f"domain.balls[{i}]"
            if not ck.keys(b, {"center", "radius"}, p):
                continue
            if not _point(b.get("center"), dim):
                ck.add(f"{p}.center", f"must be a list of {dim} numbers")
            ck.positive(b, "radius", p)


def _build_domain(d) -> gr.DomainSpec:
    sc_ = d.get("star_center")
    if d["kind"] == "ball":
        return gr.Ball(tuple(d["center"]), float(d["radius"]), sc_)
    if d["kind"] == "ellipsoid":
        return gr.Ellipsoid(tuple(d["center"]), tuple(d["semi_axes"]), sc_)
    return gr.UnionOfBalls([gr.Ball(tuple(b["center"]), float(b["radius"])) for b in d["balls"]], sc_)


def validate_config(raw, subcommand: str | None = None) -> RunConfig:
    """Check raw config data and build typed objects; all violations are reported together."""
    ck = _Checker()
    if not ck.keys(raw, _TOP, ""):
        raise ValidationError(ck.errors)
    cfg = RunConfig(raw=raw)

    e = raw.get("exponents")
    dim = None
    if e is None:
        ck.add("exponents", "missing")
    elif ck.keys(e, _EXPONENTS, "exponents"):
        a, b, n = e.get("alpha"), e.get("beta"), e.get("dim")
        for k, v in (("alpha", a), ("beta", b)):
            if v is None:
                ck.add(f"exponents.{k}", "missing")
            elif not _num(v) or not 0 < v < 1:
                ck.add(f"exponents.{k}", f"must lie in (0, 1), got {v!r}")
        if _num(a) and _num(b) and a >= b:
            ck.add("exponents.alpha, exponents.beta", f"need alpha < beta, got {a} >= {b}")
        if n is None:
            ck.add("exponents.dim", "missing")
        elif not (isinstance(n, int) and not isinstance(n, bool) and n >= 1):
            ck.add("exponents.dim", f"must be a positive integer, got {n!r}")
        else:
            dim = n
        if not any(p.startswith("exponents") for p in ck.errors):
            cfg.exp = sc.Exponents(float(a), float(b), int(n))

    needs_grid = subcommand not in ("fibering", "radial")
    if "domain" in raw:
        _check_domain(ck, raw["domain"], dim)
    elif needs_grid and subcommand is not None:
        ck.add("domain", "missing")
    if "grid" in raw:
        gblock = raw["grid"]
        if ck.keys(gblock, _GRID, "grid"):
            ck.positive(gblock, "h", "grid")
            m = gblock.get("mirror")
            if m is not None and not (isinstance(m, list) and all(
                    isinstance(v, int) and not isinstance(v, bool) and 0 <= v < (dim or 99)
                    for v in m)):
                ck.add("grid.mirror", "must be a list of axis numbers")
    elif needs_grid and subcommand is not None:
        ck.add("grid", "missing")

    if "solver" in raw and ck.keys(raw["solver"], _SOLVER, "solver"):
        s = raw["solver"]
        for k in ("tol", "step_min"):
            ck.positive(s, k, "solver", required=False)
        for k in ("max_iter", "memory"):
            ck.positive(s, k, "solver", required=False, integer=True)
        if s.get("inner_rtol") is not None:
            ck.positive(s, "inner_rtol", "solver")
    if "seed" in raw and not (isinstance(raw["seed"], int) and not isinstance(raw["seed"], bool)
                              and raw["seed"] >= 0):
        ck.add("seed", "must be a nonnegative integer")

    if "triple" in raw and ck.keys(raw["triple"], _TRIPLE, "triple"):
        for k in sorted(_TRIPLE):
            ck.positive(raw["triple"], k, "triple")
    if "lambda" in raw:
        ck.positive(raw, "lambda", "")
    if "lambda_grid" in raw:
        lg = raw["lambda_grid"]
        if not (isinstance(lg, list) and len(lg) >= 1 and all(_num(v) and v > 0 for v in lg)):
            ck.add("lambda_grid", "must be a nonempty list of positive numbers")
        elif any(b >= a for a, b in zip(lg, lg[1:])):
            ck.add("lambda_grid", "must be strictly decreasing")
    if "radial" in raw and ck.keys(raw["radial"], _RADIAL, "radial"):
        for k in ("R_target", "dr", "flat_tol"):
            ck.positive(raw["radial"], k, "radial", required=False)
        if raw["radial"].get("method", "DOP853") not in ("DOP853", "RK45", "Radau", "LSODA"):
            ck.add("radial.method", "must be one of DOP853, RK45, Radau, LSODA")
    if "lambda_star" in raw and ck.keys(raw["lambda_star"], _LSTAR, "lambda_star"):
        ls = raw["lambda_star"]
        for k in ("rtol", "eps"):
            ck.positive(ls, k, "lambda_star", required=False)
        br = ls.get("bracket")
        if br is not None and not (isinstance(br, list) and len(br) == 2
                                   and all(_num(v) and v > 0 for v in br) and br[0] < br[1]):
            ck.add("lambda_star.bracket", "must be [lo, hi] with 0 < lo < hi")
    if "extremal" in raw and ck.keys(raw["extremal"], _EXTREMAL, "extremal"):
        ck.positive(raw["extremal"], "n_seeds", "extremal", required=False, integer=True)
    if "multiplicity" in raw and ck.keys(raw["multiplicity"], _MULT, "multiplicity"):
        for k in ("eps", "lambda_star"):
            ck.positive(raw["multiplicity"], k, "multiplicity", required=False)
        ck.positive(raw["multiplicity"], "n_seeds", "multiplicity", required=False, integer=True)
    if "parabolic" in raw and ck.keys(raw["parabolic"], _PARABOLIC, "parabolic"):
        p = raw["parabolic"]
        ck.positive(p, "dt", "parabolic")
        ck.positive(p, "t_end", "parabolic")
        if "lambda" not in p and "lambda_factor" not in p:
            ck.add("parabolic.lambda", "give lambda or lambda_factor")
        for k in ("lambda", "lambda_factor", "theta", "supp_delta", "initial_lambda_factor"):
            ck.positive(p, k, "parabolic", required=False)
        ck.positive(p, "output_every", "parabolic", required=False, integer=True)
        if p.get("initial", "flat") not in ("flat", "ground_state"):
            ck.add("parabolic.initial", "must be flat or ground_state")
        for i, pr in enumerate(p.get("probes", [])):
            if not _point(pr, dim):
                ck.add(f"parabolic.probes[{i}]", f"must be a list of {dim} numbers")
        st = p.get("snapshot_times", [])
        if not (isinstance(st, list) and all(_num(v) and v >= 0 for v in st)):
            ck.add("parabolic.snapshot_times", "must be a list of nonnegative times")
        if "reaction" in p and not isinstance(p["reaction"], bool):
            ck.add("parabolic.reaction", "must be true or false")

    required = {"fibering": ["triple"], "ground-state": ["lambda"], "branch": ["lambda_grid"],
                "parabolic": ["parabolic"]}
    for k in required.get(subcommand, []):
        if k not in raw:
            ck.add(k, f"required by {subcommand}")

    if ck.errors:
        raise ValidationError(ck.errors)

    if "domain" in raw:
        try:
            cfg.domain = _build_domain(raw["domain"])
        except ValidationError as exc:
            raise ValidationError([f"domain: {v}" for v in exc.violations]) from None
    if "grid" in raw:
        cfg.h = float(raw["grid"]["h"])
        m = raw["grid"].get("mirror")
        cfg.mirror = tuple(m) if m else None
    s = raw.get("solver", {})
    cfg.solver = vs.SolverOptions(**{k: (int(v) if k in ("max_iter", "memory") else v)
                                     for k, v in s.items()})
    cfg.seed = int(raw.get("seed", 0))
    return cfg


def parse_config(path, subcommand: str | None = None) -> RunConfig:
    """Read a JSON config file and validate it."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError([f"cannot read {path}: {exc}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError([f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}"]) from None
    return validate_config(raw, subcommand)


# ------------------------------------------------------------ run helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if hasattr(x, "value") and not isinstance(x, (int, str)):
        return x.value
    return x


def _write_json(path, data):
    with atomic_open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)


def _write_csv(path, rows: list[dict]):
    with atomic_open(path, "w", newline="") as fh:
        if not rows:
            return
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: _jsonable(v) for k, v in r.items()})


def _versions():
    import scipy

    from . import __version__
    out = {"flatcore": __version__, "python": platform.python_version(),
           "numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import pyamg
        out["pyamg"] = pyamg.__version__
    except ImportError:
        pass
    return out


def _grid(cfg: RunConfig, h=None):
    return gr.build_grid(cfg.domain, cfg.h if h is None else h, mirror=cfg.mirror)


def _lambda_star_kwargs(cfg):
    ls = cfg.raw.get("lambda_star", {})
    kw = {"rtol": ls.get("rtol", 1e-4), "eps": ls.get("eps", 1e-3)}
    if ls.get("bracket"):
        kw["bracket"] = tuple(ls["bracket"])
    return kw


def _run_fibering(cfg, out, h=None):
    t = cfg.raw["triple"]
    tr = sc.IntegralTriple(t["grad2"], t["pow_alpha"], t["pow_beta"])
    res = {"es_margin": sc.es_margin(cfg.exp)}
    if cfg.exp.dim >= 3:
        res["rayleigh"] = asdict(sc.rayleigh_report(tr, cfg.exp))
        chk = sc.c_one_p_diagnostic(tr, cfg.exp)
        res["c_one_p_check"] = asdict(chk)
    if "lambda" in cfg.raw:
        lam = cfg.raw["lambda"]
        roots = sc.fibering_roots(tr, cfg.exp, lam)
        res["roots"] = {"kind": roots.kind.value, "t_max": roots.t_max, "t_min": roots.t_min}
        res["energy_at_1"] = sc.energy(tr, cfg.exp, lam)
    return res


def _run_radial(cfg, out, h=None):
    r = cfg.raw.get("radial", {})
    p = rd.find_flat(cfg.exp, dr=r.get("dr", 0.05), flat_tol=r.get("flat_tol", rd.FLAT_TOL),
                     method=r.get("method", "DOP853"))
    tr = rd.radial_triple(p)
    res = {"height": p.height, "support_radius": p.support_radius, "defect": p.defect,
           "grad2": tr.grad2, "pow_alpha": tr.pow_alpha, "pow_beta": tr.pow_beta}
    if cfg.exp.dim >= 3:
        res["pohozaev"] = sc.pohozaev(tr, cfg.exp, 1.0)
        res["pohozaev_rel"] = res["pohozaev"] / tr.grad2
    rd.write_profile_csv(out / "profile.csv", p)
    if "R_target" in r:
        res["R_target"] = r["R_target"]
        res["lambda_star_radial"] = rd.lambda_star_radial(cfg.exp, r["R_target"], p)
        rd.write_profile_csv(out / "profile_fitted.csv", rd.fit_to_radius(cfg.exp, r["R_target"], p))
    return res


def _run_ground_state(cfg, out, h=None):
    g = _grid(cfg, h)
    r = vs.minimize_ground_state(g, cfg.exp, cfg.raw["lambda"], vs.default_seed(g),
                                 cfg.solver, cfg.domain)
    write_field(out / "ground_state.fld", g, r.field)
    return dict(r.scalars(), h=g.h, cells=int(g.mask.sum()))


def _run_lambda_star(cfg, out, h=None):
    g = _grid(cfg, h)
    r = vs.lambda_star(g, cfg.exp, cfg.domain, opts=cfg.solver, **_lambda_star_kwargs(cfg))
    write_field(out / "flat_point.fld", g, r.flat_point.field)
    return dict(r.scalars(), h=g.h)


def _run_extremal(cfg, out, h=None):
    g = _grid(cfg, h)
    n = cfg.raw.get("extremal", {}).get("n_seeds", 1)
    balls = gr.inscribed_balls(cfg.domain, g)
    seeds = vs.bump_seeds(g, balls, max(n, len(balls)), rng_seed=cfg.seed)[:n]
    res = {}
    for kind, fn in (("Lambda_0", vs.extremal_lambda0), ("Lambda_1P", vs.extremal_lambda1P)):
        reps = [fn(g, cfg.exp, s, cfg.solver) for s in seeds]
        best = min(reps, key=lambda r: r.value)
        vals = [r.value for r in reps]
        res[kind] = {"value": best.value, "seed_values": vals,
                     "spread": (max(vals) - min(vals)) / best.value, "best": best.scalars()}
        write_field(out / f"{kind}_minimizer.fld", g, best.minimizer)
    res["ordered"] = res["Lambda_1P"]["value"] < res["Lambda_0"]["value"]
    return res


def _run_branch(cfg, out, h=None):
    g = _grid(cfg, h)
    grid_vals = cfg.raw["lambda_grid"]
    # Seed above the grid so the first projection exists.
    diag = vs.branch_continuation(g, cfg.exp, grid_vals, vs.default_seed(g), cfg.solver,
                                  spec=cfg.domain)
    _write_csv(out / "branch.csv", diag.rows())
    write_field(out / "terminal.fld", g, diag.flat_point.field)
    return {"points": diag.rows(), "terminal": diag.flat_point.scalars()}


def _run_multiplicity(cfg, out, h=None):
    g = _grid(cfg, h)
    m = cfg.raw.get("multiplicity", {})
    lam_star = m.get("lambda_star")
    r = vs.multiplicity_scan(g, cfg.exp, cfg.domain, lam_star, eps=m.get("eps", 1e-3),
                             n_seeds=m.get("n_seeds", 16), opts=cfg.solver,
                             lambda_star_kwargs=_lambda_star_kwargs(cfg))
    for i, s in enumerate(r.states):
        write_field(out / f"state_{i}.fld", g, s.field)
    return {"lambda_star": r.lambda_star, "lambda": r.lam, "count": len(r.states),
            "seeds_tried": r.seeds_tried, "distances": r.distances,
            "inscribed_balls": [{"center": list(c), "radius": rr} for c, rr in r.balls],
            "states": [s.scalars() for s in r.states]}


def _run_parabolic(cfg, out, h=None):
    g = _grid(cfg, h)
    p = cfg.raw["parabolic"]
    balls = gr.inscribed_balls(cfg.domain, g)
    center, radius = balls[0]
    lam_ref = rd.lambda_star_radial(cfg.exp, radius)
    lam = p["lambda"] if "lambda" in p else p["lambda_factor"] * lam_ref
    sc_ = np.array(cfg.domain.star_center)
    if p.get("initial", "flat") == "flat":
        # Centre on the mirror planes so the embedded profile respects the storage symmetry.
        c = np.array(center, dtype=float)
        for d in range(g.dim):
            if g.mirror[d]:
                c[d] = sc_[d]
        prof = rd.fit_to_radius(cfg.exp, radius * (1 - 1e-9))
        v0 = rd.embed(prof, g, c)
    else:
        lam0 = p.get("initial_lambda_factor", 2.0) * lam_ref
        gs = vs.minimize_ground_state(g, cfg.exp, lam0, vs.default_seed(g), cfg.solver, cfg.domain)
        v0 = gs.field
    pc = pb.ParabolicConfig(lam=lam, dt=p["dt"], t_end=p["t_end"], theta=p.get("theta"),
                            supp_delta=p.get("supp_delta"), probes=p.get("probes", []),
                            output_every=p.get("output_every", 1),
                            snapshot_times=p.get("snapshot_times", []),
                            reaction=p.get("reaction", True))
    run = pb.evolve(g, v0, pc, cfg.exp)
    pb.write_track_csv(out / "support_track.csv", run.track)
    pb.write_metadata(out / "parabolic_meta.json", dict(run.metadata, config=p))
    for t, snap in sorted(run.snapshots.items()):
        write_field(out / f"snapshot_t{t:.6g}.fld", g, snap)
    write_field(out / "final.fld", g, run.final)
    probes = {}
    for k in range(len(pc.probes)):
        probes[f"probe_{k}"] = {"vanishing_time": pb.vanishing_time(run.track, k),
                                "waiting_time": pb.waiting_time(run.track, k)}
    return {"lambda": lam, "lambda_radial_reference": lam_ref, "metadata": run.metadata,
            "final_support_measure": run.track.support_measure[-1], "probes": probes}


_RUNNERS = {"fibering": _run_fibering, "radial": _run_radial,
            "ground-state": _run_ground_state, "lambda-star": _run_lambda_star,
            "extremal": _run_extremal, "branch": _run_branch,
            "multiplicity": _run_multiplicity, "parabolic": _run_parabolic}


def run(subcommand: str, cfg: RunConfig, out_dir, h_study: bool = False) -> dict:
    """Dispatch one subcommand and write report.json; returns the report."""
    if subcommand not in _RUNNERS:
        raise ValidationError([f"unknown subcommand {subcommand!r}"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"subcommand": subcommand, "config": copy.deepcopy(cfg.raw),
              "tolerances": {"solver": asdict(cfg.solver), "classification_c": vs.C_CLS,
                             "flat_tol": rd.FLAT_TOL},
              "versions": _versions()}
    if h_study and subcommand in ("ground-state", "lambda-star"):
        rows = []
        for k, h in enumerate([cfg.h, cfg.h / 2, cfg.h / 4]):
            sub = out / f"h{k}"
            sub.mkdir(exist_ok=True)
            res = _RUNNERS[subcommand](cfg, sub, h)
            rows.append(res)
        report["h_study"] = rows
        key = "lambda_star" if subcommand == "lambda-star" else "energy"
        table = [{"h": r["h"], key: r[key]} for r in rows]
        _write_csv(out / "convergence.csv", table)
        report["result"] = rows[0]
    else:
        report["result"] = _RUNNERS[subcommand](cfg, out)
    _write_json(out / "report.json", report)
    return report


def _limit_threads():
    n = os.environ.get("FLATCORE_THREADS")
    if not n:
        return None
    try:
        width = int(n)
    except ValueError:
        raise ValidationError([f"FLATCORE_THREADS must be an integer, got {n!r}"]) from None
    if width < 1:
        raise ValidationError(["FLATCORE_THREADS must be >= 1"])
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=width)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="flatcore")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--h-study", action="store_true")
    ap.add_argument("--out", default="flatcore_out")
    args = ap.parse_args(argv)
    out = Path(args.out)

    def fail(code, kind, exc):
        out.mkdir(parents=True, exist_ok=True)
        info = {"status": "error", "kind": kind, "type": type(exc).__name__,
                "violations": getattr(exc, "violations", None) or [str(exc)]}
        _write_json(out / "error.json", info)
        print(json.dumps(info), file=sys.stderr)
        return code

    try:
        limiter = _limit_threads()
        cfg = parse_config(args.config, args.subcommand)
        try:
            run(args.subcommand, cfg, out, args.h_study)
        finally:
            if limiter is not None:
                limiter.unregister()
    except ValidationError as exc:
        return fail(EXIT_VALIDATION, "validation", exc)
    except (NumericalError, ArithmeticError) as exc:
        return fail(EXIT_NUMERICAL, "numerical", exc)
    except Exception as exc:  # unexpected: still machine-readable
        traceback.print_exc()
        return fail(EXIT_NUMERICAL, "internal", exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
