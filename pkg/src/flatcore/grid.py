"""Cell-centred finite differences on masked Cartesian grids.

A field is a plain ``ndarray`` of the grid's shape that vanishes on exterior
cells.  Interior cells are those whose centre lies strictly inside the domain;
the boundary is therefore a staircase and first-order accurate.

A grid may optionally store only the half (quarter, ...) of a symmetric
domain on the positive side of mirror planes through ``star_center``.  Faces
lying on a mirror plane carry no flux, and every stored cell stands for
``2**n_mirror`` cells of the full domain, so all integrals below refer to the
full domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import cg

from .errors import (DisconnectedDomain, NoConvergence, NotStarShaped,
                     ValidationError, ZeroField)
from .scalar_core import Exponents, IntegralTriple


def _as_point(x, name="point"):
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be a finite, non-empty coordinate tuple")
    return tuple(float(v) for v in arr)


class DomainSpec:
    """Analytic description of a bounded domain.

    Subclasses provide ``level`` (negative inside), ``project`` (nearest
    boundary point, approximately) and ``normal`` (outward unit normal at a
    boundary point).  Points are arrays of shape ``(..., dim)``.
    """

    star_center: tuple

    @property
    def dim(self) -> int:
        return len(self.star_center)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def level(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normal(self, xb: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x) -> bool:
        return bool(self.level(np.asarray(x, dtype=float)) < 0)


@dataclass(frozen=True)
class Ball(DomainSpec):
    center: tuple
    radius: float
    star_center: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center, "center"))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValidationError(f"radius must be positive, got {self.radius}")
        sc = self.center if self.star_center is None else _as_point(self.star_center)
        object.__setattr__(self, "star_center", sc)
        if len(sc) != len(self.center):
            raise ValidationError("star_center and center differ in dimension")

    def bbox(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def level(self, x):
        return np.linalg.norm(x - np.array(self.center), axis=-1) - self.radius

    def project(self, x):
        d = x - np.array(self.center)
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return np.array(self.center) + self.radius * d / np.maximum(r, 1e-300)

    def normal(self, xb):
        d = xb - np.array(self.center)
        return d / np.maximum(np.linalg.norm(d, axis=-1, keepdims=True), 1e-300)


@dataclass(frozen=True)
class UnionOfBalls(DomainSpec):
    balls: tuple
    star_center: tuple = None

    def __post_init__(self):
        balls = tuple(b if isinstance(b, Ball) else Ball(*b) for b in self.balls)
        if not balls:
            raise ValidationError("UnionOfBalls needs at least one ball")
        if len({b.dim for b in balls}) != 1:
            raise ValidationError("balls of a union must share their dimension")
        object.__setattr__(self, "balls", balls)
        if self.star_center is None:
            sc = tuple(np.mean([b.center for b in balls], axis=0))
        else:
            sc = _as_point(self.star_center)
        object.__setattr__(self, "star_center", tuple(float(v) for v in sc))

    def bbox(self):
        lo = np.min([b.bbox()[0] for b in self.balls], axis=0)
        hi = np.max([b.bbox()[1] for b in self.balls], axis=0)
        return lo, hi

    def _levels(self, x):
        return np.stack([b.level(x) for b in self.balls], axis=-1)

    def level(self, x):
        return self._levels(x).min(axis=-1)

    def project(self, x):
        # Nearest exposed sphere is that of the ball containing x most deeply.
        owner = self._levels(x).argmin(axis=-1)
        out = np.empty_like(np.asarray(x, dtype=float))
        for k, b in enumerate(self.balls):
            sel = owner == k
            out[sel] = b.project(x[sel])
        return out

    def normal(self, xb):
        owner = np.abs(self._levels(xb)).argmin(axis=-1)
        out = np.empty_like(np.asarray(xb, dtype=float))
        for k, b in enumerate(self.balls):
            sel = owner == k
            out[sel] = b.normal(xb[sel])
        return out


@dataclass(frozen=True)
class Ellipsoid(DomainSpec):
    center: tuple
    semi_axes: tuple
    star_center: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center, "center"))
        ax = _as_point(self.semi_axes, "semi_axes")
        if len(ax) != len(self.center) or min(ax) <= 0:
            raise ValidationError("semi_axes must be positive, one per dimension")
        object.__setattr__(self, "semi_axes", ax)
        sc = self.center if self.star_center is None else _as_point(self.star_center)
        object.__setattr__(self, "star_center", sc)

    def bbox(self):
        c, a = np.array(self.center), np.array(self.semi_axes)
        return c - a, c + a

    def _rho(self, x):
        return np.linalg.norm((x - np.array(self.center)) / np.array(self.semi_axes), axis=-1)

    def level(self, x):
        # Sign is exact; magnitude is a distance only up to the axis ratio.
        return (self._rho(x) - 1.0) * min(self.semi_axes)

    def project(self, x):
        c = np.array(self.center)
        rho = self._rho(x)[..., None]
        return c + (x - c) / np.maximum(rho, 1e-300)

    def normal(self, xb):
        g = (xb - np.array(self.center)) / np.array(self.semi_axes) ** 2
        return g / np.maximum(np.linalg.norm(g, axis=-1, keepdims=True), 1e-300)


@dataclass(eq=False)
class Grid:
    """Masked cell-centred grid; construct with :func:`build_grid`."""

    spec: DomainSpec
    h: float
    origin: np.ndarray          # centre of cell (0, ..., 0)
    mask: np.ndarray            # interior cells
    mirror: tuple               # per axis: low face of the array is a mirror plane
    _solvers: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.mask.ndim

    @property
    def shape(self) -> tuple:
        return self.mask.shape

    @cached_property
    def cell_volume(self) -> float:
        """Full-domain volume represented by one stored cell."""
        return self.h ** self.dim * 2 ** sum(self.mirror)

    @cached_property
    def index(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def n_interior(self) -> int:
        return self.index.size

    @cached_property
    def lookup(self) -> np.ndarray:
        """Flat array mapping cell -> interior number, -1 on exterior cells."""
        lk = np.full(self.mask.size, -1, dtype=np.int64)
        lk[self.index] = np.arange(self.index.size)
        return lk

    @cached_property
    def positions(self) -> np.ndarray:
        """Integer multi-indices of interior cells, shape (n, dim)."""
        return np.stack(np.unravel_index(self.index, self.shape), axis=-1)

    @cached_property
    def centers(self) -> np.ndarray:
        """Coordinates of interior cell centres, shape (n, dim)."""
        return self.origin + self.h * self.positions

    def axis_coords(self, d: int) -> np.ndarray:
        return self.origin[d] + self.h * np.arange(self.shape[d])

    def all_centers(self) -> np.ndarray:
        axes = [self.axis_coords(d) for d in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def gather(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float).reshape(-1)[self.index]

    def scatter(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mask.size)
        out[self.index] = vec
        return out.reshape(self.shape)

    def field_from(self, fn) -> np.ndarray:
        """Evaluate fn(coords) at interior centres; exterior cells get 0."""
        return self.scatter(np.asarray(fn(self.centers), dtype=float))

    def _neighbors(self):
        """Yield (axis, step, neighbour flat index or -1 for mirror faces)."""
        for d in range(self.dim):
            for step in (-1, 1):
                nb = self.positions.copy()
                nb[:, d] += step
                mirrored = (nb[:, d] < 0)
                if np.any(mirrored) and not self.mirror[d]:
                    raise AssertionError("interior cell touches the array edge")
                nb[mirrored, d] = 0
                flat = np.ravel_multi_index(tuple(nb.T), self.shape)
                flat[mirrored] = -1
                yield d, step, flat

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Matrix of -Delta_h on interior cells (Dirichlet 0, mirror faces closed)."""
        n = self.n_interior
        inv_h2 = 1.0 / self.h ** 2
        diag = np.zeros(n)
        rows, cols = [], []
        ids = np.arange(n)
        for _, _, flat in self._neighbors():
            open_face = flat >= 0
            diag[open_face] += inv_h2
            nb = np.where(open_face, self.lookup[np.maximum(flat, 0)], -1)
            inner = nb >= 0
            rows.append(ids[inner])
            cols.append(nb[inner])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        off = sp.coo_matrix((np.full(rows.size, -inv_h2), (rows, cols)), shape=(n, n))
        return (sp.diags(diag) + off).tocsr()

    @cached_property
    def boundary_faces(self) -> list[tuple[np.ndarray, int, int]]:
        """(interior ids, axis, step) for faces from interior to exterior cells."""
        out = []
        for d, step, flat in self._neighbors():
            ext = flat >= 0
            ext[ext] = self.lookup[flat[ext]] < 0
            out.append((np.flatnonzero(ext), d, step))
        return out

    @cached_property
    def boundary_band(self) -> np.ndarray:
        """Interior ids of cells with at least one exterior neighbour."""
        ids = np.concatenate([f[0] for f in self.boundary_faces])
        return np.unique(ids)

    def full_mask(self) -> tuple[np.ndarray, np.ndarray]:
        """Mask of the whole domain with mirrored halves restored, and its origin."""
        m = self.mask
        origin = self.origin.copy()
        for d in range(self.dim):
            if self.mirror[d]:
                m = np.concatenate([np.flip(m, axis=d), m], axis=d)
                origin[d] -= self.h * self.shape[d]
        return m, origin

    def solver(self, c0: float):
        """Cached AMG preconditioner for c0*I - Delta_h."""
        key = float(c0)
        if key not in self._solvers:
            import pyamg
            mat = (self.laplacian + key * sp.identity(self.n_interior, format="csr")).tocsr()
            ml = pyamg.smoothed_aggregation_solver(mat, symmetry="hermitian", max_coarse=500)
            self._solvers[key] = (mat, ml.aspreconditioner(cycle="V"))
        return self._solvers[key]

    def solve(self, c0: float, rhs: np.ndarray, rtol: float = 1e-10,
              maxiter: int = 500, x0: np.ndarray | None = None) -> np.ndarray:
        """Solve (c0*I - Delta_h) w = rhs for interior vectors by preconditioned CG."""
        if not np.any(rhs):
            return np.zeros_like(rhs)
        mat, prec = self.solver(c0)
        w, info = cg(mat, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=prec)
        if info != 0:
            raise NoConvergence(f"CG did not reach rtol={rtol} in {maxiter} iterations")
        return w


def build_grid(spec: DomainSpec, h: float, mirror=None, star_samples: int = 256) -> Grid:
    """Mask the cells of ``spec`` at spacing ``h``.

    Cell faces pass through ``star_center`` so that ``mirror`` (a sequence of
    axis numbers) can cut the domain along symmetry planes through it.
    """
    if not (math.isfinite(h) and h > 0):
        raise ValidationError(f"grid spacing must be positive, got {h}")
    dim = spec.dim
    mirror_axes = set() if mirror is None else {int(a) for a in mirror}
    if any(a < 0 or a >= dim for a in mirror_axes):
        raise ValidationError(f"mirror axes must lie in 0..{dim - 1}")
    c = np.array(spec.star_center)
    lo, hi = spec.bbox()
    k_lo = np.floor((lo - c) / h - 0.5).astype(int) - 1
    k_hi = np.ceil((hi - c) / h - 0.5).astype(int) + 1
    # Symmetric index range so mirrored halves line up.
    k_max = np.maximum(-k_lo - 1, k_hi)
    axes = [c[d] + (np.arange(-k_max[d] - 1, k_max[d] + 1) + 0.5) * h for d in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    lev = spec.level(pts)
    mask = lev < 0
    if not mask.any():
        raise ValidationError("no cell centre lies inside the domain; refine h")

    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise DisconnectedDomain(f"domain mask has {ncomp} connected components at h={h}")
    _check_star(spec, pts, mask, star_samples)

    for a in sorted(mirror_axes):
        if not np.array_equal(mask, np.flip(mask, axis=a)):
            raise ValidationError(f"domain is not symmetric about the mirror plane of axis {a}")

    slices = []
    for d in range(dim):
        half = len(axes[d]) // 2
        slices.append(slice(half, None) if d in mirror_axes else slice(None))
    mask = np.ascontiguousarray(mask[tuple(slices)])
    origin = np.array([axes[d][slices[d]][0] for d in range(dim)])
    return Grid(spec=spec, h=float(h), origin=origin, mask=mask,
                mirror=tuple(d in mirror_axes for d in range(dim)))


def _check_star(spec, pts, mask, n_samples):
    sc = np.array(spec.star_center)
    if not spec.level(sc) < 0:
        raise NotStarShaped("star_center lies outside the domain")
    band = mask & ~ndimage.binary_erosion(mask)
    cand = pts[band]
    rng = np.random.default_rng(0)
    if len(cand) > n_samples:
        cand = cand[rng.choice(len(cand), n_samples, replace=False)]
    s = np.linspace(0.0, 1.0, 65)[:, None, None]
    seg = sc + s * (cand[None] - sc)
    if np.any(spec.level(seg) >= 0):
        raise NotStarShaped("a segment from star_center to a boundary cell leaves the domain")


# ---------------------------------------------------------------- field ops

def apply_laplacian(g: Grid, u: np.ndarray) -> np.ndarray:
    """Return -Delta_h u (the positive operator), zero on exterior cells."""
    return g.scatter(g.laplacian @ g.gather(u))


def integrate_power(g: Grid, u: np.ndarray, p: float) -> float:
    if p <= 0:
        raise ValidationError(f"power must be positive, got {p}")
    return float(np.sum(np.abs(g.gather(u)) ** p) * g.cell_volume)


def integrate_grad_sq(g: Grid, u: np.ndarray) -> float:
    """Sum over cell faces of squared forward differences.

    Exterior cells hold zero, so faces crossing the boundary contribute the
    Dirichlet drop.  Faces on mirror planes are absent from the array.
    """
    v = np.where(g.mask, np.asarray(u, dtype=float), 0.0)
    total = 0.0
    for d in range(g.dim):
        total += float(np.sum(np.diff(v, axis=d) ** 2))
    return total * g.h ** (g.dim - 2) * 2 ** sum(g.mirror)


def vector_triple(g: Grid, vec: np.ndarray, exp: Exponents) -> tuple[float, float, float]:
    """(A, B, C) of an interior vector, A via the matrix form <-Delta_h u, u>."""
    a = np.abs(vec)
    w = g.cell_volume
    return (float(vec @ (g.laplacian @ vec)) * w,
            float(np.sum(a ** (exp.alpha + 1))) * w,
            float(np.sum(a ** (exp.beta + 1))) * w)


def integral_triple(g: Grid, u: np.ndarray, exp: Exponents) -> IntegralTriple:
    if not np.any(g.gather(u)):
        raise ZeroField("integral triple of the zero field")
    return IntegralTriple(integrate_grad_sq(g, u),
                          integrate_power(g, u, exp.alpha + 1),
                          integrate_power(g, u, exp.beta + 1))


def signed_power(v: np.ndarray, p: float) -> np.ndarray:
    """sign(v)|v|^p with 0 -> 0."""
    return np.sign(v) * np.abs(v) ** p


def residual_vector(g: Grid, vec: np.ndarray, exp: Exponents, lam: float) -> np.ndarray:
    return (g.laplacian @ vec + signed_power(vec, exp.alpha)
            - lam * signed_power(vec, exp.beta))


def pde_residual(g: Grid, u: np.ndarray, exp: Exponents, lam: float) -> float:
    """Discrete L2 norm of -Delta_h u + |u|^(a-1)u - lam |u|^(b-1)u."""
    r = residual_vector(g, g.gather(u), exp, lam)
    return float(np.sqrt(np.sum(r * r) * g.cell_volume))


def linear_solve(g: Grid, c0: float, rhs: np.ndarray, rtol: float = 1e-10,
                 maxiter: int = 500) -> np.ndarray:
    """Solve (c0*I - Delta_h) w = rhs with homogeneous Dirichlet data."""
    if c0 < 0:
        raise ValidationError(f"c0 must be >= 0, got {c0}")
    return g.scatter(g.solve(c0, g.gather(rhs), rtol=rtol, maxiter=maxiter))


def boundary_flux_integral(g: Grid, u: np.ndarray, spec: DomainSpec | None = None,
                           unit_normal_derivative: bool = False) -> float:
    """Approximate the surface integral of |du/dnu|^2 (x . nu), x from star_center.

    Each staircase face pointing along axis d stands for a patch of true
    boundary whose projection onto that face has area h^(N-1), so it is
    weighted by |nu_d|.  The gradient at a boundary cell uses the one-sided
    difference towards an exterior neighbour and central differences otherwise.
    With ``unit_normal_derivative`` the factor |du/dnu|^2 is replaced by 1.
    """
    spec = g.spec if spec is None else spec
    vec = g.gather(u)
    band = g.boundary_band
    n_band = band.size
    slot = np.full(g.n_interior, -1)
    slot[band] = np.arange(n_band)

    x = g.centers[band]
    xb = spec.project(x)
    nu = spec.normal(xb)
    x_dot_nu = np.sum((xb - np.array(spec.star_center)) * nu, axis=-1)

    weight = np.zeros(n_band)
    ext_side = np.zeros((n_band, g.dim, 2), dtype=bool)
    for ids, d, step in g.boundary_faces:
        s = slot[ids]
        weight[s] += np.abs(nu[s, d])
        ext_side[s, d, (step + 1) // 2] = True
    weight *= g.h ** (g.dim - 1) * 2 ** sum(g.mirror)

    if unit_normal_derivative:
        dn2 = np.ones(n_band)
    else:
        full = g.scatter(vec).reshape(-1)
        pos = g.positions[band]
        ui = vec[band]
        grad = np.zeros((n_band, g.dim))
        for d in range(g.dim):
            nbv = []
            for step in (-1, 1):
                p = pos.copy()
                p[:, d] += step
                mirrored = p[:, d] < 0
                p[mirrored, d] = 0
                val = full[np.ravel_multi_index(tuple(p.T), g.shape)]
                nbv.append(np.where(mirrored, ui, val))
            lo_ext, hi_ext = ext_side[:, d, 0], ext_side[:, d, 1]
            central = (nbv[1] - nbv[0]) / (2 * g.h)
            grad[:, d] = np.where(hi_ext & ~lo_ext, (0.0 - ui) / g.h,
                                  np.where(lo_ext & ~hi_ext, (ui - 0.0) / g.h, central))
        dn2 = np.sum(grad * nu, axis=-1) ** 2
    return float(np.sum(dn2 * x_dot_nu * weight))


def inscribed_balls(spec: DomainSpec, g: Grid, tol: float | None = None) -> list[tuple[tuple, float]]:
    """Centres and radii of the largest balls inside the domain.

    Local maxima of the distance to the nearest exterior cell centre that lie
    within ``tol`` (default 2h) of the global maximum are grouped into
    connected clusters.  Using local maxima keeps a neck between two lobes
    (a saddle of the distance) from merging them on coarse grids.  Each
    cluster gives one ball: its centroid, and the distance from that centroid
    to the nearest exterior cell centre as the radius.
    """
    from scipy.spatial import cKDTree

    tol = 2.0 * g.h if tol is None else tol
    m, origin = g.full_mask()
    padded = np.pad(m, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded, sampling=g.h)[(slice(1, -1),) * g.dim]
    dist = np.where(m, dist, 0.0)
    peak = ndimage.maximum_filter(dist, size=3, mode="constant") <= dist
    near = peak & m & (dist >= dist.max() - tol)
    labels, n = ndimage.label(near, structure=np.ones((3,) * g.dim))
    ring = np.argwhere(ndimage.binary_dilation(padded) & ~padded) - 1
    tree = cKDTree(origin + g.h * ring)
    # Staircase boundaries create spurious maxima next to each other; merge
    # clusters whose centroids are closer than half the inscribed radius.
    cells = [np.argwhere(labels == k) for k in range(1, n + 1)]
    group = list(range(n))
    cent = [origin + g.h * c.mean(axis=0) for c in cells]
    for i in range(n):
        for j in range(i):
            if np.linalg.norm(cent[i] - cent[j]) < 0.5 * dist.max():
                gi, gj = group[i], group[j]
                group = [gj if x == gi else x for x in group]
    out = []
    for k in sorted(set(group)):
        members = np.concatenate([cells[i] for i in range(n) if group[i] == k])
        center = origin + g.h * members.mean(axis=0)
        radius, _ = tree.query(center)
        out.append((tuple(float(v) for v in center), float(radius)))
    out.sort(key=lambda cb: cb[0])
    return out
