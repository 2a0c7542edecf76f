"""Galerkin assembly of the Toeplitz-defining Green's function tensors (PWC basis).

Conventions
-----------
* Basis: unit pulses on voxels.  Galerkin entries are divided by the voxel volume
  so that the pulse Gram matrix is the identity.
* Stored tensor ``T[i, j, k]`` is the interaction between the test voxel at the
  grid origin and the source voxel at offset ``o = (i, j, k) = source - test``.
  The displacement test - source is therefore ``c = -o * resolution``.
* All voxel-pair integrals are reduced to integrals over the displacement
  ``d = r - r'``, weighted by the pulse autocorrelation
  ``Lambda(d - c) = prod_a (h_a - |d_a - c_a|)_+``.

With ``S(c) = 1/V int g(d) Lambda(d - c) dd`` the operators are

    N^{qq'}(c) = delta_qq' [c = 0] + k0^2 delta_qq' S(c) + d_q d_q' S(c)
    K^{qq'}(c) = eps_{q a q'} d_a S(c)

where ``d_a`` are derivatives with respect to ``c``.  The identity term is the
distributional part of curl curl acting inside the source voxel.

Offsets within ``near_radius`` (Chebyshev distance) move the derivatives onto
``Lambda`` so only the weakly singular ``g`` is integrated; sub-boxes touching
the singular point use a corner (Duffy) transform.  Remaining offsets integrate
the closed-form dyadic kernels with tensor-product Gauss rules.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "VoxelGrid",
    "Operator",
    "KernelComponent",
    "QuadratureSpec",
    "QuadratureError",
    "UnsupportedBasisError",
    "green_g",
    "basis_eval",
    "assemble_defining_tensor",
    "assemble_operator",
    "interaction_terms",
    "self_static_term",
    "depolarization_dyad",
    "unique_components",
    "component_parity",
]

AXES = "xyz"


class QuadratureError(RuntimeError):
    """Raised when a quadrature budget is too small to produce an estimate."""


class UnsupportedBasisError(ValueError):
    pass


@dataclass(frozen=True)
class VoxelGrid:
    dims: tuple[int, int, int]
    resolution: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        res = tuple(float(r) for r in np.broadcast_to(np.asarray(self.resolution, float), (3,)))
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"grid dims must be three integers >= 1, got {self.dims}")
        if min(res) <= 0:
            raise ValueError(f"resolutions must be > 0, got {res}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.resolution))

    def axis_centers(self, axis: int) -> np.ndarray:
        """Voxel center coordinates along ``axis``; the origin is the first voxel's center."""
        return self.origin[axis] + self.resolution[axis] * np.arange(self.dims[axis])

    def centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(*(self.axis_centers(a) for a in range(3)), indexing="ij"))

    @classmethod
    def cube(cls, edge: float, resolution: float, center=(0.0, 0.0, 0.0)) -> "VoxelGrid":
        """Grid of cubic voxels covering a cube of side ``edge`` centered at ``center``."""
        n = max(1, int(round(edge / resolution)))
        first = [c - 0.5 * edge + 0.5 * resolution for c in center]
        return cls((n, n, n), (resolution,) * 3, tuple(first))


class Operator(str, enum.Enum):
    N = "N"
    K = "K"
    SCALAR = "G"


@dataclass(frozen=True, order=True)
class KernelComponent:
    operator: Operator
    row: int = 0
    col: int = 0

    def __post_init__(self):
        object.__setattr__(self, "operator", Operator(self.operator))
        for v in (self.row, self.col):
            if v not in (0, 1, 2):
                raise ValueError(f"direction index must be 0, 1 or 2, got {v}")

    @property
    def name(self) -> str:
        if self.operator is Operator.SCALAR:
            return "G"
        return f"{self.operator.value}{AXES[self.row]}{AXES[self.col]}"

    @classmethod
    def parse(cls, name: str) -> "KernelComponent":
        name = name.strip()
        if name.upper() == "G":
            return cls(Operator.SCALAR)
        return cls(Operator(name[0].upper()), AXES.index(name[1].lower()), AXES.index(name[2].lower()))

    @property
    def is_zero(self) -> bool:
        return self.operator is Operator.K and self.row == self.col


def component_parity(comp: KernelComponent) -> tuple[int, int, int]:
    """Per-axis reflection sign of the component as a function of the voxel offset."""
    if comp.operator is Operator.SCALAR:
        return (1, 1, 1)
    p = [1, 1, 1]
    if comp.operator is Operator.N:
        if comp.row != comp.col:
            p[comp.row] = -1
            p[comp.col] = -1
        return tuple(p)
    if comp.row != comp.col:
        a = 3 - comp.row - comp.col
        p[a] = -1
    return tuple(p)


def unique_components(operator, order: str = "PWC") -> list[KernelComponent]:
    """Minimal set of components to store for ``operator``."""
    if str(order).upper() == "PWL":
        raise UnsupportedBasisError(
            "PWL assembly is not supported (PWL would need 60 unique N and 30 unique K entries per voxel)"
        )
    if str(order).upper() != "PWC":
        raise UnsupportedBasisError(f"unknown basis order {order!r}")
    op = Operator(operator)
    if op is Operator.N:
        return [KernelComponent(op, q, p) for q in range(3) for p in range(q, 3)]
    if op is Operator.K:
        return [KernelComponent(op, 0, 1), KernelComponent(op, 0, 2), KernelComponent(op, 1, 2)]
    return [KernelComponent(op)]


@dataclass(frozen=True)
class QuadratureSpec:
    far_points_per_axis: int = 5
    near_points_per_axis: int = 10
    near_radius: int = 1
    self_strategy: str = "duffy"
    # Chebyshev distances above near_radius but within this band use the near order
    transition_band: int = 2

    def __post_init__(self):
        if self.far_points_per_axis < 1 or self.near_points_per_axis < 1:
            raise QuadratureError("quadrature budget must have at least one point per axis")
        if self.near_radius < 1:
            raise ValueError("near_radius must be >= 1")
        if self.self_strategy not in ("duffy", "subtract"):
            raise ValueError(f"unknown self_strategy {self.self_strategy!r}")

    def far_order(self, cheb: int) -> int:
        if cheb <= self.near_radius + self.transition_band:
            return max(self.far_points_per_axis, self.near_points_per_axis)
        return self.far_points_per_axis


# ----------------------------------------------------------------------------- kernels


def green_g(R, k0: float):
    """Free-space Green's function ``exp(-i k0 |R|) / (4 pi |R|)``."""
    R = np.asarray(R, dtype=float)
    r = np.linalg.norm(R, axis=-1)
    if np.any(r == 0):
        raise ValueError("Green's function is singular at |R| = 0")
    out = np.exp(-1j * k0 * r) / (4 * np.pi * r)
    return out if out.ndim else complex(out)


def basis_eval(order: str, l: int, voxel_center, delta, r) -> np.ndarray:
    """Scalar pulse (``l = 1``) or linear (``l = 2..4``) voxel basis function at ``r``."""
    order = str(order).upper()
    if order == "PWC" and l != 1:
        raise ValueError("PWC has a single basis function (l = 1)")
    if order == "PWL" and l not in (1, 2, 3, 4):
        raise ValueError("PWL basis index must be in 1..4")
    if order not in ("PWC", "PWL"):
        raise ValueError(f"unknown basis order {order!r}")
    c = np.asarray(voxel_center, float)
    h = np.broadcast_to(np.asarray(delta, float), (3,))
    x = np.asarray(r, float)
    rel = (x - c) / h
    inside = np.all(np.abs(rel) <= 0.5, axis=-1)
    val = np.ones(inside.shape) if l == 1 else rel[..., l - 2]
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------------- quadrature rules


def _gauss(p: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(p)
    return 0.5 * (x + 1.0), 0.5 * w  # on [0, 1]


def _box_rule(lo, hi, p: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = _gauss(p)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    ax = [lo[a] + (hi[a] - lo[a]) * t for a in range(len(lo))]
    wa = [(hi[a] - lo[a]) * w for a in range(len(lo))]
    pts = np.stack([g.ravel() for g in np.meshgrid(*ax, indexing="ij")], axis=-1)
    wts = np.ones(1)
    for wv in wa:
        wts = np.multiply.outer(wts, wv)
    return pts, wts.ravel()


def _corner_rule(lo, hi, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Duffy rule on a box (any dimension) whose corner at the origin is singular.

    The box is split into pyramids with apex at the origin, one per face not
    touching it; on each pyramid the radial coordinate's Jacobian ``t**(dim-1)``
    cancels the ``1/R`` singularity.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    dim = lo.size
    sign = np.where(np.abs(lo) <= np.abs(hi), 1.0, -1.0)
    corner = np.where(sign > 0, lo, hi)
    if np.any(np.abs(corner) > 1e-12 * np.max(np.abs(hi - lo))):
        raise ValueError("corner rule needs the origin at a box corner")
    ext = np.abs(hi - lo)
    t, wt = _gauss(p)
    pts_all, w_all = [], []
    for a in range(dim):
        others = [b for b in range(dim) if b != a]
        grids = [t] + [ext[b] * t for b in others]
        wgrids = [wt] + [ext[b] * wt for b in others]
        mesh = np.meshgrid(*grids, indexing="ij")
        wm = np.ones(1)
        for wv in wgrids:
            wm = np.multiply.outer(wm, wv)
        tt = mesh[0].ravel()
        u = np.empty((tt.size, dim))
        u[:, a] = ext[a] * tt
        for i, b in enumerate(others):
            u[:, b] = tt * mesh[i + 1].ravel()
        pts_all.append(u * sign)
        w_all.append(wm.ravel() * ext[a] * tt ** (dim - 1))
    return np.concatenate(pts_all), np.concatenate(w_all)


def _is_corner(lo, hi, scale) -> bool:
    tol = 1e-12 * scale
    return all(abs(a) < tol or abs(b) < tol for a, b in zip(lo, hi))


def _g(r, k):
    return np.exp(-1j * k * r) / (4 * np.pi * r)


def _g_smooth(r, k):
    # g - g_static, continuous at r = 0
    return (np.exp(-1j * k * r) - 1.0) / (4 * np.pi * r)


def _integrate_singular(lo, hi, k, weight_fn, quad: QuadratureSpec, scale):
    """Integrate ``g * weight`` over a box or rectangle touching the origin at a corner."""
    p = quad.near_points_per_axis
    if quad.self_strategy == "duffy":
        x, w = _corner_rule(lo, hi, p)
        return np.sum(w[:, None] * (_g(np.linalg.norm(x, axis=1), k)[:, None] * weight_fn(x)), axis=0)
    # singularity subtraction: smooth remainder by plain Gauss, static part by the corner rule
    xs, ws = _box_rule(lo, hi, p)
    smooth = np.sum(ws[:, None] * (_g_smooth(np.linalg.norm(xs, axis=1), k)[:, None] * weight_fn(xs)), axis=0)
    x, w = _corner_rule(lo, hi, p)
    static = np.sum(w[:, None] * (_g(np.linalg.norm(x, axis=1), 0.0)[:, None] * weight_fn(x)), axis=0)
    return smooth + static


def _integrate_regular(lo, hi, k, weight_fn, p):
    x, w = _box_rule(lo, hi, p)
    return np.sum(w[:, None] * (_g(np.linalg.norm(x, axis=1), k)[:, None] * weight_fn(x)), axis=0)


def _near_terms(c: np.ndarray, h: np.ndarray, k: float, quad: QuadratureSpec):
    """S, dS and ddS at displacement ``c`` with derivatives carried by Lambda."""
    scale = float(np.max(h))
    vol = float(np.prod(h))
    S = 0.0 + 0.0j
    dS = np.zeros(3, complex)
    dd = np.zeros((3, 3), complex)

    def weights(x):
        rel = x - c
        lam = h - np.abs(rel)
        sg = np.sign(rel)
        cols = [lam[:, 0] * lam[:, 1] * lam[:, 2]]
        for a in range(3):
            b, p = [i for i in range(3) if i != a]
            cols.append(sg[:, a] * lam[:, b] * lam[:, p])
        for a, b in ((0, 1), (0, 2), (1, 2)):
            p = 3 - a - b
            cols.append(sg[:, a] * sg[:, b] * lam[:, p])
        return np.stack(cols, axis=1)

    for half in itertools.product((0, 1), repeat=3):
        lo = np.array([c[a] - h[a] if s == 0 else c[a] for a, s in enumerate(half)])
        hi = lo + h
        if _is_corner(lo, hi, scale):
            vals = _integrate_singular(lo, hi, k, weights, quad, scale)
        else:
            vals = _integrate_regular(lo, hi, k, weights, quad.near_points_per_axis)
        S += vals[0]
        dS += vals[1:4]
        for n, (a, b) in enumerate(((0, 1), (0, 2), (1, 2))):
            dd[a, b] += vals[4 + n]
            dd[b, a] += vals[4 + n]

    # diagonal second derivatives: Lambda'' is a sum of three planar deltas
    for a in range(3):
        b, p = [i for i in range(3) if i != a]
        hb = np.array([h[b], h[p]])
        cb = np.array([c[b], c[p]])

        def w2(y):
            lam = hb - np.abs(y - cb)
            return (lam[:, 0] * lam[:, 1])[:, None]

        for s, ws in ((-1, 1.0), (0, -2.0), (1, 1.0)):
            plane = c[a] + s * h[a]
            for half in itertools.product((0, 1), repeat=2):
                lo = np.array([cb[i] - hb[i] if hh == 0 else cb[i] for i, hh in enumerate(half)])
                hi = lo + hb
                if abs(plane) < 1e-12 * scale and _is_corner(lo, hi, scale):
                    val = _integrate_singular_plane(lo, hi, plane, k, w2, quad)
                else:
                    val = _integrate_plane(lo, hi, plane, k, w2, quad.near_points_per_axis)
                dd[a, a] += ws * val
    # dS_a = +1/V int g sign(d_a - c_a) ... ; see module notes for signs
    return S / vol, dS / vol, dd / vol


def _integrate_plane(lo, hi, plane, k, weight_fn, p):
    y, w = _box_rule(lo, hi, p)
    r = np.sqrt(plane**2 + np.sum(y**2, axis=1))
    return complex(np.sum(w * _g(r, k) * weight_fn(y)[:, 0]))


def _integrate_singular_plane(lo, hi, plane, k, weight_fn, quad):
    p = quad.near_points_per_axis
    if quad.self_strategy == "duffy":
        y, w = _corner_rule(lo, hi, p)
        r = np.linalg.norm(y, axis=1)
        return complex(np.sum(w * _g(r, k) * weight_fn(y)[:, 0]))
    ys, ws = _box_rule(lo, hi, p)
    rs = np.linalg.norm(ys, axis=1)
    smooth = np.sum(ws * _g_smooth(rs, k) * weight_fn(ys)[:, 0])
    y, w = _corner_rule(lo, hi, p)
    r = np.linalg.norm(y, axis=1)
    return complex(smooth + np.sum(w * _g(r, 0.0) * weight_fn(y)[:, 0]))


@numba.njit(cache=True, parallel=False, fastmath=False)
def _far_terms_kernel(offsets, h, k, tnodes, twts, out_S, out_dS, out_dd):
    """Closed-form kernels integrated against Lambda over its 8 linear pieces."""
    four_pi = 4.0 * np.pi
    vol = h[0] * h[1] * h[2]
    p = tnodes.size
    for m in range(offsets.shape[0]):
        c0 = -offsets[m, 0] * h[0]
        c1 = -offsets[m, 1] * h[1]
        c2 = -offsets[m, 2] * h[2]
        S = 0j
        d0 = 0j
        d1 = 0j
        d2 = 0j
        h00 = 0j
        h11 = 0j
        h22 = 0j
        h01 = 0j
        h02 = 0j
        h12 = 0j
        for s0 in range(2):
            for i0 in range(p):
                u0 = tnodes[i0] * h[0]
                x0 = c0 - h[0] + u0 if s0 == 0 else c0 + u0
                l0 = u0 if s0 == 0 else h[0] - u0
                w0 = twts[i0] * h[0] * l0
                for s1 in range(2):
                    for i1 in range(p):
                        u1 = tnodes[i1] * h[1]
                        x1 = c1 - h[1] + u1 if s1 == 0 else c1 + u1
                        l1 = u1 if s1 == 0 else h[1] - u1
                        w01 = w0 * twts[i1] * h[1] * l1
                        for s2 in range(2):
                            for i2 in range(p):
                                u2 = tnodes[i2] * h[2]
                                x2 = c2 - h[2] + u2 if s2 == 0 else c2 + u2
                                l2 = u2 if s2 == 0 else h[2] - u2
                                w = w01 * twts[i2] * h[2] * l2
                                r2 = x0 * x0 + x1 * x1 + x2 * x2
                                r = np.sqrt(r2)
                                inv = 1.0 / r
                                g = np.exp(-1j * k * r) * inv / four_pi
                                a = -1j * k - inv
                                gp = g * a
                                gpp = g * (a * a + inv * inv)
                                gpr = gp * inv
                                t = (gpp - gpr) * inv * inv
                                wg = w * g
                                S += wg
                                wgp = w * gpr
                                d0 += wgp * x0
                                d1 += wgp * x1
                                d2 += wgp * x2
                                wt = w * t
                                h00 += wt * x0 * x0 + w * gpr
                                h11 += wt * x1 * x1 + w * gpr
                                h22 += wt * x2 * x2 + w * gpr
                                h01 += wt * x0 * x1
                                h02 += wt * x0 * x2
                                h12 += wt * x1 * x2
        out_S[m] = S / vol
        out_dS[m, 0] = d0 / vol
        out_dS[m, 1] = d1 / vol
        out_dS[m, 2] = d2 / vol
        out_dd[m, 0, 0] = h00 / vol
        out_dd[m, 1, 1] = h11 / vol
        out_dd[m, 2, 2] = h22 / vol
        out_dd[m, 0, 1] = h01 / vol
        out_dd[m, 1, 0] = h01 / vol
        out_dd[m, 0, 2] = h02 / vol
        out_dd[m, 2, 0] = h02 / vol
        out_dd[m, 1, 2] = h12 / vol
        out_dd[m, 2, 1] = h12 / vol


@numba.njit(cache=True)
def _far_scalar_kernel(offsets, h, k, tnodes, twts, out_S):
    four_pi = 4.0 * np.pi
    vol = h[0] * h[1] * h[2]
    p = tnodes.size
    for m in range(offsets.shape[0]):
        c0 = -offsets[m, 0] * h[0]
        c1 = -offsets[m, 1] * h[1]
        c2 = -offsets[m, 2] * h[2]
        S = 0j
        for s0 in range(2):
            for i0 in range(p):
                u0 = tnodes[i0] * h[0]
                x0 = c0 - h[0] + u0 if s0 == 0 else c0 + u0
                w0 = twts[i0] * h[0] * (u0 if s0 == 0 else h[0] - u0)
                for s1 in range(2):
                    for i1 in range(p):
                        u1 = tnodes[i1] * h[1]
                        x1 = c1 - h[1] + u1 if s1 == 0 else c1 + u1
                        w01 = w0 * twts[i1] * h[1] * (u1 if s1 == 0 else h[1] - u1)
                        for s2 in range(2):
                            for i2 in range(p):
                                u2 = tnodes[i2] * h[2]
                                x2 = c2 - h[2] + u2 if s2 == 0 else c2 + u2
                                w = w01 * twts[i2] * h[2] * (u2 if s2 == 0 else h[2] - u2)
                                r = np.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
                                S += w * np.exp(-1j * k * r) / (four_pi * r)
        out_S[m] = S / vol


def interaction_terms(offsets, resolution, k0: float, quad: QuadratureSpec | None = None,
                      scalar_only: bool = False):
    """Nondimensional ``S``, ``grad S`` and ``hess S`` for integer voxel offsets.

    Lengths are measured in units of ``resolution[0]``; the returned wavenumber-
    scaled quantities are those of a grid with ``h = resolution / resolution[0]``
    and ``k = k0 * resolution[0]``.  Returns ``(S, dS, dd, scale)``.
    """
    quad = quad or QuadratureSpec()
    offsets = np.atleast_2d(np.asarray(offsets, dtype=np.int64))
    res = np.asarray(resolution, float)
    scale = float(res[0])
    h = res / scale
    k = float(k0) * scale
    M = offsets.shape[0]
    S = np.zeros(M, complex)
    dS = np.zeros((M, 3), complex)
    dd = np.zeros((M, 3, 3), complex)
    cheb = np.max(np.abs(offsets), axis=1)
    near = cheb <= quad.near_radius
    for m in np.flatnonzero(near):
        c = -offsets[m] * h
        S[m], dS[m], dd[m] = _near_terms(c, h, k, quad)
    far = ~near
    for order in sorted({quad.far_order(int(d)) for d in cheb[far]}):
        sel = np.flatnonzero(far & (np.array([quad.far_order(int(d)) for d in cheb]) == order))
        if sel.size == 0:
            continue
        t, w = _gauss(order)
        oS = np.zeros(sel.size, complex)
        odS = np.zeros((sel.size, 3), complex)
        odd = np.zeros((sel.size, 3, 3), complex)
        if scalar_only:
            _far_scalar_kernel(np.ascontiguousarray(offsets[sel]), h, k, t, w, oS)
        else:
            _far_terms_kernel(np.ascontiguousarray(offsets[sel]), h, k, t, w, oS, odS, odd)
        S[sel], dS[sel], dd[sel] = oS, odS, odd
    return S, dS, dd, scale


def _grid_offsets(dims) -> np.ndarray:
    idx = np.meshgrid(*(np.arange(n) for n in dims), indexing="ij")
    return np.stack([i.ravel(order="F") for i in idx], axis=1)


def _components_from_terms(comps, S, dS, dd, offsets, k, scale):
    out = {}
    is_self = np.all(offsets == 0, axis=1)
    eps = np.zeros((3, 3, 3))
    for a, b, c in itertools.permutations(range(3)):
        eps[a, b, c] = np.linalg.det(np.eye(3)[[a, b, c]])
    for comp in comps:
        if comp.operator is Operator.SCALAR:
            v = S * scale**2
        elif comp.operator is Operator.N:
            q, p = comp.row, comp.col
            v = dd[:, q, p].copy()
            if q == p:
                v = v + k**2 * S + is_self
        else:
            q, p = comp.row, comp.col
            v = np.zeros_like(S)
            for a in range(3):
                if eps[q, a, p] != 0:
                    v = v + eps[q, a, p] * dS[:, a]
            v = v * scale
        out[comp] = v
    return out


def assemble_operator(grid: VoxelGrid, k0: float, operator, quad: QuadratureSpec | None = None,
                      components=None) -> dict[KernelComponent, np.ndarray]:
    """Assemble the defining tensors of every unique component of ``operator`` in one pass."""
    if components is None:
        comps = unique_components(operator)
    else:
        comps = [c if isinstance(c, KernelComponent) else KernelComponent.parse(c) for c in components]
    offsets = _grid_offsets(grid.dims)
    scalar_only = all(c.operator is Operator.SCALAR for c in comps)
    S, dS, dd, scale = interaction_terms(offsets, grid.resolution, k0, quad, scalar_only=scalar_only)
    k = k0 * scale
    vals = _components_from_terms(comps, S, dS, dd, offsets, k, scale)
    return {c: v.reshape(grid.dims, order="F") for c, v in vals.items()}


def assemble_defining_tensor(grid: VoxelGrid, k0: float, comp: KernelComponent,
                             quad: QuadratureSpec | None = None, basis: str = "PWC") -> np.ndarray:
    """Toeplitz-defining tensor of one kernel component on ``grid``."""
    if str(basis).upper() != "PWC":
        raise UnsupportedBasisError("only PWC assembly is supported")
    if comp.is_zero:
        return np.zeros(grid.dims, complex)
    return assemble_operator(grid, k0, comp.operator, quad, components=[comp])[comp]


def depolarization_dyad(delta, quad: QuadratureSpec | None = None) -> np.ndarray:
    """``-1/V int int grad grad g0`` over one voxel (equals I/3 for a cube)."""
    quad = quad or QuadratureSpec()
    h = np.broadcast_to(np.asarray(delta, float), (3,))
    _, _, dd, _ = interaction_terms(np.zeros((1, 3), int), h, 0.0, quad)
    return -dd[0].real


def self_static_term(delta, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Static self-interaction dyad of the N operator: ``I - L`` with ``L`` the depolarization dyad.

    The result is dimensionless and invariant under uniform rescaling of the voxel.
    A budget too small to resolve the corner singularity raises
    :class:`QuadratureError` carrying the estimate and a convergence indicator.
    """
    quad = quad or QuadratureSpec()
    L = depolarization_dyad(delta, quad)
    coarse = QuadratureSpec(quad.far_points_per_axis, max(1, quad.near_points_per_axis // 2),
                            quad.near_radius, quad.self_strategy)
    indicator = float(np.max(np.abs(L - depolarization_dyad(delta, coarse))))
    if indicator > 1e-3:
        raise QuadratureError(
            f"self term not converged: estimate trace={np.trace(L):.6f}, change vs half order={indicator:.2e}"
        )
    return np.eye(3) - L
