"""Electric-current volume integral equation: system operator, GMRES and postprocessing.

Time convention ``exp(+i w t)`` (matching the ``exp(-i k0 R)`` kernel), so a lossy
medium has ``eps_r = eps' - i sigma / (eps0 w)``.  With ``chi = eps_r - 1`` and
``c_e = i w eps0`` the polarization current ``j = c_e chi e`` solves

    eps_r j - chi N j = c_e chi e_inc

and the fields follow as ``e = e_inc + (N j - j) / c_e`` and ``h = h_inc + K j``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import VoxelGrid
from .constants import EPS0, MU0, wavenumber
from .fftop import BlockOperator, MatvecStrategy, ScratchPolicy, apply_operator

__all__ = [
    "DielectricMap",
    "PlaneWave",
    "GmresConfig",
    "GmresResult",
    "SolveReport",
    "build_rhs",
    "apply_system",
    "gmres",
    "recover_fields",
    "postprocess",
    "solve",
]

log = logging.getLogger(__name__)


@dataclass
class DielectricMap:
    """Per-voxel complex relative permittivity at one frequency."""

    eps_r: np.ndarray
    frequency: float

    def __post_init__(self):
        self.eps_r = np.asarray(self.eps_r, dtype=np.complex128)
        if self.eps_r.ndim != 3:
            raise ValueError("eps_r must be a 3D array")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if np.any(self.eps_r.imag > 0):
            raise ValueError("Im(eps_r) > 0 is an active medium under the exp(+iwt) convention")

    @classmethod
    def from_properties(cls, eps_real, sigma, frequency: float) -> "DielectricMap":
        omega = 2 * np.pi * frequency
        eps = np.asarray(eps_real, float) - 1j * np.asarray(sigma, float) / (EPS0 * omega)
        return cls(eps, frequency)

    @property
    def dims(self):
        return self.eps_r.shape

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency

    @property
    def k0(self) -> float:
        return wavenumber(self.frequency)

    @property
    def chi(self) -> np.ndarray:
        return self.eps_r - 1.0

    @property
    def sigma(self) -> np.ndarray:
        return -self.eps_r.imag * EPS0 * self.omega

    @property
    def c_e(self) -> complex:
        return 1j * self.omega * EPS0

    @property
    def c_m(self) -> complex:
        return 1j * self.omega * MU0


@dataclass
class PlaneWave:
    polarization: tuple = (1.0, 0.0, 0.0)
    direction: tuple = (0.0, 0.0, 1.0)
    amplitude: complex = 1.0

    def __post_init__(self):
        p = np.asarray(self.polarization, float)
        d = np.asarray(self.direction, float)
        d = d / np.linalg.norm(d)
        p = p / np.linalg.norm(p)
        if abs(p @ d) > 1e-12:
            raise ValueError("polarization must be perpendicular to the propagation direction")
        self.polarization = tuple(p)
        self.direction = tuple(d)

    def e_field(self, grid: VoxelGrid, k0: float) -> np.ndarray:
        """Incident electric field at voxel centers, shape ``(3, n1, n2, n3)``."""
        x, y, z = grid.centers()
        d = self.direction
        phase = np.exp(-1j * k0 * (d[0] * x + d[1] * y + d[2] * z))
        return self.amplitude * np.asarray(self.polarization)[:, None, None, None] * phase[None]

    def h_field(self, grid: VoxelGrid, k0: float, omega: float) -> np.ndarray:
        """``h = -(1/c_m) curl e = (k0 / (w mu0)) d x e`` for a plane wave."""
        e = self.e_field(grid, k0)
        d = np.asarray(self.direction)[:, None, None, None]
        return (k0 / (omega * MU0)) * np.cross(d, e, axis=0)


@dataclass
class GmresConfig:
    tol: float = 1e-5
    inner: int = 50
    outer: int = 200

    def __post_init__(self):
        if self.tol <= 0 or self.inner < 1 or self.outer < 1:
            raise ValueError("GMRES needs tol > 0, inner >= 1, outer >= 1")


@dataclass
class GmresResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float
    history: list = field(default_factory=list)  # per-iteration relative residual estimates
    restart_residuals: list = field(default_factory=list)  # true relative residuals at restarts


def _givens(a: complex, b: complex):
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, np.conj(b) / abs(b)
    t = np.hypot(abs(a), abs(b))
    c = abs(a) / t
    s = (a / abs(a)) * np.conj(b) / t
    return c, s


def gmres(apply, rhs, cfg: GmresConfig | None = None, x0=None, callback=None) -> GmresResult:
    """Restarted GMRES(``cfg.inner``) with at most ``cfg.outer`` cycles.

    ``apply`` maps arrays shaped like ``rhs`` to the same shape.  Convergence is
    judged on the true relative residual ``||b - A x|| / ||b||`` recomputed at
    the end of each cycle; non-convergence is reported, never raised.
    """
    cfg = cfg or GmresConfig()
    shape = np.shape(rhs)
    b = np.asarray(rhs, dtype=np.complex128).ravel()
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side has non-finite entries")
    n = b.size
    bnorm = np.linalg.norm(b)
    x = np.zeros(n, complex) if x0 is None else np.asarray(x0, complex).ravel().copy()
    if bnorm == 0:
        return GmresResult(np.zeros(shape, complex), True, 0, 0.0, [0.0], [0.0])

    def A(v):
        # copy: ``apply`` may hand back a view of its argument, which is updated in place below
        return np.array(apply(v.reshape(shape)), dtype=np.complex128).ravel()

    m = cfg.inner
    r = b - A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history = [beta / bnorm]
    restarts = [beta / bnorm]
    iters = 0
    V = np.empty((m + 1, n), dtype=np.complex128)
    for _cycle in range(cfg.outer):
        if beta / bnorm <= cfg.tol:
            break
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m)
        sn = np.zeros(m, complex)
        g = np.zeros(m + 1, complex)
        g[0] = beta
        V[0] = r / beta
        k = 0
        for j in range(m):
            w = A(V[j])
            # classical Gram-Schmidt with one reorthogonalization pass
            h = V[: j + 1].conj() @ w
            w -= V[: j + 1].T @ h
            h2 = V[: j + 1].conj() @ w
            w -= V[: j + 1].T @ h2
            H[: j + 1, j] = h + h2
            hn = np.linalg.norm(w)
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            iters += 1
            k = j + 1
            est = abs(g[j + 1]) / bnorm
            history.append(est)
            if callback is not None:
                callback(iters, est)
            if hn <= 1e-14 * beta or est <= cfg.tol:
                break
            V[j + 1] = w / hn
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
        x += V[:k].T @ y
        r = b - A(x)
        beta = np.linalg.norm(r)
        restarts.append(beta / bnorm)
        log.debug("gmres cycle %d: iters=%d true residual %.3e", _cycle, iters, beta / bnorm)
    res = beta / bnorm
    return GmresResult(x.reshape(shape), res <= cfg.tol, iters, res, history, restarts)


# ----------------------------------------------------------------------------- system


def build_rhs(emap: DielectricMap, inc: PlaneWave, grid: VoxelGrid) -> np.ndarray:
    """``c_e chi e_inc`` sampled at voxel centers, shape ``(3, n1, n2, n3)``."""
    if tuple(grid.dims) != tuple(emap.dims):
        raise ValueError(f"grid dims {grid.dims} do not match map dims {emap.dims}")
    e_inc = inc.e_field(grid, emap.k0)
    return emap.c_e * emap.chi[None] * e_inc


def apply_system(emap: DielectricMap, op_n: BlockOperator, x, strategy=MatvecStrategy.DENSE,
                 scratch=ScratchPolicy.ALLOCATE) -> np.ndarray:
    """``eps_r x - chi (N x)``."""
    x = np.asarray(x, dtype=np.complex128)
    nx = apply_operator(op_n, x, strategy, scratch)
    return emap.eps_r[None] * x - emap.chi[None] * nx


def recover_fields(j, emap: DielectricMap, inc: PlaneWave, grid: VoxelGrid, op_n: BlockOperator | None,
                   op_k: BlockOperator | None, strategy=MatvecStrategy.DENSE, outside: str = "incident"):
    """Electric and magnetic fields from the polarization current.

    Inside the scatterer ``e = j / (c_e chi)``.  Outside, ``outside`` selects
    ``"incident"`` (e_inc), ``"masked"`` (zero) or ``"scattered"``
    (``e_inc + N j / c_e``, needs ``op_n``).  ``h = h_inc + K j`` when ``op_k``
    is given, otherwise ``h_inc``.
    """
    j = np.asarray(j, dtype=np.complex128)
    chi = emap.chi
    inside = chi != 0
    e_inc = inc.e_field(grid, emap.k0)
    e = np.where(inside[None], 0.0, e_inc).astype(complex)
    e[:, inside] = j[:, inside] / (emap.c_e * chi[inside])
    if outside == "masked":
        e[:, ~inside] = 0.0
    elif outside == "scattered":
        if op_n is None:
            raise ValueError("scattered outside fields need the N operator")
        sca = (apply_operator(op_n, j, _available(op_n, strategy)) - j) / emap.c_e
        e[:, ~inside] = e_inc[:, ~inside] + sca[:, ~inside]
    elif outside != "incident":
        raise ValueError(f"unknown outside mode {outside!r}")
    h = inc.h_field(grid, emap.k0, emap.omega)
    if op_k is not None:
        h = h + apply_operator(op_k, j, _available(op_k, strategy))
    return e, h


def _available(op: BlockOperator, strategy) -> MatvecStrategy:
    """``strategy`` if every block of ``op`` carries its form, otherwise dense."""
    strategy = MatvecStrategy.parse(strategy)
    if all(getattr(sp, strategy.form) is not None for sp in op.spectra):
        return strategy
    return MatvecStrategy.DENSE


def postprocess(e, h, emap: DielectricMap, grid: VoxelGrid):
    """``p_abs = sigma |e|^2 / 2`` per voxel, its volume integral, and ``|b1+| = mu0 |h_x + i h_y|``."""
    e = np.asarray(e)
    h = np.asarray(h)
    p_abs = 0.5 * emap.sigma * np.sum(np.abs(e) ** 2, axis=0)
    total = float(np.sum(p_abs) * grid.voxel_volume)
    b1 = MU0 * np.abs(h[0] + 1j * h[1])
    return p_abs, total, b1


@dataclass
class SolveReport:
    j: np.ndarray
    converged: bool
    iterations: int
    residual: float
    history: list
    wall_time: float
    e: np.ndarray | None = None
    h: np.ndarray | None = None
    p_abs: np.ndarray | None = None
    absorbed_power: float = float("nan")
    b1plus: np.ndarray | None = None
    strategy: str = "dense"

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "wall_time_s": float(self.wall_time),
            "absorbed_power_W": float(self.absorbed_power),
            "residual_history": [float(v) for v in self.history],
        }


def solve(emap: DielectricMap, grid: VoxelGrid, inc: PlaneWave, op_n: BlockOperator, op_k: BlockOperator | None = None,
          strategy=MatvecStrategy.DENSE, cfg: GmresConfig | None = None, x0=None) -> SolveReport:
    strategy = MatvecStrategy.parse(strategy)
    cfg = cfg or GmresConfig()
    rhs = build_rhs(emap, inc, grid)
    scratch = np.empty(op_n.embedded_dims, complex) if strategy.needs_buffer else ScratchPolicy.NONE
    t0 = time.perf_counter()
    res = gmres(lambda v: apply_system(emap, op_n, v, strategy, scratch), rhs, cfg, x0=x0)
    wall = time.perf_counter() - t0
    e, h = recover_fields(res.x, emap, inc, grid, op_n, op_k, strategy)
    p_abs, total, b1 = postprocess(e, h, emap, grid)
    log.info("solve %s: converged=%s iters=%d residual=%.2e time=%.1fs P=%.6e", strategy.value, res.converged,
             res.iterations, res.residual, wall, total)
    return SolveReport(res.x, res.converged, res.iterations, res.residual, res.history, wall, e, h, p_abs, total, b1,
                       strategy.value)
