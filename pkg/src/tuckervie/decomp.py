"""Tucker (HOSVD) and Tucker+CP compression of third-order tensors."""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor import as_tensor, cp_reconstruct, frobenius_norm, n_mode_product, tucker_reconstruct, unfold

__all__ = [
    "TruncationRule",
    "TuckerForm",
    "CPForm",
    "TuckerCPForm",
    "CompressionStats",
    "truncated_svd",
    "hosvd",
    "multilinear_rank",
    "cp_als",
    "slice_cp",
    "tucker_cp",
    "compression_stats",
]

log = logging.getLogger(__name__)

_SQRT3 = np.sqrt(3.0)
# relative slack for keeping a singular value that sits on the threshold
_TIE_RTOL = 1e-14


class TruncationRule(str, enum.Enum):
    SIGMA_MAX = "sigma_max"
    ENERGY = "energy"

    @classmethod
    def parse(cls, rule) -> "TruncationRule":
        if isinstance(rule, cls):
            return rule
        key = str(rule).lower().replace("-", "_")
        aliases = {"sigmamax": "sigma_max", "sigma": "sigma_max", "max": "sigma_max"}
        return cls(aliases.get(key, key))


@dataclass
class TuckerForm:
    core: np.ndarray
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    rule: TruncationRule = TruncationRule.ENERGY
    tol: float = 0.0

    @property
    def ranks(self) -> tuple[int, int, int]:
        return tuple(int(r) for r in self.core.shape)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(u.shape[0]) for u in self.factors)

    def reconstruct(self) -> np.ndarray:
        return tucker_reconstruct(self.core, *self.factors)

    @property
    def n_elements(self) -> int:
        return int(self.core.size + sum(u.size for u in self.factors))


@dataclass
class CPForm:
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    errors: list[float] = field(default_factory=list)

    def __post_init__(self):
        cols = {u.shape[1] for u in self.factors}
        if len(cols) != 1:
            raise ValueError(f"CP factors must share the column count, got {sorted(cols)}")

    @property
    def rank(self) -> int:
        return int(self.factors[0].shape[1])

    def reconstruct(self) -> np.ndarray:
        return cp_reconstruct(*self.factors)


@dataclass
class TuckerCPForm:
    """Merged factors ``W_q = U_q V_q`` of a CP model fitted to a Tucker core."""

    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    tucker_ranks: tuple[int, int, int] = (0, 0, 0)
    rule: TruncationRule = TruncationRule.ENERGY
    tol: float = 0.0

    def __post_init__(self):
        cols = {u.shape[1] for u in self.factors}
        if len(cols) != 1:
            raise ValueError(f"Tucker+CP factors must share the column count, got {sorted(cols)}")

    @property
    def rank(self) -> int:
        return int(self.factors[0].shape[1])

    @property
    def ranks(self) -> tuple[int, int, int]:
        return (self.rank,) * 3

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(u.shape[0]) for u in self.factors)

    def reconstruct(self) -> np.ndarray:
        return cp_reconstruct(*self.factors)

    @property
    def n_elements(self) -> int:
        return int(sum(u.size for u in self.factors))


@dataclass
class CompressionStats:
    original_elements: int
    compressed_elements: int
    compression_factor: float
    achieved_relative_error: float
    ranks: tuple

    def as_dict(self) -> dict:
        return {
            "original_elements": self.original_elements,
            "compressed_elements": self.compressed_elements,
            "compression_factor": self.compression_factor,
            "achieved_relative_error": self.achieved_relative_error,
            "ranks": list(self.ranks),
        }


def _truncation_rank(s: np.ndarray, tol: float, rule: TruncationRule) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    if tol == 0.0:
        return int(np.count_nonzero(s > 0.0))
    smax = s[0]
    if rule is TruncationRule.SIGMA_MAX:
        thresh = tol / _SQRT3 * smax
        keep = (s >= thresh) | (np.abs(s - thresh) / smax < _TIE_RTOL)
        return int(np.count_nonzero(keep))
    # energy: smallest r whose discarded tail has norm <= tol/sqrt(3) * ||m||_F
    budget = tol / _SQRT3 * np.sqrt(np.sum(s**2))
    tail = np.append(np.sqrt(np.cumsum((s**2)[::-1])[::-1]), 0.0)  # tail[r] = ||s[r:]||
    ok = tail < budget - _TIE_RTOL * smax
    return int(np.argmax(ok)) if ok.any() else s.size


def truncated_svd(m, tol: float, rule=TruncationRule.ENERGY):
    """Truncated SVD of a matrix.

    Returns ``(U, s, Vh, r)`` with ``U`` of shape ``(rows, r)``.  ``SIGMA_MAX`` keeps
    singular values ``>= tol/sqrt(3) * s_max``; ``ENERGY`` keeps the smallest ``r``
    whose discarded tail has norm ``<= tol/sqrt(3) * ||m||_F``.  ``tol = 0`` keeps
    every nonzero singular value.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("truncated_svd needs a non-empty matrix")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    rule = TruncationRule.parse(rule)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    r = _truncation_rank(s, tol, rule)
    return u[:, :r], s[:r], vh[:r, :], r


def _mode_factor(t: np.ndarray, mode: int, tol: float, rule: TruncationRule, rank=None) -> np.ndarray:
    u, _, _, r = truncated_svd(unfold(t, mode), 0.0 if rank is not None else tol, rule)
    if rank is not None:
        u = u[:, : min(int(rank), r)]
    return np.ascontiguousarray(u)


def hosvd(t, tol: float = 0.0, rule=TruncationRule.ENERGY, ranks=None) -> TuckerForm:
    """Truncated higher-order SVD.

    With the ``ENERGY`` rule the reconstruction satisfies
    ``||t - t~||_F <= tol * ||t||_F``; ``SIGMA_MAX`` applies the relative
    singular-value threshold mode by mode and carries no such guarantee.
    ``ranks`` fixes the multilinear rank instead (capped at the numerical rank).
    """
    a = as_tensor(t)
    if min(a.shape) == 0:
        raise ValueError(f"degenerate tensor dims {a.shape}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    rule = TruncationRule.parse(rule)
    ranks = (None, None, None) if ranks is None else tuple(ranks)
    factors = tuple(_mode_factor(a, q, tol, rule, ranks[q - 1]) for q in (1, 2, 3))
    core = a
    for q, u in enumerate(factors, start=1):
        core = n_mode_product(core, u.conj().T, q)
    return TuckerForm(core=np.ascontiguousarray(core), factors=factors, rule=rule, tol=float(tol))


def multilinear_rank(t, tol: float = 0.0, rule=TruncationRule.ENERGY) -> tuple[int, int, int]:
    a = as_tensor(t)
    if min(a.shape) == 0:
        raise ValueError(f"degenerate tensor dims {a.shape}")
    rule = TruncationRule.parse(rule)
    return tuple(_mode_factor(a, q, tol, rule).shape[1] for q in (1, 2, 3))


def _khatri_rao(b: np.ndarray, c: np.ndarray) -> np.ndarray:
    # rows ordered to match the axis-1-fastest unfoldings: row index j + n_b * k
    return (b[:, None, :] * c[None, :, :]).reshape(-1, b.shape[1], order="F")


def _cp_init(t: np.ndarray, r: int, rng: np.random.Generator | None) -> list[np.ndarray]:
    factors = []
    for q in (1, 2, 3):
        n = t.shape[q - 1]
        u, _, _, _ = truncated_svd(unfold(t, q), 0.0)
        f = np.zeros((n, r), dtype=np.complex128)
        k = min(u.shape[1], r)
        f[:, :k] = u[:, :k]
        if k < r:
            # not enough singular directions: fill with deterministic pseudo-random columns
            g = rng if rng is not None else np.random.default_rng(q)
            f[:, k:] = g.standard_normal((n, r - k)) + 1j * g.standard_normal((n, r - k))
        if rng is not None:
            f = f + 0.1 * (rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape))
        factors.append(f)
    return factors


def _als_sweeps(t, factors, max_iters, stall_tol, tnorm):
    unf = [unfold(t, q) for q in (1, 2, 3)]
    errors = []
    for _ in range(max_iters):
        for q in range(3):
            others = [factors[p] for p in range(3) if p != q]
            kr = _khatri_rao(others[0], others[1])
            # least squares on the Khatri-Rao product itself; the normal equations square its conditioning
            factors[q] = np.linalg.lstsq(kr, unf[q].T, rcond=None)[0].T
        err = frobenius_norm(t - cp_reconstruct(*factors)) / tnorm
        errors.append(err)
        if len(errors) > 1 and errors[-2] - err < stall_tol * max(errors[-2], np.finfo(float).tiny):
            break
        if err < 1e-15:
            break
    return factors, errors


def cp_als(t, r: int, max_iters: int = 1000, stall_tol: float = 1e-12, restarts: int = 0, seed=None) -> CPForm:
    """Rank-``r`` CP model by alternating least squares.

    Starts from the leading left singular vectors of the unfoldings; ``restarts``
    extra seeded random perturbations of that start are tried and the best fit
    is kept.  Stops after ``max_iters`` sweeps or when the relative-error
    improvement of a sweep drops below ``stall_tol``.
    """
    a = as_tensor(t)
    if r < 1:
        raise ValueError(f"CP rank must be >= 1, got {r}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    d = sorted(a.shape)
    if r > d[0] * d[1]:
        warnings.warn(f"CP rank {r} exceeds the product of the two smallest dims {d[0] * d[1]}", stacklevel=2)
    tnorm = frobenius_norm(a)
    if tnorm == 0.0:
        return CPForm(factors=tuple(np.zeros((n, r), dtype=np.complex128) for n in a.shape), errors=[0.0])
    best = None
    rng = np.random.default_rng(seed) if restarts else None
    for attempt in range(restarts + 1):
        init = _cp_init(a, r, rng if attempt else None)
        factors, errors = _als_sweeps(a, init, max_iters, stall_tol, tnorm)
        if best is None or errors[-1] < best.errors[-1]:
            best = CPForm(factors=tuple(factors), errors=errors)
    return best


def slice_cp(core) -> CPForm:
    """Exact CP of a small tensor from its slices along the largest mode.

    Rank is the product of the two smaller dimensions.
    """
    g = np.asarray(core, dtype=np.complex128)
    free = int(np.argmax(g.shape))
    p, q = [a for a in range(3) if a != free]
    rp, rq = g.shape[p], g.shape[q]
    r = rp * rq
    factors = [None, None, None]
    factors[p] = np.zeros((rp, r), dtype=np.complex128)
    factors[q] = np.zeros((rq, r), dtype=np.complex128)
    factors[free] = np.zeros((g.shape[free], r), dtype=np.complex128)
    gm = np.moveaxis(g, (p, q, free), (0, 1, 2))
    for a in range(rp):
        for b in range(rq):
            l = a * rq + b
            factors[p][a, l] = 1.0
            factors[q][b, l] = 1.0
            factors[free][:, l] = gm[a, b, :]
    return CPForm(factors=tuple(factors), errors=[0.0])


def _fit_core(core, rank, tol, cp_iters, stall_tol) -> CPForm:
    ranks = core.shape
    exact_rank = int(np.prod(sorted(ranks)[:2]))
    if rank == "exact":
        return slice_cp(core)
    if rank == "min":
        return cp_als(core, min(ranks), max_iters=cp_iters, stall_tol=stall_tol)
    if rank == "adaptive":
        # grow the CP rank until the core fit meets tol; slices are the exact fallback
        r = min(ranks)
        while r < exact_rank:
            cp = cp_als(core, r, max_iters=cp_iters, stall_tol=stall_tol)
            if cp.errors[-1] <= tol:
                return cp
            r = max(r + 1, int(np.ceil(1.5 * r)))
        return slice_cp(core)
    r = int(rank)
    return cp_als(core, r, max_iters=cp_iters, stall_tol=stall_tol)


def tucker_cp(t, tol: float = 1e-8, cp_iters: int = 1000, rank="min",
              rule=TruncationRule.ENERGY, stall_tol: float = 1e-12):
    """HOSVD followed by a CP model of the core, factors merged as ``W_q = U_q V_q``.

    ``rank`` selects the CP rank: ``"min"`` (default) uses ``min(r1, r2, r3)`` of
    the Tucker core, an integer fixes it, ``"exact"`` uses the exact slice
    decomposition and ``"adaptive"`` grows the rank until the core fit reaches
    ``tol`` (falling back to ``"exact"``).  Returns ``(TuckerCPForm, CompressionStats)``.
    """
    a = as_tensor(t)
    tk = hosvd(a, tol, rule)
    ranks = tk.ranks
    if min(ranks) == 0:
        w = tuple(np.zeros((n, 0), dtype=np.complex128) for n in a.shape)
        form = TuckerCPForm(factors=w, tucker_ranks=ranks, rule=tk.rule, tol=float(tol))
        return form, compression_stats(form, a.shape, a)
    cp = _fit_core(tk.core, "min" if rank is None else rank, tol, cp_iters, stall_tol)
    w = tuple(np.ascontiguousarray(u @ v) for u, v in zip(tk.factors, cp.factors))
    form = TuckerCPForm(factors=w, tucker_ranks=ranks, rule=tk.rule, tol=float(tol))
    stats = compression_stats(form, a.shape, a)
    log.debug("tucker_cp ranks=%s cp_rank=%d sweeps=%d err=%.3e", ranks, cp.rank, len(cp.errors),
              stats.achieved_relative_error)
    return form, stats


def compression_stats(form, original_dims, original=None) -> CompressionStats:
    """Element counts of ``form`` against the dense ``original_dims`` tensor.

    When the dense tensor is given the achieved relative reconstruction error is
    filled in, otherwise it is NaN.
    """
    n_orig = int(np.prod(original_dims))
    n_comp = int(form.n_elements)
    err = float("nan")
    if original is not None:
        a = np.asarray(original)
        nrm = frobenius_norm(a)
        diff = frobenius_norm(a - form.reconstruct())
        err = diff / nrm if nrm > 0 else diff
    factor = n_orig / n_comp if n_comp else float("inf")
    return CompressionStats(n_orig, n_comp, factor, err, tuple(form.ranks))
