"""Circulant embedding and FFT matrix-vector products on dense or compressed kernels.

Index convention
----------------
A defining tensor ``T`` stores ``f(o)`` for offsets ``o = source - test >= 0``;
offsets with negative components follow from the per-axis parity flags,
``f(o) = T[|o|] * prod_{a: o_a < 0} parity_a``.  The block matrix entry is
``A[(q, m), (q', n)] = f^{qq'}(n - m)``, so ``y = A x`` is a correlation.  In
convolution form the kernel is ``h(p) = f(-p) = sigma * f(p)`` with
``sigma = prod_a parity_a``; ``sigma`` is applied as a scalar when blocks are
accumulated, so the embedded spectra themselves are those of ``T``.

Embedding layout (per axis, size ``2n``): ``[T_0 .. T_{n-1}, 0, s*T_{n-1} .. s*T_1]``.
"""

from __future__ import annotations

import enum
import statistics
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.fft

from .assembly import KernelComponent, Operator, component_parity
from .decomp import TruncationRule, TuckerCPForm, TuckerForm, hosvd, tucker_cp

__all__ = [
    "MatvecStrategy",
    "ScratchPolicy",
    "FFTProvider",
    "EmbeddedSpectrum",
    "BlockOperator",
    "circulant_embed",
    "embed_factor",
    "transform_factors",
    "build_operator",
    "apply_operator",
    "apply_spectral",
    "dense_bttb_matrix",
    "matvec_bench",
    "flop_estimate",
    "MissingFormError",
]


class MatvecStrategy(str, enum.Enum):
    DENSE = "dense"
    HOSVD_DECOMPRESS = "hosvd-decompress"
    HOSVD_LOOP = "hosvd-loop"
    TUCKERCP_DECOMPRESS = "tuckercp-decompress"
    TUCKERCP_LOOP = "tuckercp-loop"

    @classmethod
    def parse(cls, s) -> "MatvecStrategy":
        if isinstance(s, cls):
            return s
        key = str(s).lower().replace("_", "-")
        aliases = {"hosvd": "hosvd-decompress", "tuckercp": "tuckercp-decompress", "tucker-cp": "tuckercp-decompress"}
        return cls(aliases.get(key, key))

    @property
    def form(self) -> str:
        if self is MatvecStrategy.DENSE:
            return "dense"
        return "tucker" if self.value.startswith("hosvd") else "tuckercp"

    @property
    def needs_buffer(self) -> bool:
        return self.value.endswith("decompress")


class ScratchPolicy(str, enum.Enum):
    ALLOCATE = "allocate"
    NONE = "none"


class MissingFormError(ValueError):
    pass


class FFTProvider:
    """3D transforms on the embedded grid.

    Backed by ``scipy.fft``, which caches plans per shape, so repeated transforms
    of the same size reuse their plan.
    """

    def __init__(self, workers: int | None = None):
        self.workers = workers

    def forward(self, x, shape):
        return scipy.fft.fftn(x, s=shape, workers=self.workers)

    def inverse(self, y):
        return scipy.fft.ifftn(y, workers=self.workers, overwrite_x=True)


_DEFAULT_FFT = FFTProvider()


# ----------------------------------------------------------------------------- embedding


def _embed_axis(a: np.ndarray, axis: int, sign: int) -> np.ndarray:
    n = a.shape[axis]
    shape = list(a.shape)
    shape[axis] = 2 * n
    out = np.zeros(shape, dtype=np.complex128)
    src = np.moveaxis(a, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    dst[:n] = src
    if n > 1:
        dst[n + 1:] = sign * src[:0:-1]
    return out


def circulant_embed(t, parity=(1, 1, 1)) -> np.ndarray:
    """Double every axis with one zero pad plane and parity-signed reflections."""
    out = np.asarray(t, dtype=np.complex128)
    if out.ndim != 3:
        raise ValueError("circulant_embed expects a 3D tensor")
    for a, s in enumerate(parity):
        out = _embed_axis(out, a, int(s))
    return out


def embed_factor(u, sign: int) -> np.ndarray:
    """Embed each column of a factor matrix like one axis of :func:`circulant_embed`."""
    return _embed_axis(np.asarray(u, dtype=np.complex128), 0, int(sign))


def transform_factors(form, parity=(1, 1, 1)):
    """Embed and DFT every factor column; the core (if any) is unchanged."""
    factors = tuple(
        np.ascontiguousarray(scipy.fft.fft(embed_factor(u, s), axis=0)) for u, s in zip(form.factors, parity)
    )
    if isinstance(form, TuckerForm):
        return TuckerForm(core=form.core, factors=factors, rule=form.rule, tol=form.tol)
    if isinstance(form, TuckerCPForm):
        return TuckerCPForm(factors=factors, tucker_ranks=form.tucker_ranks, rule=form.rule, tol=form.tol)
    raise TypeError(f"cannot transform {type(form).__name__}")


# ----------------------------------------------------------------------------- operator state


@dataclass
class EmbeddedSpectrum:
    """Fourier-domain data of one kernel component on the doubled grid."""

    component: KernelComponent
    dims: tuple[int, int, int]
    parity: tuple[int, int, int]
    dense: np.ndarray | None = None
    tucker: TuckerForm | None = None
    tuckercp: TuckerCPForm | None = None

    @property
    def embedded_dims(self) -> tuple[int, int, int]:
        return tuple(2 * n for n in self.dims)

    @property
    def sigma(self) -> int:
        return int(np.prod(self.parity))

    def form(self, name: str):
        f = getattr(self, name)
        if f is None:
            raise MissingFormError(f"component {self.component.name} has no {name} form")
        return f


@dataclass
class BlockOperator:
    """A 3x3 block-BTTB operator (``N`` or ``K``) stored by its unique components."""

    kind: Operator
    dims: tuple[int, int, int]
    spectra: list[EmbeddedSpectrum]
    meta: dict = field(default_factory=dict)

    @property
    def embedded_dims(self) -> tuple[int, int, int]:
        return tuple(2 * n for n in self.dims)

    def blocks(self):
        """``(spectrum, [(row, col, coefficient), ...])`` in fixed component order."""
        for sp in sorted(self.spectra, key=lambda s: s.component):
            c = sp.component
            uses = [(c.row, c.col, sp.sigma)]
            if c.row != c.col:
                sym = 1 if self.kind is Operator.N else -1
                uses.append((c.col, c.row, sym * sp.sigma))
            yield sp, uses


def _spectrum_for(comp, t, forms, tol, rule, cp_iters, cp_rank):
    parity = component_parity(comp)
    sp = EmbeddedSpectrum(component=comp, dims=tuple(t.shape), parity=parity)
    if "dense" in forms:
        sp.dense = scipy.fft.fftn(circulant_embed(t, parity))
    if "tucker" in forms:
        sp.tucker = transform_factors(hosvd(t, tol, rule), parity)
    if "tuckercp" in forms:
        w, _ = tucker_cp(t, tol, cp_iters, rank=cp_rank, rule=rule)
        sp.tuckercp = transform_factors(w, parity)
    return sp


def build_operator(tensors: dict, forms=("dense",), tol: float = 1e-8, rule=TruncationRule.ENERGY,
                   cp_iters: int = 1000, cp_rank="min") -> BlockOperator:
    """Embed, compress and transform the unique components of one operator.

    ``tensors`` maps :class:`KernelComponent` to grid-sized defining tensors;
    ``forms`` selects which of ``dense``, ``tucker``, ``tuckercp`` to prepare.
    """
    comps = sorted(tensors)
    kinds = {c.operator for c in comps}
    if len(kinds) != 1:
        raise ValueError("all components must belong to the same operator")
    kind = kinds.pop()
    dims = tuple(np.asarray(tensors[comps[0]]).shape)
    spectra = []
    for c in comps:
        if c.is_zero:
            continue
        t = np.asarray(tensors[c], dtype=np.complex128)
        if t.shape != dims:
            raise ValueError("component tensors must share dims")
        spectra.append(_spectrum_for(c, t, forms, tol, TruncationRule.parse(rule), cp_iters, cp_rank))
    return BlockOperator(kind=kind, dims=dims, spectra=spectra,
                         meta={"tol": tol, "rule": str(TruncationRule.parse(rule).value), "forms": list(forms)})


# ----------------------------------------------------------------------------- numba kernels


@numba.njit(cache=True)
def _axpy_prod(y, b, x, coef):
    # y += coef * b * x, all flattened
    for i in range(y.size):
        y[i] += coef * b[i] * x[i]


@numba.njit(cache=True)
def _hosvd_loop(core, u1, u2, u3, xs, ys, coefs):
    """Fused Tucker decompression and multiply-accumulate, 6 nested loops."""
    n1, n2, n3 = u1.shape[0], u2.shape[0], u3.shape[0]
    r1, r2, r3 = core.shape
    nb = coefs.size
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                s = 0j
                for a in range(r1):
                    for b in range(r2):
                        for c in range(r3):
                            s += core[a, b, c] * u1[i, a] * u2[j, b] * u3[k, c]
                for m in range(nb):
                    ys[m, i, j, k] += coefs[m] * s * xs[m, i, j, k]


@numba.njit(cache=True)
def _cp_loop(w1, w2, w3, xs, ys, coefs):
    """Fused Tucker+CP decompression and multiply-accumulate, 4 nested loops."""
    n1, n2, n3 = w1.shape[0], w2.shape[0], w3.shape[0]
    r = w1.shape[1]
    nb = coefs.size
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                s = 0j
                for l in range(r):
                    s += w1[i, l] * w2[j, l] * w3[k, l]
                for m in range(nb):
                    ys[m, i, j, k] += coefs[m] * s * xs[m, i, j, k]


def _decompress_tucker(form: TuckerForm, out: np.ndarray) -> np.ndarray:
    u1, u2, u3 = form.factors
    tmp = np.tensordot(u1, form.core, axes=([1], [0]))          # (2n1, r2, r3)
    tmp = np.einsum("jb,abc->ajc", u2, tmp, optimize=True)        # (2n1, 2n2, r3)
    np.matmul(tmp.reshape(-1, tmp.shape[2]), u3.T, out=out.reshape(-1, u3.shape[0]))
    return out


def _decompress_cp(form: TuckerCPForm, out: np.ndarray) -> np.ndarray:
    w1, w2, w3 = form.factors
    kr = (w1[:, None, :] * w2[None, :, :]).reshape(-1, w1.shape[1])
    np.matmul(kr, w3.T, out=out.reshape(-1, w3.shape[0]))
    return out


# ----------------------------------------------------------------------------- application


def apply_spectral(op: BlockOperator, xhat: np.ndarray, strategy=MatvecStrategy.DENSE, scratch=ScratchPolicy.ALLOCATE,
                   out: np.ndarray | None = None) -> np.ndarray:
    """Fourier-domain block product ``Y_q = sum_q' H^{qq'} X_q'`` under ``strategy``.

    ``xhat`` has shape ``(3, 2n1, 2n2, 2n3)``.  Decompress strategies need one
    embedded-size scratch buffer: either a caller-owned array or
    ``ScratchPolicy.ALLOCATE``; ``ScratchPolicy.NONE`` is rejected for them.
    """
    strategy = MatvecStrategy.parse(strategy)
    edims = op.embedded_dims
    if xhat.shape != (3,) + edims:
        raise ValueError(f"spectral input has shape {xhat.shape}, expected {(3,) + edims}")
    buf = None
    if strategy.needs_buffer:
        if isinstance(scratch, np.ndarray):
            if scratch.shape != edims or scratch.dtype != np.complex128:
                raise ValueError("scratch buffer must be complex128 with the embedded dims")
            buf = scratch
        elif ScratchPolicy(scratch) is ScratchPolicy.NONE:
            raise ValueError(f"{strategy.value} needs a scratch buffer but the policy is 'none'")
        else:
            buf = np.empty(edims, dtype=np.complex128)
    yhat = np.zeros_like(xhat) if out is None else out
    if out is not None:
        yhat[...] = 0
    for sp, uses in op.blocks():
        form = sp.form(strategy.form)
        if strategy is MatvecStrategy.DENSE:
            for row, col, coef in uses:
                _axpy_prod(yhat[row].reshape(-1), form.reshape(-1), xhat[col].reshape(-1), complex(coef))
        elif strategy.needs_buffer:
            if strategy.form == "tucker":
                _decompress_tucker(form, buf)
            else:
                _decompress_cp(form, buf)
            for row, col, coef in uses:
                _axpy_prod(yhat[row].reshape(-1), buf.reshape(-1), xhat[col].reshape(-1), complex(coef))
        else:
            # loop strategies read x and write y per block; one pass per block keeps the
            # kernels free of aliasing between rows and columns
            for row, col, coef in uses:
                coefs = np.array([coef], dtype=np.complex128)
                xs = xhat[col][None]
                ys = yhat[row][None]
                if strategy.form == "tucker":
                    _hosvd_loop(form.core, *form.factors, xs, ys, coefs)
                else:
                    _cp_loop(*form.factors, xs, ys, coefs)
    return yhat


def forward_fields(op: BlockOperator, x: np.ndarray, fft: FFTProvider = _DEFAULT_FFT) -> np.ndarray:
    edims = op.embedded_dims
    xhat = np.empty((3,) + edims, dtype=np.complex128)
    for q in range(3):
        xhat[q] = fft.forward(x[q], edims)
    return xhat


def inverse_fields(op: BlockOperator, yhat: np.ndarray, fft: FFTProvider = _DEFAULT_FFT) -> np.ndarray:
    n1, n2, n3 = op.dims
    y = np.empty((3, n1, n2, n3), dtype=np.complex128)
    for q in range(3):
        y[q] = fft.inverse(yhat[q])[:n1, :n2, :n3]
    return y


def apply_operator(op: BlockOperator, x, strategy=MatvecStrategy.DENSE, scratch=ScratchPolicy.ALLOCATE,
                   fft: FFTProvider = _DEFAULT_FFT) -> np.ndarray:
    """``y = A x`` for a current field ``x`` of shape ``(3, n1, n2, n3)``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (3,) + tuple(op.dims):
        raise ValueError(f"field has shape {x.shape}, expected {(3,) + tuple(op.dims)}")
    xhat = forward_fields(op, x, fft)
    yhat = apply_spectral(op, xhat, strategy, scratch)
    return inverse_fields(op, yhat, fft)


# ----------------------------------------------------------------------------- dense oracle


def _signed_value(t, parity, o):
    s = 1
    for a in range(3):
        if o[a] < 0:
            s *= parity[a]
    return s * t[abs(o[0]), abs(o[1]), abs(o[2])]


def dense_bttb_matrix(tensors: dict, kind) -> np.ndarray:
    """Explicit ``(3 Nv) x (3 Nv)`` matrix expanded entry by entry from the defining tensors.

    Row/column ordering: direction-major, then voxels in axis-1-fastest order.
    """
    kind = Operator(kind)
    comps = {(c.row, c.col): c for c in tensors}
    dims = np.asarray(next(iter(tensors.values()))).shape
    nv = int(np.prod(dims))
    idx = np.array(np.unravel_index(np.arange(nv), dims, order="F")).T
    A = np.zeros((3 * nv, 3 * nv), dtype=np.complex128)
    for q in range(3):
        for p in range(3):
            if (q, p) in comps:
                comp, sign = comps[(q, p)], 1
            elif (p, q) in comps:
                comp, sign = comps[(p, q)], (1 if kind is Operator.N else -1)
            else:
                continue
            t = np.asarray(tensors[comp])
            parity = component_parity(comp)
            for m in range(nv):
                for n in range(nv):
                    A[q * nv + m, p * nv + n] = sign * _signed_value(t, parity, idx[n] - idx[m])
    return A


# ----------------------------------------------------------------------------- benchmarking


def flop_estimate(op: BlockOperator, strategy) -> float:
    """Real flops of the element-wise product phase (FFT excluded), per the operation counts

    dense: N, HOSVD decompress: r3 N, HOSVD loop: r1 r2 r3 N, Tucker+CP: r N
    with ``N`` the embedded size and 8 real flops per complex multiply-add.
    """
    strategy = MatvecStrategy.parse(strategy)
    n = float(np.prod(op.embedded_dims))
    total = 0.0
    for sp, uses in op.blocks():
        nb = len(uses)
        if strategy is MatvecStrategy.DENSE:
            total += nb * n
        elif strategy.form == "tucker":
            r1, r2, r3 = sp.tucker.ranks
            total += (r3 * n + nb * n) if strategy.needs_buffer else nb * r1 * r2 * r3 * n
        else:
            r = sp.tuckercp.rank
            total += (r * n + nb * n) if strategy.needs_buffer else nb * r * n
    return 8.0 * total


@dataclass
class BenchRecord:
    strategy: str
    n: int
    ranks: tuple
    median_ms: float
    product_ms: float
    fft_ms: float
    flops_est: float
    gflops: float
    samples_ms: list

    def row(self) -> dict:
        return {
            "strategy": self.strategy,
            "n": self.n,
            "ranks": "x".join(str(r) for r in self.ranks),
            "median_ms": f"{self.median_ms:.4f}",
            "product_ms": f"{self.product_ms:.4f}",
            "fft_ms": f"{self.fft_ms:.4f}",
            "flops_est": f"{self.flops_est:.4e}",
        }


def matvec_bench(op: BlockOperator, x, strategy, repetitions: int = 3, fft: FFTProvider = _DEFAULT_FFT) -> BenchRecord:
    """Time ``apply_operator``; the first (warm-up) run is discarded.

    The element-wise product phase and the FFT phase are timed separately; the
    reported ``median_ms`` is their sum.
    """
    strategy = MatvecStrategy.parse(strategy)
    x = np.asarray(x, dtype=np.complex128)
    buf = np.empty(op.embedded_dims, dtype=np.complex128) if strategy.needs_buffer else ScratchPolicy.NONE
    yhat = np.empty((3,) + op.embedded_dims, dtype=np.complex128)
    prod, ffts = [], []
    for rep in range(repetitions + 1):
        t0 = time.perf_counter()
        xhat = forward_fields(op, x, fft)
        t1 = time.perf_counter()
        apply_spectral(op, xhat, strategy, buf, out=yhat)
        t2 = time.perf_counter()
        inverse_fields(op, yhat, fft)
        t3 = time.perf_counter()
        if rep:
            prod.append((t2 - t1) * 1e3)
            ffts.append((t1 - t0 + t3 - t2) * 1e3)
    p_ms = statistics.median(prod)
    f_ms = statistics.median(ffts)
    flops = flop_estimate(op, strategy)
    ranks = ()
    if op.spectra:
        sp = op.spectra[0]
        if strategy.form == "tucker":
            ranks = sp.tucker.ranks
        elif strategy.form == "tuckercp":
            ranks = (sp.tuckercp.rank,)
    return BenchRecord(strategy.value, int(op.dims[0]), ranks, p_ms + f_ms, p_ms, f_ms, flops,
                       flops / (p_ms * 1e6) if p_ms > 0 else float("nan"), prod)
