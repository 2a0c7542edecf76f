"""Dense third-order tensors and the multilinear primitives used by the decompositions.

Tensors are plain ``numpy.ndarray`` objects of shape ``(n1, n2, n3)`` and dtype
``complex128``.  The canonical linear layout is axis-1-fastest (Fortran order):
entry ``t[i, j, k]`` sits at linear position ``i + n1*j + n1*n2*k``.  The
unfoldings follow the same convention,

    mode 1:  A1[i, j + n2*k]
    mode 2:  A2[j, i + n1*k]
    mode 3:  A3[k, i + n1*j]

so that ``fold(unfold(t, q), q, t.shape)`` is the identity.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_tensor",
    "frobenius_norm",
    "unfold",
    "fold",
    "n_mode_product",
    "tucker_reconstruct",
    "cp_reconstruct",
    "hadamard",
    "to_linear",
    "from_linear",
]


def as_tensor(t) -> np.ndarray:
    """Validate and convert ``t`` to a complex128 3D array."""
    a = np.asarray(t, dtype=np.complex128)
    if a.ndim != 3:
        raise ValueError(f"expected a 3D tensor, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("tensor has non-finite entries")
    return a


def _as_matrix(u) -> np.ndarray:
    m = np.asarray(u, dtype=np.complex128)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    return m


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def to_linear(t) -> np.ndarray:
    """Flatten in the canonical axis-1-fastest layout."""
    return np.asarray(t).ravel(order="F")


def from_linear(data, dims) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    data = np.asarray(data, dtype=np.complex128)
    if data.size != int(np.prod(dims)):
        raise ValueError(f"data length {data.size} does not match dims {dims}")
    return data.reshape(dims, order="F")


def frobenius_norm(t) -> float:
    a = np.asarray(t)
    return float(np.sqrt(np.sum(np.abs(a) ** 2)))


def unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (1-based) as a fresh C-contiguous copy."""
    a = as_tensor(t)
    ax = _check_mode(mode)
    m = np.moveaxis(a, ax, 0).reshape(a.shape[ax], -1, order="F")
    return np.ascontiguousarray(m)


def fold(m, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    ax = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    m = _as_matrix(m)
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.shape != (dims[ax], rest[0] * rest[1]):
        raise ValueError(f"matrix of shape {m.shape} cannot fold to {dims} along mode {mode}")
    t = m.reshape((dims[ax], rest[0], rest[1]), order="F")
    return np.ascontiguousarray(np.moveaxis(t, 0, ax))


def n_mode_product(t, u, mode: int) -> np.ndarray:
    """``t x_mode u``: contract axis ``mode`` of ``t`` with the columns of ``u``.

    ``u`` has shape ``(q, n_mode)``; the result replaces ``n_mode`` with ``q``.
    """
    a = np.asarray(t, dtype=np.complex128)
    if a.ndim != 3:
        raise ValueError(f"expected a 3D tensor, got ndim={a.ndim}")
    ax = _check_mode(mode)
    m = _as_matrix(u)
    if m.shape[1] != a.shape[ax]:
        raise ValueError(
            f"dimension mismatch: matrix has {m.shape[1]} columns, tensor mode {mode} has size {a.shape[ax]}"
        )
    out = np.tensordot(m, a, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax)


def tucker_reconstruct(core, u1, u2, u3) -> np.ndarray:
    core = np.asarray(core, dtype=np.complex128)
    if core.ndim != 3:
        raise ValueError("core must be a 3D tensor")
    factors = [_as_matrix(u) for u in (u1, u2, u3)]
    for q, (u, r) in enumerate(zip(factors, core.shape), start=1):
        if u.shape[1] != r:
            raise ValueError(f"factor {q} has {u.shape[1]} columns but core mode {q} has size {r}")
    out = core
    # contract the mode that shrinks the intermediate most first
    order = sorted(range(3), key=lambda q: factors[q].shape[0] / max(core.shape[q], 1))
    for q in order:
        out = n_mode_product(out, factors[q], q + 1)
    return np.ascontiguousarray(out)


def cp_reconstruct(v1, v2, v3) -> np.ndarray:
    """Sum of outer products of matching columns of the three factors."""
    a, b, c = (_as_matrix(v) for v in (v1, v2, v3))
    if not (a.shape[1] == b.shape[1] == c.shape[1]):
        raise ValueError(f"rank mismatch across factors: {a.shape[1]}, {b.shape[1]}, {c.shape[1]}")
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[0], c.shape[0]), dtype=np.complex128)
    ab = (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1])
    return (ab @ c.T).reshape(a.shape[0], b.shape[0], c.shape[0])


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")
    return a * b
