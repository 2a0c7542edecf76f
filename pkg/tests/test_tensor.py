import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tuckervie.tensor import (
    cp_reconstruct,
    fold,
    frobenius_norm,
    from_linear,
    hadamard,
    n_mode_product,
    to_linear,
    tucker_reconstruct,
    unfold,
)


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_frobenius_examples():
    assert frobenius_norm(np.ones((2, 2, 2))) == pytest.approx(np.sqrt(8))
    assert frobenius_norm(np.zeros((5, 3, 2))) == 0.0
    t = np.zeros((2, 2, 2), complex)
    t[1, 0, 1] = 3 + 4j
    assert frobenius_norm(t) == pytest.approx(5.0)


def test_unfold_shapes_and_roundtrip():
    rng = np.random.default_rng(0)
    t = crand(rng, 2, 3, 4)
    assert unfold(t, 1).shape == (2, 12)
    assert unfold(t, 2).shape == (3, 8)
    assert unfold(t, 3).shape == (4, 6)
    t3 = crand(rng, 3, 3, 3)
    for q in (1, 2, 3):
        assert np.array_equal(fold(unfold(t3, q), q, t3.shape), t3)


def test_unfold_explicit_2x2x2():
    # entry value encodes its axis-1-fastest linear position
    t = from_linear(np.arange(8), (2, 2, 2))
    m1 = unfold(t, 1)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                v = i + 2 * j + 4 * k
                assert m1[i, j + 2 * k] == v
                assert unfold(t, 2)[j, i + 2 * k] == v
                assert unfold(t, 3)[k, i + 2 * j] == v
    assert np.array_equal(to_linear(t), np.arange(8))


def test_unfold_invalid_mode():
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 2, 2)), 4)


def test_n_mode_product_examples():
    rng = np.random.default_rng(1)
    t = crand(rng, 2, 3, 4)
    assert np.allclose(n_mode_product(t, np.eye(2), 1), t)
    assert np.all(n_mode_product(t, np.zeros((5, 3)), 2) == 0)
    s = crand(rng, 2, 2, 2)
    out = n_mode_product(s, np.array([[1.0, 1.0]]), 1)
    assert out.shape == (1, 2, 2)
    assert np.allclose(out[0], s[0] + s[1])
    with pytest.raises(ValueError, match="dimension mismatch"):
        n_mode_product(t, np.eye(3), 1)


def brute_tucker(core, u1, u2, u3):
    n1, n2, n3 = u1.shape[0], u2.shape[0], u3.shape[0]
    out = np.zeros((n1, n2, n3), complex)
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                s = 0
                for a in range(core.shape[0]):
                    for b in range(core.shape[1]):
                        for c in range(core.shape[2]):
                            s += core[a, b, c] * u1[i, a] * u2[j, b] * u3[k, c]
                out[i, j, k] = s
    return out


def test_tucker_reconstruct_examples():
    rng = np.random.default_rng(2)
    u, v, w = crand(rng, 3), crand(rng, 4), crand(rng, 2)
    got = tucker_reconstruct(np.full((1, 1, 1), 2.5), u, v, w)
    assert np.allclose(got, 2.5 * np.einsum("i,j,k->ijk", u, v, w))
    t = crand(rng, 3, 4, 2)
    assert np.allclose(tucker_reconstruct(t, np.eye(3), np.eye(4), np.eye(2)), t)
    core = crand(rng, 2, 2, 2)
    fs = [crand(rng, 3, 2) for _ in range(3)]
    assert np.allclose(tucker_reconstruct(core, *fs), brute_tucker(core, *fs), rtol=1e-13)
    with pytest.raises(ValueError):
        tucker_reconstruct(core, crand(rng, 3, 3), *fs[1:])


def test_cp_reconstruct_examples():
    rng = np.random.default_rng(3)
    a, b, c = crand(rng, 3, 2), crand(rng, 4, 2), crand(rng, 5, 2)
    expect = sum(np.einsum("i,j,k->ijk", a[:, l], b[:, l], c[:, l]) for l in range(2))
    assert np.allclose(cp_reconstruct(a, b, c), expect)
    one = cp_reconstruct(a[:, :1], b[:, :1], c[:, :1])
    assert np.allclose(one, np.einsum("i,j,k->ijk", a[:, 0], b[:, 0], c[:, 0]))
    zero = cp_reconstruct(np.zeros((3, 0)), np.zeros((4, 0)), np.zeros((5, 0)))
    assert zero.shape == (3, 4, 5) and not zero.any()
    with pytest.raises(ValueError, match="rank mismatch"):
        cp_reconstruct(a, b, c[:, :1])


def test_hadamard_examples():
    a = np.array([1, 2j]).reshape(2, 1, 1)
    b = np.array([3, 4]).reshape(2, 1, 1)
    assert np.array_equal(hadamard(a, b).ravel(), [3, 8j])
    assert np.array_equal(hadamard(a, np.ones_like(a)), a)
    assert not hadamard(a, np.zeros_like(a)).any()
    with pytest.raises(ValueError):
        hadamard(a, np.ones((1, 2, 1)))


def test_non_finite_rejected():
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        unfold(t, 1)


dims3 = st.tuples(*[st.integers(1, 4)] * 3)


@settings(max_examples=40, deadline=None)
@given(dims=dims3, seed=st.integers(0, 2**32 - 1))
def test_unfold_properties(dims, seed):
    rng = np.random.default_rng(seed)
    t = crand(rng, *dims)
    nrm = frobenius_norm(t)
    for q in (1, 2, 3):
        m = unfold(t, q)
        assert np.array_equal(fold(m, q, dims), t)
        assert np.linalg.norm(m) == pytest.approx(nrm, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(dims=dims3, seed=st.integers(0, 2**32 - 1))
def test_mode_products_commute(dims, seed):
    rng = np.random.default_rng(seed)
    t = crand(rng, *dims)
    u = crand(rng, 3, dims[0])
    v = crand(rng, 2, dims[1])
    a = n_mode_product(n_mode_product(t, u, 1), v, 2)
    b = n_mode_product(n_mode_product(t, v, 2), u, 1)
    assert np.linalg.norm(a - b) <= 1e-14 * max(np.linalg.norm(a), 1e-300) * 10


@settings(max_examples=25, deadline=None)
@given(dims=dims3, ranks=st.tuples(*[st.integers(1, 3)] * 3), seed=st.integers(0, 2**32 - 1))
def test_tucker_matches_triple_sum(dims, ranks, seed):
    rng = np.random.default_rng(seed)
    core = crand(rng, *ranks)
    fs = [crand(rng, n, r) for n, r in zip(dims, ranks)]
    want = brute_tucker(core, *fs)
    got = tucker_reconstruct(core, *fs)
    assert np.linalg.norm(got - want) <= 1e-13 * np.linalg.norm(want)
