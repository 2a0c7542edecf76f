import numpy as np
import pytest

from oracles import curl_curl_fd, n_entry_6d
from tuckervie.assembly import (
    KernelComponent,
    Operator,
    QuadratureError,
    QuadratureSpec,
    UnsupportedBasisError,
    VoxelGrid,
    assemble_defining_tensor,
    assemble_operator,
    basis_eval,
    component_parity,
    depolarization_dyad,
    green_g,
    interaction_terms,
    self_static_term,
    unique_components,
)
from tuckervie.constants import wavenumber

F = 298e6
K0 = wavenumber(F)


def test_green_examples():
    assert green_g([1.0, 0, 0], 0.0) == pytest.approx(1 / (4 * np.pi))
    assert abs(green_g([0, 0.6, 0.8], 7.3)) == pytest.approx(1 / (4 * np.pi))
    R = np.array([0.3, -0.2, 0.5])
    assert green_g(R, 5.0) == green_g(-R, 5.0)
    with pytest.raises(ValueError, match="singular"):
        green_g([0, 0, 0], 1.0)


def test_basis_examples():
    c, d = np.zeros(3), np.array([0.2, 0.1, 0.1])
    assert basis_eval("PWL", 2, c, d, c) == 0.0
    assert basis_eval("PWC", 1, c, d, [0.05, 0.02, 0.0]) == 1.0
    for l in (1, 2, 3, 4):
        assert basis_eval("PWL", l, c, d, [0.3, 0, 0]) == 0.0
    assert basis_eval("PWL", 2, c, d, [0.1, 0, 0]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        basis_eval("PWC", 2, c, d, c)
    with pytest.raises(ValueError):
        basis_eval("PWL", 5, c, d, c)


def test_unique_components():
    assert len(unique_components(Operator.N)) == 6
    assert len(unique_components(Operator.K)) == 3
    assert all(not c.is_zero for c in unique_components(Operator.K))
    with pytest.raises(UnsupportedBasisError, match="60"):
        unique_components(Operator.N, "PWL")


def test_component_names_and_parity():
    c = KernelComponent.parse("Kxz")
    assert (c.operator, c.row, c.col) == (Operator.K, 0, 2)
    assert c.name == "Kxz"
    assert component_parity(KernelComponent.parse("Nxy")) == (-1, -1, 1)
    assert component_parity(KernelComponent.parse("Kxz")) == (1, -1, 1)
    assert KernelComponent.parse("Kyy").is_zero


@pytest.fixture(scope="module")
def small_grid():
    return VoxelGrid((4, 3, 5), (0.02, 0.025, 0.015), (0.0, 0.0, 0.0))


def test_k_diagonal_zero(small_grid):
    t = assemble_defining_tensor(small_grid, K0, KernelComponent(Operator.K, 1, 1))
    assert not t.any()


def test_n_symmetric_components(small_grid):
    a = assemble_defining_tensor(small_grid, K0, KernelComponent(Operator.N, 0, 1))
    b = assemble_defining_tensor(small_grid, K0, KernelComponent(Operator.N, 1, 0))
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(a)


def test_k_antisymmetric(small_grid):
    for q, p in ((0, 1), (0, 2), (1, 2)):
        a = assemble_defining_tensor(small_grid, K0, KernelComponent(Operator.K, q, p))
        b = assemble_defining_tensor(small_grid, K0, KernelComponent(Operator.K, p, q))
        assert np.linalg.norm(a + b) <= 1e-12 * np.linalg.norm(a)


def _n_dyad(offset, h, k, quad=None):
    grid = VoxelGrid(tuple(np.abs(offset) + 1), tuple(h), (0, 0, 0))
    tn = assemble_operator(grid, k, Operator.N, quad)
    idx = tuple(np.abs(offset))
    out = np.zeros((3, 3), complex)
    for c, t in tn.items():
        out[c.row, c.col] = out[c.col, c.row] = t[idx]
    return out


def test_far_entry_matches_6d_oracle():
    h = np.full(3, 2 * np.pi / K0 / 10)
    off = np.array([5, 0, 0])
    got = _n_dyad(off, h, K0)
    ref = n_entry_6d(np.zeros(3), off * h, h, K0, p=10)
    assert np.max(np.abs(got - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_near_entry_matches_6d_oracle():
    # diagonal neighbour: singular only at a shared corner, which the 6D rule avoids on nodes
    h = np.array([0.01, 0.012, 0.009])
    off = np.array([2, 2, 1])
    got = _n_dyad(off, h, K0)
    ref = n_entry_6d(np.zeros(3), off * h, h, K0, p=12)
    assert np.max(np.abs(got - ref)) <= 1e-7 * np.max(np.abs(ref))


def test_dyadic_kernel_vs_curl_curl_fd():
    h = np.full(3, 0.02)
    off = np.array([3, 2, 1])
    got = _n_dyad(off, h, K0)
    ref = curl_curl_fd(np.zeros(3), off * h, h, K0)
    assert np.max(np.abs(got - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_far_quadrature_converges():
    h = np.ones(3)
    off = np.array([[6, 1, 0]])
    k = 0.6
    ref = interaction_terms(off, h, k, QuadratureSpec(far_points_per_axis=16))[2][0]
    diffs = []
    for p in (2, 4, 8):
        dd = interaction_terms(off, h, k, QuadratureSpec(far_points_per_axis=p))[2][0]
        diffs.append(np.max(np.abs(dd - ref)))
    assert diffs[0] > diffs[1] > diffs[2]


def test_static_limit_imaginary_part():
    h = np.ones(3)
    off = np.array([[5, 0, 0], [4, 3, 2]])
    ims = []
    for k in (0.1, 0.01):
        S, dS, dd, _ = interaction_terms(off, h, k)
        ims.append(np.max(np.abs(dd.imag)) + np.max(np.abs((k**2 * S).imag)))
    assert ims[1] <= 0.1 * ims[0] * (1 + 1e-6)


def test_cube_depolarization():
    L = depolarization_dyad(0.01)
    assert np.allclose(np.diag(L), 1 / 3, atol=1e-6)
    assert np.max(np.abs(L - np.diag(np.diag(L)))) <= 1e-12
    s = self_static_term(0.01)
    assert np.allclose(s, np.eye(3) * 2 / 3, atol=1e-6)


def test_self_term_scale_invariant():
    a = self_static_term([0.01, 0.02, 0.005])
    b = self_static_term([0.02, 0.04, 0.01])
    assert np.allclose(a, b, atol=1e-12)
    # depolarization factors of any box sum to one
    assert np.trace(np.eye(3) - a) == pytest.approx(1.0, abs=1e-6)


def test_self_term_budget_too_small():
    with pytest.raises(QuadratureError, match="not converged"):
        self_static_term([0.01, 0.02, 0.005], QuadratureSpec(near_points_per_axis=2))


def test_subtract_strategy_agrees():
    L1 = depolarization_dyad(1.0)
    L2 = depolarization_dyad(1.0, QuadratureSpec(self_strategy="subtract"))
    assert np.max(np.abs(L1 - L2)) <= 1e-6


def test_invalid_quadrature():
    with pytest.raises(QuadratureError):
        QuadratureSpec(far_points_per_axis=0)
    with pytest.raises(ValueError):
        QuadratureSpec(near_radius=0)


def test_pwl_assembly_unsupported(small_grid):
    with pytest.raises(UnsupportedBasisError):
        assemble_defining_tensor(small_grid, K0, KernelComponent(Operator.N, 0, 0), basis="PWL")


def test_scalar_tensor_matches_n_trace_part():
    # off the self voxel, N_qq = k^2 S + d_q d_q S, so sum_q N_qq = 3 k^2 S + laplacian S = 2 k^2 S
    grid = VoxelGrid((3, 3, 3), (0.05,) * 3, (0, 0, 0))
    k = 20.0
    tn = assemble_operator(grid, k, Operator.N)
    g = assemble_operator(grid, k, Operator.SCALAR)[KernelComponent(Operator.SCALAR)]
    tr = sum(t for c, t in tn.items() if c.row == c.col)
    far = np.zeros(grid.dims, bool)
    far[2, :, :] = True
    assert np.allclose(tr[far], 2 * k**2 * g[far], rtol=1e-6)
