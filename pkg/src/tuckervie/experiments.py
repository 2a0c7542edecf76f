"""Desk-scale studies behind the ``vie`` subcommands.

Each study returns plain rows (lists of dicts) so the CLI and the test suite
share one implementation.  Timing values only ever appear in columns whose
names end in ``_ms`` or ``_s``.
"""

from __future__ import annotations

import logging
import time

import numpy as np

from .assembly import KernelComponent, Operator, VoxelGrid, assemble_operator
from .constants import C0, wavenumber
from .decomp import TruncationRule, TuckerCPForm, TuckerForm, compression_stats, hosvd, tucker_cp
from .fftop import BlockOperator, EmbeddedSpectrum, MatvecStrategy, build_operator, flop_estimate, matvec_bench
from .mie import MieSphere, mie_cross_sections
from .scenes import PhantomScene, SphereScene
from .solver import GmresConfig, PlaneWave, solve

__all__ = [
    "rank_sweep",
    "compress_report",
    "synthetic_operator",
    "bench_sweep",
    "sphere_validate",
    "phantom_errors",
]

log = logging.getLogger(__name__)

BYTES_PER_ENTRY = 16


def _unit_cube_grid(edge: float, frequency: float, points_per_wavelength: float) -> VoxelGrid:
    lam = C0 / frequency
    n = max(1, int(np.ceil(edge * points_per_wavelength / lam)))
    return VoxelGrid.cube(edge, edge / n)


def rank_sweep(frequencies_ghz, points_per_wavelength=(10,), tol=1e-8, rule=TruncationRule.ENERGY,
               operators=("G",), edge=1.0, max_voxels=128**3, quad=None) -> list[dict]:
    """Maximum Tucker rank of the defining tensors of a cube, per frequency and resolution."""
    rule = TruncationRule.parse(rule)
    rows = []
    for ppw in points_per_wavelength:
        for f_ghz in frequencies_ghz:
            f = f_ghz * 1e9
            grid = _unit_cube_grid(edge, f, ppw)
            for opname in operators:
                op = Operator(opname)
                row = {"frequency_ghz": round(f_ghz, 6), "points_per_wavelength": ppw,
                       "resolution_m": grid.resolution[0], "n": grid.dims[0], "operator": op.value}
                if grid.n_voxels > max_voxels:
                    rows.append({**row, "max_rank": "", "r1": "", "r2": "", "r3": "",
                                 "status": f"skipped: {grid.n_voxels} voxels exceeds limit {max_voxels}"})
                    continue
                tensors = assemble_operator(grid, wavenumber(f), op, quad)
                ranks = [hosvd(t, tol, rule).ranks for c, t in sorted(tensors.items()) if not c.is_zero]
                worst = max(ranks, key=max)
                rows.append({**row, "max_rank": max(worst), "r1": worst[0], "r2": worst[1], "r3": worst[2],
                             "status": "ok"})
                log.info("rank sweep f=%.2f GHz n=%d %s: max rank %d", f_ghz, grid.dims[0], op.value, max(worst))
    return rows


def compress_report(grid: VoxelGrid, frequency: float, tolerances, rules=("sigma_max", "energy"), cp_iters=1000,
                    with_tuckercp=True, quad=None) -> list[dict]:
    """Compressed size of all unique N and K components per truncation rule and tolerance."""
    k0 = wavenumber(frequency)
    tensors = {}
    for op in (Operator.N, Operator.K):
        tensors.update(assemble_operator(grid, k0, op, quad))
    tensors = {c: t for c, t in tensors.items() if not c.is_zero}
    original = sum(t.size for t in tensors.values()) * BYTES_PER_ENTRY
    rows = []
    for rule in rules:
        rule = TruncationRule.parse(rule)
        for tol in tolerances:
            tucker_bytes = cp_bytes = 0
            max_rank = 0
            worst_err = 0.0
            for c, t in sorted(tensors.items()):
                form = hosvd(t, tol, rule)
                st = compression_stats(form, t.shape, t)
                tucker_bytes += st.compressed_elements * BYTES_PER_ENTRY
                max_rank = max(max_rank, *form.ranks)
                worst_err = max(worst_err, st.achieved_relative_error)
                if with_tuckercp:
                    w, _ = tucker_cp(t, tol, cp_iters, rule=rule)
                    cp_bytes += w.n_elements * BYTES_PER_ENTRY
            row = {"rule": rule.value, "tol": tol, "n": grid.dims[0], "components": len(tensors),
                   "original_bytes": original, "tucker_bytes": tucker_bytes,
                   "tucker_factor": original / tucker_bytes, "max_rank": max_rank,
                   "max_rel_error": worst_err}
            if with_tuckercp:
                row.update({"tuckercp_bytes": cp_bytes, "tuckercp_factor": original / cp_bytes})
            rows.append(row)
    return rows


def synthetic_operator(n: int, rank: int, seed=0, forms=("dense", "tucker", "tuckercp")) -> BlockOperator:
    """A one-block scalar operator on an ``n^3`` grid with random rank-``rank`` spectra.

    Tucker ranks are ``(rank, rank, rank)`` and the CP rank is ``rank``, which is
    all the timing study needs; the values carry no physics.
    """
    rng = np.random.default_rng(seed)
    m = 2 * n

    def cplx(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * shape[0])

    comp = KernelComponent(Operator.SCALAR)
    tucker = TuckerForm(cplx(rank, rank, rank), (cplx(m, rank), cplx(m, rank), cplx(m, rank)))
    cp = TuckerCPForm((cplx(m, rank), cplx(m, rank), cplx(m, rank)), (rank, rank, rank))
    sp = EmbeddedSpectrum(comp, (n, n, n), (1, 1, 1))
    if "dense" in forms:
        sp.dense = tucker.reconstruct()
    if "tucker" in forms:
        sp.tucker = tucker
    if "tuckercp" in forms:
        sp.tuckercp = cp
    return BlockOperator(Operator.SCALAR, (n, n, n), [sp], meta={"synthetic": True, "rank": rank})


def bench_sweep(sizes, rank: int, strategies=None, repetitions=3, seed=0, max_flops=5e11) -> list[dict]:
    """Per-strategy matvec timings on synthetic operators.

    Rows whose product-phase flop estimate exceeds ``max_flops`` are reported as
    skipped rather than run.
    """
    strategies = [MatvecStrategy.parse(s) for s in (strategies or list(MatvecStrategy))]
    rows = []
    for n in sizes:
        op = synthetic_operator(n, rank, seed)
        rng = np.random.default_rng(seed + 1)
        x = rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal((3, n, n, n))
        for s in strategies:
            fl = flop_estimate(op, s)
            if fl > max_flops:
                rows.append({"strategy": s.value, "n": n, "rank": rank, "median_ms": "", "product_ms": "",
                             "fft_ms": "", "flops_est": f"{fl:.4e}", "status": "skipped: flop budget"})
                continue
            rec = matvec_bench(op, x, s, repetitions)
            row = rec.row()
            row.pop("ranks")
            rows.append({**row, "rank": rank, "status": "ok"})
            log.info("bench n=%d %s: product %.2f ms, fft %.2f ms", n, s.value, rec.product_ms, rec.fft_ms)
    return rows


_METHODS = {
    "dense": (("dense",), MatvecStrategy.DENSE),
    "hosvd": (("tucker",), MatvecStrategy.HOSVD_DECOMPRESS),
    "tuckercp": (("tuckercp",), MatvecStrategy.TUCKERCP_DECOMPRESS),
}


def _assemble(grid, k0, quad):
    tn = assemble_operator(grid, k0, Operator.N, quad)
    op_k = build_operator(assemble_operator(grid, k0, Operator.K, quad))
    return tn, op_k


def _solve_methods(grid, emap, tn, op_k, methods, tol, cp_iters, cp_rank, gmres_cfg, wave=None):
    wave = wave or PlaneWave()
    out = {}
    for name in methods:
        forms, strategy = _METHODS[name]
        t0 = time.perf_counter()
        op_n = build_operator(tn, forms=forms, tol=tol, cp_iters=cp_iters, cp_rank=cp_rank)
        build_s = time.perf_counter() - t0
        rep = solve(emap, grid, wave, op_n, op_k, strategy=strategy, cfg=gmres_cfg)
        out[name] = (rep, build_s)
    return out


def sphere_validate(resolutions, methods=("dense", "hosvd", "tuckercp"), tol=1e-8, cp_iters=1000, cp_rank="min",
                    scene: SphereScene | None = None, gmres_cfg: GmresConfig | None = None, quad=None):
    """Absorbed power of the voxelized sphere against the Mie series."""
    base = scene or SphereScene()
    mie = mie_cross_sections(MieSphere.from_properties(base.radius, base.eps_real, base.sigma, base.frequency))
    rows = []
    for res in resolutions:
        sc = SphereScene(base.radius, base.eps_real, base.sigma, base.frequency, base.domain, res)
        grid = sc.grid()
        emap = sc.dielectric(grid)
        tn, op_k = _assemble(grid, emap.k0, quad)
        for name, (rep, build_s) in _solve_methods(grid, emap, tn, op_k, methods, tol, cp_iters, cp_rank,
                                                   gmres_cfg).items():
            rows.append({
                "resolution_mm": round(res * 1e3, 6), "n": grid.dims[0], "method": name,
                "p_abs_W": rep.absorbed_power, "p_mie_W": mie.p_abs,
                "rel_error": abs(rep.absorbed_power - mie.p_abs) / mie.p_abs,
                "iterations": rep.iterations, "converged": rep.converged, "residual": rep.residual,
                "build_s": build_s, "solve_s": rep.wall_time,
            })
            log.info("sphere %.1f mm %s: P=%.6e (Mie %.6e)", res * 1e3, name, rep.absorbed_power, mie.p_abs)
    return rows, mie


def _rel_l2(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


def phantom_errors(tolerances, methods=("hosvd", "tuckercp"), scene: PhantomScene | None = None, cp_iters=1000,
                   cp_rank="min", gmres_cfg: GmresConfig | None = None, quad=None):
    """Relative L2 errors of ``p_abs`` and ``|b1+|`` of compressed solves against the dense solve."""
    sc = scene or PhantomScene()
    grid = sc.grid()
    emap = sc.dielectric(grid)
    tn, op_k = _assemble(grid, emap.k0, quad)
    ref, _ = _solve_methods(grid, emap, tn, op_k, ("dense",), 0.0, cp_iters, cp_rank, gmres_cfg)["dense"]
    mask = emap.chi != 0
    rows = []
    timing = [{"method": "dense", "tol": "", "solve_s": ref.wall_time}]
    for tol in tolerances:
        for name, (rep, build_s) in _solve_methods(grid, emap, tn, op_k, methods, tol, cp_iters, cp_rank,
                                                   gmres_cfg).items():
            rows.append({
                "tol": tol, "method": name,
                "err_p_abs": _rel_l2(rep.p_abs[mask], ref.p_abs[mask]),
                "err_b1plus": _rel_l2(rep.b1plus[mask], ref.b1plus[mask]),
                "err_j": _rel_l2(rep.j, ref.j),
                "p_abs_W": rep.absorbed_power, "p_abs_dense_W": ref.absorbed_power,
                "iterations": rep.iterations, "dense_iterations": ref.iterations, "converged": rep.converged,
            })
            timing.append({"method": name, "tol": tol, "build_s": build_s, "solve_s": rep.wall_time})
            log.info("phantom tol=%g %s: err p_abs %.3e", tol, name, rows[-1]["err_p_abs"])
    return rows, ref, timing
