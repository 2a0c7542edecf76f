"""``vie`` command-line driver.

Usage::

    vie <subcommand> [--config path.json] [--out dir] [--seed N] [--strategy name] [--tol x]

Config files are JSON objects with an optional ``"schema": 1`` key; command-line
flags override config keys.  Exit status is 0 on success, 2 when a solve did not
converge (results are still written) and 1 on input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .assembly import Operator, VoxelGrid, assemble_operator
from .constants import wavenumber
from .decomp import TruncationRule
from .fftop import MatvecStrategy, build_operator
from .io import load_scene, save_tensors, write_volume
from .mie import MieSphere, mie_cross_sections
from .scenes import PhantomScene, SphereScene
from .solver import GmresConfig, solve
from . import experiments

log = logging.getLogger("tuckervie")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2

DEFAULTS = {
    "rank-sweep": {
        "frequencies_ghz": [round(0.3 * i, 1) for i in range(1, 11)],
        "points_per_wavelength": [10],
        "tol": 1e-8,
        "rule": "energy",
        "operators": ["G"],
        "edge": 1.0,
        "max_voxels": 128**3,
    },
    "compress-report": {
        "dims": [30, 30, 30],
        "resolution": 0.01,
        "frequency": 298e6,
        "tolerances": [1e-4, 1e-6, 1e-8, 1e-10],
        "rules": ["sigma_max", "energy"],
        "cp_iters": 1000,
        "tuckercp": True,
    },
    "matvec-bench": {
        "sizes": [32, 64, 96],
        "rank": 25,
        "strategies": [s.value for s in MatvecStrategy],
        "repetitions": 3,
        "max_flops": 5e11,
    },
    "sphere-validate": {
        "resolutions_mm": [10.0, 5.0],
        "methods": ["dense", "hosvd", "tuckercp"],
        "tol": 1e-8,
        "cp_iters": 1000,
        "cp_rank": "min",
        "radius": 0.15,
        "eps_real": 65.0,
        "sigma": 0.6,
        "frequency": 298e6,
        "domain": 0.3,
        "gmres": {"tol": 1e-5, "inner": 50, "outer": 200},
    },
    "phantom-solve": {
        "tolerances": [1e-4, 1e-6, 1e-8, 1e-10, 1e-12],
        "methods": ["hosvd", "tuckercp"],
        "dims": [48, 48, 48],
        "resolution": 0.005,
        "frequency": 298e6,
        "layers": None,
        "cp_iters": 1000,
        "cp_rank": "min",
        "gmres": {"tol": 1e-5, "inner": 50, "outer": 200},
        "write_volumes": True,
    },
    "mie": {
        "radius": 0.15,
        "eps_real": 65.0,
        "sigma": 0.6,
        "frequency": 298e6,
        "amplitude": 1.0,
        "l_max": None,
    },
    "solve": {
        "scene": None,
        "strategy": "dense",
        "tol": 1e-8,
        "cp_iters": 1000,
        "cp_rank": "min",
        "gmres": {"tol": 1e-5, "inner": 50, "outer": 200},
        "write_volumes": True,
    },
    "assemble": {
        "dims": [16, 16, 16],
        "resolution": 0.01,
        "frequency": 298e6,
        "operators": ["N", "K"],
    },
}

_METHOD_OF_FORM = {"dense": "dense", "tucker": "hosvd", "tuckercp": "tuckercp"}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _load_config(cmd: str, path) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS[cmd]))
    if path is None:
        return cfg
    try:
        user = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise InputError("config must be a JSON object")
    schema = user.pop("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise InputError(f"unsupported config schema {schema}")
    user.pop("experiment", None)
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise InputError(f"unknown config keys for {cmd}: {', '.join(unknown)}")
    cfg.update(user)
    return cfg


def _apply_overrides(cmd: str, cfg: dict, args) -> dict:
    if args.tol is not None:
        if "tolerances" in cfg:
            cfg["tolerances"] = [args.tol]
        elif "tol" in cfg:
            cfg["tol"] = args.tol
    if args.strategy is not None:
        try:
            strategy = MatvecStrategy.parse(args.strategy)
        except ValueError as exc:
            raise InputError(f"unknown strategy {args.strategy!r}") from exc
        if "strategies" in cfg:
            cfg["strategies"] = [strategy.value]
        elif "methods" in cfg:
            cfg["methods"] = [_METHOD_OF_FORM[strategy.form]]
        elif "strategy" in cfg:
            cfg["strategy"] = strategy.value
    return cfg


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def _gmres(cfg) -> GmresConfig:
    return GmresConfig(**cfg.get("gmres", {}))


# ----------------------------------------------------------------------------- subcommands


def cmd_rank_sweep(cfg, out: Path, seed: int):
    rows = experiments.rank_sweep(cfg["frequencies_ghz"], cfg["points_per_wavelength"], cfg["tol"], cfg["rule"],
                                  cfg["operators"], cfg["edge"], cfg["max_voxels"])
    _write_csv(out / "ranks.csv", rows)
    return ["ranks.csv"], True


def cmd_compress_report(cfg, out: Path, seed: int):
    h = float(cfg["resolution"])
    dims = tuple(int(d) for d in cfg["dims"])
    grid = VoxelGrid(dims, (h, h, h), tuple(-0.5 * (n - 1) * h for n in dims))
    rows = experiments.compress_report(grid, cfg["frequency"], cfg["tolerances"], cfg["rules"], cfg["cp_iters"],
                                       cfg["tuckercp"])
    _write_csv(out / "compression.csv", rows)
    return ["compression.csv"], True


def cmd_matvec_bench(cfg, out: Path, seed: int):
    rows = experiments.bench_sweep(cfg["sizes"], cfg["rank"], cfg["strategies"], cfg["repetitions"], seed,
                                   cfg["max_flops"])
    _write_csv(out / "bench.csv", rows)
    return ["bench.csv"], True


def cmd_sphere_validate(cfg, out: Path, seed: int):
    scene = SphereScene(cfg["radius"], cfg["eps_real"], cfg["sigma"], cfg["frequency"], cfg["domain"])
    rows, mie = experiments.sphere_validate([r * 1e-3 for r in cfg["resolutions_mm"]], cfg["methods"], cfg["tol"],
                                            cfg["cp_iters"], cfg["cp_rank"], scene, _gmres(cfg))
    _write_csv(out / "sphere.csv", rows)
    _write_json(out / "sphere.json", {"mie": mie.as_dict(), "rows": rows})
    return ["sphere.csv", "sphere.json"], all(r["converged"] for r in rows)


def cmd_phantom_solve(cfg, out: Path, seed: int):
    kw = {"dims": tuple(cfg["dims"]), "resolution": cfg["resolution"], "frequency": cfg["frequency"]}
    if cfg["layers"]:
        kw["layers"] = tuple(cfg["layers"])
    scene = PhantomScene(**kw)
    rows, ref, timing = experiments.phantom_errors(cfg["tolerances"], cfg["methods"], scene, cfg["cp_iters"],
                                                   cfg["cp_rank"], _gmres(cfg))
    files = ["phantom.csv", "phantom.json"]
    _write_csv(out / "phantom.csv", rows)
    _write_json(out / "phantom.json", {"dense": ref.summary(), "rows": rows, "timing": timing})
    if cfg["write_volumes"]:
        write_volume(out / "p_abs_dense.raw", ref.p_abs, dtype="<f8")
        write_volume(out / "b1plus_dense.raw", ref.b1plus, dtype="<f8")
        files += ["p_abs_dense.raw", "b1plus_dense.raw"]
    return files, ref.converged and all(r["converged"] for r in rows)


def cmd_mie(cfg, out: Path, seed: int):
    s = MieSphere.from_properties(cfg["radius"], cfg["eps_real"], cfg["sigma"], cfg["frequency"], cfg["amplitude"],
                                  cfg["l_max"])
    res = mie_cross_sections(s)
    _write_json(out / "mie.json", {**res.as_dict(), "eps_r": [s.eps_r.real, s.eps_r.imag]})
    print(json.dumps(res.as_dict()))
    return ["mie.json"], True


def cmd_solve(cfg, out: Path, seed: int):
    if not cfg["scene"]:
        raise InputError("solve needs a 'scene' JSON path in the config")
    grid, emap, wave = load_scene(cfg["scene"])
    strategy = MatvecStrategy.parse(cfg["strategy"])
    forms = ("dense",) if strategy.form == "dense" else (strategy.form,)
    tn = assemble_operator(grid, emap.k0, Operator.N)
    op_n = build_operator(tn, forms=forms, tol=cfg["tol"], cp_iters=cfg["cp_iters"], cp_rank=cfg["cp_rank"])
    op_k = build_operator(assemble_operator(grid, emap.k0, Operator.K))
    rep = solve(emap, grid, wave, op_n, op_k, strategy, _gmres(cfg))
    files = ["report.json"]
    _write_json(out / "report.json", rep.summary())
    if cfg["write_volumes"]:
        for name, a in (("j", rep.j), ("e", rep.e), ("h", rep.h)):
            for q, ax in enumerate("xyz"):
                write_volume(out / f"{name}{ax}.raw", a[q])
                files.append(f"{name}{ax}.raw")
        write_volume(out / "p_abs.raw", rep.p_abs, dtype="<f8")
        write_volume(out / "b1plus.raw", rep.b1plus, dtype="<f8")
        files += ["p_abs.raw", "b1plus.raw"]
    return files, rep.converged


def cmd_assemble(cfg, out: Path, seed: int):
    h = float(cfg["resolution"])
    dims = tuple(int(d) for d in cfg["dims"])
    grid = VoxelGrid(dims, (h, h, h), tuple(-0.5 * (n - 1) * h for n in dims))
    k0 = wavenumber(cfg["frequency"])
    tensors = {}
    for op in cfg["operators"]:
        tensors.update(assemble_operator(grid, k0, Operator(op)))
    save_tensors(out / "tensors", tensors, grid, k0)
    return ["tensors/manifest.json"] + [f"tensors/{c.name}.tvie" for c in sorted(tensors)], True


COMMANDS = {
    "rank-sweep": (cmd_rank_sweep, "maximum Tucker rank vs frequency of a unit cube"),
    "compress-report": (cmd_compress_report, "compressed size of the N and K tensors per tolerance"),
    "matvec-bench": (cmd_matvec_bench, "matrix-vector product timings per strategy"),
    "sphere-validate": (cmd_sphere_validate, "absorbed power of a voxelized sphere vs Mie"),
    "phantom-solve": (cmd_phantom_solve, "compressed vs dense solve errors on a layered phantom"),
    "mie": (cmd_mie, "Mie-series cross sections and absorbed power"),
    "solve": (cmd_solve, "solve a scene file and write fields"),
    "assemble": (cmd_assemble, "assemble defining tensors to the binary container"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vie", description="Tucker-compressed FFT volume integral equation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_, description=help_)
        s.add_argument("--config", type=Path, help="JSON config; keys override built-in defaults")
        s.add_argument("--out", type=Path, default=None, help="output directory (default: runs/<subcommand>)")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--strategy", default=None, help="matvec strategy or method restriction")
        s.add_argument("--tol", type=float, default=None, help="SVD tolerance override")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _manifest(cmd, cfg, args, files, converged, argv) -> dict:
    return {
        "command": cmd,
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "seed": args.seed,
        "argv": list(argv),
        "outputs": files,
        "converged": converged,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    cmd = args.command
    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise InputError("seed must be an unsigned 64-bit integer")
        cfg = _apply_overrides(cmd, _load_config(cmd, args.config), args)
        if "rule" in cfg:
            TruncationRule.parse(cfg["rule"])
        out = args.out or Path("runs") / cmd
        out.mkdir(parents=True, exist_ok=True)
        func = COMMANDS[cmd][0]
        files, converged = func(cfg, out, args.seed)
    except (InputError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"vie {cmd}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_json(out / "manifest.json", _manifest(cmd, cfg, args, files, converged, argv))
    if not converged:
        print(f"vie {cmd}: warning: a solve did not converge; results written to {out}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
