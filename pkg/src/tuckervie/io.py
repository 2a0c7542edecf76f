"""Binary container for tensors and compressed forms, plus scene and report files.

Container layout (all little-endian)::

    magic    4 bytes   b"TVIE"
    version  uint16
    kind     uint8     0 dense, 1 tucker, 2 cp, 3 tucker+cp
    rule     uint8     0 none, 1 sigma_max, 2 energy
    tol      float64
    dims     3 x uint32
    ranks    4 x uint32  (r1, r2, r3, r_cp); unused entries are 0

followed by complex128 arrays in Fortran order: the tensor (dense), the core
and three factors (tucker), or three factors (cp and tucker+cp).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .assembly import VoxelGrid
from .decomp import CPForm, TruncationRule, TuckerCPForm, TuckerForm
from .solver import DielectricMap, PlaneWave

__all__ = [
    "ContainerError",
    "save_container",
    "load_container",
    "save_tensors",
    "load_tensors",
    "write_volume",
    "read_volume",
    "load_scene",
    "save_scene",
]

MAGIC = b"TVIE"
VERSION = 1
_HEADER = struct.Struct("<4sHBBd3I4I")
_KINDS = {0: "dense", 1: "tucker", 2: "cp", 3: "tuckercp"}
_RULES = {0: None, 1: TruncationRule.SIGMA_MAX, 2: TruncationRule.ENERGY}
_DT = np.dtype("<c16")


class ContainerError(ValueError):
    pass


def _pack(kind, rule, tol, dims, ranks) -> bytes:
    code = {v: k for k, v in _KINDS.items()}[kind]
    rcode = {v: k for k, v in _RULES.items()}[rule]
    ranks = tuple(ranks) + (0,) * (4 - len(ranks))
    return _HEADER.pack(MAGIC, VERSION, code, rcode, float(tol), *dims, *ranks)


def _arrays(obj):
    if isinstance(obj, TuckerForm):
        return "tucker", obj.rule, obj.tol, obj.dims, obj.ranks + (0,), (obj.core,) + tuple(obj.factors)
    if isinstance(obj, TuckerCPForm):
        return "tuckercp", obj.rule, obj.tol, obj.dims, tuple(obj.tucker_ranks) + (obj.rank,), tuple(obj.factors)
    if isinstance(obj, CPForm):
        dims = tuple(u.shape[0] for u in obj.factors)
        return "cp", None, 0.0, dims, (0, 0, 0, obj.rank), tuple(obj.factors)
    a = np.asarray(obj)
    if a.ndim != 3:
        raise ContainerError("only 3D tensors and decomposition forms can be stored")
    return "dense", None, 0.0, a.shape, (0, 0, 0, 0), (a,)


def save_container(path, obj) -> None:
    kind, rule, tol, dims, ranks, arrays = _arrays(obj)
    with open(path, "wb") as f:
        f.write(_pack(kind, rule, tol, dims, ranks))
        for a in arrays:
            f.write(np.asarray(a, dtype=_DT).tobytes(order="F"))


def load_container(path):
    """Read a container back into an ndarray or decomposition form."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContainerError("file too short for a header")
    magic, version, code, rcode, tol, n1, n2, n3, r1, r2, r3, rc = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if code not in _KINDS or rcode not in _RULES:
        raise ContainerError("unknown kind or rule tag")
    kind, rule = _KINDS[code], _RULES[rcode] or TruncationRule.ENERGY
    dims = (n1, n2, n3)
    if kind == "dense":
        shapes = [dims]
    elif kind == "tucker":
        shapes = [(r1, r2, r3), (n1, r1), (n2, r2), (n3, r3)]
    else:
        shapes = [(n1, rc), (n2, rc), (n3, rc)]
    need = sum(int(np.prod(s)) for s in shapes) * _DT.itemsize
    if len(raw) - _HEADER.size != need:
        raise ContainerError(f"payload has {len(raw) - _HEADER.size} bytes, header implies {need}")
    pos, out = _HEADER.size, []
    for s in shapes:
        n = int(np.prod(s))
        a = np.frombuffer(raw, dtype=_DT, count=n, offset=pos).reshape(s, order="F")
        out.append(a.astype(np.complex128))
        pos += n * _DT.itemsize
    if kind == "dense":
        return out[0]
    if kind == "tucker":
        return TuckerForm(out[0], tuple(out[1:]), rule, tol)
    if kind == "cp":
        return CPForm(tuple(out))
    return TuckerCPForm(tuple(out), (r1, r2, r3), rule, tol)


def save_tensors(directory, tensors: dict, grid: VoxelGrid, k0: float, quad=None, scale=None) -> Path:
    """Write each component to ``<name>.tvie`` and a JSON manifest describing them."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    comps = []
    for comp in sorted(tensors):
        fname = f"{comp.name}.tvie"
        save_container(d / fname, tensors[comp])
        comps.append({"component": comp.name, "file": fname})
    manifest = {
        "format": "tvie-tensors",
        "version": VERSION,
        "grid": {"dims": list(grid.dims), "resolution": list(grid.resolution), "origin": list(grid.origin)},
        "k0": float(k0),
        "scale": float(scale if scale is not None else grid.resolution[0]),
        "quadrature": dict(vars(quad)) if quad is not None else None,
        "components": comps,
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_tensors(manifest_path):
    from .assembly import KernelComponent

    p = Path(manifest_path)
    m = json.loads(p.read_text())
    if m.get("format") != "tvie-tensors":
        raise ContainerError("not a tensor manifest")
    tensors = {KernelComponent.parse(c["component"]): load_container(p.parent / c["file"]) for c in m["components"]}
    return tensors, m


def write_volume(path, a, dtype=_DT) -> None:
    """Raw little-endian volume in Fortran order; complex128 unless ``dtype`` says otherwise."""
    Path(path).write_bytes(np.asarray(a, dtype=np.dtype(dtype)).tobytes(order="F"))


def read_volume(path, dims, dtype=_DT) -> np.ndarray:
    raw = Path(path).read_bytes()
    dt = np.dtype(dtype)
    n = int(np.prod(dims))
    if len(raw) != n * dt.itemsize:
        raise ContainerError(f"volume has {len(raw)} bytes, expected {n * dt.itemsize} for dims {tuple(dims)}")
    a = np.frombuffer(raw, dtype=dt).reshape(tuple(dims), order="F")
    return a.astype(np.complex128 if dt.kind == "c" else np.float64)


def load_scene(path):
    """Scene JSON: ``dims``, ``resolution``, ``origin``, ``frequency``, ``incident``, ``permittivity``.

    ``permittivity`` names a raw complex128 volume relative to the JSON file.
    """
    p = Path(path)
    s = json.loads(p.read_text())
    try:
        dims = tuple(int(v) for v in s["dims"])
        res = s["resolution"]
        res = tuple(float(v) for v in (res if isinstance(res, (list, tuple)) else [res] * 3))
        origin = tuple(float(v) for v in s.get("origin", [0.0, 0.0, 0.0]))
        freq = float(s["frequency"])
        vol = p.parent / s["permittivity"]
    except (KeyError, TypeError) as exc:
        raise ContainerError(f"invalid scene file: {exc}") from exc
    grid = VoxelGrid(dims, res, origin)
    emap = DielectricMap(read_volume(vol, dims), freq)
    inc = s.get("incident", {})
    amp = inc.get("amplitude", 1.0)
    amp = complex(*amp) if isinstance(amp, list) else complex(amp)
    wave = PlaneWave(tuple(inc.get("polarization", (1, 0, 0))), tuple(inc.get("direction", (0, 0, 1))), amp)
    return grid, emap, wave


def save_scene(path, grid: VoxelGrid, emap: DielectricMap, wave: PlaneWave | None = None) -> None:
    p = Path(path)
    vol = p.with_suffix(".eps.raw")
    write_volume(vol, emap.eps_r)
    wave = wave or PlaneWave()
    amp = complex(wave.amplitude)
    s = {
        "dims": list(grid.dims),
        "resolution": list(grid.resolution),
        "origin": list(grid.origin),
        "frequency": emap.frequency,
        "incident": {"polarization": list(wave.polarization), "direction": list(wave.direction),
                     "amplitude": amp.real if amp.imag == 0 else [amp.real, amp.imag]},
        "permittivity": vol.name,
    }
    p.write_text(json.dumps(s, indent=2))
