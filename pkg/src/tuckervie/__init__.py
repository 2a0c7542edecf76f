"""Tucker-compressed Green's function tensors for FFT-based volume integral equation solvers."""

__version__ = "0.1.0"

from .assembly import KernelComponent, Operator, QuadratureSpec, VoxelGrid, assemble_operator
from .decomp import TruncationRule, TuckerCPForm, TuckerForm, hosvd, tucker_cp
from .fftop import MatvecStrategy, ScratchPolicy, apply_operator, build_operator
from .mie import MieSphere, mie_absorbed_power
from .solver import DielectricMap, GmresConfig, PlaneWave, solve

__all__ = [
    "KernelComponent",
    "Operator",
    "QuadratureSpec",
    "VoxelGrid",
    "assemble_operator",
    "TruncationRule",
    "TuckerForm",
    "TuckerCPForm",
    "hosvd",
    "tucker_cp",
    "MatvecStrategy",
    "ScratchPolicy",
    "apply_operator",
    "build_operator",
    "MieSphere",
    "mie_absorbed_power",
    "DielectricMap",
    "GmresConfig",
    "PlaneWave",
    "solve",
]
