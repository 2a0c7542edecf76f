"""Voxelized test scenes: a homogeneous sphere and a layered-ellipsoid phantom."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import VoxelGrid
from .solver import DielectricMap

__all__ = ["SphereScene", "Layer", "PhantomScene", "DEFAULT_LAYERS"]


@dataclass
class SphereScene:
    """Homogeneous lossy sphere centered in a cubic domain."""

    radius: float = 0.15
    eps_real: float = 65.0
    sigma: float = 0.6
    frequency: float = 298e6
    domain: float = 0.3
    resolution: float = 0.01

    def grid(self) -> VoxelGrid:
        return VoxelGrid.cube(self.domain, self.resolution)

    def mask(self, grid: VoxelGrid | None = None) -> np.ndarray:
        grid = grid or self.grid()
        x, y, z = grid.centers()
        return x**2 + y**2 + z**2 <= self.radius**2

    def dielectric(self, grid: VoxelGrid | None = None) -> DielectricMap:
        grid = grid or self.grid()
        inside = self.mask(grid)
        eps = np.where(inside, self.eps_real, 1.0)
        sig = np.where(inside, self.sigma, 0.0)
        return DielectricMap.from_properties(eps, sig, self.frequency)


@dataclass
class Layer:
    semi_axes: tuple
    eps_real: float
    sigma: float


# head-like tissue values near 300 MHz, outermost first
DEFAULT_LAYERS = (
    Layer((0.090, 0.110, 0.100), 46.0, 0.60),
    Layer((0.082, 0.102, 0.092), 14.0, 0.08),
    Layer((0.074, 0.094, 0.084), 60.0, 0.70),
    Layer((0.030, 0.040, 0.030), 72.0, 2.10),
)


@dataclass
class PhantomScene:
    """Nested ellipsoids; each inner layer overwrites the ones outside it."""

    layers: tuple = DEFAULT_LAYERS
    frequency: float = 298e6
    dims: tuple = (48, 48, 48)
    resolution: float = 0.005
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.layers = tuple(l if isinstance(l, Layer) else Layer(**l) for l in self.layers)

    def grid(self) -> VoxelGrid:
        h = self.resolution
        first = tuple(c - 0.5 * (n - 1) * h for c, n in zip(self.center, self.dims))
        return VoxelGrid(tuple(self.dims), (h, h, h), first)

    def dielectric(self, grid: VoxelGrid | None = None) -> DielectricMap:
        grid = grid or self.grid()
        x, y, z = grid.centers()
        cx, cy, cz = self.center
        eps = np.ones(grid.dims)
        sig = np.zeros(grid.dims)
        for layer in self.layers:
            ax, ay, az = layer.semi_axes
            inside = ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 2 <= 1.0
            eps[inside] = layer.eps_real
            sig[inside] = layer.sigma
        return DielectricMap.from_properties(eps, sig, self.frequency)
