"""Mie series for a homogeneous sphere in a plane wave.

Permittivities are given in the package convention (``exp(+i w t)``, lossy
means ``Im(eps_r) < 0``).  The series itself is written in the usual optics
convention, so the refractive index is ``m = sqrt(conj(eps_r))``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .constants import EPS0, ETA0, wavenumber

__all__ = [
    "MieError",
    "MieSphere",
    "MieResult",
    "default_lmax",
    "mie_coefficients",
    "mie_coefficients_scipy",
    "mie_cross_sections",
    "mie_absorbed_power",
    "rayleigh_absorption",
]


class MieError(ArithmeticError):
    """Recurrence over- or underflow; the series cannot be trusted."""


def default_lmax(x: float) -> int:
    return int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 2.0))


def _index(eps_r) -> complex:
    eps = complex(eps_r)
    if eps.imag > 0:
        raise ValueError("Im(eps_r) > 0 is an active medium under the exp(+iwt) convention")
    m = np.sqrt(np.conj(eps))
    return complex(m)


@dataclass
class MieSphere:
    radius: float
    eps_r: complex
    k0: float
    amplitude: float = 1.0
    l_max: int | None = None

    def __post_init__(self):
        if self.radius <= 0 or self.k0 <= 0:
            raise ValueError("radius and k0 must be positive")
        _index(self.eps_r)
        if self.l_max is None:
            self.l_max = default_lmax(self.size_parameter)
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")

    @classmethod
    def from_properties(cls, radius, eps_real, sigma, frequency, amplitude=1.0, l_max=None) -> "MieSphere":
        omega = 2 * np.pi * frequency
        eps = complex(eps_real, -sigma / (EPS0 * omega))
        return cls(radius, eps, wavenumber(frequency), amplitude, l_max)

    @property
    def size_parameter(self) -> float:
        return self.k0 * self.radius

    @property
    def index(self) -> complex:
        return _index(self.eps_r)


def _check(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise MieError("non-finite value in Mie recurrence; size parameter out of range")


def mie_coefficients(l_max: int, x: float, m: complex):
    """``a_n, b_n`` for ``n = 1..l_max``.

    The logarithmic derivative ``D_n(mx)`` and the ratios ``psi_n / psi_{n-1}``
    run downward from well above ``l_max``; ``chi_n`` runs upward.
    """
    if l_max < 1:
        raise ValueError("order must be >= 1")
    if x <= 0:
        raise ValueError("size parameter must be positive")
    m = complex(m)
    if not cmath.isfinite(m):
        raise MieError("refractive index is not finite")
    mx = m * x
    nmx = int(max(l_max, abs(mx), x)) + 16
    d = np.zeros(nmx + 1, dtype=np.complex128)
    for n in range(nmx, 0, -1):
        d[n - 1] = n / mx - 1.0 / (d[n] + n / mx)
    n = np.arange(1, l_max + 1)
    # psi_n is recessive for n > x, so it comes from the downward ratio
    # psi_n / psi_{n-1} = 1 / ((2n+1)/x - psi_{n+1} / psi_n); chi_n is dominant and runs upward
    ratio = 0.0
    ratios = np.empty(l_max + 1)
    for k in range(nmx, 0, -1):
        ratio = 1.0 / ((2 * k + 1) / x - ratio)
        if k <= l_max:
            ratios[k] = ratio
    psi = np.empty(l_max + 1)
    chi = np.empty(l_max + 1)
    psi[0], chi[0] = math.sin(x), math.cos(x)
    chi_prev = -math.sin(x)
    for k in range(1, l_max + 1):
        psi[k] = psi[k - 1] * ratios[k]
        chi[k] = (2 * k - 1) / x * chi[k - 1] - chi_prev
        chi_prev = chi[k - 1]
    # xi_n = x h_n^(1)(x) = psi_n - i chi_n with chi_n = -x y_n(x)
    xi = psi - 1j * chi
    _check(d, psi, xi)
    dn = d[1 : l_max + 1]
    ta = dn / m + n / x
    tb = m * dn + n / x
    a = (ta * psi[1:] - psi[:-1]) / (ta * xi[1:] - xi[:-1])
    b = (tb * psi[1:] - psi[:-1]) / (tb * xi[1:] - xi[:-1])
    _check(a, b)
    return a, b


def mie_coefficients_scipy(l_max: int, x: float, m: complex):
    """Same coefficients from ``scipy.special`` spherical Bessel functions (direct evaluation)."""
    n = np.arange(0, l_max + 1)
    mx = complex(m) * x
    jn = special.spherical_jn(n, x)
    yn = special.spherical_yn(n, x)
    jm = special.spherical_jn(n, mx)
    jmd = special.spherical_jn(n, mx, derivative=True)
    _check(jn, yn, jm, jmd)
    psi = x * jn
    xi = x * (jn + 1j * yn)
    dn = (jm + mx * jmd) / (mx * jm)
    k = n[1:]
    ta = dn[1:] / m + k / x
    tb = m * dn[1:] + k / x
    a = (ta * psi[1:] - psi[:-1]) / (ta * xi[1:] - xi[:-1])
    b = (tb * psi[1:] - psi[:-1]) / (tb * xi[1:] - xi[:-1])
    _check(a, b)
    return a, b


@dataclass
class MieResult:
    c_ext: float
    c_sca: float
    c_abs: float
    p_ext: float
    p_sca: float
    p_abs: float
    l_max: int
    size_parameter: float

    def as_dict(self) -> dict:
        return {k: (float(v) if not isinstance(v, int) else v) for k, v in self.__dict__.items()}


def mie_cross_sections(s: MieSphere, path: str = "recurrence") -> MieResult:
    x = s.size_parameter
    coeffs = mie_coefficients if path == "recurrence" else mie_coefficients_scipy
    a, b = coeffs(s.l_max, x, s.index)
    n = np.arange(1, s.l_max + 1)
    area = np.pi * s.radius**2
    q_ext = 2.0 / x**2 * float(np.sum((2 * n + 1) * (a.real + b.real)))
    q_sca = 2.0 / x**2 * float(np.sum((2 * n + 1) * (np.abs(a) ** 2 + np.abs(b) ** 2)))
    c_ext, c_sca = q_ext * area, q_sca * area
    irr = abs(s.amplitude) ** 2 / (2.0 * ETA0)
    return MieResult(c_ext, c_sca, c_ext - c_sca, c_ext * irr, c_sca * irr, (c_ext - c_sca) * irr, int(s.l_max), x)


def mie_absorbed_power(s: MieSphere) -> float:
    """Absorbed power in watts, ``(C_ext - C_sca) |E0|^2 / (2 eta0)``."""
    return mie_cross_sections(s).p_abs


def rayleigh_absorption(radius: float, eps_r, k0: float) -> float:
    """Quasi-static dipole absorption cross section ``4 pi k a^3 Im((m^2-1)/(m^2+2))``."""
    m2 = np.conj(complex(eps_r))
    return float(4 * np.pi * k0 * radius**3 * ((m2 - 1) / (m2 + 2)).imag)
