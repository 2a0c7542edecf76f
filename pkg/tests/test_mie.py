import numpy as np
import pytest

from oracles import mie_abs_mp
from tuckervie.constants import ETA0, wavenumber
from tuckervie.mie import (
    MieError,
    MieSphere,
    default_lmax,
    mie_absorbed_power,
    mie_coefficients,
    mie_coefficients_scipy,
    mie_cross_sections,
    rayleigh_absorption,
)

# sphere used throughout the validation runs: 0.15 m, eps' 65, 0.6 S/m, 298 MHz
SPHERE = dict(radius=0.15, eps_real=65.0, sigma=0.6, frequency=298e6)
# absorbed power for |E0| = 1 V/m, cross-checked against the mpmath oracle below
SPHERE_P_ABS = 9.282341939511638e-05


def test_default_lmax():
    assert default_lmax(0.93684) == 7
    assert default_lmax(10.0) == int(np.ceil(10 + 4 * 10 ** (1 / 3) + 2))


def test_unit_index_gives_zero_coefficients():
    a, b = mie_coefficients(5, 1.3, 1.0 + 0j)
    assert np.max(np.abs(a)) <= 1e-14 and np.max(np.abs(b)) <= 1e-14


def test_small_sphere_dipole_coefficient():
    x, m = 0.01, 2.0 + 0.5j
    a, b = mie_coefficients(3, x, m)
    want = -2j / 3 * x**3 * (m**2 - 1) / (m**2 + 2)
    assert abs(a[0] - want) <= 1e-3 * abs(want)
    assert abs(b[0]) < 1e-3 * abs(a[0])


def test_paths_agree():
    for x, m in ((0.5, 3 + 0.2j), (0.93684, np.sqrt(np.conj(65 - 36.19j))), (5.0, 1.5 + 0.01j)):
        L = default_lmax(x)
        a1, b1 = mie_coefficients(L, x, m)
        a2, b2 = mie_coefficients_scipy(L, x, m)
        assert np.max(np.abs(a1 - a2)) <= 1e-10 * np.max(np.abs(a2))
        assert np.max(np.abs(b1 - b2)) <= 1e-10 * np.max(np.abs(b2))


def test_sphere_absorbed_power_pinned():
    s = MieSphere.from_properties(**SPHERE)
    assert s.l_max == 7
    assert s.size_parameter == pytest.approx(0.93684, abs=1e-5)
    assert mie_absorbed_power(s) == pytest.approx(SPHERE_P_ABS, rel=1e-12)


def test_sphere_matches_mpmath_oracle():
    s = MieSphere.from_properties(**SPHERE)
    r = mie_cross_sections(s)
    q_ext, q_sca = mie_abs_mp(s.size_parameter, s.index, 20)
    k2 = s.k0**2
    assert r.c_ext == pytest.approx(2 * np.pi / k2 * q_ext, rel=1e-10)
    assert r.c_sca == pytest.approx(2 * np.pi / k2 * q_sca, rel=1e-10)
    assert r.p_abs == pytest.approx(r.c_abs / (2 * ETA0), rel=1e-14)


def test_truncation_converged():
    s = MieSphere.from_properties(**SPHERE)
    s2 = MieSphere.from_properties(**SPHERE, l_max=2 * s.l_max)
    assert mie_absorbed_power(s2) == pytest.approx(mie_absorbed_power(s), rel=1e-10)


def test_lossless_sphere_absorbs_nothing():
    s = MieSphere.from_properties(0.1, 40.0, 0.0, 298e6)
    r = mie_cross_sections(s)
    assert abs(r.c_abs) <= 1e-12 * r.c_sca


def test_rayleigh_limit():
    # the quasi-static limit needs |m| x << 1, not just x << 1
    s = MieSphere(0.01, 4.0 - 2.0j, 1.0)
    assert abs(s.index) * s.size_parameter < 0.03
    r = mie_cross_sections(s)
    assert r.c_abs == pytest.approx(rayleigh_absorption(s.radius, s.eps_r, s.k0), rel=1e-2)


def test_frequency_continuity():
    p = [mie_absorbed_power(MieSphere.from_properties(0.15, 65.0, 0.6, f)) for f in (297e6, 298e6, 299e6)]
    assert abs(p[1] - p[0]) < 0.02 * p[1]
    assert abs(p[2] - p[1]) < 0.02 * p[1]


def test_amplitude_scaling():
    s = MieSphere.from_properties(**SPHERE, amplitude=3.0)
    assert mie_absorbed_power(s) == pytest.approx(9 * SPHERE_P_ABS, rel=1e-12)


@pytest.mark.parametrize("x", [0.1, 1.0, 4.0])
def test_energy_bounds(x):
    s = MieSphere(x, 20 - 5j, 1.0)
    r = mie_cross_sections(s)
    assert 0 <= r.p_abs <= r.p_ext
    assert r.c_sca >= 0


def test_scipy_path_through_cross_sections():
    s = MieSphere.from_properties(**SPHERE)
    assert mie_cross_sections(s, path="scipy").p_abs == pytest.approx(SPHERE_P_ABS, rel=1e-10)


def test_result_dict():
    d = mie_cross_sections(MieSphere.from_properties(**SPHERE)).as_dict()
    assert d["l_max"] == 7
    assert set(d) >= {"c_ext", "c_sca", "c_abs", "p_abs"}


def test_errors():
    with pytest.raises(ValueError):
        MieSphere(0.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        MieSphere(0.1, 2.0 + 1j, wavenumber(298e6))
    with pytest.raises(ValueError):
        mie_coefficients(0, 1.0, 2.0)
    with pytest.raises(ValueError):
        mie_coefficients(3, -1.0, 2.0)
    with pytest.raises(MieError):
        mie_coefficients(3, 1.0, complex(np.nan, 0))
