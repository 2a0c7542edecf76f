"""Brute-force reference integrals shared by the test modules.

Everything here is deliberately naive: tensor-product Gauss rules over the
two voxels and central finite differences, independent of the assembly code.
"""

import numpy as np


def gauss_box(center, h, p):
    t, w = np.polynomial.legendre.leggauss(p)
    axes = [center[a] + 0.5 * h[a] * t for a in range(3)]
    wts = [0.5 * h[a] * w for a in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", *wts).ravel()
    return X, W


def green(R, k):
    r = np.linalg.norm(R, axis=-1)
    return np.exp(-1j * k * r) / (4 * np.pi * r)


def green_hessian(R, k):
    r = np.linalg.norm(R, axis=-1)[..., None, None]
    u = R[..., :, None] * R[..., None, :] / r**2
    g = np.exp(-1j * k * r) / (4 * np.pi * r)
    return (u * (3 / r**2 + 3j * k / r - k**2) - np.eye(3) * (1 / r**2 + 1j * k / r)) * g


def n_entry_6d(c_test, c_src, h, k, p=8):
    """Voxel-averaged ``(k^2 + grad grad) int g`` between two separated voxels."""
    xt, wt = gauss_box(c_test, h, p)
    xs, ws = gauss_box(c_src, h, p)
    V = float(np.prod(h))
    out = np.zeros((3, 3), complex)
    for x, w in zip(xt, wt):
        R = x - xs
        hess = green_hessian(R, k)
        out += w * np.einsum("n,nij->ij", ws, hess + k**2 * np.eye(3) * green(R, k)[:, None, None])
    return out / V


def potential(x, c_src, h, k, p=8):
    xs, ws = gauss_box(c_src, h, p)
    return np.sum(ws * green(x[None, :] - xs, k))


def fd_hessian(f, x, step):
    """Central-difference Hessian with one Richardson step."""

    def once(s):
        H = np.zeros((3, 3), complex)
        e = np.eye(3) * s
        f0 = f(x)
        for a in range(3):
            H[a, a] = (f(x + e[a]) - 2 * f0 + f(x - e[a])) / s**2
            for b in range(a + 1, 3):
                H[a, b] = H[b, a] = (f(x + e[a] + e[b]) - f(x + e[a] - e[b]) - f(x - e[a] + e[b])
                                     + f(x - e[a] - e[b])) / (4 * s**2)
        return H

    return (4 * once(step / 2) - once(step)) / 3


def fd_gradient(f, x, step):
    def once(s):
        e = np.eye(3) * s
        return np.array([(f(x + e[a]) - f(x - e[a])) / (2 * s) for a in range(3)])

    return (4 * once(step / 2) - once(step)) / 3


def curl_curl_fd(c_test, c_src, h, k, p_test=3, p_src=8, step=None):
    """Voxel-averaged curl curl of the single-layer potential, by finite differences."""
    step = step or 0.05 * min(h)
    xt, wt = gauss_box(c_test, h, p_test)
    V = float(np.prod(h))
    out = np.zeros((3, 3), complex)
    for x, w in zip(xt, wt):
        phi = lambda y: potential(y, c_src, h, k, p_src)  # noqa: E731
        H = fd_hessian(phi, x, step)
        out += w * (H + k**2 * phi(x) * np.eye(3))
    return out / V


def curl_fd(c_test, c_src, h, k, j, p_test=3, p_src=8, step=None):
    """Voxel-averaged ``curl (int g j)`` for a uniform current ``j`` in the source voxel."""
    step = step or 0.05 * min(h)
    xt, wt = gauss_box(c_test, h, p_test)
    V = float(np.prod(h))
    out = np.zeros(3, complex)
    for x, w in zip(xt, wt):
        grad = fd_gradient(lambda y: potential(y, c_src, h, k, p_src), x, step)
        out += w * np.cross(grad, j)
    return out / V


def mie_abs_mp(x, m, n_max, dps=40):
    """Extinction minus scattering efficiency times x^2 / 2, from mpmath Bessel functions.

    ``m`` has a non-negative imaginary part for a lossy sphere.
    """
    import mpmath as mp

    mp.mp.dps = dps
    x = mp.mpf(x)
    m = mp.mpc(m)

    def psi(n, z):
        return mp.sqrt(mp.pi * z / 2) * mp.besselj(n + mp.mpf(1) / 2, z)

    def xi(n, z):
        return mp.sqrt(mp.pi * z / 2) * (mp.besselj(n + mp.mpf(1) / 2, z) + 1j * mp.bessely(n + mp.mpf(1) / 2, z))

    def d(f, n, z):
        return f(n - 1, z) - n * f(n, z) / z

    s_ext = mp.mpf(0)
    s_sca = mp.mpf(0)
    for n in range(1, n_max + 1):
        pm, dpm = psi(n, m * x), d(psi, n, m * x)
        px, dpx = psi(n, x), d(psi, n, x)
        xx, dxx = xi(n, x), d(xi, n, x)
        a = (m * pm * dpx - px * dpm) / (m * pm * dxx - xx * dpm)
        b = (pm * dpx - m * px * dpm) / (pm * dxx - m * xx * dpm)
        s_ext += (2 * n + 1) * mp.re(a + b)
        s_sca += (2 * n + 1) * (abs(a) ** 2 + abs(b) ** 2)
    return float(s_ext), float(s_sca)
