"""Spherical Bessel functions, Legendre derivatives, Fresnel and Mie coefficients.

Conventions
-----------
* time dependence exp(-i w t); outgoing waves are ``h_l^(1)``.
* ``P_l^1(cos t) = -sin t * f_l(cos t)`` with ``f_l = dP_l/dx`` (Condon-Shortley).
* square roots in the Fresnel formulas take the branch with ``Im >= 0``.
* ``r_{l,TM}`` is minus the Bohren-Huffman electric coefficient ``a_l``, which
  makes the sphere far field, decay rates and couplings mutually consistent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BIG = 1e250


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("argument must be positive")
    return x


def spherical_yn_all(lmax: int, x):
    """y_0..y_lmax at ``x`` by upward recurrence (stable for y_l)."""
    x = _check_x(x)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = -np.cos(x) / x
    if lmax >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    with np.errstate(over="ignore", invalid="ignore"):
        # y_l overflows to -inf for l >> x; callers treat that as negligible coupling
        for l in range(1, lmax):
            out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1]
    return out


def _miller_start(lmax, xmax):
    top = max(lmax, xmax)
    return int(top + 20 + 4 * math.sqrt(top))


def spherical_jn_all(lmax: int, x):
    """j_0..j_lmax at ``x`` by Miller's downward recurrence."""
    x = _check_x(x)
    shape = x.shape
    x = np.atleast_1d(x)
    top = max(lmax, 1)
    nstart = _miller_start(top, float(x.max()))
    out = np.zeros((top + 1,) + x.shape)
    jp1 = np.zeros_like(x)
    j = np.full_like(x, 1e-300)
    for n in range(nstart, 0, -1):
        jp1, j = j, (2 * n + 1) / x * j - jp1
        if n - 1 <= top:
            out[n - 1] = j
        big = np.abs(j) > _BIG
        if np.any(big):
            scale = np.where(big, 1.0 / _BIG, 1.0)
            j, jp1 = j * scale, jp1 * scale
            out *= scale
    # normalise against whichever of j0, j1 is larger
    j0 = np.sin(x) / x
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    norm = np.where(np.abs(j0) >= np.abs(j1), j0 / out[0], j1 / out[1])
    out = out[: lmax + 1] * norm
    return out.reshape((lmax + 1,) + shape)


def spherical_hankel1_all(lmax: int, x):
    """h_0^(1)..h_lmax^(1) at ``x`` (real part by Miller, imaginary by upward recurrence)."""
    return spherical_jn_all(lmax, x) + 1j * spherical_yn_all(lmax, x)


def spherical_hankel1(l: int, x):
    """Spherical Hankel function of the first kind ``h_l^(1)(x)`` for ``x > 0``."""
    if l < 0:
        raise ValueError("order must be non-negative")
    return spherical_hankel1_all(l, x)[l]


def spherical_jn(l: int, x):
    return spherical_jn_all(l, x)[l]


def spherical_yn(l: int, x):
    return spherical_yn_all(l, x)[l]


def derivative_from_table(table, x):
    """Derivatives of a spherical Bessel table: z_l' = z_{l-1} - (l+1) z_l / x."""
    x = np.asarray(x, dtype=float)
    d = np.empty_like(table)
    d[0] = -table[1]
    l = np.arange(1, table.shape[0]).reshape((-1,) + (1,) * x.ndim)
    d[1:] = table[:-1] - (l + 1) / x * table[1:]
    return d


# --------------------------------------------------------------------------
# Legendre
# --------------------------------------------------------------------------

def legendre_fl_all(lmax: int, x):
    """Rows ``f_1..f_lmax`` of ``f_l(x) = P_l'(x)``; shape ``(lmax,) + x.shape``.

    Uses P_l' = x P_{l-1}' + l P_{l-1}, exact at x = +-1.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("legendre_fl needs |x| <= 1")
    out = np.empty((lmax,) + x.shape)
    p_prev = np.ones_like(x)      # P_0
    p = x.copy()                  # P_1
    dp = np.ones_like(x)          # P_1'
    if lmax >= 1:
        out[0] = dp
    for l in range(2, lmax + 1):
        dp = x * dp + l * p
        p, p_prev = ((2 * l - 1) * x * p - (l - 1) * p_prev) / l, p
        out[l - 1] = dp
    return out


def legendre_fl(l: int, x):
    """First derivative of the Legendre polynomial P_l at ``x``."""
    if l < 1:
        raise ValueError("legendre_fl needs l >= 1")
    return legendre_fl_all(l, x)[l - 1]


def assoc_legendre_p1(l: int, theta):
    """P_l^1(cos theta) = -sin(theta) f_l(cos theta)."""
    theta = np.asarray(theta, dtype=float)
    return -np.sin(theta) * legendre_fl(l, np.cos(theta))


# --------------------------------------------------------------------------
# Fresnel
# --------------------------------------------------------------------------

def _kz_ratio(eps, theta):
    s = np.sqrt(complex(eps) - np.sin(theta) ** 2 + 0j)
    return np.where(s.imag < 0, -s, s)


def fresnel_rp(eps, theta):
    """p-polarised reflection coefficient of a vacuum/eps interface."""
    theta = np.asarray(theta, dtype=float)
    if complex(eps) == 1:
        return np.zeros(theta.shape, dtype=complex)
    s = _kz_ratio(eps, theta)
    c = np.cos(theta)
    return (eps * c - s) / (eps * c + s)


def fresnel_rs(eps, theta):
    """s-polarised reflection coefficient of a vacuum/eps interface."""
    theta = np.asarray(theta, dtype=float)
    if complex(eps) == 1:
        return np.zeros(theta.shape, dtype=complex)
    s = _kz_ratio(eps, theta)
    c = np.cos(theta)
    return (c - s) / (c + s)


def polar_split(r):
    """Return ``(|r|, arg r)`` so that ``r = |r| exp(i alpha)``."""
    r = np.asarray(r)
    return np.abs(r), np.angle(r)


# --------------------------------------------------------------------------
# Mie
# --------------------------------------------------------------------------

def _log_derivative(lmax: int, z: complex) -> np.ndarray:
    """D_n(z) = psi_n'(z)/psi_n(z) for n = 0..lmax, downward recurrence."""
    nstart = int(max(lmax, abs(z)) + 16)
    d = np.zeros(nstart + 1, dtype=complex)
    for n in range(nstart, 0, -1):
        d[n - 1] = n / z - 1.0 / (d[n] + n / z)
    return d[: lmax + 1]


@dataclass(frozen=True)
class MieCoefficientTable:
    """TM reflection coefficients r_{l,TM}, l = 1..l_max."""

    l_max: int
    rTM: np.ndarray
    epsilon: complex
    size_param: float


def mie_table(l_max: int, eps, x: float) -> MieCoefficientTable:
    """TM (electric) Mie reflection coefficients for a sphere of size parameter ``x = k0 R``."""
    if not x > 0:
        raise ValueError("size parameter must be positive")
    eps = complex(eps)
    if eps.imag < 0:
        raise ValueError("permittivity must be passive")
    if eps == 1:
        return MieCoefficientTable(l_max, np.zeros(l_max, dtype=complex), eps, x)
    m = np.sqrt(eps)
    if m.imag < 0:
        m = -m
    dn = _log_derivative(l_max, m * x)
    j = spherical_jn_all(l_max, x)
    y = spherical_yn_all(l_max, x)
    psi = x * j                           # Riccati-Bessel psi_n
    with np.errstate(invalid="ignore"):
        xi = x * (j + 1j * y)             # Riccati-Hankel xi_n
    n = np.arange(1, l_max + 1)
    a = dn[1:] / m + n / x
    with np.errstate(over="ignore", invalid="ignore"):
        coef = (a * psi[1:] - psi[:-1]) / (a * xi[1:] - xi[:-1])
    # beyond overflow of xi the coefficient is below double precision
    coef = np.where(np.isfinite(coef), coef, 0.0)
    return MieCoefficientTable(l_max, -coef, eps, x)


def mie_rTM(l: int, eps, x: float) -> complex:
    """l-th order TM Mie reflection coefficient r_{l,TM}(eps, k0 R)."""
    if l < 1:
        raise ValueError("multipole order must be >= 1")
    return complex(mie_table(l, eps, x).rTM[l - 1])
