"""Decay rates and emitter-emitter couplings for each environment.

All rates are in units of gamma0.  Arguments named ``k...`` are k0-scaled
lengths (dimensionless phases).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .greens import path_amplitudes, SeriesConvergenceError
from .model import (K0, DimerConfig, Environment, FreeSpace, PerfectMirror,
                    Sphere, Substrate)
from .specialfns import mie_table, spherical_hankel1_all

# below this phase the kernels switch to their Taylor series
SERIES_SWITCH = 1e-2


@dataclass(frozen=True)
class CouplingSet:
    gamma11: float
    gamma22: float
    gamma12: float
    g12: float
    source: str = ""
    l_used: int | None = None

    @property
    def dissipation_matrix(self) -> np.ndarray:
        return np.array([[self.gamma11, self.gamma12], [self.gamma12, self.gamma22]])

    def is_psd(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.eigvalsh(self.dissipation_matrix).min() >= -tol)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

def kernel_s(a):
    """(sin a - a cos a)/a^3, finite at a = 0 (value 1/3)."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < SERIES_SWITCH
    safe = np.where(small, 1.0, a)
    direct = (np.sin(safe) - safe * np.cos(safe)) / safe**3
    a2 = a * a
    series = 1 / 3 - a2 / 30 + a2**2 / 840 - a2**3 / 45360 + a2**4 / 3991680
    return np.where(small, series, direct)


def kernel_c(a):
    """(cos a + a sin a)/a^3, divergent at a = 0."""
    a = np.asarray(a, dtype=float)
    return (np.cos(a) + a * np.sin(a)) / a**3


def _free_pair(x, cos_alpha):
    """Free-space (gamma12, g12) for separation phase x and dipole/axis angle alpha."""
    ca2 = cos_alpha**2
    s, c = math.sin(x), math.cos(x)
    if ca2 == 1.0:
        return 3.0 * float(kernel_s(x)), -1.5 * float(kernel_c(x))
    gam = 1.5 * ((1 - ca2) * s / x + (1 - 3 * ca2) * (c / x**2 - s / x**3))
    g = 0.75 * (-(1 - ca2) * c / x + (1 - 3 * ca2) * (s / x**2 + c / x**3))
    return gam, g


def couplings_free(x: float, cos_alpha: float = 1.0) -> CouplingSet:
    """Free-space dimer at separation phase ``x = k0 d``.

    ``cos_alpha`` is the cosine between the dipoles and the dimer axis;
    the default (1) is the axial configuration.
    """
    if not x > 0:
        raise ValueError("zero separation: g12 diverges")
    gam, g = _free_pair(float(x), float(cos_alpha))
    return CouplingSet(1.0, 1.0, gam, g, "free")


def mirror_gamma_ii(kz: float) -> float:
    """Decay rate of a vertical dipole at height kz/k0 above a perfect mirror."""
    return float(1.0 + 3.0 * kernel_s(2.0 * kz))


def couplings_mirror(kz1: float, kz2: float) -> CouplingSet:
    """Vertical dimer above a perfect mirror.

    The closed forms are evaluated as sums of direct (|z2-z1|) and image
    (z1+z2) kernels, which is algebraically the same expression but stays
    accurate as z2 -> z1.
    """
    if kz1 < 0 or kz2 < 0:
        raise ValueError("emitters must lie above the mirror")
    if kz1 == kz2:
        raise ValueError("z1 == z2: coinciding emitters")
    d = abs(kz2 - kz1)
    s = kz1 + kz2
    gamma12 = 3.0 * (float(kernel_s(d)) + float(kernel_s(s)))
    g12 = -1.5 * (float(kernel_c(d)) + float(kernel_c(s)))
    return CouplingSet(mirror_gamma_ii(kz1), mirror_gamma_ii(kz2), gamma12, g12, "mirror")


def sphere_series(eps, kR: float, kb: float, l_max: int = 60, tol: float = 1e-16,
                  adaptive: bool = True):
    """Partial sums (S, S_alt) of (2l+1) l(l+1) r_l (h_l(kb)/kb)^2, plain and with (-1)^(l+1).

    Returns ``(S, S_alt, l_used, converged)``.
    """
    if not kb > kR:
        raise ValueError("emitter inside sphere (b <= R)")
    r = mie_table(l_max, eps, kR).rTM
    h = spherical_hankel1_all(l_max, kb)[1:]
    l = np.arange(1, l_max + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = (2 * l + 1) * l * (l + 1) * ((r * h) * h) / kb**2
    terms = np.where(r == 0, 0.0, terms)
    used, converged = l_max, True
    if adaptive:
        mag = np.abs(terms)
        running = np.maximum.accumulate(mag)
        converged = False
        for k in range(2, l_max):
            if all(mag[k - j] < tol * running[k] for j in range(3)):
                used, converged = k + 1, True
                break
        if complex(eps) == 1:
            converged = True
    terms = terms[:used]
    alt = np.where(l[:used] % 2 == 1, 1.0, -1.0)
    return complex(terms.sum()), complex((alt * terms).sum()), used, converged


def couplings_sphere(eps, kR: float, kb: float, l_max: int = 60, tol: float = 1e-16,
                     adaptive: bool = True, strict: bool = False) -> CouplingSet:
    """Diametric vertical dimer at +-b around a sphere of radius R."""
    s_all, s_alt, used, ok = sphere_series(eps, kR, kb, l_max, tol, adaptive)
    if strict and not ok:
        raise SeriesConvergenceError(f"coupling series not converged within l_max={l_max}")
    gam0, g0 = _free_pair(2.0 * kb, 1.0)
    gamma_ii = 1.0 + (1.5j * s_all).imag
    gamma12 = gam0 + (1.5j * s_alt).imag
    g12 = g0 - (0.75j * s_alt).real
    return CouplingSet(gamma_ii, gamma_ii, gamma12, g12, "sphere", used)


def couplings_for(dimer: DimerConfig, env: Environment, l_max: int = 60) -> CouplingSet:
    """Couplings of a configured dimer in its environment."""
    if isinstance(env, FreeSpace):
        mz = dimer.orientation[2]
        return couplings_free(K0 * dimer.separation, mz)
    if isinstance(env, PerfectMirror):
        if not dimer.is_vertical:
            raise ValueError("mirror closed forms cover vertical dipoles only")
        return couplings_mirror(K0 * dimer.z1, K0 * dimer.z2)
    if isinstance(env, Sphere):
        return couplings_sphere(env.epsilon, K0 * env.radius, K0 * env.offset, l_max)
    if isinstance(env, Substrate):
        raise ValueError("couplings for a finite-permittivity substrate are not available "
                         "(needs the layered-media Green's tensor); only |Psi|^2 maps can be "
                         "produced for this geometry")
    raise TypeError(type(env).__name__)


def check_couplings(cs: CouplingSet) -> None:
    if not cs.is_psd():
        warnings.warn(f"dissipation matrix not positive semidefinite: {cs}", RuntimeWarning)


# --------------------------------------------------------------------------
# far-field quadrature oracle
# --------------------------------------------------------------------------

def adaptive_gauss_legendre(f, a: float, b: float, order: int = 24, tol: float = 1e-14,
                            max_panels: int = 1 << 12):
    """Composite Gauss-Legendre with panel doubling until two passes agree.

    Returns ``(value, error_estimate, panels)``.
    """
    x0, w0 = np.polynomial.legendre.leggauss(order)

    def composite(npan):
        edges = np.linspace(a, b, npan + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
        weights = (half[:, None] * w0[None, :]).ravel()
        return np.sum(weights * f(nodes))

    npan = 1
    prev = composite(npan)
    while npan < max_panels:
        npan *= 2
        cur = composite(npan)
        err = abs(cur - prev)
        if err <= tol * max(1.0, abs(cur)):
            return cur, err, npan
        prev = cur
    raise RuntimeError("far-field quadrature did not converge")


def gamma_farfield_integral(env: Environment, z_i: float, z_j: float, l_max: int = 60,
                            tol: float = 1e-14) -> float:
    """gamma_ij / gamma0 of vertical dipoles from the radiated far-field power.

    Valid only for lossless environments: free space, the perfect mirror
    (upper half-space only) and a sphere with real permittivity.  For the
    sphere, ``z_i``/``z_j`` are +b or -b.
    """
    if isinstance(env, Substrate):
        raise ValueError("far-field identity needs the transmitted field for a finite substrate")
    if isinstance(env, Sphere) and complex(env.epsilon).imag != 0:
        raise ValueError("far-field identity requires a lossless sphere")
    lower = 0.0 if isinstance(env, PerfectMirror) else -1.0

    def amp(c, z):
        theta = np.arccos(np.clip(c, -1.0, 1.0))
        if isinstance(env, Sphere):
            d = DimerConfig(env.offset, -env.offset)
            p_up, p_lo = path_amplitudes(theta, d, env, l_max)
            return p_up if z > 0 else p_lo
        d = DimerConfig(z, z + 1.0)
        return path_amplitudes(theta, d, env)[0]

    def integrand(c):
        return (1 - c * c) * np.real(np.conj(amp(c, z_i)) * amp(c, z_j))

    val, _, _ = adaptive_gauss_legendre(integrand, lower, 1.0, tol=tol)
    return float(0.75 * val)


def mirror_coupling_table(z1: float, z2_values) -> list[tuple[float, float, float]]:
    """Rows (z2/lambda0, gamma12/gamma0, g12/gamma0) for a vertical dimer over a mirror."""
    rows = []
    for z2 in z2_values:
        cs = couplings_mirror(K0 * z1, K0 * float(z2))
        rows.append((float(z2), cs.gamma12, cs.g12))
    return rows
