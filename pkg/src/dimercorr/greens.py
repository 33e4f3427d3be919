"""Far-field path amplitudes psi and polarisation factors U.

The far field of emitter ``i`` at detection angle theta is written as
``U(theta) * psi(theta, r_i)`` with the radial envelope exp(i k0 r)/(4 pi r)
dropped.  For the sphere the returned psi is the *total* amplitude
(direct wave plus multipole scattering); the bare multipole sum alone is
available as :func:`psi_sphere_scattered`.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .model import (K0, DimerConfig, Environment, FreeSpace, PerfectMirror,
                    Sphere, Substrate)
from .specialfns import (fresnel_rp, fresnel_rs, legendre_fl_all, mie_table,
                         spherical_hankel1_all)

_I_POW = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


def reflection_coefficients(env: Environment, theta):
    """(r_p, r_s) of the planar environment at polar angle(s) theta."""
    theta = np.asarray(theta, dtype=float)
    if isinstance(env, FreeSpace):
        z = np.zeros(theta.shape, dtype=complex)
        return z, z.copy()
    if isinstance(env, PerfectMirror):
        one = np.ones(theta.shape, dtype=complex)
        return one, -one
    if isinstance(env, Substrate):
        return fresnel_rp(env.epsilon, theta), fresnel_rs(env.epsilon, theta)
    raise TypeError(f"no planar reflection for {type(env).__name__}")


def _as_planar(env_or_eps):
    if isinstance(env_or_eps, (FreeSpace, PerfectMirror, Substrate)):
        return env_or_eps
    return Substrate(complex(env_or_eps))


def psi_free(theta, z):
    """exp(-i k0 z cos theta): emitter on the z axis in vacuum."""
    return np.exp(-1j * K0 * z * np.cos(theta))


def _image_sum(theta, z, r, sign):
    # exp(i a/2) (exp(-i(k z c + a/2)) + sign |r| exp(i(k z c + a/2))), a = arg r
    mod, alpha = np.abs(r), np.angle(r)
    phase = K0 * z * np.cos(theta) + alpha / 2
    return np.exp(1j * alpha / 2) * (np.exp(-1j * phase) + sign * mod * np.exp(1j * phase))


def psi_substrate_vertical(theta, z, env):
    """Direct plus image amplitude of a vertical dipole at height ``z``.

    ``env`` is a planar environment or a bare permittivity.
    """
    env = _as_planar(env)
    rp, _ = reflection_coefficients(env, theta)
    return _image_sum(theta, z, rp, +1)


@dataclass(frozen=True)
class SubstrateChannels:
    """Polarisation-resolved amplitudes of one emitter above a planar surface.

    E_theta = U_theta_par*psi_theta_par + U_theta_z*psi_theta_z
    E_phi   = U_phi_par*psi_phi_par
    """

    psi_theta_par: np.ndarray
    psi_theta_z: np.ndarray
    psi_phi_par: np.ndarray
    U_theta_par: np.ndarray
    U_theta_z: np.ndarray
    U_phi_par: np.ndarray

    def field(self):
        e_t = self.U_theta_par * self.psi_theta_par + self.U_theta_z * self.psi_theta_z
        e_p = self.U_phi_par * self.psi_phi_par
        return np.stack([e_t, e_p])


def planar_polarization(theta, orientation, phi=0.0):
    """(U_theta_par, U_theta_z, U_phi_par) for dipole direction ``orientation``."""
    mx, my, mz = orientation
    theta = np.asarray(theta, dtype=float)
    u_tp = (mx * np.cos(phi) + my * np.sin(phi)) * np.cos(theta)
    u_tz = -mz * np.sin(theta)
    u_pp = -(mx * np.sin(phi) - my * np.cos(phi)) * np.ones_like(theta)
    return u_tp, u_tz, u_pp


def psi_substrate_components(theta, z, env, orientation=(0.0, 0.0, 1.0), phi=0.0):
    env = _as_planar(env)
    rp, rs = reflection_coefficients(env, theta)
    u_tp, u_tz, u_pp = planar_polarization(theta, orientation, phi)
    return SubstrateChannels(
        psi_theta_par=_image_sum(theta, z, rp, -1),
        psi_theta_z=_image_sum(theta, z, rp, +1),
        psi_phi_par=_image_sum(theta, z, rs, +1),
        U_theta_par=u_tp, U_theta_z=u_tz, U_phi_par=u_pp,
    )


def polarization_free(theta, orientation, phi=0.0):
    """(U_theta, U_phi) of mu - r(r.mu) in spherical components."""
    u_tp, u_tz, u_pp = planar_polarization(theta, orientation, phi)
    return u_tp + u_tz, u_pp


# --------------------------------------------------------------------------
# sphere
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereMultipoles:
    """Multipole coefficients of the sphere-scattered far field.

    ``c[l-1]`` belongs to the emitter at +b, ``c_tilde[l-1]`` to the one at -b.
    """

    c: np.ndarray
    c_tilde: np.ndarray
    epsilon: complex
    k0R: float
    k0b: float
    l_max: int
    converged: bool

    @property
    def l_used(self) -> int:
        return len(self.c)


class SeriesConvergenceError(RuntimeError):
    pass


@functools.lru_cache(maxsize=64)
def _multipoles_cached(eps, kR, kb, l_max, tol, adaptive):
    if not kb > kR:
        raise ValueError("emitter inside sphere (b <= R)")
    rtm = mie_table(l_max, eps, kR).rTM
    h = spherical_hankel1_all(l_max, kb)[1:]
    l = np.arange(1, l_max + 1)
    ipow = np.array([_I_POW[(k + 1) % 4] for k in l])
    base = (2 * l + 1) * rtm * (h / kb) * ipow
    c = np.where(l % 2 == 0, 1.0, -1.0) * base
    c_tilde = -base
    converged = True
    if adaptive and eps != 1:
        # sup_x |f_l(x)| = l(l+1)/2 bounds each term of the psi series
        weight = np.abs(c) * l * (l + 1) / 2
        running = np.maximum.accumulate(weight)
        small = weight < tol * running
        cut = None
        for k in range(2, l_max):
            if small[k - 2] and small[k - 1] and small[k] and weight[k] <= weight[k - 1]:
                cut = k + 1
                break
        if cut is None:
            converged = False
        else:
            c, c_tilde = c[:cut], c_tilde[:cut]
    elif eps == 1:
        c, c_tilde = c[:1] * 0, c_tilde[:1] * 0
    c.setflags(write=False)
    c_tilde.setflags(write=False)
    return SphereMultipoles(c, c_tilde, eps, kR, kb, l_max, converged)


def sphere_multipoles(eps, k0R: float, k0b: float, l_max: int = 60,
                      tol: float = 1e-13, adaptive: bool = True,
                      strict: bool = False) -> SphereMultipoles:
    """c_l and c~_l = (-1)^(l+1) c_l for the diametric sphere dimer."""
    mp = _multipoles_cached(complex(eps), float(k0R), float(k0b), int(l_max),
                            float(tol), bool(adaptive))
    if strict and not mp.converged:
        raise SeriesConvergenceError(
            f"multipole series not converged to {tol:g} within l_max={l_max}")
    return mp


def multipoles_for(env: Sphere, l_max: int = 60) -> SphereMultipoles:
    return sphere_multipoles(env.epsilon, K0 * env.radius, K0 * env.offset, l_max)


def psi_sphere_scattered(theta, side: str, multipoles: SphereMultipoles):
    """sum_l c_l f_l(cos theta), the multipole part only."""
    theta = np.asarray(theta, dtype=float)
    coeff = multipoles.c if side == "upper" else multipoles.c_tilde
    f = legendre_fl_all(len(coeff), np.cos(theta))
    return np.tensordot(coeff, f, axes=(0, 0))


def psi_sphere(theta, side: str, multipoles: SphereMultipoles):
    """Total amplitude of the emitter at +b ("upper") or -b ("lower")."""
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    theta = np.asarray(theta, dtype=float)
    sign = -1.0 if side == "upper" else 1.0
    direct = np.exp(sign * 1j * multipoles.k0b * np.cos(theta))
    return direct + psi_sphere_scattered(theta, side, multipoles)


# --------------------------------------------------------------------------
# dispatch on environment
# --------------------------------------------------------------------------

def factorizes(dimer: DimerConfig, env: Environment) -> bool:
    """True when the field of each emitter is psi*U with a shared U."""
    return isinstance(env, FreeSpace) or dimer.is_vertical


def path_amplitudes(theta, dimer: DimerConfig, env: Environment, l_max: int = 60):
    """(psi(theta, r1), psi(theta, r2)) for the scalar decomposition."""
    theta = np.asarray(theta, dtype=float)
    if isinstance(env, FreeSpace):
        return psi_free(theta, dimer.z1), psi_free(theta, dimer.z2)
    if isinstance(env, Sphere):
        mp = multipoles_for(env, l_max)
        return psi_sphere(theta, "upper", mp), psi_sphere(theta, "lower", mp)
    if not dimer.is_vertical:
        raise ValueError("tilted dipoles over a surface have polarisation-dependent psi; "
                         "use channel_amplitudes")
    return (psi_substrate_vertical(theta, dimer.z1, env),
            psi_substrate_vertical(theta, dimer.z2, env))


def polarization_factor(theta, dimer: DimerConfig, env: Environment, phi=0.0):
    """(U_theta, U_phi) shared by both emitters when :func:`factorizes` holds."""
    theta = np.asarray(theta, dtype=float)
    if isinstance(env, FreeSpace):
        return polarization_free(theta, dimer.orientation, phi)
    if not dimer.is_vertical:
        raise ValueError("no shared polarisation factor for tilted dipoles near a surface")
    mz = dimer.orientation[2]
    return -mz * np.sin(theta), np.zeros_like(theta)


def channel_amplitudes(theta, dimer: DimerConfig, env: Environment, phi=0.0, l_max=60):
    """Field components A[alpha, i] (alpha = theta, phi; i = emitter) at theta."""
    theta = np.asarray(theta, dtype=float)
    if isinstance(env, (PerfectMirror, Substrate)):
        out = [psi_substrate_components(theta, z, env, dimer.orientation, phi).field()
               for z in (dimer.z1, dimer.z2)]
        return np.stack(out, axis=1)
    psi1, psi2 = path_amplitudes(theta, dimer, env, l_max)
    u_t, u_p = polarization_factor(theta, dimer, env, phi)
    return np.array([[u_t * psi1, u_t * psi2], [u_p * psi1, u_p * psi2]])
