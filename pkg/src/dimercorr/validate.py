"""Oracle and invariant checks runnable from the command line."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .correlation import two_photon_amplitude
from .couplings import (couplings_free, couplings_mirror, couplings_sphere,
                        gamma_farfield_integral, mirror_gamma_ii)
from .dynamics import (basis_state, build_generator, check_density_matrix, evolve_oracle,
                       relaxation_horizon, residual, steady_state)
from .greens import sphere_multipoles
from .model import (K0, DimerConfig, DriveConfig, FreeSpace, PerfectMirror, Sphere,
                    Substrate, wavelength_from_energy)
from .specialfns import spherical_hankel1_all, spherical_jn_all
from .zeros import eps_independent_zeros, minima_map, zero_locus
from .correlation import map_sweep
from .model import AngularGrid

SUITES = ("specialfns", "couplings", "dynamics", "zeros")

# sphere geometry of the figure presets, in lambda0 units
_LAM = wavelength_from_energy(3.0)
SPHERE_R, SPHERE_B = 200.0 / _LAM, 300.0 / _LAM
SPHERE_EPS = (2.13, -5 + 0.1j, -3 + 0.01j)


@dataclass
class Check:
    suite: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_json(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(b), 1e-300)))


def check_specialfns() -> list[Check]:
    out = []
    x = np.linspace(0.1, 60.0, 300)
    h = spherical_hankel1_all(40, x)
    ref = np.array([special.spherical_jn(l, x) + 1j * special.spherical_yn(l, x) for l in range(41)])
    out.append(Check("specialfns", "hankel vs scipy, l<=40", _rel(h, ref), 1e-12))
    j = spherical_jn_all(40, x)
    ref_j = np.array([special.spherical_jn(l, x) for l in range(41)])
    out.append(Check("specialfns", "bessel j vs scipy (abs), l<=40",
                     float(np.abs(j - ref_j).max()), 1e-13))
    for eps in SPHERE_EPS:
        mp = sphere_multipoles(eps, K0 * SPHERE_R, K0 * SPHERE_B)
        l = np.arange(1, mp.l_used + 1)
        par = float(np.abs(mp.c_tilde - np.where(l % 2 == 1, 1, -1) * mp.c).max())
        out.append(Check("specialfns", f"multipole parity eps={eps}", par, 1e-15))
    # energy balance of the lossless sphere: far field against the series
    s = Sphere(2.13, SPHERE_R, SPHERE_B)
    cs = couplings_sphere(2.13, K0 * SPHERE_R, K0 * SPHERE_B)
    g11 = gamma_farfield_integral(s, SPHERE_B, SPHERE_B)
    g12 = gamma_farfield_integral(s, SPHERE_B, -SPHERE_B)
    out.append(Check("specialfns", "lossless sphere gamma_11 far field vs series",
                     abs(g11 - cs.gamma11) / cs.gamma11, 1e-10))
    out.append(Check("specialfns", "lossless sphere gamma_12 far field vs series",
                     abs(g12 - cs.gamma12), 1e-10))
    return out


def check_couplings() -> list[Check]:
    out = []
    z1 = 0.6
    worst_g, worst_ii = 0.0, 0.0
    for z2 in np.linspace(1.0, 2.5, 50):
        cs = couplings_mirror(K0 * z1, K0 * z2)
        q12 = gamma_farfield_integral(PerfectMirror(), z1, z2)
        q22 = gamma_farfield_integral(PerfectMirror(), z2, z2)
        worst_g = max(worst_g, abs(q12 - cs.gamma12) / abs(q12))
        worst_ii = max(worst_ii, abs(q22 - cs.gamma22) / cs.gamma22)
    out.append(Check("couplings", "mirror gamma12 closed form vs quadrature", worst_g, 1e-6))
    out.append(Check("couplings", "mirror gamma_ii closed form vs quadrature", worst_ii, 1e-6))
    out.append(Check("couplings", "mirror gamma_ii(z->0) -> 2", abs(mirror_gamma_ii(1e-6) - 2), 1e-4))
    out.append(Check("couplings", "mirror gamma_ii(z->inf) -> 1", abs(mirror_gamma_ii(K0 * 1e4) - 1), 1e-4))
    q = gamma_farfield_integral(FreeSpace(), 0.0, 0.5)
    out.append(Check("couplings", "free gamma12 at lambda0/2 vs quadrature",
                     abs(q - couplings_free(math.pi).gamma12) / abs(q), 1e-8))
    out.append(Check("couplings", "free gamma_ii quadrature",
                     abs(gamma_farfield_integral(FreeSpace(), 0.3, 0.3) - 1), 1e-8))
    for eps in SPHERE_EPS:
        a = couplings_sphere(eps, K0 * SPHERE_R, K0 * SPHERE_B, l_max=60)
        b = couplings_sphere(eps, K0 * SPHERE_R, K0 * SPHERE_B, l_max=120)
        d = max(abs(a.gamma11 - b.gamma11), abs(a.gamma12 - b.gamma12), abs(a.g12 - b.g12))
        out.append(Check("couplings", f"sphere series l_max doubling eps={eps}", d, 1e-10))
        psd = max(0.0, abs(a.gamma12) - a.gamma11, -a.gamma11)
        out.append(Check("couplings", f"sphere PSD eps={eps}", psd, 0.0))
    return out


def _dynamics_cases():
    mir = couplings_mirror(K0 * 0.6, K0 * 0.8)
    yield "mirror symmetric", mir, DriveConfig(0.0, 1.0, 1.0, 1.0)
    yield "mirror antisymmetric", mir, DriveConfig(0.0, 0.1, -0.1, -1.0)
    for eps in SPHERE_EPS:
        yield f"sphere eps={eps}", couplings_sphere(eps, K0 * SPHERE_R, K0 * SPHERE_B), \
            DriveConfig(0.0, 1.0, 1.0)


def check_dynamics() -> list[Check]:
    out = []
    for name, cs, drive in _dynamics_cases():
        L = build_generator(cs, drive)
        rho = steady_state(L)
        chk = check_density_matrix(rho)
        out.append(Check("dynamics", f"{name}: residual", residual(L, rho), 1e-10))
        out.append(Check("dynamics", f"{name}: physicality",
                         max(chk["hermiticity"], chk["trace"], -chk["min_eigenvalue"], 0.0), 1e-10))
        rk = evolve_oracle(L, basis_state("gg"), relaxation_horizon(L))
        out.append(Check("dynamics", f"{name}: steady state vs RK4", float(np.abs(rk - rho).max()), 1e-6))
        rho0 = steady_state(build_generator(cs, DriveConfig()))
        out.append(Check("dynamics", f"{name}: undriven ground state",
                         float(np.abs(rho0 - basis_state("gg")).max()), 1e-14))
    return out


def check_zeros() -> list[Check]:
    out = []
    worst = 0.0
    for z12 in (0.25, 0.5, 1.0, 1.5):
        v = zero_locus(DimerConfig(0.0, z12), FreeSpace()).all_vertices()
        ph = K0 * z12 * np.abs(np.cos(v[:, 0]) - np.cos(v[:, 1])) / math.pi
        worst = max(worst, float(np.abs(ph - (2 * np.round((ph - 1) / 2) + 1)).max()))
    out.append(Check("zeros", "free-space loci phase condition", worst, 1e-8))
    out.append(Check("zeros", "free-space z12=0.2 empty",
                     float(len(zero_locus(DimerConfig(0.0, 0.2), FreeSpace()).features)), 0.0))
    mir = zero_locus(DimerConfig(0.6, 0.8), PerfectMirror())
    out.append(Check("zeros", "mirror branch count = 3", float(abs(mir.branch_count - 3)), 0.0))
    pts = eps_independent_zeros(1.1, 0.6).points
    worst = 0.0
    for env in (PerfectMirror(), Substrate(2.13), Substrate(-5 + 0.1j), Substrate(-3 + 0.01j), FreeSpace()):
        for t, tp in pts:
            worst = max(worst, abs(complex(two_photon_amplitude(t, tp, DimerConfig(0.6, 1.7), env))) ** 2)
    out.append(Check("zeros", "eps-independent points |Psi|^2", worst, 1e-12))
    grid = AngularGrid(0.0, math.pi, 361)
    inter = np.ones((grid.n, grid.n), bool)
    for eps in SPHERE_EPS:
        s = Sphere(eps, SPHERE_R, SPHERE_B)
        m = map_sweep(grid, "psi2", DimerConfig(SPHERE_B, -SPHERE_B), s)
        inter &= minima_map(m.values, 1e-6).mask
    out.append(Check("zeros", "sphere mask intersection at 1e-6 empty", float(inter.sum()), 0.0))
    return out


_SUITE_FUNCS = {"specialfns": check_specialfns, "couplings": check_couplings,
                "dynamics": check_dynamics, "zeros": check_zeros}


def run_suite(name: str) -> list[Check]:
    if name == "all":
        return [c for s in SUITES for c in _SUITE_FUNCS[s]()]
    if name not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}")
    return _SUITE_FUNCS[name]()
