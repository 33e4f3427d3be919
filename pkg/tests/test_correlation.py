import math

import numpy as np
import pytest

from dimercorr.correlation import (AngularMap, g2_eval, intensity, map_csv_text, map_sidecar,
                                   map_sweep, mirror_reduced, path_intensity, psi_polarized,
                                   resolve_threads, sphere_psi_terms, substrate_psi_terms,
                                   two_photon_amplitude)
from dimercorr.couplings import couplings_mirror
from dimercorr.dynamics import CorrelatorSet, build_generator, correlators, steady_state
from dimercorr.greens import multipoles_for
from dimercorr.model import (K0, AngularGrid, DimerConfig, DriveConfig, FreeSpace,
                             PerfectMirror, Sphere, Substrate)

from conftest import PLANAR_EPS, SPHERE_B, SPHERE_EPS, SPHERE_R

RNG = np.random.default_rng(11)
TH = RNG.uniform(0, math.pi / 2, 40)
THP = RNG.uniform(0, math.pi / 2, 40)
MIRROR_CORR = correlators(steady_state(build_generator(couplings_mirror(K0 * 0.6, K0 * 0.8),
                                                       DriveConfig(0.0, 1.0, 1.0, 1.0))))


def _incoherent(p):
    # product of two mixed single-emitter states: no coherences
    return CorrelatorSet.from_excitations(p, p, 0.0, p * p)


@pytest.mark.parametrize("eps", PLANAR_EPS)
def test_substrate_terms_sum_to_psi(eps):
    env = Substrate(eps)
    terms = substrate_psi_terms(TH, THP, 0.6, 1.7, env)
    np.testing.assert_allclose(terms.sum(0), two_photon_amplitude(TH, THP, DimerConfig(0.6, 1.7), env),
                               atol=1e-13)


def test_mirror_reduction_is_quarter_psi():
    psi = two_photon_amplitude(TH, THP, DimerConfig(0.6, 0.8), PerfectMirror())
    np.testing.assert_allclose(psi, 4 * mirror_reduced(TH, THP, 0.6, 0.8), atol=1e-13)


@pytest.mark.parametrize("eps", SPHERE_EPS)
def test_sphere_terms_sum_to_psi(eps):
    env = Sphere(eps, SPHERE_R, SPHERE_B)
    th, thp = TH * 2, THP * 2
    terms = sphere_psi_terms(th, thp, multipoles_for(env))
    psi = two_photon_amplitude(th, thp, DimerConfig(SPHERE_B, -SPHERE_B), env)
    np.testing.assert_allclose(terms.sum(0), psi, atol=1e-12)


def test_free_space_incoherent_g2_closed_form():
    d = DimerConfig(0.0, 0.8)
    th, thp = TH * 2, THP * 2
    g = g2_eval(th, thp, _incoherent(0.3), d, FreeSpace())
    ref = np.cos(K0 * 0.8 * (np.cos(th) - np.cos(thp)) / 2) ** 2
    np.testing.assert_allclose(g, ref, atol=1e-13)


def test_intensity_unit_is_single_free_emitter_broadside():
    d = DimerConfig(0.0, 0.5)
    one = CorrelatorSet.from_excitations(1.0, 0.0)
    assert intensity(math.pi / 2, one, d, FreeSpace()) == pytest.approx(1.0, abs=1e-15)
    assert intensity(0.0, one, d, FreeSpace()) == pytest.approx(0.0, abs=1e-30)


def test_reduced_and_channel_g2_agree():
    for env, d in ((PerfectMirror(), DimerConfig(0.6, 0.8)),
                   (Substrate(-3 + 0.01j), DimerConfig(0.6, 1.7)),
                   (FreeSpace(), DimerConfig(0.0, 1.1, (0.6, 0.0, 0.8)))):
        a = g2_eval(TH, THP, MIRROR_CORR, d, env, method="reduced")
        b = g2_eval(TH, THP, MIRROR_CORR, d, env, method="channels")
        np.testing.assert_allclose(a, b, rtol=1e-10)


def test_tilted_dipoles_require_channels():
    d = DimerConfig(0.6, 1.7, (0.6, 0.0, 0.8))
    with pytest.raises(ValueError):
        g2_eval(TH, THP, MIRROR_CORR, d, Substrate(2.13), method="reduced")
    g = g2_eval(TH, THP, MIRROR_CORR, d, Substrate(2.13))
    assert np.all(np.isfinite(g) | np.isnan(g))
    with pytest.raises(ValueError):
        psi_polarized(0.1, 0.2, d, Substrate(2.13), orientation2=(1.0, 0.0, 0.0))


def test_g2_masked_where_marginal_vanishes():
    d = DimerConfig(0.6, 0.8)
    # vertical dipoles do not radiate along the axis
    g = g2_eval(0.0, 0.5, MIRROR_CORR, d, PerfectMirror(), method="channels")
    assert np.isnan(g)


def test_map_matches_pointwise_and_is_symmetric():
    grid = AngularGrid(0.0, math.pi / 2, 41)
    d, env = DimerConfig(0.6, 1.7), Substrate(-5 + 0.1j)
    m = map_sweep(grid, "psi2", d, env)
    th = grid.nodes()
    ref = np.abs(two_photon_amplitude(th[:, None], th[None, :], d, env)) ** 2
    np.testing.assert_allclose(m.values, ref, rtol=1e-13)
    assert np.array_equal(m.values, m.values.T)


def test_g2_map_masks_and_threads():
    grid = AngularGrid(0.0, math.pi / 2, 53)
    d, env = DimerConfig(0.6, 0.8), PerfectMirror()
    a = map_sweep(grid, "g2", d, env, MIRROR_CORR, threads=1)
    b = map_sweep(grid, "g2", d, env, MIRROR_CORR, threads=4)
    assert a.values.tobytes() == b.values.tobytes()
    # the reduced form cancels the dipole pattern, so the axis stays finite
    assert a.meta["masked_nodes"] == 0
    c = map_sweep(grid, "g2", d, env, MIRROR_CORR, method="channels")
    assert np.isnan(c.values[0]).all() and np.isnan(c.values[:, 0]).all()
    assert c.meta["masked_nodes"] == 1
    np.testing.assert_allclose(c.values[1:, 1:], a.values[1:, 1:], rtol=1e-10)


def test_tilted_map_symmetric_bitwise():
    grid = AngularGrid(0.0, math.pi / 2, 31)
    d = DimerConfig(0.6, 1.7, (0.6, 0.0, 0.8))
    m = map_sweep(grid, "psi2", d, Substrate(2.13), threads=3)
    assert np.array_equal(m.values, m.values.T)
    with pytest.raises(ValueError):
        map_sweep(grid, "psi", d, Substrate(2.13))


def test_intensity_profile_and_errors():
    grid = AngularGrid(0.0, math.pi / 2, 11)
    d, env = DimerConfig(0.6, 0.8), PerfectMirror()
    m = map_sweep(grid, "intensity", d, env, MIRROR_CORR)
    np.testing.assert_allclose(m.values, intensity(grid.nodes(), MIRROR_CORR, d, env))
    with pytest.raises(ValueError):
        map_sweep(grid, "g2", d, env)
    with pytest.raises(ValueError):
        map_sweep(grid, "phase", d, env)


def test_path_intensity_nonnegative():
    th = np.linspace(0, math.pi / 2, 200)
    assert np.all(path_intensity(th, MIRROR_CORR, DimerConfig(0.6, 0.8), PerfectMirror()) >= 0)


def test_thread_resolution(monkeypatch):
    monkeypatch.setenv("DIMERCORR_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("DIMERCORR_THREADS")
    assert resolve_threads(None) == 1


def test_csv_layout():
    grid = AngularGrid(0.0, math.pi / 2, 3)
    m = map_sweep(grid, "psi", DimerConfig(0.0, 0.5), FreeSpace())
    lines = map_csv_text(m).splitlines()
    assert lines[0] == "theta\\theta_p,0.000000000,0.785398163,1.570796327"
    assert len(lines) == 4
    assert lines[1].split(",")[1].endswith("i")
    assert map_sidecar(m, {"x": 1})["grid"]["n"] == 3
    prof = AngularMap(grid, "intensity", np.array([0.0, 0.5, 1.0]))
    assert map_csv_text(prof).splitlines()[0] == "theta,intensity"
