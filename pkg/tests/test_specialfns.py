import math

import mpmath as mp
import numpy as np
import pytest
from scipy import special

from dimercorr.specialfns import (assoc_legendre_p1, derivative_from_table, fresnel_rp,
                                  fresnel_rs, legendre_fl, legendre_fl_all, mie_rTM, mie_table,
                                  spherical_hankel1, spherical_hankel1_all, spherical_jn_all,
                                  spherical_yn_all)

mp.mp.dps = 40


def _mp_jn(l, x):
    return mp.sqrt(mp.pi / (2 * x)) * mp.besselj(l + mp.mpf(1) / 2, x)


def _mp_yn(l, x):
    return mp.sqrt(mp.pi / (2 * x)) * mp.bessely(l + mp.mpf(1) / 2, x)


def _mp_rtm(l, eps, x):
    """Minus the electric Mie coefficient, in extended precision."""
    m = mp.sqrt(mp.mpc(eps))
    if mp.im(m) < 0:
        m = -m
    x = mp.mpf(x)

    def psi(z):
        return z * mp.sqrt(mp.pi / (2 * z)) * mp.besselj(l + mp.mpf(1) / 2, z)

    def xi(z):
        return z * mp.sqrt(mp.pi / (2 * z)) * (mp.besselj(l + mp.mpf(1) / 2, z)
                                               + 1j * mp.bessely(l + mp.mpf(1) / 2, z))

    dpsi_x = mp.diff(psi, x)
    dxi_x = mp.diff(xi, x)
    dpsi_mx = mp.diff(psi, m * x)
    a = ((m * psi(m * x) * dpsi_x - psi(x) * dpsi_mx)
         / (m * psi(m * x) * dxi_x - xi(x) * dpsi_mx))
    return -complex(a)


@pytest.mark.parametrize("x", [0.05, 0.7, 3.04, 4.561, 25.0, 80.0])
def test_bessel_tables_against_mpmath(x):
    lmax = 30
    j = spherical_jn_all(lmax, x)
    y = spherical_yn_all(lmax, x)
    for l in range(lmax + 1):
        jr = float(_mp_jn(l, x))
        assert abs(j[l] - jr) <= 1e-13 * abs(jr)
        if l <= 12 or x > 1:
            yr = float(_mp_yn(l, x))
            assert abs(y[l] - yr) <= 1e-12 * abs(yr)


def test_bessel_tables_against_scipy_vectorised():
    x = np.linspace(0.2, 50.0, 211)
    lmax = 40
    j = spherical_jn_all(lmax, x)
    h = spherical_hankel1_all(lmax, x)
    for l in (0, 1, 5, 17, 40):
        np.testing.assert_allclose(j[l], special.spherical_jn(l, x), rtol=1e-10, atol=1e-14)
        ref = special.spherical_jn(l, x) + 1j * special.spherical_yn(l, x)
        np.testing.assert_allclose(h[l], ref, rtol=1e-12)


def test_hankel_single_order_and_shapes():
    assert spherical_hankel1_all(5, np.ones((3, 2))).shape == (6, 3, 2)
    v = spherical_hankel1(3, 2.5)
    assert v == pytest.approx(special.spherical_jn(3, 2.5) + 1j * special.spherical_yn(3, 2.5),
                              rel=1e-13)
    with pytest.raises(ValueError):
        spherical_hankel1(-1, 1.0)
    with pytest.raises(ValueError):
        spherical_jn_all(3, 0.0)


def test_derivative_table_matches_scipy():
    x = np.linspace(0.5, 12.0, 40)
    d = derivative_from_table(spherical_jn_all(10, x), x)
    for l in range(11):
        np.testing.assert_allclose(d[l], special.spherical_jn(l, x, derivative=True), atol=1e-13)


def test_legendre_derivative_against_numpy():
    x = np.linspace(-1, 1, 101)
    f = legendre_fl_all(25, x)
    for l in range(1, 26):
        ref = np.polynomial.legendre.Legendre.basis(l).deriv()(x)
        np.testing.assert_allclose(f[l - 1], ref, rtol=1e-11, atol=1e-11 * l * l)


def test_legendre_endpoints_exact():
    for l in range(1, 40):
        assert legendre_fl(l, 1.0) == l * (l + 1) / 2
        assert legendre_fl(l, -1.0) == (-1) ** (l + 1) * l * (l + 1) / 2
    with pytest.raises(ValueError):
        legendre_fl_all(3, 1.5)


def test_assoc_legendre_condon_shortley():
    th = np.linspace(0.01, 3.1, 30)
    for l in (1, 2, 7):
        np.testing.assert_allclose(assoc_legendre_p1(l, th), special.lpmv(1, l, np.cos(th)),
                                   rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("eps", [2.13, -5 + 0.1j, -3 + 0.01j, 12 + 3j])
def test_fresnel_known_limits(eps):
    n = np.sqrt(complex(eps))
    assert fresnel_rp(eps, 0.0) == pytest.approx((n - 1) / (n + 1), rel=1e-13)
    assert fresnel_rs(eps, 0.0) == pytest.approx((1 - n) / (1 + n), rel=1e-13)
    assert fresnel_rp(eps, math.pi / 2) == pytest.approx(-1, abs=1e-12)
    assert fresnel_rs(eps, math.pi / 2) == pytest.approx(-1, abs=1e-12)
    th = np.linspace(0, math.pi / 2, 50)
    assert np.all(np.abs(fresnel_rp(eps, th)) <= 1 + 1e-12)


def test_fresnel_brewster_and_vacuum():
    th_b = math.atan(math.sqrt(2.13))
    assert abs(fresnel_rp(2.13, th_b)) < 1e-14
    assert np.all(fresnel_rp(1.0, np.linspace(0, 1.5, 5)) == 0)
    assert np.all(fresnel_rs(1.0, np.linspace(0, 1.5, 5)) == 0)


@pytest.mark.parametrize("eps", [2.13, -5 + 0.1j, -3 + 0.01j])
def test_mie_against_mpmath(eps):
    x = 2 * math.pi * 0.48393
    tab = mie_table(12, eps, x)
    for l in (1, 2, 3, 6, 12):
        ref = _mp_rtm(l, eps, x)
        assert abs(tab.rTM[l - 1] - ref) <= 1e-10 * max(abs(ref), 1e-12)
        assert mie_rTM(l, eps, x) == pytest.approx(tab.rTM[l - 1], rel=1e-13, abs=1e-300)


def test_mie_lossless_on_unitarity_circle():
    # |1 + 2 r| = 1 for a lossless scatterer
    tab = mie_table(30, 2.13, 3.04)
    np.testing.assert_allclose(np.abs(1 + 2 * tab.rTM), 1.0, atol=1e-12)


def test_mie_vacuum_and_invalid():
    assert np.all(mie_table(10, 1.0, 2.0).rTM == 0)
    with pytest.raises(ValueError):
        mie_table(5, 2 - 1j, 1.0)
    with pytest.raises(ValueError):
        mie_table(5, 2.0, 0.0)
    with pytest.raises(ValueError):
        mie_rTM(0, 2.0, 1.0)


def test_mie_high_order_finite():
    tab = mie_table(200, -5 + 0.1j, 3.04)
    assert np.all(np.isfinite(tab.rTM))
    assert abs(tab.rTM[-1]) < 1e-100
