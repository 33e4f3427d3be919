import math

import pytest

from dimercorr.model import (AngularGrid, ConfigError, DimerConfig, DriveConfig, FreeSpace,
                             PerfectMirror, Sphere, Substrate, check_setup, default_grid,
                             format_complex, parse_complex, parse_config, serialize_config,
                             setup_hash, wavelength_from_energy)

SPHERE_CFG = """
geometry.kind = sphere
geometry.epsilon = -5+0.1i
geometry.radius = 200 nm
geometry.gap = 100 nm
dimer.photon_energy = 3 eV
drive.omega1 = 1.0
drive.omega2 = 1.0
"""


def test_wavelength_at_3ev():
    assert wavelength_from_energy(3.0) == pytest.approx(413.28, abs=0.01)


def test_sphere_config_in_nm():
    cfg = parse_config(SPHERE_CFG)
    lam = wavelength_from_energy(3.0)
    assert isinstance(cfg.environment, Sphere)
    assert cfg.environment.radius == pytest.approx(200 / lam, rel=1e-15)
    assert cfg.environment.offset == pytest.approx(300 / lam, rel=1e-15)
    assert cfg.dimer.z1 == -cfg.dimer.z2
    assert cfg.environment.epsilon == -5 + 0.1j
    assert cfg.grid.theta_max == math.pi


def test_round_trip_is_exact():
    for text in (SPHERE_CFG, "geometry.kind = mirror\ndimer.z1 = 0.6\ndimer.z2 = 0.8\n"
                 "drive.detuning = -g12\ndrive.omega1 = 0.1\ndrive.omega2 = -0.1\n",
                 "geometry.kind = substrate\ngeometry.epsilon = 2.13\ndimer.z1 = 0.6\n"
                 "dimer.z2 = 1.7\ngrid.n = 101\ngrid.theta_max = 80 deg\n",
                 "geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 0.25\n"
                 "dimer.orientation = 1 0 1\n"):
        cfg = parse_config(text)
        again = parse_config(serialize_config(cfg))
        assert again == cfg
        assert serialize_config(again) == serialize_config(cfg)


def test_detuning_in_units_of_g12():
    cfg = parse_config("geometry.kind = mirror\ndimer.z1 = 0.6\ndimer.z2 = 0.8\n"
                       "drive.detuning = 2.5*g12\n")
    assert cfg.drive.detuning_g12 == 2.5
    assert cfg.drive.resolved(-0.4).detuning == pytest.approx(-1.0)


def test_orientation_is_normalised():
    cfg = parse_config("geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 1\n"
                       "dimer.orientation = 1 0 1\n")
    assert cfg.dimer.orientation == pytest.approx((2 ** -0.5, 0, 2 ** -0.5))


@pytest.mark.parametrize("text, key", [
    ("geometry.kind = torus\n", "geometry.kind"),
    ("geometry.kind = mirror\ndimer.z1 = 0.8\ndimer.z2 = 0.6\n", "dimer.z2"),
    ("geometry.kind = mirror\ndimer.z1 = 0.6\n", "dimer.z2"),
    ("geometry.kind = substrate\ngeometry.epsilon = 2-1i\ndimer.z1 = 0\ndimer.z2 = 1\n",
     "geometry.epsilon"),
    ("geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 1\ndimer.colour = red\n", "dimer.colour"),
    ("geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 1 furlong\n", "dimer.z2"),
    ("geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 100 nm\n", "dimer.z2"),
    ("geometry.kind = sphere\ngeometry.epsilon = 2\ngeometry.radius = 1\n"
     "geometry.offset = 0.5\n", "geometry.offset"),
    ("geometry.kind = mirror\ndimer.z1 = 0.2\ndimer.z2 = 0.5\ngrid.theta_max = 3\n", "grid"),
    ("geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 1\ndrive.omega1 = 1+\n", "drive.omega1"),
    ("geometry.kind = free\ndimer.z1 = 0\ndimer.z1 = 1\n", "dimer.z1"),
    ("geometry.kind = free\ndimer.z1 = 0\ndimer.z2 = 0\n", "dimer.z2"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.key == key or key in str(exc.value)


def test_complex_parsing_forms():
    assert parse_complex("k", "2.13") == 2.13
    assert parse_complex("k", "-5+0.1i") == -5 + 0.1j
    assert parse_complex("k", "-3 - 0.01i") == -3 - 0.01j
    assert parse_complex("k", "2i") == 2j
    z = -3 + 0.01j
    assert parse_complex("k", format_complex(z)) == z


def test_domain_validation():
    with pytest.raises(ValueError):
        DimerConfig(0.0, 1.0, (1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        Substrate(2 - 0.1j)
    with pytest.raises(ValueError):
        Sphere(2.0, 1.0, 0.9)
    with pytest.raises(ValueError):
        DriveConfig(float("nan"))
    with pytest.raises(ValueError):
        AngularGrid(0.0, 4.0, 10)
    with pytest.raises(ValueError):
        check_setup(DimerConfig(-0.1, 0.5), PerfectMirror())


def test_default_grids_and_nesting():
    assert default_grid(PerfectMirror()).theta_max == math.pi / 2
    assert default_grid(FreeSpace()).theta_max == math.pi
    fine = AngularGrid(0, math.pi, 721).nodes()
    coarse = AngularGrid(0, math.pi, 181).nodes()
    assert (fine[::4] == coarse).all()


def test_setup_hash_ignores_drive():
    d = DimerConfig(0.6, 0.8)
    assert setup_hash(d, PerfectMirror()) == setup_hash(d, PerfectMirror())
    assert setup_hash(d, PerfectMirror()) != setup_hash(d, Substrate(2.13))
