"""Domain types, unit conventions and configuration ingestion.

Every length is stored in units of the emitter wavelength lambda0 and
every rate or frequency in units of the free-space decay rate gamma0.
The free-space wavenumber is therefore ``K0 = 2*pi``.

Configuration files use a flat ``section.key = value`` format; see
``docs`` in the README for the grammar.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple, Union

from scipy import constants

K0 = 2.0 * math.pi
#: h*c in eV*nm, converts photon energy to vacuum wavelength
HC_EV_NM = constants.h * constants.c / constants.e * 1e9

SECTIONS = ("geometry", "dimer", "drive", "grid")
# namespaces parsed by the figure presets, ignored by parse_config
RESERVED = ("figure", "preset")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


def wavelength_from_energy(energy_ev: float) -> float:
    """Vacuum wavelength in nm of a photon with energy ``energy_ev``."""
    if energy_ev <= 0:
        raise ValueError("photon energy must be positive")
    return HC_EV_NM / energy_ev


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DimerConfig:
    """Two identical emitters on the z axis.

    For the sphere geometry emitter 1 sits at ``+b`` and emitter 2 at ``-b``
    (``z1 = b``, ``z2 = -b``).
    """

    z1: float
    z2: float
    orientation: tuple[float, float, float] = (0.0, 0.0, 1.0)
    gamma0: float = 1.0
    omega0: float = 1.0
    wavelength_nm: float | None = None

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.orientation))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"dipole orientation must be a unit vector, |mu| = {norm}")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if self.z1 == self.z2:
            raise ValueError("emitters must not coincide")

    @property
    def z12(self) -> float:
        return self.z2 - self.z1

    @property
    def separation(self) -> float:
        return abs(self.z2 - self.z1)

    @property
    def k0(self) -> float:
        return K0

    @property
    def is_vertical(self) -> bool:
        mx, my, _ = self.orientation
        return mx == 0.0 and my == 0.0


@dataclass(frozen=True)
class FreeSpace:
    kind: ClassVar[str] = "free"


@dataclass(frozen=True)
class PerfectMirror:
    kind: ClassVar[str] = "mirror"


@dataclass(frozen=True)
class Substrate:
    epsilon: complex
    kind: ClassVar[str] = "substrate"

    def __post_init__(self):
        object.__setattr__(self, "epsilon", complex(self.epsilon))
        if self.epsilon.imag < 0:
            raise ValueError("permittivity must be passive, Im(eps) >= 0")


@dataclass(frozen=True)
class Sphere:
    """Sphere of ``radius`` centred at the origin; emitters at ``+-offset`` on z."""

    epsilon: complex
    radius: float
    offset: float
    kind: ClassVar[str] = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "epsilon", complex(self.epsilon))
        if self.epsilon.imag < 0:
            raise ValueError("permittivity must be passive, Im(eps) >= 0")
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        if not self.offset > self.radius:
            raise ValueError("emitter inside sphere (offset must exceed radius)")


Environment = Union[FreeSpace, PerfectMirror, Substrate, Sphere]


def is_planar(env: Environment) -> bool:
    return isinstance(env, (PerfectMirror, Substrate))


@dataclass(frozen=True)
class DriveConfig:
    """Coherent drive in the laser frame.

    ``detuning_g12`` (when set) expresses the detuning as a multiple of the
    coherent coupling g12, which is only known once couplings are computed.
    """

    detuning: float = 0.0
    omega1: complex = 0j
    omega2: complex = 0j
    detuning_g12: float | None = None

    def __post_init__(self):
        for name in ("omega1", "omega2"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        vals = (self.detuning, self.omega1.real, self.omega1.imag,
                self.omega2.real, self.omega2.imag)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("drive entries must be finite")

    def resolved(self, g12: float) -> "DriveConfig":
        if self.detuning_g12 is None:
            return self
        return DriveConfig(self.detuning_g12 * g12, self.omega1, self.omega2)


@dataclass(frozen=True)
class AngularGrid:
    """Uniform square grid on the (theta, theta') plane."""

    theta_min: float = 0.0
    theta_max: float = math.pi
    n: int = 721

    def __post_init__(self):
        if not (0.0 <= self.theta_min < self.theta_max <= math.pi):
            raise ValueError("need 0 <= theta_min < theta_max <= pi")
        if self.n < 2:
            raise ValueError("grid needs at least two nodes")

    def nodes(self):
        import numpy as np

        k = np.arange(self.n, dtype=float)
        # k/(n-1) is correctly rounded, so nested grids share nodes bit-for-bit
        return self.theta_min + (self.theta_max - self.theta_min) * (k / (self.n - 1))

    @property
    def step(self) -> float:
        return (self.theta_max - self.theta_min) / (self.n - 1)


def default_grid(env: Environment, n: int = 721) -> AngularGrid:
    if is_planar(env):
        return AngularGrid(0.0, math.pi / 2, n)
    return AngularGrid(0.0, math.pi, n)


def check_grid(grid: AngularGrid, env: Environment) -> None:
    if is_planar(env) and grid.theta_max > math.pi / 2 + 1e-15:
        raise ValueError("planar geometries only radiate into theta <= pi/2")


def check_setup(dimer: DimerConfig, env: Environment) -> None:
    """Cross-field invariants between dimer and environment."""
    if is_planar(env):
        if not (dimer.z2 > dimer.z1 >= 0):
            raise ValueError("planar geometries need z2 > z1 >= 0")
    if isinstance(env, Sphere):
        if not dimer.is_vertical:
            raise ValueError("sphere geometry supports vertical dipoles only")
        if dimer.z1 != env.offset or dimer.z2 != -env.offset:
            raise ValueError("sphere dimer must sit at +-offset")


class Config(NamedTuple):
    dimer: DimerConfig
    environment: Environment
    drive: DriveConfig
    grid: AngularGrid


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_LINE = re.compile(r"^\s*([A-Za-z_][\w]*(?:\.[A-Za-z_][\w]*)+)\s*=\s*(.*?)\s*$")
_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_COMPLEX = re.compile(
    r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?"
    r"([+-](\d+\.?\d*|\.\d+)?([eE][+-]?\d+)?i)?$|^[+-]?(\d+\.?\d*|\.\d+)?([eE][+-]?\d+)?i$"
)


def read_keyvalues(text: str) -> dict[str, str]:
    """Split a configuration document into an ordered ``{key: raw value}`` dict."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}", f"cannot parse {raw.strip()!r}")
        key, value = m.group(1), m.group(2)
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def parse_float(key: str, s: str) -> float:
    s = s.strip()
    if not _NUM.match(s):
        raise ConfigError(key, f"malformed number {s!r}")
    return float(s)


def parse_complex(key: str, s: str) -> complex:
    """Parse ``a``, ``bi``, ``a+bi`` or ``a-bi``."""
    s = s.replace(" ", "")
    if not s or not _COMPLEX.match(s):
        raise ConfigError(key, f"malformed complex number {s!r}")
    try:
        return complex(s.replace("i", "j"))
    except ValueError:
        raise ConfigError(key, f"malformed complex number {s!r}") from None


def format_float(x: float) -> str:
    return repr(float(x))


def format_complex(z: complex) -> str:
    z = complex(z)
    im = repr(z.imag)
    if not im.startswith("-"):
        im = "+" + im
    return f"{z.real!r}{im}i"


def _parse_length(key: str, s: str, wavelength_nm: float | None) -> float:
    parts = s.split()
    value = parse_float(key, parts[0])
    unit = parts[1] if len(parts) > 1 else "lambda0"
    if len(parts) > 2:
        raise ConfigError(key, f"malformed length {s!r}")
    if unit == "lambda0":
        return value
    if unit == "nm":
        if wavelength_nm is None:
            raise ConfigError(key, "length in nm needs dimer.photon_energy or dimer.wavelength")
        return value / wavelength_nm
    raise ConfigError(key, f"unknown length unit {unit!r}")


def _parse_angle(key: str, s: str) -> float:
    parts = s.split()
    value = parse_float(key, parts[0])
    if len(parts) == 1 or parts[1] == "rad":
        return value
    if parts[1] == "deg":
        return math.radians(value)
    raise ConfigError(key, f"unknown angle unit {parts[1]!r}")


def _parse_wavelength(kv: dict[str, str]) -> float | None:
    if "dimer.photon_energy" in kv and "dimer.wavelength" in kv:
        raise ConfigError("dimer.wavelength", "give either photon_energy or wavelength")
    if "dimer.photon_energy" in kv:
        key = "dimer.photon_energy"
        parts = kv[key].split()
        if len(parts) != 2 or parts[1] != "eV":
            raise ConfigError(key, "expected '<value> eV'")
        e = parse_float(key, parts[0])
        if e <= 0:
            raise ConfigError(key, "photon energy must be positive")
        return wavelength_from_energy(e)
    if "dimer.wavelength" in kv:
        key = "dimer.wavelength"
        parts = kv[key].split()
        if len(parts) != 2 or parts[1] != "nm":
            raise ConfigError(key, "expected '<value> nm'")
        lam = parse_float(key, parts[0])
        if lam <= 0:
            raise ConfigError(key, "wavelength must be positive")
        return lam
    return None


_KNOWN = {
    "geometry.kind", "geometry.epsilon", "geometry.radius", "geometry.offset", "geometry.gap",
    "dimer.z1", "dimer.z2", "dimer.orientation", "dimer.gamma0", "dimer.photon_energy",
    "dimer.wavelength",
    "drive.detuning", "drive.omega1", "drive.omega2",
    "grid.theta_min", "grid.theta_max", "grid.n",
}


def _require(kv, key):
    if key not in kv:
        raise ConfigError(key, "missing key")
    return kv[key]


def parse_config(text: str) -> Config:
    """Parse and validate a configuration document."""
    kv = read_keyvalues(text)
    for key in kv:
        if key.split(".", 1)[0] in RESERVED:
            continue
        if key not in _KNOWN:
            raise ConfigError(key, "unknown key")

    lam = _parse_wavelength(kv)
    kind = _require(kv, "geometry.kind")

    def length(key):
        val = _parse_length(key, _require(kv, key), lam)
        if not math.isfinite(val):
            raise ConfigError(key, "non-finite length")
        return val

    def permittivity():
        eps = parse_complex("geometry.epsilon", _require(kv, "geometry.epsilon"))
        if eps.imag < 0:
            raise ConfigError("geometry.epsilon", "non-physical value: Im(eps) < 0")
        return eps

    env: Environment
    if kind in ("free", "mirror", "substrate"):
        for key in ("geometry.radius", "geometry.offset", "geometry.gap"):
            if key in kv:
                raise ConfigError(key, f"not used by geometry {kind!r}")
        if kind == "free":
            env = FreeSpace()
        elif kind == "mirror":
            env = PerfectMirror()
        else:
            env = Substrate(permittivity())
        z1, z2 = length("dimer.z1"), length("dimer.z2")
        if kind != "free" and not (z2 > z1 >= 0):
            raise ConfigError("dimer.z2", "non-physical value: need z2 > z1 >= 0")
        if z1 == z2:
            raise ConfigError("dimer.z2", "non-physical value: emitters coincide")
    elif kind == "sphere":
        for key in ("dimer.z1", "dimer.z2"):
            if key in kv:
                raise ConfigError(key, "sphere geometry places emitters via geometry.offset/gap")
        eps = permittivity()
        radius = length("geometry.radius")
        if radius <= 0:
            raise ConfigError("geometry.radius", "non-physical value: radius must be positive")
        if ("geometry.offset" in kv) == ("geometry.gap" in kv):
            raise ConfigError("geometry.offset", "give exactly one of geometry.offset, geometry.gap")
        if "geometry.gap" in kv:
            offset = radius + length("geometry.gap")
            where = "geometry.gap"
        else:
            offset = length("geometry.offset")
            where = "geometry.offset"
        if offset <= radius:
            raise ConfigError(where, "non-physical value: emitter inside sphere")
        env = Sphere(eps, radius, offset)
        z1, z2 = offset, -offset
    else:
        raise ConfigError("geometry.kind", f"unknown geometry {kind!r}")

    orientation = (0.0, 0.0, 1.0)
    if "dimer.orientation" in kv:
        parts = kv["dimer.orientation"].replace(",", " ").split()
        if len(parts) != 3:
            raise ConfigError("dimer.orientation", "expected three components")
        vec = [parse_float("dimer.orientation", p) for p in parts]
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0:
            raise ConfigError("dimer.orientation", "non-physical value: zero vector")
        orientation = tuple(v / norm for v in vec) if abs(norm - 1.0) > 1e-12 else tuple(vec)
    if kind == "sphere" and orientation[:2] != (0.0, 0.0):
        raise ConfigError("dimer.orientation", "sphere geometry supports vertical dipoles only")
    gamma0 = parse_float("dimer.gamma0", kv["dimer.gamma0"]) if "dimer.gamma0" in kv else 1.0
    if gamma0 <= 0:
        raise ConfigError("dimer.gamma0", "non-physical value: gamma0 must be positive")
    dimer = DimerConfig(z1, z2, orientation, gamma0, 1.0, lam)

    det, det_g12 = 0.0, None
    if "drive.detuning" in kv:
        s = kv["drive.detuning"].replace(" ", "")
        m = re.match(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\*)?([+-]?)g12$", s)
        if m:
            factor = float(m.group(1)[:-1]) if m.group(1) else 1.0
            det_g12 = -factor if m.group(2) == "-" else factor
        else:
            det = parse_float("drive.detuning", s)
    om1 = parse_complex("drive.omega1", kv["drive.omega1"]) if "drive.omega1" in kv else 0j
    om2 = parse_complex("drive.omega2", kv["drive.omega2"]) if "drive.omega2" in kv else 0j
    for key, z in (("drive.omega1", om1), ("drive.omega2", om2)):
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ConfigError(key, "non-finite pump rate")
    drive = DriveConfig(det, om1, om2, det_g12)

    grid0 = default_grid(env)
    tmin = _parse_angle("grid.theta_min", kv["grid.theta_min"]) if "grid.theta_min" in kv else grid0.theta_min
    tmax = _parse_angle("grid.theta_max", kv["grid.theta_max"]) if "grid.theta_max" in kv else grid0.theta_max
    n = grid0.n
    if "grid.n" in kv:
        if not re.match(r"^\d+$", kv["grid.n"]):
            raise ConfigError("grid.n", f"malformed integer {kv['grid.n']!r}")
        n = int(kv["grid.n"])
    try:
        grid = AngularGrid(tmin, tmax, n)
        check_grid(grid, env)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None
    return Config(dimer, env, drive, grid)


def serialize_config(cfg: Config) -> str:
    """Inverse of :func:`parse_config`; lengths written in lambda0 units."""
    dimer, env, drive, grid = cfg
    lines = [f"geometry.kind = {env.kind}"]
    if isinstance(env, (Substrate, Sphere)):
        lines.append(f"geometry.epsilon = {format_complex(env.epsilon)}")
    if isinstance(env, Sphere):
        lines.append(f"geometry.radius = {format_float(env.radius)}")
        lines.append(f"geometry.offset = {format_float(env.offset)}")
    else:
        lines.append(f"dimer.z1 = {format_float(dimer.z1)}")
        lines.append(f"dimer.z2 = {format_float(dimer.z2)}")
    lines.append("dimer.orientation = " + " ".join(format_float(c) for c in dimer.orientation))
    lines.append(f"dimer.gamma0 = {format_float(dimer.gamma0)}")
    if dimer.wavelength_nm is not None:
        lines.append(f"dimer.wavelength = {format_float(dimer.wavelength_nm)} nm")
    if drive.detuning_g12 is not None:
        lines.append(f"drive.detuning = {format_float(drive.detuning_g12)}*g12")
    else:
        lines.append(f"drive.detuning = {format_float(drive.detuning)}")
    lines.append(f"drive.omega1 = {format_complex(drive.omega1)}")
    lines.append(f"drive.omega2 = {format_complex(drive.omega2)}")
    lines.append(f"grid.theta_min = {format_float(grid.theta_min)}")
    lines.append(f"grid.theta_max = {format_float(grid.theta_max)}")
    lines.append(f"grid.n = {grid.n}")
    return "\n".join(lines) + "\n"


def setup_hash(dimer: DimerConfig, env: Environment) -> str:
    """Short stable hash identifying a dimer/environment pair."""
    cfg = Config(dimer, env, DriveConfig(), default_grid(env))
    text = "\n".join(l for l in serialize_config(cfg).splitlines()
                     if l.startswith(("geometry.", "dimer.")))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
