"""Two-photon amplitude Psi, far-field intensity and the zero-delay g2.

Maps are evaluated pointwise from one-dimensional tables of path amplitudes
on the grid nodes, Psi[i, j] = a[i] b[j] + b[i] a[j], which keeps every map
bitwise symmetric and independent of how rows are split across threads.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CorrelatorSet
from .greens import (channel_amplitudes, factorizes, path_amplitudes,
                     polarization_factor, reflection_coefficients, SphereMultipoles)
from .model import (K0, AngularGrid, DimerConfig, Environment, Sphere,
                    format_complex, setup_hash)
from .specialfns import legendre_fl_all

MASK_REL = 1e-14
PAYLOADS = ("psi", "psi2", "g2", "intensity")


# --------------------------------------------------------------------------
# pointwise quantities
# --------------------------------------------------------------------------

def two_photon_amplitude(theta, theta_p, dimer: DimerConfig, env: Environment, l_max: int = 60):
    """Psi(theta, theta') = psi1(theta) psi2(theta') + psi1(theta') psi2(theta)."""
    a1, a2 = path_amplitudes(theta, dimer, env, l_max)
    b1, b2 = path_amplitudes(theta_p, dimer, env, l_max)
    return a1 * b2 + b1 * a2


def psi_polarized(theta, theta_p, dimer: DimerConfig, env: Environment, phi=0.0, phi_p=0.0,
                  orientation2=None, l_max: int = 60):
    """Components Psi[alpha, beta] (alpha, beta in {theta, phi}) for identical dipoles.

    ``orientation2`` may be passed to assert that the second emitter shares
    the first one's orientation; distinguishable emitters are rejected.
    """
    if orientation2 is not None and not np.allclose(orientation2, dimer.orientation, atol=1e-12):
        raise ValueError("emitters with different orientations emit distinguishable photons")
    A = channel_amplitudes(theta, dimer, env, phi, l_max)      # [alpha, i, ...]
    B = channel_amplitudes(theta_p, dimer, env, phi_p, l_max)
    out = np.empty((2, 2) + np.broadcast(A[0, 0], B[0, 0]).shape, dtype=complex)
    for al in range(2):
        for be in range(2):
            out[al, be] = A[al, 0] * B[be, 1] + A[al, 1] * B[be, 0]
    return out


def _path_intensity(p1, p2, corr: CorrelatorSet):
    c = corr.first_order
    s = (np.abs(p1) ** 2 * c[0, 0].real + np.abs(p2) ** 2 * c[1, 1].real
         + 2 * np.real(np.conj(p1) * p2 * c[0, 1]))
    return np.maximum(s, 0.0)


def path_intensity(theta, corr: CorrelatorSet, dimer: DimerConfig, env: Environment, l_max=60):
    """sum_ij psi_i^* psi_j <s_i^dag s_j>, the intensity with U divided out."""
    p1, p2 = path_amplitudes(theta, dimer, env, l_max)
    return _path_intensity(p1, p2, corr)


def _channel_intensity(A, corr: CorrelatorSet):
    return sum(_path_intensity(A[al, 0], A[al, 1], corr) for al in range(2))


def intensity(theta, corr: CorrelatorSet, dimer: DimerConfig, env: Environment, phi=0.0,
              l_max: int = 60):
    """<I(theta)> in units of a unit-population free-space emitter seen at theta = pi/2."""
    return _channel_intensity(channel_amplitudes(theta, dimer, env, phi, l_max), corr)


def g2_eval(theta, theta_p, corr: CorrelatorSet, dimer: DimerConfig, env: Environment,
            method: str = "auto", phi=0.0, phi_p=0.0, l_max: int = 60):
    """Pointwise g2(theta, theta'); NaN where a marginal intensity vanishes.

    ``method="reduced"`` cancels the shared polarisation factor analytically
    (only valid when the field factorises); ``"channels"`` sums over the
    polarisation-resolved amplitudes.
    """
    method = _pick_method(method, dimer, env)
    theta, theta_p = np.broadcast_arrays(np.asarray(theta, float), np.asarray(theta_p, float))
    if method == "reduced":
        num = np.abs(two_photon_amplitude(theta, theta_p, dimer, env, l_max)) ** 2
        d1 = path_intensity(theta, corr, dimer, env, l_max)
        d2 = path_intensity(theta_p, corr, dimer, env, l_max)
    else:
        P = psi_polarized(theta, theta_p, dimer, env, phi, phi_p, l_max=l_max)
        num = np.sum(np.abs(P) ** 2, axis=(0, 1))
        d1 = intensity(theta, corr, dimer, env, phi, l_max)
        d2 = intensity(theta_p, corr, dimer, env, phi_p, l_max)
    den = d1 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        g = num * corr.ee / den
    return np.where(den > 0, g, np.nan)


def _pick_method(method, dimer, env):
    if method == "auto":
        return "reduced" if factorizes(dimer, env) else "channels"
    if method == "reduced" and not factorizes(dimer, env):
        raise ValueError("reduced g2 needs a shared polarisation factor")
    if method not in ("reduced", "channels"):
        raise ValueError(f"unknown g2 method {method!r}")
    return method


# --------------------------------------------------------------------------
# grouped expansions (used as oracles and by the zero classifier)
# --------------------------------------------------------------------------

def substrate_psi_terms(theta, theta_p, z1: float, z2: float, env: Environment):
    """The four grouped terms of Psi for vertical dipoles over a planar surface.

    Returned as an array [direct-direct, direct-image(theta'), image(theta)-direct,
    image-image], each including the global phase exp(i(a + a')/2).  Their
    sum equals :func:`two_photon_amplitude`.
    """
    rp, _ = reflection_coefficients(env, theta)
    rpp, _ = reflection_coefficients(env, theta_p)
    m, a = np.abs(rp), np.angle(rp)
    mp, ap = np.abs(rpp), np.angle(rpp)
    c, cp = np.cos(theta), np.cos(theta_p)
    x1, x1p = K0 * z1 * c + a / 2, K0 * z1 * cp + ap / 2
    x2, x2p = K0 * z2 * c + a / 2, K0 * z2 * cp + ap / 2
    e = np.exp
    glob = e(1j * (a + ap) / 2)
    t1 = e(-1j * x1) * e(-1j * x2p) + e(-1j * x1p) * e(-1j * x2)
    t2 = mp * (e(-1j * x1) * e(1j * x2p) + e(1j * x1p) * e(-1j * x2))
    t3 = m * (e(1j * x1) * e(-1j * x2p) + e(-1j * x1p) * e(1j * x2))
    t4 = m * mp * (e(1j * x1) * e(1j * x2p) + e(1j * x1p) * e(1j * x2))
    return np.array([glob * t1, glob * t2, glob * t3, glob * t4])


def sphere_psi_terms(theta, theta_p, mp: SphereMultipoles):
    """Direct, two mixed and multipole-multipole parts of the sphere Psi."""
    c, cp = np.cos(theta), np.cos(theta_p)
    kb = mp.k0b
    L = len(mp.c)
    f = legendre_fl_all(L, c)
    fp = legendre_fl_all(L, cp)
    e = np.exp
    t1 = e(-1j * kb * c) * e(1j * kb * cp) + e(-1j * kb * cp) * e(1j * kb * c)
    t2 = np.tensordot(mp.c_tilde, fp, 1) * e(-1j * kb * c) + np.tensordot(mp.c, fp, 1) * e(1j * kb * c)
    t3 = np.tensordot(mp.c_tilde, f, 1) * e(-1j * kb * cp) + np.tensordot(mp.c, f, 1) * e(1j * kb * cp)
    sc, sct = np.tensordot(mp.c, f, 1), np.tensordot(mp.c_tilde, f, 1)
    scp, sctp = np.tensordot(mp.c, fp, 1), np.tensordot(mp.c_tilde, fp, 1)
    t4 = sc * sctp + scp * sct
    return np.array([t1, t2, t3, t4])


def mirror_reduced(theta, theta_p, z1: float, z2: float):
    """cos(k z1 c) cos(k z2 c') + cos(k z1 c') cos(k z2 c); Psi = 4x this over a mirror."""
    c, cp = np.cos(theta), np.cos(theta_p)
    return (np.cos(K0 * z1 * c) * np.cos(K0 * z2 * cp)
            + np.cos(K0 * z1 * cp) * np.cos(K0 * z2 * c))


# --------------------------------------------------------------------------
# dense maps
# --------------------------------------------------------------------------

@dataclass
class AngularMap:
    grid: AngularGrid
    payload: str
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def nodes(self):
        return self.grid.nodes()


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("DIMERCORR_THREADS", "1") or 1)
    return max(1, int(threads))


def _rowwise(fn, n, threads):
    """Evaluate fn(rows) over contiguous row blocks and stack the results."""
    if threads == 1 or n < 2 * threads:
        return fn(slice(0, n))
    edges = np.linspace(0, n, threads + 1).astype(int)
    blocks = [slice(edges[k], edges[k + 1]) for k in range(threads)]
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(fn, blocks))
    return np.concatenate(parts, axis=0)


def _mirror_upper(vals):
    """Copy the upper triangle onto the lower one so the (theta <-> theta') swap is exact.

    Vectorised complex products need not commute bitwise, so the two
    triangles can otherwise differ in the last bit.
    """
    iu = np.triu_indices(vals.shape[0], 1)
    out = vals.copy()
    out[iu[1], iu[0]] = vals[iu]
    return out


def map_sweep(grid: AngularGrid, payload: str, dimer: DimerConfig, env: Environment,
              corr: CorrelatorSet | None = None, threads: int | None = None,
              l_max: int = 60, phi: float = 0.0, method: str = "auto") -> AngularMap:
    """Dense evaluation of ``payload`` on the grid nodes.

    ``psi`` and ``psi2`` are (n, n) maps, ``g2`` an (n, n) map with NaN at
    masked points, ``intensity`` a length-n profile in single-emitter units.
    """
    if payload not in PAYLOADS:
        raise ValueError(f"payload must be one of {PAYLOADS}")
    if payload in ("g2", "intensity") and corr is None:
        raise ValueError(f"payload {payload!r} needs correlators")
    threads = resolve_threads(threads)
    th = grid.nodes()
    n = len(th)
    meta = {"payload": payload, "environment": type(env).__name__,
            "setup_hash": setup_hash(dimer, env), "phi": phi}
    channels = not factorizes(dimer, env) or (payload != "psi" and method == "channels")

    if payload == "intensity":
        vals = intensity(th, corr, dimer, env, phi, l_max)
        return AngularMap(grid, payload, vals, meta)

    if not channels:
        p1, p2 = path_amplitudes(th, dimer, env, l_max)

        def psi_rows(sl):
            return p1[sl, None] * p2[None, :] + p2[sl, None] * p1[None, :]

        if payload == "psi":
            vals = _mirror_upper(_rowwise(psi_rows, n, threads))
            return AngularMap(grid, payload, vals, meta)

        def psi2_rows(sl):
            return np.abs(psi_rows(sl)) ** 2

        num = _mirror_upper(_rowwise(psi2_rows, n, threads))
        if payload == "psi2":
            return AngularMap(grid, payload, num, meta)
        den = _path_intensity(p1, p2, corr)
        meta["method"] = "reduced"
    else:
        if payload == "psi":
            raise ValueError("scalar Psi is undefined when the field does not factorise; "
                             "use payload 'psi2'")
        A = channel_amplitudes(th, dimer, env, phi, l_max)

        def psi2_rows(sl):
            comp = [[A[al, 0][sl, None] * A[be, 1][None, :] + A[al, 1][sl, None] * A[be, 0][None, :]
                     for be in range(2)] for al in range(2)]
            sq = [[np.abs(comp[al][be]) ** 2 for be in range(2)] for al in range(2)]
            return (sq[0][0] + sq[1][1]) + (sq[0][1] + sq[1][0])

        num = _mirror_upper(_rowwise(psi2_rows, n, threads))
        if payload == "psi2":
            return AngularMap(grid, payload, num, meta)
        den = _channel_intensity(A, corr)
        meta["method"] = "channels"

    ok = den > MASK_REL * den.max()
    dd = np.where(ok, den, 1.0)
    g = num * corr.ee / (dd[:, None] * dd[None, :])
    g = np.where(ok[:, None] & ok[None, :], g, np.nan)
    meta["masked_nodes"] = int((~ok).sum())
    return AngularMap(grid, payload, g, meta)


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if np.iscomplexobj(v):
        return format_complex(complex(v))
    return repr(float(v))


def map_csv_text(amap: AngularMap) -> str:
    """Rows are theta, columns theta'; header holds theta' in radians to 9 decimals."""
    th = amap.nodes
    vals = amap.values
    lines = []
    if vals.ndim == 1:
        lines.append("theta," + amap.payload)
        lines.extend(f"{t:.9f},{_fmt(v)}" for t, v in zip(th, vals))
    else:
        lines.append("theta\\theta_p," + ",".join(f"{t:.9f}" for t in th))
        for t, row in zip(th, vals):
            lines.append(f"{t:.9f}," + ",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_map_csv(amap: AngularMap, path) -> None:
    with open(path, "w") as fh:
        fh.write(map_csv_text(amap))


def map_sidecar(amap: AngularMap, extra: dict | None = None) -> dict:
    g = amap.grid
    out = {"grid": {"theta_min": g.theta_min, "theta_max": g.theta_max, "n": g.n},
           **amap.meta}
    if extra:
        out.update(extra)
    return out


def write_map_json(amap: AngularMap, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(json_text(map_sidecar(amap, extra)))


def json_text(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
