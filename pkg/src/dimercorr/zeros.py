"""Geometric zeros of Psi: loci, minima masks, permittivity-independent and quenching zeros."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize
from skimage import measure

from .correlation import mirror_reduced, substrate_psi_terms, two_photon_amplitude
from .greens import path_amplitudes
from .model import (K0, AngularGrid, DimerConfig, Environment, FreeSpace, PerfectMirror,
                    Sphere, Substrate, default_grid)

TAGS = ("interference", "trivial-quenching", "eps-independent")
NOT_ADMITTED = "not-admitted"
DEFAULT_THRESHOLD = 1e-2
CHECK_ENVIRONMENTS = (PerfectMirror(), Substrate(2.13), Substrate(-5 + 0.1j))


@dataclass
class ZeroFeature:
    tag: str
    vertices: np.ndarray          # (k, 2) radians, columns theta, theta'
    residuals: np.ndarray         # |Psi|^2 per vertex
    symmetry: str = "none"        # "self", "partner-stored" or "none"
    predictability: float = 0.0   # max amplitude-matching defect

    @property
    def is_point(self) -> bool:
        return len(self.vertices) == 1


@dataclass
class ZeroLocus:
    features: list[ZeroFeature] = field(default_factory=list)
    tolerance: float = 1e-20

    @property
    def branches(self) -> list[ZeroFeature]:
        return [f for f in self.features if f.tag == "interference" and not f.is_point]

    @property
    def branch_count(self) -> int:
        """Interference polylines in the full square, symmetric partners counted separately."""
        return sum(2 if f.symmetry == "partner-stored" else 1 for f in self.branches)

    def points(self, tag: str | None = None, include_partners: bool = True) -> np.ndarray:
        out = []
        for f in self.features:
            if f.is_point and (tag is None or f.tag == tag):
                out.append(f.vertices[0])
                if include_partners and f.symmetry == "partner-stored":
                    out.append(f.vertices[0][::-1])
        return np.array(out).reshape(-1, 2)

    def all_vertices(self, include_partners: bool = True) -> np.ndarray:
        parts = []
        for f in self.features:
            parts.append(f.vertices)
            if include_partners and f.symmetry == "partner-stored":
                parts.append(f.vertices[:, ::-1])
        return np.concatenate(parts) if parts else np.zeros((0, 2))

    def to_json(self) -> dict:
        feats = []
        for f in self.features:
            feats.append({"tag": f.tag, "symmetry": f.symmetry,
                          "vertices": f.vertices.tolist(),
                          "residuals": f.residuals.tolist(),
                          "predictability_defect": f.predictability})
        return {"type": "ZeroLocus", "tolerance": self.tolerance,
                "branch_count": self.branch_count, "features": feats}


def write_locus_json(locus: ZeroLocus, path, extra: dict | None = None) -> None:
    doc = locus.to_json()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# real reductions
# --------------------------------------------------------------------------

def free_reduced(z12: float):
    """F with Psi = 2 exp(i phase) F for an axial free-space dimer."""
    def F(t, tp):
        return np.cos(0.5 * K0 * z12 * (np.cos(t) - np.cos(tp)))
    return F


def real_reduction(dimer: DimerConfig, env: Environment):
    """A real function sharing its zeros with Psi, or None when Psi is genuinely complex."""
    if isinstance(env, FreeSpace):
        return free_reduced(dimer.z12)
    if isinstance(env, PerfectMirror) and dimer.is_vertical:
        return lambda t, tp: mirror_reduced(t, tp, dimer.z1, dimer.z2)
    return None


def _refine_vertex(F, grid, th, r, c):
    """Move a marching-squares vertex onto the exact zero along its grid edge."""
    ri, ci = round(r), round(c)
    if abs(r - ri) < 1e-9:
        fixed, lo, hi = th[ri], int(math.floor(c)), int(math.ceil(c))
        g = lambda x: float(F(fixed, x))
        along_col = True
    else:
        fixed, lo, hi = th[ci], int(math.floor(r)), int(math.ceil(r))
        g = lambda x: float(F(x, fixed))
        along_col = False
    if lo == hi:
        x = th[lo]
    else:
        a, b = th[lo], th[hi]
        ga, gb = g(a), g(b)
        if ga == 0:
            x = a
        elif gb == 0:
            x = b
        elif ga * gb > 0:
            x = a + (b - a) * (c - lo if along_col else r - lo)
        else:
            x = optimize.brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return (fixed, x) if along_col else (x, fixed)


def _orient(v):
    return v if tuple(v[0]) <= tuple(v[-1]) else v[::-1]


def _pair_up(polys, tol=1e-7):
    """Symmetry flags; returns indices kept and their flags."""
    n = len(polys)
    flags = ["none"] * n
    drop = set()

    def close(a, b):
        if abs(len(a) - len(b)) > 2:
            return False
        d = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2).min(axis=1)
        return d.max() < tol

    for i in range(n):
        if i in drop:
            continue
        sw = polys[i][:, ::-1]
        if close(sw, polys[i]):
            flags[i] = "self"
            continue
        for j in range(i + 1, n):
            if j not in drop and close(sw, polys[j]):
                flags[i] = "partner-stored"
                drop.add(j)
                break
    return [(i, flags[i]) for i in range(n) if i not in drop]


def locus_from_real_field(F, grid: AngularGrid, psi_fn=None, amps_fn=None,
                          node_tol: float = 1e-12) -> ZeroLocus:
    """Zero set of a real symmetric field F(theta, theta') on the grid square.

    Sign changes are traced by marching squares and every vertex is moved
    onto the zero with Brent's method along its grid edge.  Zeros where F
    touches zero without changing sign are picked up at grid nodes.
    """
    th = grid.nodes()
    vals = F(th[:, None], th[None, :])
    scale = float(np.abs(vals).max()) or 1.0
    polys = []
    for cont in measure.find_contours(vals, 0.0):
        verts = np.array([_refine_vertex(F, grid, th, r, c) for r, c in cont])
        keep = np.ones(len(verts), bool)
        keep[1:] = np.any(np.abs(np.diff(verts, axis=0)) > 1e-13, axis=1)
        polys.append(_orient(verts[keep]))
    # touching zeros at nodes
    near = np.abs(vals) <= node_tol * scale
    allv = np.concatenate(polys) if polys else np.zeros((0, 2))
    step = (grid.theta_max - grid.theta_min) / (grid.n - 1)
    for r, c in zip(*np.nonzero(near)):
        p = np.array([[th[r], th[c]]])
        if len(allv) and np.abs(allv - p).max(axis=1).min() < 1.5 * step:
            continue
        polys.append(p)
    polys.sort(key=lambda v: (tuple(v[0]), len(v)))
    return _features(polys, psi_fn, amps_fn)


def _features(polys, psi_fn, amps_fn, tag="interference"):
    feats = []
    for i, flag in _pair_up(polys):
        v = polys[i]
        res = (np.abs(psi_fn(v[:, 0], v[:, 1])) ** 2 if psi_fn is not None
               else np.zeros(len(v)))
        pred = predictability_defect(amps_fn, v) if amps_fn is not None else 0.0
        t = tag
        if len(v) == 1 and amps_fn is not None and _quenched(amps_fn, v[0]):
            t = "trivial-quenching"
        feats.append(ZeroFeature(t, v, np.asarray(res, float), flag, pred))
    return ZeroLocus(feats)


def _quenched(amps_fn, pt, tol=1e-10) -> bool:
    """True when some emitter amplitude vanishes along one of the two directions."""
    return any(np.min(np.abs(np.asarray(amps_fn(np.array([x]))))) < tol for x in pt)


def predictability_defect(amps_fn, verts) -> float:
    """max | |psi1(t) psi2(t')| - |psi1(t') psi2(t)| | over vertices."""
    a1, a2 = amps_fn(verts[:, 0])
    b1, b2 = amps_fn(verts[:, 1])
    return float(np.max(np.abs(np.abs(a1 * b2) - np.abs(b1 * a2)), initial=0.0))


# --------------------------------------------------------------------------
# complex fields
# --------------------------------------------------------------------------

def locus_from_complex_field(psi_fn, grid: AngularGrid, amps_fn=None,
                             seed_threshold: float = DEFAULT_THRESHOLD,
                             accept: float = 1e-10) -> ZeroLocus:
    """Isolated zeros of a complex Psi: grid minima polished by a 2-D root solve."""
    th = grid.nodes()
    p2 = np.abs(psi_fn(th[:, None], th[None, :])) ** 2
    local = p2 == ndimage.minimum_filter(p2, size=3, mode="nearest")
    seeds = np.argwhere(local & (p2 < seed_threshold))
    lo, hi = grid.theta_min, grid.theta_max
    pts = []
    for r, c in seeds:
        if r > c:
            continue          # partner recovered by symmetry
        def fun(x):
            v = complex(psi_fn(x[0], x[1]))
            return [v.real, v.imag]
        sol = optimize.root(fun, [th[r], th[c]], method="hybr", options={"xtol": 1e-15})
        x = sol.x
        if not (lo - 1e-12 <= x[0] <= hi + 1e-12 and lo - 1e-12 <= x[1] <= hi + 1e-12):
            continue
        if abs(complex(psi_fn(x[0], x[1]))) > accept:
            continue
        x = np.clip(x, lo, hi)
        x = x if x[0] <= x[1] else x[::-1]
        if any(np.abs(x - q).max() < 1e-7 for q in pts):
            continue
        pts.append(x)
    polys = []
    for x in sorted(pts, key=tuple):
        polys.append(x[None, :])
        if abs(x[0] - x[1]) > 1e-12:
            polys.append(x[::-1][None, :])
    polys.sort(key=lambda v: tuple(v[0]))
    return _features(polys, psi_fn, amps_fn)


def zero_locus(dimer: DimerConfig, env: Environment, grid: AngularGrid | None = None,
               l_max: int = 60, tag_special: bool = True) -> ZeroLocus:
    """Zero locus of Psi for a configured dimer."""
    grid = grid or default_grid(env)
    psi_fn = lambda t, tp: two_photon_amplitude(t, tp, dimer, env, l_max)
    amps_fn = lambda t: path_amplitudes(t, dimer, env, l_max)
    F = real_reduction(dimer, env)
    if F is not None:
        locus = locus_from_real_field(F, grid, psi_fn, amps_fn)
    else:
        locus = locus_from_complex_field(psi_fn, grid, amps_fn)
    if tag_special and isinstance(env, (PerfectMirror, Substrate)) and dimer.is_vertical:
        _tag_special(locus, dimer, env, grid, psi_fn, amps_fn)
    return locus


def _tag_special(locus, dimer, env, grid, psi_fn, amps_fn):
    lo, hi = grid.theta_min, grid.theta_max
    res = eps_independent_zeros(dimer.z12, dimer.z1)
    special = []
    for t, tp in res.points:
        if lo <= t <= hi and lo <= tp <= hi:
            special.append(("eps-independent", np.array([[t, tp]])))
    if isinstance(env, PerfectMirror):
        for t, _, _ in trivial_zeros(dimer, env):
            if lo <= t <= hi:
                special.append(("trivial-quenching", np.array([[t, t]])))
    for tag, v in special:
        locus.features = [f for f in locus.features
                          if not (f.is_point and np.abs(f.vertices - v).max() < 1e-7)]
        r = np.abs(psi_fn(v[:, 0], v[:, 1])) ** 2
        locus.features.append(ZeroFeature(tag, v, np.asarray(r, float), "none",
                                          predictability_defect(amps_fn, v)))
    locus.features.sort(key=lambda f: (tuple(f.vertices[0]), f.tag))


# --------------------------------------------------------------------------
# analytic zero families
# --------------------------------------------------------------------------

@dataclass
class EpsIndependentZeros:
    """Candidates from the integer rule and the subset surviving the term-by-term check."""

    z12: float
    candidates: list = field(default_factory=list)   # (n, m, theta, theta', max term, survives)
    admitted: bool = True

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(t, tp) for n, m, t, tp, r, ok in self.candidates if ok]

    @property
    def rejected(self) -> list[tuple[int, int]]:
        return [(n, m) for n, m, t, tp, r, ok in self.candidates if not ok]


def eps_independent_zeros(z12: float, z1: float = 0.0, env: Environment | None = None,
                          tol: float = 1e-12):
    """Angle pairs with cos(theta) = n/(2 z12), cos(theta') = m/(2 z12).

    Every pair with 0 < n, m < 2 z12 and n != m is enumerated; a pair
    survives when each grouped term of the planar Psi vanishes on its own
    (below ``tol``) for a perfect mirror, a dielectric and a lossy metal.
    Returns :data:`NOT_ADMITTED` for a sphere.
    """
    if isinstance(env, Sphere):
        return NOT_ADMITTED
    if not z12 > 0:
        raise ValueError("z12 must be positive")
    out = EpsIndependentZeros(z12)
    top = 2 * z12
    nmax = math.ceil(top) - 1
    for n in range(1, nmax + 1):
        for m in range(1, nmax + 1):
            if n == m or not (n < top and m < top):
                continue
            t, tp = math.acos(n / top), math.acos(m / top)
            worst = max(float(np.abs(substrate_psi_terms(t, tp, z1, z1 + z12, e)).max())
                        for e in CHECK_ENVIRONMENTS)
            out.candidates.append((n, m, t, tp, worst, worst < tol))
    return out


def trivial_zeros(dimer: DimerConfig, env: Environment | None = None):
    """Diagonal quenching zeros (theta, emitter index, n) where cos(k0 z_i cos theta) = 0."""
    if env is not None and not isinstance(env, PerfectMirror):
        raise ValueError("quenching zeros are defined for the perfect mirror")
    if not dimer.is_vertical:
        raise ValueError("quenching zeros need vertical dipoles")
    out = []
    for idx, z in ((1, dimer.z1), (2, dimer.z2)):
        n = 0
        while z > 0 and (2 * n + 1) / (4 * z) <= 1.0:
            out.append((math.acos((2 * n + 1) / (4 * z)), idx, n))
            n += 1
    out.sort()
    return out


# --------------------------------------------------------------------------
# minima masks
# --------------------------------------------------------------------------

_EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class MinimaMask:
    mask: np.ndarray
    threshold: float
    labels: np.ndarray
    n_components: int
    relative: bool = False

    @property
    def area_fraction(self) -> float:
        return float(self.mask.mean())

    def component_of(self, grid: AngularGrid, theta: float, theta_p: float) -> int:
        """Label (0 = outside) of the node nearest to (theta, theta')."""
        th = grid.nodes()
        return int(self.labels[np.abs(th - theta).argmin(), np.abs(th - theta_p).argmin()])


def minima_map(field_psi2: np.ndarray, threshold: float = DEFAULT_THRESHOLD,
               relative: bool = False) -> MinimaMask:
    """Sub-threshold mask of |Psi|^2 with 8-connected components.

    ``relative`` scales the threshold by the field maximum.
    """
    f = np.asarray(field_psi2, float)
    if np.any(f < 0):
        raise ValueError("|Psi|^2 field must be nonnegative")
    thr = threshold * f.max() if relative else threshold
    mask = f < thr
    labels, n = ndimage.label(mask, structure=_EIGHT)
    return MinimaMask(mask, float(threshold), labels, int(n), relative)


def symmetric_difference_area(a: MinimaMask, b: MinimaMask) -> float:
    return float(np.mean(a.mask ^ b.mask))


def mask_csv_text(mm: MinimaMask) -> str:
    return "".join(",".join("1" if v else "0" for v in row) + "\n" for row in mm.mask)


def write_mask_csv(mm: MinimaMask, path) -> None:
    with open(path, "w") as fh:
        fh.write(mask_csv_text(mm))
