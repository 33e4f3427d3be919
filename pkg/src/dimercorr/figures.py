"""Figure pipelines: preset loading, computation and deterministic artifact bundles."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, svg
from .correlation import (g2_eval, intensity, json_text, map_csv_text, map_sidecar,
                          map_sweep)
from .couplings import couplings_for
from .dynamics import (build_generator, check_density_matrix, correlators, steady_state,
                       tomography_csv_text, tomography_export)
from .greens import multipoles_for
from .model import (AngularGrid, Config, ConfigError, DimerConfig, DriveConfig, FreeSpace,
                    PerfectMirror, Sphere, Substrate, format_complex, parse_complex,
                    parse_config, parse_float, read_keyvalues, serialize_config)
from .zeros import (eps_independent_zeros, mask_csv_text, minima_map,
                    symmetric_difference_area, trivial_zeros, zero_locus)

FIGURES = ("fig1b", "fig2", "fig3a", "fig3b", "fig4b", "fig4c", "fig4d", "sm2")
FORMATS = ("csv", "json", "svg")
SPHERE_INTERSECTION_THRESHOLD = 1e-6


@dataclass
class FigureOptions:
    grid_n: int | None = None
    threshold: float | None = None
    l_max: int = 60
    threads: int | None = None
    formats: tuple = FORMATS
    state: str | None = None
    panel: str | None = None
    config_text: str | None = None


@dataclass
class Bundle:
    formats: tuple
    files: dict = field(default_factory=dict)

    def add(self, name: str, text: str) -> None:
        if name.rsplit(".", 1)[-1] in self.formats:
            self.files[name] = text


@dataclass
class RunManifest:
    command: str
    config: str
    files: list
    wall_time_s: float
    version: str = __version__

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def preset_text(name: str) -> str:
    if name not in FIGURES:
        raise ConfigError("figure", f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    return resources.files("dimercorr").joinpath("presets", f"{name}.cfg").read_text()


def merged_config(name: str, opts: FigureOptions) -> tuple[Config, dict, str]:
    """Preset overlaid with the user configuration and command-line overrides."""
    kv = read_keyvalues(preset_text(name))
    if opts.config_text:
        user = read_keyvalues(opts.config_text)
        if "geometry.kind" in user and user["geometry.kind"] != kv.get("geometry.kind"):
            # geometry switch: drop preset geometry/dimer keys that may not apply
            kv = {k: v for k, v in kv.items() if not k.startswith(("geometry.", "dimer."))}
        kv.update(user)
    if opts.grid_n is not None:
        kv["grid.n"] = str(int(opts.grid_n))
    text = "".join(f"{k} = {v}\n" for k, v in kv.items())
    cfg = parse_config(text)
    fig = {k[len("figure."):]: v for k, v in kv.items() if k.startswith("figure.")}
    return cfg, fig, text


def _list(fig: dict, key: str, parse=float) -> list:
    if key not in fig:
        raise ConfigError(f"figure.{key}", "missing key")
    return [parse(f"figure.{key}", s.strip()) if parse in (parse_float, parse_complex)
            else parse(s.strip()) for s in fig[key].split(",")]


def _threshold(fig: dict, opts: FigureOptions) -> float:
    if opts.threshold is not None:
        return float(opts.threshold)
    return parse_float("figure.threshold", fig.get("threshold", "1e-2"))


def _tag(x) -> str:
    if isinstance(x, complex) and x.imag == 0:
        x = x.real
    if isinstance(x, complex):
        return format_complex(x).replace("+", "p").replace("-", "m").replace(".", "_")
    return f"{x:g}".replace("-", "m").replace(".", "_")


# --------------------------------------------------------------------------
# shared rendering helpers
# --------------------------------------------------------------------------

def _locus_csv(locus) -> str:
    lines = ["feature,tag,theta,theta_p,psi2"]
    for k, f in enumerate(locus.features):
        for (t, tp), r in zip(f.vertices, f.residuals):
            lines.append(f"{k},{f.tag},{t!r},{tp!r},{float(r)!r}")
        if f.symmetry == "partner-stored":
            for (t, tp), r in zip(f.vertices, f.residuals):
                lines.append(f"{k}p,{f.tag},{tp!r},{t!r},{float(r)!r}")
    return "\n".join(lines) + "\n"


def _draw_locus(fr, locus, color, dash=None):
    for f in locus.features:
        variants = [f.vertices]
        if f.symmetry == "partner-stored":
            variants.append(f.vertices[:, ::-1])
        for v in variants:
            if f.is_point:
                if f.tag == "eps-independent":
                    fr.points(v[:, 1], v[:, 0], "red")
                elif f.tag == "trivial-quenching":
                    fr.points(v[:, 1], v[:, 0], "black", hollow=True)
                else:
                    fr.points(v[:, 1], v[:, 0], color, r=2.5)
            else:
                fr.polyline(v[:, 1], v[:, 0], color, dash=dash)


def _parse_drive(key: str, spec: str) -> DriveConfig:
    parts = spec.split()
    if len(parts) != 3:
        raise ConfigError(key, "expected '<detuning> <omega1> <omega2>'")
    det = parts[0]
    om1, om2 = parse_complex(key, parts[1]), parse_complex(key, parts[2])
    if det in ("g12", "+g12"):
        return DriveConfig(0.0, om1, om2, 1.0)
    if det == "-g12":
        return DriveConfig(0.0, om1, om2, -1.0)
    return DriveConfig(parse_float(key, det), om1, om2)


def _require_couplings(env, what):
    if isinstance(env, Substrate):
        raise ConfigError("geometry.kind", f"{what} needs emitter couplings, which are not "
                          "available for a finite-permittivity substrate; only |Psi|^2 minima "
                          "maps (fig3b) can be produced for this geometry")


def _steady(dimer, env, drive, l_max):
    cs = couplings_for(dimer, env, l_max)
    rho = steady_state(build_generator(cs, drive))
    return cs, rho, correlators(rho)


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

def fig1b(cfg, fig, opts, out: Bundle):
    env = cfg.environment
    if not isinstance(env, FreeSpace):
        raise ConfigError("geometry.kind", "fig1b is defined for free space")
    grid = cfg.grid
    canvas, fr = svg.square_plot((grid.theta_min, grid.theta_max), "zero loci, free space")
    names = []
    for z12, col in zip(_list(fig, "z12", parse_float), svg.PALETTE):
        dimer = DimerConfig(0.0, z12, cfg.dimer.orientation)
        locus = zero_locus(dimer, env, grid, opts.l_max)
        stem = f"fig1b_z12_{_tag(z12)}"
        out.add(stem + ".json", json_text({**locus.to_json(), "z12": z12}))
        out.add(stem + ".csv", _locus_csv(locus))
        _draw_locus(fr, locus, col)
        names.append(f"z12 = {z12:g}")
    fr.legend(names, svg.PALETTE)
    out.add("fig1b_overlay.svg", canvas.render())


def fig2(cfg, fig, opts, out: Bundle):
    env, dimer, grid = cfg.environment, cfg.dimer, cfg.grid
    _require_couplings(env, "a g2 map")
    states = {k.split(".", 1)[1]: v for k, v in fig.items() if k.startswith("state.")}
    if opts.state is not None:
        if opts.state not in states:
            raise ConfigError("--state", f"unknown state {opts.state!r}; choose from {sorted(states)}")
        states = {opts.state: states[opts.state]}
    locus = zero_locus(dimer, env, grid, opts.l_max) if isinstance(env, (FreeSpace, PerfectMirror)) else None
    for name, spec in states.items():
        drive = _parse_drive(f"figure.state.{name}", spec)
        cs, rho, corr = _steady(dimer, env, drive, opts.l_max)
        gmap = map_sweep(grid, "g2", dimer, env, corr, opts.threads, opts.l_max)
        prof = map_sweep(grid, "intensity", dimer, env, corr, opts.threads, opts.l_max)
        stem = f"fig2_{name}"
        extra = {"state": name, "couplings": dataclasses.asdict(cs),
                 "drive": {"detuning": drive.resolved(cs.g12).detuning,
                           "omega1": format_complex(drive.omega1),
                           "omega2": format_complex(drive.omega2)},
                 "rho_ee": corr.ee, "density_matrix_check": check_density_matrix(rho)}
        out.add(stem + "_g2.csv", map_csv_text(gmap))
        out.add(stem + "_g2.json", json_text(map_sidecar(gmap, extra)))
        out.add(stem + "_intensity.csv", map_csv_text(prof))
        out.add(stem + "_tomography.csv", tomography_csv_text(rho))
        out.add(stem + "_tomography.json", json_text(tomography_export(rho)))
        canvas, fr = svg.heatmap(gmap.values, (grid.theta_min, grid.theta_max),
                                 f"log10 g2, {name} drive", log=True, vmin=-2.0, vmax=1.0)
        if locus is not None:
            _draw_locus(fr, locus, "#00cc44", dash="5,3")
        out.add(stem + "_g2.svg", canvas.render())
        out.add(stem + "_intensity.svg", svg.line_plot(
            np.degrees(grid.nodes()), {"I / I_sd": prof.values}, f"intensity, {name} drive",
            "theta (deg)", "I / I_sd"))


def fig3a(cfg, fig, opts, out: Bundle):
    env, grid = cfg.environment, cfg.grid
    if not isinstance(env, PerfectMirror):
        raise ConfigError("geometry.kind", "fig3a is defined for the perfect mirror")
    for z2 in _list(fig, "z2", parse_float):
        dimer = DimerConfig(cfg.dimer.z1, z2)
        locus = zero_locus(dimer, env, grid, opts.l_max)
        stem = f"fig3a_z2_{_tag(z2)}"
        eps_pts = eps_independent_zeros(dimer.z12, dimer.z1)
        extra = {"z1": dimer.z1, "z2": z2,
                 "trivial_zeros": [{"theta": t, "emitter": i, "n": n}
                                   for t, i, n in trivial_zeros(dimer, env)],
                 "eps_independent_candidates": [
                     {"n": n, "m": m, "theta": t, "theta_p": tp, "max_term": r, "survives": ok}
                     for n, m, t, tp, r, ok in eps_pts.candidates]}
        out.add(stem + ".json", json_text({**locus.to_json(), **extra}))
        out.add(stem + ".csv", _locus_csv(locus))
        canvas, fr = svg.square_plot((grid.theta_min, grid.theta_max),
                                     f"zeros above a mirror, z2 = {z2:g}")
        _draw_locus(fr, locus, "#1f4e9c")
        out.add(stem + ".svg", canvas.render())


def _mask_figure(stem, title, dimer_env_list, fig, opts, out, grid, free_locus=None,
                 intersection=False):
    thr = _threshold(fig, opts)
    canvas, fr = svg.square_plot((grid.theta_min, grid.theta_max), title)
    summary, masks, labels = [], {}, []
    for (label, dimer, env), col in zip(dimer_env_list, svg.PALETTE):
        amap = map_sweep(grid, "psi2", dimer, env, None, opts.threads, opts.l_max)
        mm = minima_map(amap.values, thr)
        masks[label] = (mm, amap)
        out.add(f"{stem}_eps_{label}_mask.csv", mask_csv_text(mm))
        row = {"epsilon": label, "components": mm.n_components, "area_fraction": mm.area_fraction}
        if isinstance(env, Substrate):
            pts = eps_independent_zeros(dimer.z12, dimer.z1).points
            row["components_at_eps_independent_points"] = [mm.component_of(grid, t, tp) for t, tp in pts]
        summary.append(row)
        svg.mask_overlay(fr, mm.mask, (grid.theta_min, grid.theta_max), col)
        labels.append(f"eps = {label}")
    if free_locus is not None:
        _draw_locus(fr, free_locus, "#e6c700")
    if dimer_env_list and isinstance(dimer_env_list[0][2], Substrate):
        d = dimer_env_list[0][1]
        pts = np.array(eps_independent_zeros(d.z12, d.z1).points).reshape(-1, 2)
        if len(pts):
            fr.points(pts[:, 1], pts[:, 0], "red")
    fr.legend(labels, svg.PALETTE)
    doc = {"threshold": thr, "grid": dataclasses.asdict(grid), "maps": summary}
    if intersection:
        finite = [k for k, (mm, a) in masks.items() if k != _tag(1.0)]
        inter = np.ones((grid.n, grid.n), bool)
        for k in finite:
            inter &= minima_map(masks[k][1].values, SPHERE_INTERSECTION_THRESHOLD).mask
        doc["intersection_threshold"] = SPHERE_INTERSECTION_THRESHOLD
        doc["intersection_nodes"] = int(inter.sum())
        if _tag(1.0) in masks:
            ref = masks[_tag(1.0)][0]
            doc["symmetric_difference_vs_free"] = {
                k: symmetric_difference_area(masks[k][0], ref) for k in finite}
    out.add(stem + "_summary.json", json_text(doc))
    out.add(stem + ".svg", canvas.render())


def fig3b(cfg, fig, opts, out: Bundle):
    dimer = cfg.dimer
    if not isinstance(cfg.environment, (Substrate, PerfectMirror)):
        raise ConfigError("geometry.kind", "fig3b is defined for planar substrates")
    grid = cfg.grid
    items = [(_tag(e), dimer, Substrate(e)) for e in _list(fig, "epsilon", parse_complex)]
    _mask_figure("fig3b", "|Psi|^2 minima over substrates", items, fig, opts, out, grid)


def _sphere_env(cfg) -> Sphere:
    env = cfg.environment
    if not isinstance(env, Sphere):
        raise ConfigError("geometry.kind", "this figure is defined for the sphere geometry")
    return env


def _sphere_items(env, eps_list, offset=None):
    b = env.offset if offset is None else offset
    out = []
    for e in eps_list:
        s = Sphere(e, env.radius, b)
        out.append((_tag(e), DimerConfig(b, -b), s))
    return out


def fig4b(cfg, fig, opts, out: Bundle):
    env, grid = _sphere_env(cfg), cfg.grid
    th = grid.nodes()
    g2s, ints, doc = {}, {}, []
    for label, dimer, s in _sphere_items(env, _list(fig, "epsilon", parse_complex)):
        cs, rho, corr = _steady(dimer, s, cfg.drive, opts.l_max)
        g2s[label] = g2_eval(th, th, corr, dimer, s, l_max=opts.l_max)
        ints[label] = intensity(th, corr, dimer, s, l_max=opts.l_max)
        doc.append({"epsilon": label, "couplings": dataclasses.asdict(cs), "rho_ee": corr.ee,
                    "density_matrix_check": check_density_matrix(rho)})
    lines = ["theta," + ",".join(f"g2_{k}" for k in g2s) + "," + ",".join(f"I_{k}" for k in ints)]
    for i, t in enumerate(th):
        vals = [repr(float(g2s[k][i])) for k in g2s] + [repr(float(ints[k][i])) for k in ints]
        lines.append(f"{t:.9f}," + ",".join(vals))
    out.add("fig4b_diagonal.csv", "\n".join(lines) + "\n")
    out.add("fig4b_summary.json", json_text({"drive": {"detuning": cfg.drive.detuning,
                                                       "omega1": format_complex(cfg.drive.omega1),
                                                       "omega2": format_complex(cfg.drive.omega2)},
                                             "cases": doc}))
    out.add("fig4b_g2_polar.svg", svg.polar_plot(th, g2s, "g2(theta, theta)"))
    out.add("fig4b_intensity_polar.svg", svg.polar_plot(th, ints, "I(theta) / I_sd"))


def fig4c(cfg, fig, opts, out: Bundle):
    env, grid = _sphere_env(cfg), cfg.grid
    items = _sphere_items(env, _list(fig, "epsilon", parse_complex))
    free = zero_locus(DimerConfig(env.offset, -env.offset), FreeSpace(), grid, opts.l_max)
    _mask_figure("fig4c", "|Psi|^2 minima, sphere", items, fig, opts, out, grid,
                 free_locus=free, intersection=True)


def fig4d(cfg, fig, opts, out: Bundle):
    env = _sphere_env(cfg)
    l_show = int(fig.get("l_show", "10"))
    series, doc = {}, []
    for e in _list(fig, "epsilon", parse_complex):
        mp = multipoles_for(Sphere(e, env.radius, env.offset), opts.l_max)
        mag = np.abs(mp.c)
        norm = mag / mag.max()
        label = _tag(e)
        series[label] = np.pad(norm, (0, max(0, l_show - len(norm))))[:l_show]
        doc.append({"epsilon": label, "argmax_l": int(np.argmax(mag)) + 1, "l_used": mp.l_used,
                    "converged": mp.converged,
                    "c": [format_complex(c) for c in mp.c[:l_show]]})
    l = np.arange(1, l_show + 1)
    lines = ["l," + ",".join(series)]
    for i in range(l_show):
        lines.append(f"{l[i]}," + ",".join(repr(float(series[k][i])) for k in series))
    out.add("fig4d_multipoles.csv", "\n".join(lines) + "\n")
    out.add("fig4d_summary.json", json_text({"k0R": 2 * math.pi * env.radius,
                                             "k0b": 2 * math.pi * env.offset, "cases": doc}))
    out.add("fig4d_multipoles.svg", svg.line_plot(l, series, "normalised |c_l|", "l", "|c_l| / max",
                                                  ylim=(0.0, 1.05), markers=True))


def sm2(cfg, fig, opts, out: Bundle):
    env, grid = _sphere_env(cfg), cfg.grid
    panels = {k.split(".", 1)[1]: parse_float(f"figure.{k}", v)
              for k, v in fig.items() if k.startswith("panel.")}
    if opts.panel is not None:
        if opts.panel not in panels:
            raise ConfigError("--panel", f"unknown panel {opts.panel!r}; choose from {sorted(panels)}")
        panels = {opts.panel: panels[opts.panel]}
    eps = _list(fig, "epsilon", parse_complex)
    for name, z12 in panels.items():
        b = z12 / 2
        if b <= env.radius:
            raise ConfigError(f"figure.panel.{name}", "emitter inside sphere")
        items = _sphere_items(env, eps, offset=b)
        free = zero_locus(DimerConfig(b, -b), FreeSpace(), grid, opts.l_max)
        _mask_figure(f"sm2_{name}", f"|Psi|^2 minima, z12 = {z12:g}", items, fig, opts, out,
                     grid, free_locus=free, intersection=True)


_RUNNERS = {"fig1b": fig1b, "fig2": fig2, "fig3a": fig3a, "fig3b": fig3b,
            "fig4b": fig4b, "fig4c": fig4c, "fig4d": fig4d, "sm2": sm2}


def run_figure(name: str, out_dir, opts: FigureOptions | None = None,
               command: str | None = None) -> RunManifest:
    """Compute a figure, write its artifacts to ``out_dir`` and return the manifest."""
    opts = opts or FigureOptions()
    t0 = time.perf_counter()
    cfg, fig, text = merged_config(name, opts)
    bundle = Bundle(tuple(opts.formats))
    _RUNNERS[name](cfg, fig, opts, bundle)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for fname in sorted(bundle.files):
        data = bundle.files[fname].encode()
        (out_dir / fname).write_bytes(data)
        entries.append({"path": fname, "sha256": hashlib.sha256(data).hexdigest(),
                        "bytes": len(data)})
    manifest = RunManifest(command or f"figure {name}", serialize_config(cfg) + "".join(
        f"figure.{k} = {v}\n" for k, v in fig.items()), entries,
        round(time.perf_counter() - t0, 3))
    (out_dir / "manifest.json").write_text(json_text(manifest.to_json()))
    return manifest


def verify_manifest(out_dir) -> bool:
    """True when every listed file exists with the recorded hash."""
    out_dir = Path(out_dir)
    doc = json.loads((out_dir / "manifest.json").read_text())
    for e in doc["files"]:
        p = out_dir / e["path"]
        if not p.exists() or hashlib.sha256(p.read_bytes()).hexdigest() != e["sha256"]:
            return False
    return True
