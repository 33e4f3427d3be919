"""Command-line entry point: ``dimercorr figure|validate|couplings|run``.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .correlation import json_text, map_csv_text, map_sidecar, map_sweep
from .couplings import couplings_for, mirror_coupling_table
from .dynamics import build_generator, correlators, steady_state
from .figures import FIGURES, FORMATS, FigureOptions, run_figure
from .model import ConfigError, PerfectMirror, Substrate, parse_config, serialize_config
from .validate import SUITES, run_suite
from .zeros import mask_csv_text, minima_map

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
THREADS_ENV = "DIMERCORR_THREADS"


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _common(p):
    p.add_argument("--config", type=Path, help="configuration file overriding the defaults")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--grid", type=_positive_int, help="angular nodes per axis")
    p.add_argument("--threshold", type=float, help="|Psi|^2 mask threshold")
    p.add_argument("--lmax", type=_positive_int, default=60, help="largest multipole order")
    p.add_argument("--threads", type=_positive_int,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--format", choices=("csv", "json", "svg", "all"), default="all")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dimercorr",
                                 description="Directional photon correlations of emitter dimers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("figure", help="reproduce a figure panel")
    f.add_argument("name", help="one of: " + ", ".join(FIGURES))
    f.add_argument("--state", help="fig2 target state (symmetric, antisymmetric)")
    f.add_argument("--panel", help="sm2 panel (a, b, c)")
    _common(f)

    v = sub.add_parser("validate", help="run oracle suites")
    v.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    v.add_argument("--out", type=Path, help="write the JSON report here")

    c = sub.add_parser("couplings", help="coupling constants as CSV")
    c.add_argument("--config", type=Path, help="single configuration to evaluate")
    c.add_argument("--z1", type=float, default=0.6, help="mirror sweep: fixed z1 (lambda0)")
    c.add_argument("--z2", default="1.0:2.5:51", help="mirror sweep start:stop:count")
    c.add_argument("--lmax", type=_positive_int, default=60)
    c.add_argument("--out", type=Path, help="CSV file (default: stdout)")

    r = sub.add_parser("run", help="evaluate maps for an arbitrary configuration")
    r.add_argument("--payload", choices=("psi2", "g2", "intensity", "mask"), default="psi2")
    _common(r)
    return ap


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return _positive_int(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(THREADS_ENV, f"invalid thread count {env!r}") from None
    return 1


def _formats(args) -> tuple:
    return FORMATS if args.format == "all" else (args.format,)


def _read(path: Path | None) -> str | None:
    if path is None:
        return None
    try:
        return path.read_text()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None


def cmd_figure(args) -> int:
    opts = FigureOptions(grid_n=args.grid, threshold=args.threshold, l_max=args.lmax,
                         threads=_threads(args), formats=_formats(args), state=args.state,
                         panel=args.panel, config_text=_read(args.config))
    if args.name not in FIGURES:
        raise ConfigError("figure", f"unknown figure {args.name!r}; choose from {', '.join(FIGURES)}")
    out = args.out or Path("out") / args.name
    man = run_figure(args.name, out, opts, command=" ".join(["figure", args.name]))
    print(f"{args.name}: {len(man.files)} files in {out} ({man.wall_time_s:.2f} s)")
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = run_suite(args.suite)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.suite:10s} {c.name}: "
              f"residual {c.residual:.3e} (tol {c.tolerance:.1e})")
    report = {"suite": args.suite, "checks": [c.to_json() for c in checks],
              "passed": all(c.passed for c in checks)}
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json_text(report))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_couplings(args) -> int:
    lines = ["z2_over_lambda0,gamma12_over_gamma0,g12_over_gamma0"]
    text = _read(args.config)
    if text is not None:
        cfg = parse_config(text)
        if isinstance(cfg.environment, Substrate):
            raise ConfigError("geometry.kind", "couplings are not available for a "
                              "finite-permittivity substrate")
        cs = couplings_for(cfg.dimer, cfg.environment, args.lmax)
        lines.append(f"{cfg.dimer.z2!r},{cs.gamma12!r},{cs.g12!r}")
    else:
        try:
            a, b, n = args.z2.split(":")
            z2s = np.linspace(float(a), float(b), int(n))
        except ValueError:
            raise ConfigError("--z2", "expected start:stop:count") from None
        if np.any(z2s == args.z1) or args.z1 < 0 or np.any(z2s < 0):
            raise ConfigError("--z2", "heights must be nonnegative and differ from z1")
        for z2, g, gg in mirror_coupling_table(args.z1, z2s):
            lines.append(f"{z2!r},{g!r},{gg!r}")
    body = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


def cmd_run(args) -> int:
    text = _read(args.config)
    if text is None:
        raise ConfigError("--config", "run needs a configuration file")
    cfg = parse_config(text)
    if args.grid:
        cfg = cfg._replace(grid=type(cfg.grid)(cfg.grid.theta_min, cfg.grid.theta_max, args.grid))
    dimer, env, drive, grid = cfg
    out = args.out or Path("out") / "run"
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads(args)
    fmts = _formats(args)
    files = {}
    if args.payload in ("psi2", "mask"):
        amap = map_sweep(grid, "psi2", dimer, env, None, threads, args.lmax)
        if args.payload == "mask":
            mm = minima_map(amap.values, args.threshold if args.threshold is not None else 1e-2)
            files["mask.csv"] = mask_csv_text(mm)
            files["mask.json"] = json_text({"components": mm.n_components,
                                            "area_fraction": mm.area_fraction,
                                            "threshold": mm.threshold})
        else:
            files["psi2.csv"] = map_csv_text(amap)
            files["psi2.json"] = json_text(map_sidecar(amap))
    else:
        if isinstance(env, Substrate):
            raise ConfigError("geometry.kind", f"{args.payload} needs couplings, which are not "
                              "available for a finite-permittivity substrate")
        cs = couplings_for(dimer, env, args.lmax)
        corr = correlators(steady_state(build_generator(cs, drive)))
        amap = map_sweep(grid, args.payload, dimer, env, corr, threads, args.lmax)
        files[f"{args.payload}.csv"] = map_csv_text(amap)
        files[f"{args.payload}.json"] = json_text(map_sidecar(amap, {"rho_ee": corr.ee}))
    files["config.cfg"] = serialize_config(cfg)
    for name, body in sorted(files.items()):
        if name.endswith(".cfg") or name.rsplit(".", 1)[-1] in fmts:
            (out / name).write_text(body)
    print(f"run: wrote {out}")
    return EXIT_OK


_COMMANDS = {"figure": cmd_figure, "validate": cmd_validate, "couplings": cmd_couplings,
             "run": cmd_run}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
