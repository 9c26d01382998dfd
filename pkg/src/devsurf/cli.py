"""Command-line driver: ``devsurf {fit,develop,panelize,analyze,rulings}``."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import curvature_map, gauss_image, problem_gauss_image, surface_rulings
from .config import MODES, RunConfig, load_config
from .develop import setup_developability
from .errors import ConfigError, DevsurfError, NumericalFailure
from .initializers import initialize_patches
from .paneling import closeness_params, fit_to_reference, panelize, seed_from_reference
from .sampling import group_overlapping, make_grid
from .scenarios import SCENARIOS
from .solver import optimize

log = logging.getLogger("devsurf")


def build_parser():
    parser = argparse.ArgumentParser(prog="devsurf", description=__doc__)
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--scenario", choices=sorted(SCENARIOS))
    parser.add_argument("--reference", help="OBJ or XYZ reference with normals")
    parser.add_argument("--surface", help="surface JSON written by an earlier run")
    parser.add_argument("--wd", type=float)
    parser.add_argument("--wc", type=float)
    parser.add_argument("--wf", type=float)
    parser.add_argument("--wr", type=float)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--out")
    parser.add_argument("--timing", action="store_true",
                        help="record wall-clock seconds in the history (breaks byte-identity)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def effective_config(args):
    cfg = load_config(args.config, args.mode) if args.config else RunConfig(mode=args.mode)
    for key in ("scenario", "reference", "surface", "out"):
        if getattr(args, key):
            setattr(cfg, key, getattr(args, key))
    overrides = {k: getattr(args, f) for k, f in
                 (("w_d", "wd"), ("w_c", "wc"), ("w_f", "wf"), ("w_r", "wr"))
                 if getattr(args, f) is not None}
    try:
        if overrides:
            cfg.weights = replace(cfg.weights, **overrides)
        if args.iters is not None:
            cfg.solver = replace(cfg.solver, max_iterations=args.iters)
    except ValueError as exc:
        raise ConfigError("overrides", str(exc)) from None
    if cfg.scenario and cfg.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario, choose from {', '.join(SCENARIOS)}")
    return cfg.validate()


def _inputs(cfg):
    """Model, reference and fixed-point mask (each possibly None) named by the config."""
    model = reference = mask = None
    if cfg.scenario:
        kwargs = {"seed": cfg.seed} if cfg.scenario == "perturbed-cylinder" else {}
        sc = SCENARIOS[cfg.scenario](**kwargs)
        model, reference = sc.model, sc.reference
        mask = sc.truth.get("fixed_mask")
    if cfg.reference:
        reference = io.load_reference(cfg.reference)
    if cfg.surface:
        model, mask = io.load_surface(cfg.surface), None
    return model, reference, mask


def _fit(cfg, reference):
    model = seed_from_reference(reference, ctrl=cfg.ctrl)
    return fit_to_reference(model, reference, iterations=cfg.fit_iterations,
                            solver_config=cfg.solver)


def _planed(cfg, model):
    grid = make_grid(*cfg.samples)
    patches = group_overlapping(grid, *cfg.patch, *cfg.overlap)
    initialize_patches(model, grid.params, patches)
    return grid, patches


def _write_common(out, model, history, image, cfg, timing):
    io.export_surface(model, out / "surface.obj", cfg.tessellation)
    io.export_gauss_image(image, out / "gauss_image.xyz", out / "gauss_planes.csv")
    if history is not None:
        io.write_history(history, out / "history.csv", timing)


def run(cfg, timing=False):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(cfg.dumps())
    model, reference, mask = _inputs(cfg)

    if cfg.mode == "fit":
        fit = _fit(cfg, reference)
        grid, patches = _planed(cfg, fit.model)
        frames = io.tessellate(fit.model, cfg.samples)
        image = gauss_image(frames[2], patches)
        _write_common(out, fit.model, fit.solve.history, image, cfg, timing)
        log.info("fit rms tangential distance %.3e", fit.rms)
        return 0

    if cfg.mode == "panelize":
        rows, cols = cfg.panels
        result = panelize(reference, rows, cols, cfg.specs(), cfg.weights, cfg.solver,
                          cfg.panel_samples, cfg.close_samples, cfg.fit_iterations,
                          moment_mode=cfg.moment_mode)
        image = problem_gauss_image(result.problem, result.state)
        _write_common(out, result.model, result.history, image, cfg, timing)
        io.write_panel_report(result.report, out / "panel_report.csv")
        return 0

    if model is None:
        model = _fit(cfg, reference).model

    if cfg.mode == "develop":
        close = closeness_params(model) if reference is not None else None
        problem = setup_developability(model, cfg.weights, cfg.samples, cfg.patch, cfg.overlap,
                                       reference, close, mask)
        result = optimize(problem, cfg.solver)
        final = problem.model_at(result.state)
        image = problem_gauss_image(problem, result.state)
        _write_common(out, final, result.history, image, cfg, timing)
        log.info("develop: %s after %d iterations, thickness %.3e", result.reason,
                 len(result.history) - 1, image.thickness)
        return 0

    grid, patches = _planed(cfg, model)
    if cfg.mode == "analyze":
        frames = io.tessellate(model, cfg.samples)
        image = gauss_image(frames[2], patches)
        cmap = curvature_map(model, grid.params)
        _write_common(out, model, None, image, cfg, timing)
        io.write_curvature(cmap, out / "curvature.csv")
        summary = "".join(f"{k} = {v!r}\n" for k, v in cmap.summary.items())
        (out / "curvature_summary.txt").write_text(summary + f"thickness = {image.thickness!r}\n")
        return 0

    io.write_rulings(surface_rulings(model, grid.params, patches), out / "rulings.csv")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg, args.timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, DevsurfError, ArithmeticError, np.linalg.LinAlgError) as exc:
        out = Path(cfg.out)
        dump = getattr(exc, "dump", None) or {}
        arrays = {k: v for k, v in dump.items() if isinstance(v, np.ndarray)}
        if arrays:
            np.savez(out / "failure_dump.npz", **arrays)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
