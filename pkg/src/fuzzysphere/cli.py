"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import fields

import numpy as np

from .dmc import DmcConfig, DmcError, run_dmc, uv_histogram
from .ellipse import aspect_ratio_from_shape, ellipse_geometry
from .membrane import MembraneConfig, config_from_invariants
from .numerics import RngStream
from .observables import expectation, sample_uv
from .report import (
    RunConfig,
    build_report,
    format_table,
    grid_mass,
    heatmap_grid,
    jsonable,
    write_dmc_hist,
    write_dmc_trace,
    write_ellipse_svg,
    write_heatmap_csv,
    write_heatmap_svg,
    write_json,
    write_samples_csv,
)
from .variational import VariationalParams, energy_closed, minimize_closed, minimize_numeric
from .verify import VerifyOptions, quick_options, run_all

log = logging.getLogger("fuzzysphere")

GLOBAL_KEYS = ("kappa", "seed", "tol", "mc_samples", "out", "strict")


def _global_parent() -> argparse.ArgumentParser:
    # SUPPRESS keeps unset flags out of the namespace so config files are not clobbered
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with run settings; flags override it")
    g.add_argument("--kappa", type=float, default=argparse.SUPPRESS, help="potential coupling")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="quadrature tolerance")
    g.add_argument("--mc-samples", dest="mc_samples", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    g.add_argument("--strict", action="store_true", default=argparse.SUPPRESS,
                   help="nonzero exit when any row is flagged")
    g.add_argument("--show-config", dest="show_config", action="store_true", default=argparse.SUPPRESS)
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    parser = argparse.ArgumentParser(prog="fuzzysphere", parents=[parent],
                                     description="Ground-state geometry of the N = 2 membrane matrix model.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ground-state", parents=[parent], help="variational minimizer and energy")
    sub.add_parser("expect", parents=[parent], help="the four ground-state constants by three routes")

    sp = sub.add_parser("sample", parents=[parent], help="exact (U, V) draws from the ground-state density")
    sp.add_argument("-n", type=int, default=100_000)

    dp = sub.add_parser("dmc", parents=[parent], help="diffusion Monte Carlo run")
    dp.add_argument("--walkers", type=int)
    dp.add_argument("--tau", type=float)
    dp.add_argument("--equil", type=int)
    dp.add_argument("--steps", type=int)
    dp.add_argument("--plain", action="store_true", help="no importance sampling")
    dp.add_argument("--harmonic", action="store_true", help="calibration on the 6D oscillator (E0 = 3)")

    ep = sub.add_parser("ellipse", parents=[parent], help="geometry of one configuration")
    ep.add_argument("coords", nargs=6, type=float, metavar="C", help="x1 x2 x3 y1 y2 y3")

    hp = sub.add_parser("render-heatmap", parents=[parent], help="ground-state density on the (U, V) plane")
    hp.add_argument("--nu-grid", dest="n_u", type=int, default=200)
    hp.add_argument("--nv-grid", dest="n_v", type=int, default=200)

    tp = sub.add_parser("render-typical", parents=[parent], help="ellipse with the expected shape parameter")
    tp.add_argument("--shape", type=float, help="shape parameter (default: ground-state mean)")

    vp = sub.add_parser("verify", parents=[parent], help="run the acceptance checks")
    vp.add_argument("--quick", action="store_true", help="reduced sample counts, no DMC")
    vp.add_argument("--skip-dmc", dest="skip_dmc", action="store_true")
    vp.add_argument("--only", type=int, nargs="+", metavar="N")
    vp.add_argument("--kappa-shift", dest="kappa_shift", type=float, default=0.0,
                    help="perturb the model's coupling (mutation test)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    for key in GLOBAL_KEYS:
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if not cfg.kappa > 0:
        raise SystemExit("error: --kappa must be positive")
    if cfg.mc_samples < 0:
        raise SystemExit("error: --mc-samples must be nonnegative")
    return cfg


def _emit(payload: dict) -> None:
    print(json.dumps(jsonable(payload), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# subcommands


def cmd_ground_state(cfg: RunConfig, args) -> int:
    model = minimize_closed(cfg.kappa)
    numeric = minimize_numeric(cfg.kappa, VariationalParams(1.0, 1.0))
    e_num = energy_closed(numeric, cfg.kappa)
    gap = max(abs(numeric.mu - model.mu) / model.mu, abs(numeric.nu - model.nu) / model.nu)
    payload = {
        "model": model.to_dict(),
        "numeric": {"mu": numeric.mu, "nu": numeric.nu, "energy": e_num},
        "max_relative_gap": gap,
    }
    write_json(cfg.out_dir / "ground_state.json", payload)
    print(f"mu_m = {model.mu:.12f}\nnu_m = {model.nu:.12f}\nE    = {model.energy:.12f}")
    print(f"numeric minimizer: mu = {numeric.mu:.12f}, nu = {numeric.nu:.12f} (max rel gap {gap:.1e})")
    if gap > 1e-6:
        print("error: closed-form and numeric minimizers disagree", file=sys.stderr)
        return 1
    return 0


def cmd_expect(cfg: RunConfig, args) -> int:
    report = build_report(cfg)
    write_json(cfg.out_dir / "report.json", report)
    print(format_table(report))
    flagged = [r["name"] for r in report["rows"] if r["status"] == "flagged"]
    if flagged:
        print(f"\nflagged: {', '.join(flagged)}")
    return 1 if cfg.strict and flagged else 0


def cmd_sample(cfg: RunConfig, args) -> int:
    model = minimize_closed(cfg.kappa)
    batch = sample_uv(model, args.n, RngStream(cfg.seed, 1))
    path = write_samples_csv(cfg.out_dir / "samples.csv", batch.U, batch.V)
    summary = {
        "n": len(batch),
        "acceptance_rate": batch.acceptance_rate,
        "mean_U": float(np.mean(batch.U)) if len(batch) else None,
        "mean_sqrtV": float(np.mean(np.sqrt(batch.V))) if len(batch) else None,
        "file": str(path),
    }
    write_json(cfg.out_dir / "samples_summary.json", summary)
    _emit(summary)
    return 0


def cmd_dmc(cfg: RunConfig, args) -> int:
    opts = dict(cfg.dmc)
    opts.update(seed=cfg.seed, kappa=cfg.kappa)
    for flag, key in (("walkers", "n_walkers"), ("tau", "tau"), ("equil", "n_equil"), ("steps", "n_measure")):
        if getattr(args, flag) is not None:
            opts[key] = getattr(args, flag)
    if args.harmonic:
        opts.update(potential="harmonic", guided=False)
    elif args.plain:
        opts["guided"] = False
    known = {f.name for f in fields(DmcConfig)}
    if set(opts) - known:
        raise SystemExit(f"error: unknown dmc settings {sorted(set(opts) - known)}")
    if "hist_bins" in opts:
        opts["hist_bins"] = tuple(opts["hist_bins"])
    dcfg = DmcConfig(**opts)
    try:
        res = run_dmc(dcfg)
    except DmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = cfg.out_dir
    write_dmc_trace(out / "dmc_trace.csv", res)
    write_dmc_hist(out / "dmc_hist.csv", res)
    summary = res.summary()
    if dcfg.potential == "harmonic":
        summary["reference"] = 3.0
        summary["z"] = (res.energy - 3.0) / res.error
    else:
        bound = minimize_closed(cfg.kappa).energy
        summary["variational_bound"] = bound
        summary["below_bound"] = res.energy <= bound + 3 * res.error
        h = uv_histogram(res)
        summary["tv_distance_to_trial_density"] = h["tv_distance"]
        summary["u_mode_walkers"] = h["u_mode_walkers"]
        summary["u_mode_model"] = h["u_mode_model"]
    write_json(out / "dmc_summary.json", summary)
    _emit(summary)
    return 0


def cmd_ellipse(cfg: RunConfig, args) -> int:
    c = args.coords
    if not all(math.isfinite(v) for v in c):
        raise SystemExit("error: coordinates must be finite")
    geom = ellipse_geometry(MembraneConfig(c[:3], c[3:]))
    d = geom.to_dict()
    gap = (geom.L_approx - geom.L_exact) / geom.L_exact if geom.L_exact > 0 else 0.0
    d["perimeter_relative_gap"] = gap
    _emit(d)
    return 0


def cmd_render_heatmap(cfg: RunConfig, args) -> int:
    model = minimize_closed(cfg.kappa)
    u, v, dens = heatmap_grid(model, args.n_u, args.n_v)
    out = cfg.out_dir
    write_heatmap_csv(out / "heatmap.csv", u, v, dens)
    write_heatmap_svg(out / "heatmap.svg", u, v, dens, model)
    print(f"wrote {out / 'heatmap.csv'} and {out / 'heatmap.svg'}; grid mass {grid_mass(u, v, dens):.4f}")
    return 0


def cmd_render_typical(cfg: RunConfig, args) -> int:
    if args.shape is not None:
        s = args.shape
    else:
        rep = expectation(minimize_closed(cfg.kappa), "shape", None, cfg.tol)
        s = rep.quadrature
    ratio = aspect_ratio_from_shape(s)
    # a unit-area-scale ellipse with the requested axis ratio
    U = 0.5 * (ratio * ratio + 1.0)
    geom = ellipse_geometry(config_from_invariants(U, ratio * ratio))
    path = write_ellipse_svg(cfg.out_dir / "typical.svg", geom, ratio)
    print(f"shape parameter {s:.6f} -> aspect ratio {ratio:.4f}; wrote {path}")
    return 0


def cmd_verify(cfg: RunConfig, args) -> int:
    kw = dict(kappa=cfg.kappa, seed=cfg.seed, kappa_shift=args.kappa_shift)
    if args.quick:
        opt = quick_options(**kw)
    else:
        opt = VerifyOptions(mc_samples=cfg.mc_samples, skip_dmc=args.skip_dmc, **kw)
    results = run_all(opt, args.only)
    for r in results:
        print(r.line())
        for note in r.info:
            print(f"      note: {note}")
    payload = {
        "options": opt.__dict__,
        "results": [
            {"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail, "parts": r.parts,
             "info": r.info}
            for r in results
        ],
    }
    write_json(cfg.out_dir / "verify.json", payload)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


COMMANDS = {
    "ground-state": cmd_ground_state,
    "expect": cmd_expect,
    "sample": cmd_sample,
    "dmc": cmd_dmc,
    "ellipse": cmd_ellipse,
    "render-heatmap": cmd_render_heatmap,
    "render-typical": cmd_render_typical,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = resolve_config(args)
    if getattr(args, "show_config", False):
        _emit(cfg.to_dict())
    return COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
