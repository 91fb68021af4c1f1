"""Command line front end.

    molmimo run --mode mimo --message "hello there"
    molmimo compare --message abcdef
    molmimo validate-channel --particles 1000000 --seeds 5
    molmimo sweep --sigmas 0,0.05,0.1,0.2,0.5 --reps 3 --out sweep.csv
    molmimo serve --port 8000

Reports go to stdout as canonical JSON (diagnostics to stderr), so runs
compose with shell pipelines.  Exit codes: 0 success, 1 a validation
command found results out of tolerance, 2 bad arguments or configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import channel as ch
from . import modem
from .errors import MolmimoError
from .harness import (
    RunConfig,
    canonical_json,
    compare_modes,
    config_from_dict,
    nominal_rise,
    run_link_detailed,
    sweep_noise,
    write_sweep_csv,
)


def _load_config(args) -> RunConfig:
    """Config file first, then flags override individual fields."""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = config_from_dict(json.load(fh))
    else:
        cfg = RunConfig()
    overrides = {}
    for name in ("mode", "message", "seed", "backend", "particles"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "no_ili", False):
        overrides["ili_cancellation"] = False
    if overrides:
        cfg = replace(cfg, **overrides)
    noise = getattr(args, "noise", None)
    if noise is not None:
        sigma = noise * nominal_rise(replace(cfg, sensor=replace(cfg.sensor,
                                                                 noise_sigma=0.0)))
        cfg = replace(cfg, sensor=replace(cfg.sensor, noise_sigma=sigma))
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    artifacts = run_link_detailed(cfg)
    report = artifacts.report
    _emit(canonical_json(report), args.out)
    if args.trace_csv:
        ch.write_trace_csv(artifacts.concentration, args.trace_csv)
    if args.slots_csv:
        modem.write_slot_stats_csv(report.slot_stats, args.slots_csv)
    print(f"decoded {report.message_decoded!r} "
          f"({report.bit_errors}/{report.bits_compared} bit errors, "
          f"{report.data_rate_bps} bit/s)", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    report = compare_modes(args.message if args.message is not None else cfg.message,
                           seed=cfg.seed, base=cfg)
    _emit(canonical_json(report), args.out)
    print(f"rate ratio mimo/siso = {report.rate_ratio:.3f}", file=sys.stderr)
    return 0


def cmd_validate_channel(args) -> int:
    """Cross-check the particle backend against the closed form.

    Compares the peak concentration a unit spray produces at sensor 0,
    per seed, and checks mass conservation of the closed form by radial
    quadrature.  Fails (exit 1) when the median peak error exceeds
    ``--tolerance`` or the mass integral is off by more than 1 percent.
    """
    cfg = _load_config(args)
    grid = ch.TimeGrid(dt=cfg.grid_dt, n=int(round(args.window / cfg.grid_dt)))
    burst = [ch.SprayRecord(time=0.0, link=0,
                            molecules=cfg.channel.molecules_per_burst)]
    impulse = ch.channel_impulse_matrix(cfg.geometry, cfg.channel, grid)
    analytic = ch.synthesize_traces(burst, impulse)
    peak_ref = float(analytic.values[0].max())
    errors = []
    for seed in range(args.seeds):
        est = ch.simulate_particles(burst, cfg.geometry, cfg.channel, grid,
                                    n=args.particles, seed=seed,
                                    workers=args.workers)
        err = abs(float(est.values[0].max()) - peak_ref) / peak_ref
        errors.append(err)
        print(f"seed {seed}: peak relative error {err:.4f}", file=sys.stderr)
    median = float(np.median(errors))
    t_peak = float(grid.times[int(np.argmax(analytic.values[0]))])
    mass = ch.integrated_mass(t_peak, cfg.channel)
    mass_err = abs(mass - cfg.channel.molecules_per_burst) / cfg.channel.molecules_per_burst
    result = {
        "particles": args.particles,
        "seeds": args.seeds,
        "peak_reference": peak_ref,
        "peak_relative_errors": errors,
        "median_peak_relative_error": median,
        "mass_relative_error": mass_err,
        "tolerance": args.tolerance,
        "passed": bool(median <= args.tolerance and mass_err <= 0.01),
    }
    _emit(json.dumps(result, sort_keys=True, separators=(",", ":")), args.out)
    print(f"median peak error {median:.4f} (tolerance {args.tolerance}), "
          f"mass error {mass_err:.2e}", file=sys.stderr)
    return 0 if result["passed"] else 1


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        levels = [float(s) for s in args.sigmas.split(",") if s.strip() != ""]
    except ValueError:
        print(f"error: bad --sigmas {args.sigmas!r}", file=sys.stderr)
        return 2
    points = sweep_noise(levels, args.reps, cfg)
    if args.out:
        write_sweep_csv(points, args.out)
        print(f"wrote {len(points)} rows to {args.out}", file=sys.stderr)
    else:
        print("sigma,mode,ber,cer")
        for p in points:
            print(f"{p.sigma_fraction!r},{p.mode},{p.ber!r},{p.cer!r}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(console_dir=args.console), host=args.host,
                port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molmimo",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, message=True):
        p.add_argument("--config", help="JSON file with a full run configuration")
        if message:
            p.add_argument("--message", help="text to transmit")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--backend", choices=("analytical", "mc"),
                       help="channel backend")
        p.add_argument("--particles", type=int,
                       help="walkers per burst for the mc backend")
        p.add_argument("--noise", type=float,
                       help="sensor noise sigma as a fraction of the nominal "
                            "slot rise")
        p.add_argument("--out", help="write the report here instead of stdout")

    p_run = sub.add_parser("run", help="transmit one frame and report")
    p_run.add_argument("--mode", choices=("siso", "mimo"))
    common(p_run)
    p_run.add_argument("--no-ili", action="store_true",
                       help="disable cross-link cancellation")
    p_run.add_argument("--trace-csv", help="dump concentration traces here")
    p_run.add_argument("--slots-csv", help="dump per-slot decisions here")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="same message through both modes")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate-channel",
                           help="particle backend vs closed form")
    p_val.add_argument("--config", help="JSON file with a full run configuration")
    p_val.add_argument("--particles", type=int, default=1_000_000)
    p_val.add_argument("--seeds", type=int, default=5)
    p_val.add_argument("--workers", type=int, default=1)
    p_val.add_argument("--window", type=float, default=8.0,
                       help="seconds of trace to compare over")
    p_val.add_argument("--tolerance", type=float, default=0.05,
                       help="allowed median relative error at the peak")
    p_val.add_argument("--out", help="write the result here instead of stdout")
    p_val.set_defaults(func=cmd_validate_channel)

    p_sweep = sub.add_parser("sweep", help="error rates vs sensor noise")
    common(p_sweep, message=True)
    p_sweep.add_argument("--sigmas", default="0,0.05,0.1,0.2,0.5",
                         help="comma list of noise sigmas (fractions of the "
                              "nominal rise)")
    p_sweep.add_argument("--reps", type=int, default=3,
                         help="runs per (level, mode) cell")
    p_sweep.set_defaults(func=cmd_sweep)

    p_srv = sub.add_parser("serve", help="start the live demo service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--console", default="frontend/dist",
                       help="static console files to serve at / (if present)")
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MolmimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
