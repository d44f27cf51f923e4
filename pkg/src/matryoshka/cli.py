"""Command line entry point: ``matryoshka <command> [--config PATH] [--seed N] [--out DIR] [--svg]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import channel, sweeps
from .config import DEFAULTS, ConfigError, dump_config, load_config
from .constellation import CouplingRule, RingGeometry, build, min_distance, power_stats, projection_2d, to_csv

log = logging.getLogger("matryoshka")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 2, 3

SWEEPS = {
    "ber": ("snr_db", sweeps.run_ber_sweep),
    "mi": ("distance_km", sweeps.run_mi_distance_sweep),
    "power": ("launch_power_dbm", sweeps.run_power_sweep),
    "dsp": ("snr_db", sweeps.run_dsp_demo),
}


def geometry_from_config(cfg: dict) -> tuple[RingGeometry, CouplingRule]:
    g = cfg["constellation"]
    try:
        geometry = RingGeometry(g["r_inner"], g["r_outer"], g["offset_angle"], g["base_angle"])
        rule = CouplingRule(g["rule"])
    except ValueError as exc:
        raise ConfigError(f"[constellation] {exc}") from None
    return geometry, rule


def spec_from_config(kind: str, cfg: dict) -> sweeps.SweepSpec:
    variable, _ = SWEEPS[kind]
    section = dict(cfg[kind])
    geometry, rule = geometry_from_config(cfg)
    try:
        link = channel.LinkModel(**cfg["link"])
        grid = [float(v) for v in section.pop(variable)]
        n_symbols = int(section.pop("n_symbols"))
        return sweeps.SweepSpec(
            kind=kind,
            schemes=list(cfg["schemes"]),
            variable=variable,
            grid=grid,
            n_symbols=n_symbols,
            seed=int(cfg["seed"]),
            link=link,
            geometry=geometry,
            rule=rule,
            options=section,
            workers=int(cfg["workers"]),
            config=cfg,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{kind}] {exc}") from None


def _cmd_gen(cfg, out: Path, args) -> int:
    geometry, rule = geometry_from_config(cfg)
    for scheme in cfg["schemes"]:
        path = out / f"constellation_{scheme}.csv"
        to_csv(build(scheme, geometry, rule), path)
        print(path)
    return EXIT_OK


def _cmd_analyze(cfg, out: Path, args) -> int:
    geometry, rule = geometry_from_config(cfg)
    for scheme in cfg["schemes"]:
        c = build(scheme, geometry, rule)
        d, mult = min_distance(c)
        print(f"[{scheme}]")
        print(f"points = {len(c)}")
        print(f"d_min = {d!r}")
        print(f"d_min_pairs = {mult}")
        for k, v in power_stats(c).items():
            print(f"{k} = {v!r}")
        for z, count in projection_2d(c, 0):
            print(f"projection_coord0 = [{z.real:.6f}, {z.imag:.6f}, {count}]")
        print()
    return EXIT_OK


def _cmd_sweep(cfg, out: Path, args) -> int:
    spec = spec_from_config(args.command, cfg)
    _, runner = SWEEPS[args.command]
    report = runner(spec)
    path = out / f"{args.command}.csv"
    report.to_csv(path)
    print(path)
    if args.svg:
        from .plotting import plot_csv

        print(plot_csv(path))
    if args.command == "ber":
        cross = sweeps.ber_crossover(report)
        if cross:
            print(f"crossover: {cross[0]:.2f} dB at BER {cross[1]:.2e}")
    if args.command == "dsp" and not report.flags.get("converged", True):
        log.error("equalizer did not converge for at least one grid point")
        return EXIT_NONCONVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matryoshka", description="12D Matryoshka vs PDM-QPSK link simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("gen", "export constellation CSVs"),
        ("analyze", "minimum distance, power statistics, 2D projections"),
        ("ber", "BER vs SNR sweep"),
        ("mi", "MI/GMI vs distance sweep"),
        ("power", "effective SNR vs launch power sweep"),
        ("dsp", "coupled-channel DSP demonstration"),
        ("defaults", "print the default configuration"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, help="TOML configuration file")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--svg", action="store_true", help="also render an SVG from the CSV")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(dump_config(DEFAULTS))
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        args.out.mkdir(parents=True, exist_ok=True)
        handler = {"gen": _cmd_gen, "analyze": _cmd_analyze}.get(args.command, _cmd_sweep)
        return handler(cfg, args.out, args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
