"""Command-line entry point: ``dmaquant <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time

from .experiments import RUNNERS, ConfigError, ExperimentOutput, make_config, run_all, write_output
from .validation import run_validation

log = logging.getLogger("dmaquant")

SUBCOMMANDS = ("beampattern", "sdn-table", "df-fbr", "freq-sweep", "null-sweep", "validate", "all")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dmaquant",
        description="Quantization effects on a first-order two-sensor differential microphone array.",
    )
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="INI-style config file; flags override its values")
    parser.add_argument("--out", dest="output_dir", help="output directory (env DMAQUANT_OUTPUT_DIR)")
    parser.add_argument("--bits", help="bit depth(s), e.g. 16 or 10,12,14,16 or 8..16")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", dest="master_seed", type=int)
    parser.add_argument("--pattern", dest="patterns", help="named pattern(s), comma separated")
    parser.add_argument("--null-angle", dest="null_angles", help="null angle(s) in deg for the null sweep")
    parser.add_argument("--frequency", dest="frequency_hz", type=float)
    parser.add_argument("--sample-rate", dest="sample_rate_hz", type=float)
    parser.add_argument("--spacing", type=float, help="spacing in wavelengths or metres, see --spacing-mode")
    parser.add_argument("--spacing-mode", choices=("relative_wavelength", "absolute_m"))
    parser.add_argument("--sound-speed", type=float)
    parser.add_argument("--amplitude", type=float)
    parser.add_argument("--full-scale", type=float)
    parser.add_argument("--gain", help="constant sensor gain or a range low,high")
    parser.add_argument("--sequence-length", type=int)
    parser.add_argument("--grid", dest="polar_grid_deg", type=float, help="polar angle step (deg)")
    parser.add_argument("--integration-grid", dest="integration_grid_deg", type=float)
    parser.add_argument("--freq-start", dest="freq_start_hz", type=float)
    parser.add_argument("--freq-stop", dest="freq_stop_hz", type=float)
    parser.add_argument("--freq-step", dest="freq_step_hz", type=float)
    parser.add_argument("--diagonal-loading", type=float)
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "quiet")}
    try:
        config = make_config(args.config, **overrides)
    except ConfigError as exc:
        print(f"dmaquant: config error: {exc}", file=sys.stderr)
        return 1

    started = time.perf_counter()
    log.info("running %s (trials=%d, seed=%d) -> %s", args.command, config.trials, config.master_seed, config.output_dir)
    try:
        if args.command == "all":
            output = run_all(config)
        elif args.command == "validate":
            output = run_validation(config)
        else:
            output = RUNNERS[args.command](config)
    except (ValueError, ArithmeticError) as exc:
        print(f"dmaquant: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    record = write_output(output, config, started=started)
    _report(output, record)
    if args.command == "validate" and not output.passed:
        return 1
    return 0


def _report(output: ExperimentOutput, record):
    for name in sorted(record.checksums):
        log.info("wrote %s", name)
    for c in output.checks:
        log.info("%s %s: %.4f (target %g, tol %g)", "PASS" if c.passed else "FAIL", c.name, c.value, c.target, c.tolerance)
    for note in output.notes:
        log.info("%s", note)
    log.info("done in %.1f s", record.wall_clock_s)


if __name__ == "__main__":
    sys.exit(main())
