"""``bench`` command line."""

from __future__ import annotations

import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import click
import yaml

from .errors import BenchError, ConfigError
from .model import DEFAULT_PHASE_S, Backend, canonical_matrix, load_configs

EXIT_CONFIG, EXIT_PRIVILEGE, EXIT_RUNTIME = 2, 3, 4


def _scale(ctx, param, value):
    if value is None:
        return 1.0
    try:
        f = float(Fraction(value))
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter("expected a number or a fraction like 1/60") from None
    if f <= 0:
        raise click.BadParameter("scale must be positive")
    return f


def _load_params(path):
    from .sim import SimParams

    if path is None:
        return SimParams()
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read simulation parameters from {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("simulation parameter file must contain a mapping")
    return SimParams.from_dict(doc.get("sim_params", doc))


def _ports(value: str) -> tuple[int, int]:
    try:
        lo, _, hi = value.partition("-")
        return int(lo), int(hi or lo)
    except ValueError:
        raise click.BadParameter(f"bad port range {value!r}; use e.g. 1-1024") from None


def _cores(value: str) -> list[int]:
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"bad core list {value!r}; use e.g. 0,1") from None


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Cyclic real-time task benchmark under network attacks."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


def _progress(cfg, rep):
    if rep.complete:
        click.echo(f"{cfg.id:28s} idle max {rep.idle_max_ns / 1e6:8.3f} ms   attack max {rep.attack_max_ns / 1e6:8.3f} ms",
                   err=True)
    else:
        click.echo(f"{cfg.id:28s} FAILED: {rep.meta.get('error')}", err=True)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="YAML experiment file.")
@click.option("--backend", type=click.Choice(["sim", "real"]), default=None, help="Override the configs' backend.")
@click.option("--scale", callback=_scale, default=None, help="Duration scale factor, e.g. 1/60.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Artifact directory.")
@click.option("--params", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML file overriding simulation parameters.")
def run(config_path, backend, scale, out, params):
    """Run the three-phase procedure for every experiment in a config file."""
    from .orchestrator import run_matrix

    configs = load_configs(config_path)
    res = run_matrix(configs, backend, scale, out, _load_params(params), progress=_progress)
    click.echo(res.render())
    click.echo(f"artifacts: {res.out_dir}")
    if any(r["status"] != "complete" for r in res.runs):
        sys.exit(EXIT_RUNTIME)


@cli.command()
@click.option("--backend", type=click.Choice(["sim", "real"]), default="sim")
@click.option("--scale", callback=_scale, default="1/60", show_default=True, help="Duration scale factor.")
@click.option("--attacks", default="syn_flood,arp_flood,syn_scan", show_default=True)
@click.option("--stress", type=click.Choice(["both", "on", "off"]), default="both", show_default=True)
@click.option("--phase-s", type=float, default=DEFAULT_PHASE_S, show_default=True,
              help="Unscaled flood phase length in seconds.")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--params", type=click.Path(exists=True, dir_okay=False), default=None)
def matrix(backend, scale, attacks, stress, phase_s, out, params):
    """Run the canonical seven test cases against every attack and print the tables."""
    from .orchestrator import run_matrix

    variants = {"both": [False, True], "on": [True], "off": [False]}[stress]
    configs = canonical_matrix(phase_s, [a.strip() for a in attacks.split(",") if a.strip()], variants,
                               Backend(backend))
    res = run_matrix(configs, backend, scale, out, _load_params(params), progress=_progress)
    click.echo(res.render())
    click.echo(f"artifacts: {res.out_dir}")


@cli.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
def analyze(directory):
    """Rebuild the tables from persisted series and compare with the stored ones."""
    from .orchestrator import analyze_dir, stored_matrices

    res = analyze_dir(directory)
    click.echo(res.render())
    stored = stored_matrices(directory)
    if stored:
        same = all(stored.get(k) == m for k, m in res.matrices.items()) and set(stored) == set(res.matrices)
        click.echo(f"stored tables reproduced: {'yes' if same else 'NO'}")
        if not same:
            sys.exit(EXIT_RUNTIME)


@cli.command()
def selftest():
    """Report host real-time capabilities and which compiled kernels are present."""
    from .rtagent import host_capabilities
    from .sim import kernel_name

    caps = host_capabilities()
    caps["sim_kernel"] = kernel_name()
    click.echo(json.dumps(caps, indent=2, default=str))


@cli.command()
@click.option("--code", default="SF,SD,DF,DD,C", show_default=True, help="Test cases to simulate.")
@click.option("--phase-s", type=float, default=5.0, show_default=True)
@click.option("--params", type=click.Path(exists=True, dir_okay=False), default=None)
def calibrate(code, phase_s, params):
    """Simulate a few cases and compare their maxima with the reference targets."""
    from .sim.calibration import calibration_table

    click.echo(calibration_table(_load_params(params), [c.strip() for c in code.split(",")], phase_s))


@cli.group()
def flood():
    """Paced packet floods (need raw-socket privilege)."""


def _emit_telemetry(t, out):
    if out:
        t.save(out)
    click.echo(json.dumps(t.to_dict(), indent=2))


@flood.command("syn")
@click.option("--target", required=True)
@click.option("--rate", type=int, default=100_000, show_default=True, help="Packets per second.")
@click.option("--duration", type=float, default=10.0, show_default=True)
@click.option("--port", type=int, default=80, show_default=True)
@click.option("--rotate-ports", is_flag=True, help="Cycle the destination port over 1-65535.")
@click.option("--random-source", is_flag=True, help="Spoof a random source address per packet.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Telemetry JSONL file.")
def flood_syn(target, rate, duration, port, rotate_ports, random_source, out):
    from .attack import syn_flood

    t = syn_flood(target, rate, duration, dport=port, port_strategy="rotate" if rotate_ports else "fixed",
                  random_source=random_source)
    _emit_telemetry(t, out)


@flood.command("arp")
@click.option("--iface", required=True)
@click.option("--target", required=True, help="IP announced in the gratuitous requests.")
@click.option("--rate", type=int, default=100_000, show_default=True)
@click.option("--duration", type=float, default=10.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def flood_arp(iface, target, rate, duration, out):
    from .attack import arp_flood

    _emit_telemetry(arp_flood(iface, target, rate, duration), out)


@cli.command()
@click.option("--target", required=True)
@click.option("--ports", default="1-65535", show_default=True)
@click.option("--parallelism", type=int, default=1024, show_default=True)
@click.option("--timeout", type=float, default=0.5, show_default=True)
@click.option("--retries", type=int, default=1, show_default=True)
def scan(target, ports, parallelism, timeout, retries):
    """SYN-scan a port range and classify open/closed/filtered."""
    from .attack import syn_scan

    s = syn_scan(target, _ports(ports), parallelism, timeout, retries)
    click.echo(json.dumps(s.to_dict(), indent=2))


@cli.command()
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--pin", default="0", show_default=True, help="Comma-separated core list.")
@click.option("--duration", type=float, default=10.0, show_default=True)
def stress(workers, pin, duration):
    """Busy-spin pinned workers and report per-core user utilization."""
    from .attack import cpu_stress

    click.echo(json.dumps(cpu_stress(workers, _cores(pin), duration).to_dict(), indent=2))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="bench", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_RUNTIME
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except BenchError as e:
        click.echo(f"error: {e}", err=True)
        return e.exit_code
    except PermissionError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_PRIVILEGE
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_CONFIG
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        click.echo(f"error: {type(e).__name__}: {e}", err=True)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
