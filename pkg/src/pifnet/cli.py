"""Command-line interface for pifnet."""

import functools
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

import click
import numpy as np
import scipy
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .analysis.fluid import integrate_fluid
from .analysis.stability import check_partial_stability
from .analysis.verification import (
    bridge_monotonicity,
    divergence_check,
    dominance_check,
    empirical_rate_check,
    fluid_deviation,
    renewal_rate_estimate,
    return_time_estimate,
    spike_rate_window_check,
    tv_diagnostic,
)
from .core.errors import ConfigError, ParameterError, PifnetError
from .core.models import CheckResult, RunConfig
from .core.network import simulate as run_simulation
from .core.parsers.config import CHECK_NAMES, load_config
from .output import files, terminal

logger = logging.getLogger("pifnet")

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def setup_logging(verbose: bool):
    """Route library logging through rich on stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def versions() -> dict[str, str]:
    return {"pifnet": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def run_options(fn: Callable) -> Callable:
    """Options shared by every subcommand."""
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False, path_type=Path),
                  help="Run configuration (JSON)")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
                  help="Output directory (overrides outputs.directory)")
    @click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Master seed (overrides sim.seed)")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                  help="Sample file format (overrides outputs.format)")
    @click.option("--verbose", "-v", is_flag=True, help="Debug logging")
    @functools.wraps(fn)
    def wrapper(config_path: Path, out_dir: Optional[Path], seed: Optional[int], fmt: Optional[str],
                verbose: bool, **kwargs):
        setup_logging(verbose)
        try:
            config = load_config(config_path, seed=seed)
        except ConfigError as exc:
            terminal.print_error(str(exc))
            sys.exit(EXIT_CONFIG)
        except OSError as exc:
            terminal.print_error(f"cannot read {config_path}: {exc}")
            sys.exit(EXIT_RUNTIME)
        if out_dir is not None:
            config.outputs.directory = str(out_dir)
        if fmt is not None:
            config.outputs.format = fmt

        logger.info("pifnet %s (numpy %s, scipy %s) seed %d",
                    __version__, np.__version__, scipy.__version__, config.sim.seed)
        try:
            code = fn(config, **kwargs)
        except (ConfigError, ParameterError) as exc:
            terminal.print_error(str(exc))
            sys.exit(EXIT_CONFIG)
        except (PifnetError, OSError) as exc:
            terminal.print_error(str(exc))
            sys.exit(EXIT_RUNTIME)
        sys.exit(code or 0)

    return wrapper


def _out(config: RunConfig) -> Path:
    return Path(config.outputs.directory)


def _z0(config: RunConfig) -> np.ndarray:
    if config.sim.z0 is not None:
        return np.array(config.sim.z0)
    return np.diag(config.network.mean_matrix).copy()


def _phi0(config: RunConfig) -> np.ndarray:
    if config.sim.phi0 is not None:
        return np.array(config.sim.phi0)
    return np.full(config.network.n, 1.0 / config.network.n)


@click.group()
@click.version_option(version=__version__, prog_name="pifnet")
def main():
    """pifnet - Perfect integrate-and-fire inhibitory networks.

    Simulate networks driven by Lévy noise, integrate their fluid limits,
    classify stability, and run the statistical verification battery.
    """
    pass


@main.command()
@run_options
def simulate(config: RunConfig):
    """Simulate every replica and write samples and spike logs."""
    sim = config.sim
    out = _out(config)
    written = []
    records = []
    for replica in range(sim.replicas):
        record = run_simulation(
            config.network, _z0(config), sim.horizon, sim.dt, sim.seed,
            replica=replica, sample_stride=sim.sample_stride, max_spikes=sim.max_spikes,
        )
        if config.outputs.format == "csv":
            written.append(files.write_samples_csv(out / f"samples-r{replica}.csv", record))
        else:
            written.append(files.write_samples(out / f"simulate-r{replica}.jsonl", record))
        written.append(files.write_spike_log(out / f"spikes-r{replica}.csv", record))
        records.append(record)

    files.write_metadata(out, "simulate", sim.seed, versions(), written)
    terminal.print_simulation(records)
    terminal.print_success(f"Wrote {len(written)} files to {out}")


@main.command()
@run_options
def fluid(config: RunConfig):
    """Integrate the fluid limit from sim.phi0 up to sim.horizon."""
    network = config.network
    trajectory = integrate_fluid(_phi0(config), network.mean_matrix, network.nu, config.sim.horizon)
    out = _out(config)
    path = files.write_json(out / "fluid.json", trajectory.to_dict())
    files.write_metadata(out, "fluid", config.sim.seed, versions(), [path])
    terminal.print_fluid(trajectory)


@main.command()
@run_options
def analyze(config: RunConfig):
    """Compute steady rates and the subset stability conditions."""
    network = config.network
    report = check_partial_stability(network.mean_matrix, network.nu)
    out = _out(config)
    path = files.write_json(out / "stability.json", report.to_dict())
    files.write_metadata(out, "analyze", config.sim.seed, versions(), [path])
    terminal.print_stability(report)


def _run_check(name: str, config: RunConfig) -> CheckResult:
    network, sim, verify = config.network, config.sim, config.verify
    common = {"dt": sim.dt, "seed": sim.seed}
    pooled = {**common, "replicas": sim.replicas, "workers": sim.workers}

    if name == "dominance":
        return dominance_check(network, _z0(config), sim.horizon, max_spikes=sim.max_spikes, **pooled)
    if name == "renewal_rate":
        i = verify.neuron
        return renewal_rate_estimate(network.specs[i], network.signal_laws[i][i], sim.horizon, **pooled)
    if name == "empirical_rate":
        return empirical_rate_check(network, sim.horizon, burn_in=sim.burn_in, z0=_z0(config),
                                    max_spikes=sim.max_spikes, **pooled)
    if name == "divergence":
        return divergence_check(network, sim.horizon, z0=_z0(config), max_spikes=sim.max_spikes, **pooled)
    if name == "fluid_deviation":
        return fluid_deviation(network, _phi0(config), sim.scale, max_spikes=sim.max_spikes, **common)
    if name == "spike_rate_window":
        return spike_rate_window_check(network, _phi0(config), sim.scale, sim.window, t=sim.window_start,
                                       max_spikes=sim.max_spikes, **pooled)
    if name == "return_time":
        k0 = sim.k0 or 10.0 * float(np.diag(network.mean_matrix).max())
        starts = None if sim.z0 is None else [sim.z0]
        return return_time_estimate(network, k0, sim.epsilon, starts=starts,
                                    max_spikes=sim.max_spikes, **pooled)
    if name == "bridge_monotonicity":
        return bridge_monotonicity(verify.bridge_k, verify.bridge_sigma, verify.bridge_t, verify.bridge_x,
                                   replicas=verify.bridge_replicas, seed=sim.seed)
    if name == "tv_diagnostic":
        diag = np.diag(network.mean_matrix)
        start_a = verify.tv_start_a if verify.tv_start_a is not None else diag
        start_b = verify.tv_start_b if verify.tv_start_b is not None else 25.0 * diag
        return tv_diagnostic(network, start_a, start_b, sim.horizon, bins=sim.bins,
                             max_spikes=sim.max_spikes, **pooled)
    raise ConfigError(f"unknown check '{name}'")


@main.command()
@run_options
@click.option("--check", "checks", multiple=True, type=click.Choice(CHECK_NAMES),
              help="Check to run (repeatable; default: verify.checks)")
def verify(config: RunConfig, checks: tuple[str, ...]):
    """Run verification checks; exits 1 if any fails."""
    names = checks or config.verify.checks
    results = [_run_check(name, config) for name in names]
    out = _out(config)
    path = files.write_json(out / "checks.json", [r.to_dict() for r in results])
    files.write_metadata(out, "verify", config.sim.seed, versions(), [path])
    terminal.print_checks(results)

    failed = [r.name for r in results if not r.passed]
    if failed:
        terminal.print_warning(f"Failed checks: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    terminal.print_success(f"All {len(results)} checks passed")
    return 0


if __name__ == "__main__":
    main()
