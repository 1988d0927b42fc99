"""Command-line interface.

Subcommands wrap the library operations and speak the documented file
formats.  Exit codes: 0 success, 2 configuration/usage error, 3 numerical
failure.
"""

from __future__ import annotations

import functools
import json
import math
import sys

import click
import numpy as np

from . import __version__
from .em import EMConfig, run_em
from .errors import ConfigError, NumericalError
from .experiments import build_config, parse_config_text, preset_config, run_experiment
from .invariants import debias as debias_triple
from .invariants import empirical_invariants
from .orbit import identifiability_bound, jacobian_rank_test, orbit_select_map
from .serialize import (
    batch_to_csv,
    batch_to_json,
    em_result_to_json,
    load_container,
    prior_from_json,
    read_json,
    signal_to_csv,
    signal_to_json,
    triple_to_json,
    write_json,
    write_table,
)
from .signal import (
    HighResSignal,
    ModelParams,
    ObservationBatch,
    PriorSpec,
    generate_batch,
    sample_bandlimited_signal,
    sample_prior,
)


def _guarded(fn):
    """Map library errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        # LinAlgError subclasses ValueError, so the numerical branch goes first
        except (NumericalError, np.linalg.LinAlgError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)
        except (ConfigError, ValueError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _emit_json(obj, output) -> None:
    if output is None:
        click.echo(json.dumps(obj, indent=2, sort_keys=True))
    else:
        write_json(obj, output)


@click.group()
@click.version_option(version=__version__, prog_name="srmra")
def main() -> None:
    """Shifted, down-sampled, noisy 1-D observations: generation,
    invariant statistics, orbit analysis, and EM recovery."""


@main.command()
@click.option("--m", type=int, required=True, help="signal length")
@click.option("--l", type=int, required=True, help="samples per observation")
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--n", type=int, required=True, help="observation count")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--signal-in", type=click.Path(exists=True), default=None,
              help="JSON signal container to observe (otherwise a signal is sampled)")
@click.option("--bandlimit", type=int, default=None,
              help="sample a fresh bandlimited signal with this bandlimit")
@click.option("--prior", "prior_path", type=click.Path(exists=True), default=None,
              help="sample the signal from this prior spec instead")
@click.option("--signal-out", type=click.Path(), default=None,
              help="also write the observed signal as a JSON container")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True, help="batch output format")
@click.option("--output", type=click.Path(), required=True)
@_guarded
def generate(m, l, sigma, n, seed, signal_in, bandlimit, prior_path,
             signal_out, fmt, output) -> None:
    """Draw a batch of shifted, down-sampled, noisy observations."""
    root = np.random.SeedSequence(seed)
    sig_stream, batch_stream = root.spawn(2)
    if signal_in is not None:
        signal = load_container(signal_in)
        if not isinstance(signal, HighResSignal):
            raise ConfigError(f"{signal_in} is not a signal container")
    elif prior_path is not None:
        prior = prior_from_json(read_json(prior_path))
        signal = sample_prior(prior, m, np.random.default_rng(sig_stream))
    elif bandlimit is not None:
        signal = sample_bandlimited_signal(m, bandlimit, np.random.default_rng(sig_stream))
    else:
        raise ConfigError("need one of --signal-in, --bandlimit or --prior")

    batch_seed = int(batch_stream.generate_state(1, dtype=np.uint64)[0])
    params = ModelParams(M=m, L=l, sigma=sigma, N=n, seed=batch_seed)
    batch = generate_batch(signal, params)
    if fmt == "csv":
        batch_to_csv(batch, output)
    else:
        write_json(batch_to_json(batch), output)
    if signal_out is not None:
        write_json(signal_to_json(signal), signal_out)


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="batch JSON container")
@click.option("--debias", is_flag=True, help="remove the noise bias using the batch sigma")
@click.option("--power-csv", type=click.Path(), default=None,
              help="also write the power spectrum as a one-line CSV")
@click.option("--seed", type=int, default=0, help="accepted for uniformity; unused")
@click.option("--output", type=click.Path(), default=None)
@_guarded
def invariants(input_path, debias, power_csv, seed, output) -> None:
    """Empirical invariant triple of a batch (optionally debiased)."""
    batch = load_container(input_path)
    if not isinstance(batch, ObservationBatch):
        raise ConfigError(f"{input_path} is not a batch container")
    triple = empirical_invariants(batch)
    if debias:
        triple = debias_triple(triple, batch.params.sigma, batch.params.L)
    out = triple_to_json(triple)
    out["debiased"] = bool(debias)
    _emit_json(out, output)
    if power_csv is not None:
        signal_to_csv(triple.power_spectrum, power_csv)


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="batch JSON container")
@click.option("--prior", "prior_path", type=click.Path(exists=True), required=True,
              help="prior spec JSON")
@click.option("--tol", type=float, default=1e-5, show_default=True)
@click.option("--max-iter", type=int, default=100, show_default=True)
@click.option("--restarts", type=int, default=1, show_default=True)
@click.option("--bandlimit", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--estimate-csv", type=click.Path(), default=None,
              help="also write the estimate as a one-line CSV")
@click.option("--output", type=click.Path(), required=True)
@_guarded
def estimate(input_path, prior_path, tol, max_iter, restarts, bandlimit,
             seed, estimate_csv, output) -> None:
    """Run the EM estimator on a stored batch."""
    batch = load_container(input_path)
    if not isinstance(batch, ObservationBatch):
        raise ConfigError(f"{input_path} is not a batch container")
    prior = prior_from_json(read_json(prior_path))
    cfg = EMConfig(max_iter=max_iter, tol=tol, restarts=restarts,
                   seed=seed, bandlimit=bandlimit)
    result = run_em(batch, prior, cfg)
    write_json(em_result_to_json(result), output)
    if estimate_csv is not None:
        signal_to_csv(result.estimate, estimate_csv)


@main.command()
@click.option("--signal", "signal_path", type=click.Path(exists=True), required=True,
              help="signal JSON container")
@click.option("--l", type=int, required=True, help="samples per observation")
@click.option("--prior", "prior_path", type=click.Path(exists=True), required=True)
@click.option("--budget", type=int, default=10**6, show_default=True)
@click.option("--seed", type=int, default=0, help="accepted for uniformity; unused")
@click.option("--output", type=click.Path(), default=None)
@_guarded
def orbit(signal_path, l, prior_path, budget, seed, output) -> None:
    """Enumerate the sub-signal orbit and pick the least prior energy."""
    signal = load_container(signal_path)
    if not isinstance(signal, HighResSignal):
        raise ConfigError(f"{signal_path} is not a signal container")
    prior = prior_from_json(read_json(prior_path))
    k = signal.M // l if l >= 1 and signal.M % l == 0 else None
    if k is None:
        raise ConfigError(f"l={l} must divide M={signal.M}")
    best, value, unique = orbit_select_map(signal, l, prior, budget=budget)
    report = {
        "orbit_size": math.factorial(k) * l**k,
        "min_value": float(value),
        "unique": bool(unique),
        "best": [float(v) for v in best.values],
    }
    _emit_json(report, output)


@main.command()
@click.option("--l", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--trials", type=int, default=3, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(), default=None,
              help=".csv writes the identifiability table, otherwise JSON")
@_guarded
def identifiability(l, k, trials, tol, seed, output) -> None:
    """Numerical-rank identifiability check for k sub-signals of length l."""
    if l < 1 or k < 1:
        raise ConfigError("l and k must be positive")
    bound = identifiability_bound(l)
    rank, ok = jacobian_rank_test(l, k, trials=trials, tol=tol, seed=seed)
    if output is not None and str(output).endswith(".csv"):
        write_table(output, "identifiability",
                    [(l, k, float(bound), rank, ok)])
        return
    report = {
        "L": l,
        "K": k,
        "P_of_L": float(bound),
        "P_of_L_exact": f"{bound.numerator}/{bound.denominator}",
        "rank": rank,
        "identifiable": bool(ok),
    }
    _emit_json(report, output)


@main.command()
@click.option("--preset", type=str, default=None,
              help="exp1 | exp2-high | exp2-low | exp3")
@click.option("--id", "experiment_id", type=click.Choice(["1", "2", "3"]), default=None,
              help="shorthand for the default preset of that experiment")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="flat key=value config file layered over the preset")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="config override, repeatable")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--scale-factor", type=float, default=None,
              help="override the config scale_factor")
@click.option("--output", type=click.Path(), required=True, help="output directory")
@_guarded
def experiment(preset, experiment_id, config_path, overrides, seed,
               scale_factor, output) -> None:
    """Run one of the three benchmark experiments."""
    if preset is None and experiment_id is not None:
        preset = {"1": "exp1", "2": "exp2-high", "3": "exp3"}[experiment_id]
    mapping = preset_config(preset) if preset is not None else {}
    if config_path is not None:
        with open(config_path) as fh:
            mapping.update(parse_config_text(fh.read()))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    if seed is not None:
        mapping["seed"] = str(seed)
    if scale_factor is not None:
        mapping["scale_factor"] = str(scale_factor)
    if not mapping:
        raise ConfigError("no configuration: pass --preset, --id or --config")
    cfg = build_config(mapping)
    meta = run_experiment(cfg, output)
    summary = {k: meta[k] for k in ("experiment_id", "seed", "version", "wall_time_seconds")}
    click.echo(json.dumps(summary, sort_keys=True))


if __name__ == "__main__":
    main()
