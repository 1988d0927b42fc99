"""Experiment harnesses: seeded sweeps over the generator + estimator
pipeline, with versioned CSV tables and a JSON metadata sidecar per run.

Config grammar (flat text file): one ``key = value`` per line, ``#``
comments, blank lines ignored.  Keys:

    experiment    1 | 2 | 3
    m, l          signal length and sample count (l must divide m)
    l_sweep       comma list of l values (experiment 3)
    bandlimit     largest retained frequency index (experiment 1)
    snr           single SNR value; ``inf`` selects the noiseless path
    snr_sweep     comma list of SNR values (experiment 2)
    n             observations per batch
    trials        independent repeats
    restarts      EM restarts per trial
    seed          root seed for the whole run
    scale_factor  multiplies n and trials only (down-scaling knob)
    em_max_iter   EM iteration cap (default 100)
    em_tol        EM relative-change tolerance (default 1e-5)
    shift_stride  coarse-shift stride for the noiseless variant (default 1)

Every run is reproducible from (config, seed): rerunning writes identical
tables except for the wall_time_seconds column.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time

import numpy as np

from . import __version__
from .em import EMConfig, align_estimate, per_frequency_error, relative_error, run_em
from .errors import ConfigError
from .orbit import decompose, recover_orbit_noiseless
from .serialize import format_float, write_json, write_table
from .signal import (
    HighResSignal,
    ModelParams,
    PriorSpec,
    batch_from_shifts,
    generate_batch,
    one_over_f_profile,
    project_bandlimit,
    sample_bandlimited_signal,
    sample_prior,
)

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "PRESETS",
    "parse_config_text",
    "preset_config",
    "build_config",
    "fit_loglog_slope",
    "flat_band_profile",
    "run_experiment",
    "run_experiment_1",
    "run_experiment_2",
    "run_experiment_3",
]


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: int
    m: int
    l: int | None = None
    l_sweep: tuple[int, ...] | None = None
    bandlimit: int | None = None
    snr: float | None = None
    snr_sweep: tuple[float, ...] | None = None
    n: int = 1
    trials: int = 1
    restarts: int = 1
    seed: int = 0
    scale_factor: float = 1.0
    em_max_iter: int = 100
    em_tol: float = 1e-5
    shift_stride: int = 1

    @property
    def n_effective(self) -> int:
        return max(1, round(self.n * self.scale_factor))

    @property
    def trials_effective(self) -> int:
        return max(1, round(self.trials * self.scale_factor))


@dataclasses.dataclass(frozen=True)
class ResultRow:
    experiment_id: int
    trial: int
    snr: float
    M: int
    L: int
    N: int
    relative_error: float
    iterations: int
    converged: bool
    wall_time_seconds: float

    def cells(self):
        return (self.experiment_id, self.trial, self.snr, self.M, self.L,
                self.N, self.relative_error, self.iterations, self.converged,
                self.wall_time_seconds)

    @classmethod
    def from_cells(cls, cells) -> "ResultRow":
        return cls(
            experiment_id=int(cells[0]), trial=int(cells[1]),
            snr=float(cells[2]), M=int(cells[3]), L=int(cells[4]),
            N=int(cells[5]), relative_error=float(cells[6]),
            iterations=int(cells[7]), converged=cells[8] == "true",
            wall_time_seconds=float(cells[9]),
        )


_INT_KEYS = {"experiment", "m", "l", "bandlimit", "n", "trials", "restarts",
             "seed", "em_max_iter", "shift_stride"}
_FLOAT_KEYS = {"snr", "scale_factor", "em_tol"}
_SWEEP_KEYS = {"l_sweep", "snr_sweep"}

PRESETS = {
    "exp1": {
        "experiment": "1", "m": "120", "l": "15", "bandlimit": "15",
        "snr": "1", "n": "10000", "trials": "5", "restarts": "5", "seed": "0",
    },
    "exp2-high": {
        "experiment": "2", "m": "64", "l": "32",
        "snr_sweep": ",".join(format_float(v) for v in np.logspace(0.2, 2.0, 8)),
        "n": "100", "trials": "10", "restarts": "100", "seed": "0",
    },
    "exp2-low": {
        "experiment": "2", "m": "32", "l": "16",
        "snr_sweep": ",".join(format_float(v) for v in np.logspace(-0.6, 0.0, 3)),
        "n": "20000", "trials": "5", "restarts": "20", "seed": "0",
    },
    "exp3": {
        "experiment": "3", "m": "60", "l_sweep": "10,12,15,20,30,60",
        "snr": "5", "n": "1000", "trials": "5", "restarts": "10", "seed": "0",
    },
}


def parse_config_text(text: str) -> dict:
    """Parse the flat key=value grammar into a string-to-string mapping."""
    out: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {ln}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"config line {ln}: empty key or value")
        out[key] = value
    return out


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return dict(PRESETS[name])


def build_config(mapping: dict) -> ExperimentConfig:
    """Validate a string mapping and produce the typed config."""
    known = _INT_KEYS | _FLOAT_KEYS | _SWEEP_KEYS
    fields: dict = {}
    for key, value in mapping.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key in _INT_KEYS:
                fields[key] = int(value)
            elif key in _FLOAT_KEYS:
                fields[key] = float(value)
            elif key == "l_sweep":
                fields[key] = tuple(int(tok) for tok in str(value).split(","))
            else:
                fields[key] = tuple(float(tok) for tok in str(value).split(","))
        except ValueError:
            raise ConfigError(f"config key {key!r}: cannot parse {value!r}")

    if "experiment" not in fields:
        raise ConfigError("config is missing the experiment key")
    exp = fields.pop("experiment")
    if exp not in (1, 2, 3):
        raise ConfigError(f"experiment must be 1, 2 or 3, got {exp}")
    if "m" not in fields:
        raise ConfigError("config is missing m")

    cfg = ExperimentConfig(experiment_id=exp, **fields)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: ExperimentConfig) -> None:
    if cfg.m < 1 or cfg.n < 1 or cfg.trials < 1 or cfg.restarts < 1:
        raise ConfigError("m, n, trials and restarts must be positive")
    if cfg.scale_factor <= 0:
        raise ConfigError("scale_factor must be positive")
    if cfg.em_tol <= 0 or cfg.em_max_iter < 1:
        raise ConfigError("em_tol must be positive and em_max_iter >= 1")
    ls = cfg.l_sweep if cfg.l_sweep is not None else ()
    if cfg.l is not None:
        ls = ls + (cfg.l,)
    if not ls:
        raise ConfigError("config needs l or l_sweep")
    for l in ls:
        if l < 1 or cfg.m % l != 0:
            raise ConfigError(f"l={l} must be a positive divisor of m={cfg.m}")
    snrs = cfg.snr_sweep if cfg.snr_sweep is not None else ()
    if cfg.snr is not None:
        snrs = snrs + (cfg.snr,)
    if not snrs:
        raise ConfigError("config needs snr or snr_sweep")
    for s in snrs:
        if not s > 0:
            raise ConfigError(f"snr values must be positive, got {s}")
    if cfg.experiment_id == 1:
        if cfg.l is None or cfg.snr is None:
            raise ConfigError("experiment 1 needs single l and snr values")
        if cfg.bandlimit is None:
            raise ConfigError("experiment 1 needs a bandlimit")
        if 2 * cfg.bandlimit + 1 > cfg.m:
            raise ConfigError("bandlimit too large for m")
        if cfg.shift_stride < 1:
            raise ConfigError("shift_stride must be >= 1")
    if cfg.experiment_id == 2 and not (cfg.snr_sweep or cfg.snr):
        raise ConfigError("experiment 2 needs snr_sweep")
    if cfg.experiment_id == 3 and cfg.l_sweep is None:
        raise ConfigError("experiment 3 needs l_sweep")


def _config_echo(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["n_effective"] = cfg.n_effective
    d["trials_effective"] = cfg.trials_effective
    for key in ("l_sweep", "snr_sweep"):
        if d[key] is not None:
            d[key] = list(d[key])
    return d


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log10(y) against log10(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log10(x[keep]), np.log10(y[keep]), 1)[0])


def flat_band_profile(m: int, bandlimit: int, out_of_band: float = 1e-4) -> np.ndarray:
    """Power profile that is flat inside |k| <= bandlimit and tiny outside;
    in-band level m/(2*bandlimit+1) so the expected squared norm is ~m."""
    freqs = np.minimum(np.arange(m), m - np.arange(m))
    profile = np.full(m, out_of_band)
    profile[freqs <= bandlimit] = m / (2 * bandlimit + 1)
    return profile


def _trial_seeds(root_seed: int, count: int):
    return np.random.SeedSequence(root_seed).spawn(count)


def _spawn_ints(stream, count: int):
    return [int(v) for v in stream.generate_state(count, dtype=np.uint64)]


def _sigma_for(snr: float) -> float:
    if math.isinf(snr):
        return 0.0
    return 1.0 / math.sqrt(snr)


def _column_mean_defined(rows: np.ndarray) -> np.ndarray:
    """Columnwise mean over non-NaN entries; NaN where none are defined."""
    defined = ~np.isnan(rows)
    counts = defined.sum(axis=0)
    sums = np.where(defined, rows, 0.0).sum(axis=0)
    out = np.full(rows.shape[1], np.nan)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz]
    return out


def run_experiment_1(cfg: ExperimentConfig, output_dir) -> dict:
    """Bandlimited recovery with in-iteration low-frequency projection.

    Per trial: fresh bandlimited signal, batch, EM with a flat in-band
    prior.  Writes results.csv, per_frequency.csv (mean over trials of the
    per-frequency errors for estimate and low-passed baseline), and
    overlay.csv (trial 0 signals).  With snr=inf the batch is noiseless
    and recovery goes through cyclic-shift clustering of the observations
    instead of EM.
    """
    if cfg.experiment_id != 1:
        raise ConfigError("run_experiment_1 got a config for another experiment")
    os.makedirs(output_dir, exist_ok=True)
    t_start = time.perf_counter()
    m, l, b = cfg.m, cfg.l, cfg.bandlimit
    k = m // l
    sigma = _sigma_for(cfg.snr)
    n = cfg.n_effective
    trials = cfg.trials_effective
    prior = PriorSpec.circulant(flat_band_profile(m, b))

    rows: list[ResultRow] = []
    est_pf = np.full((trials, m // 2 + 1), np.nan)
    base_pf = np.full((trials, m // 2 + 1), np.nan)
    overlay_rows = None

    for trial, stream in enumerate(_trial_seeds(cfg.seed, trials)):
        sig_seed, batch_seed, em_seed = _spawn_ints(stream, 3)
        t0 = time.perf_counter()
        truth = sample_bandlimited_signal(m, b, np.random.default_rng(sig_seed))

        if sigma == 0.0:
            # Noiseless variant: coarse shifts only, so every observation is
            # a cyclic shift of the offset-0 sub-signal template.
            shifts = (np.arange(n) * cfg.shift_stride * k) % m
            batch = batch_from_shifts(truth, l, shifts)
            reps, _complete = recover_orbit_noiseless(batch)
            template = decompose(truth, l).subs[0]
            err = min(relative_error(rep, template) for rep in reps)
            rows.append(ResultRow(1, trial, cfg.snr, m, l, n, err, 0, True,
                                  time.perf_counter() - t0))
            continue

        params = ModelParams(M=m, L=l, sigma=sigma, N=n, seed=batch_seed)
        batch = generate_batch(truth, params)
        em_cfg = EMConfig(max_iter=cfg.em_max_iter, tol=cfg.em_tol,
                          restarts=cfg.restarts, seed=em_seed, bandlimit=b)
        result = run_em(batch, prior, em_cfg)
        err = relative_error(result.estimate, truth)
        est_pf[trial] = per_frequency_error(result.estimate, truth)
        baseline = project_bandlimit(truth.values, l // 2)
        base_pf[trial] = per_frequency_error(baseline, truth)
        if overlay_rows is None:
            aligned = align_estimate(result.estimate.values, truth.values)
            overlay_rows = [(pos, truth.values[pos], baseline[pos], aligned[pos])
                            for pos in range(m)]
        rows.append(ResultRow(1, trial, cfg.snr, m, l, n, err,
                              result.iterations, result.converged,
                              time.perf_counter() - t0))

    write_table(os.path.join(output_dir, "results.csv"), "results",
                [r.cells() for r in rows])
    meta = {
        "experiment_id": 1,
        "config": _config_echo(cfg),
        "seed": cfg.seed,
        "version": f"srmra-{__version__}",
        "wall_time_seconds": time.perf_counter() - t_start,
        "relative_errors": [r.relative_error for r in rows],
    }
    if sigma > 0.0:
        # nanmean warns on all-NaN columns (frequencies with zero truth
        # coefficient in every trial); average defined entries by hand.
        mean_est = _column_mean_defined(est_pf)
        mean_base = _column_mean_defined(base_pf)
        write_table(os.path.join(output_dir, "per_frequency.csv"), "per_frequency",
                    [(kf, mean_est[kf], mean_base[kf]) for kf in range(m // 2 + 1)])
        write_table(os.path.join(output_dir, "overlay.csv"), "overlay", overlay_rows)
        above = np.arange(m // 2 + 1) > l / 2
        defined = above & ~np.isnan(mean_est) & ~np.isnan(mean_base)
        meta["mean_high_freq_estimate_error"] = float(np.mean(mean_est[defined]))
        meta["mean_high_freq_baseline_error"] = float(np.mean(mean_base[defined]))
    write_json(meta, os.path.join(output_dir, "metadata.json"))
    return meta


def run_experiment_2(cfg: ExperimentConfig, output_dir) -> dict:
    """Error-versus-SNR sweep under the 1/f circulant prior.

    Writes results.csv (one row per snr x trial) and snr_curve.csv with
    the per-SNR median error; the fitted log-log slope lands in the
    metadata sidecar.
    """
    if cfg.experiment_id != 2:
        raise ConfigError("run_experiment_2 got a config for another experiment")
    os.makedirs(output_dir, exist_ok=True)
    t_start = time.perf_counter()
    m, l = cfg.m, cfg.l
    n = cfg.n_effective
    trials = cfg.trials_effective
    snrs = cfg.snr_sweep if cfg.snr_sweep is not None else (cfg.snr,)
    prior = PriorSpec.circulant(one_over_f_profile(m))

    rows: list[ResultRow] = []
    streams = _trial_seeds(cfg.seed, len(snrs) * trials)
    for i_snr, snr in enumerate(snrs):
        sigma = _sigma_for(snr)
        if sigma == 0.0:
            raise ConfigError("experiment 2 needs finite snr values")
        for trial in range(trials):
            stream = streams[i_snr * trials + trial]
            sig_seed, batch_seed, em_seed = _spawn_ints(stream, 3)
            t0 = time.perf_counter()
            truth = sample_prior(prior, m, np.random.default_rng(sig_seed))
            params = ModelParams(M=m, L=l, sigma=sigma, N=n, seed=batch_seed)
            batch = generate_batch(truth, params)
            em_cfg = EMConfig(max_iter=cfg.em_max_iter, tol=cfg.em_tol,
                              restarts=cfg.restarts, seed=em_seed)
            result = run_em(batch, prior, em_cfg)
            err = relative_error(result.estimate, truth)
            rows.append(ResultRow(2, trial, snr, m, l, n, err,
                                  result.iterations, result.converged,
                                  time.perf_counter() - t0))

    rows.sort(key=lambda r: (r.snr, r.trial))
    write_table(os.path.join(output_dir, "results.csv"), "results",
                [r.cells() for r in rows])
    medians = []
    for snr in snrs:
        errs = [r.relative_error for r in rows if r.snr == snr]
        medians.append((snr, float(np.median(errs)), len(errs)))
    medians.sort(key=lambda t: t[0])
    write_table(os.path.join(output_dir, "snr_curve.csv"), "snr_curve", medians)
    slope = fit_loglog_slope([t[0] for t in medians], [t[1] for t in medians])
    meta = {
        "experiment_id": 2,
        "config": _config_echo(cfg),
        "seed": cfg.seed,
        "version": f"srmra-{__version__}",
        "wall_time_seconds": time.perf_counter() - t_start,
        "slope": slope,
        "median_errors": [t[1] for t in medians],
    }
    write_json(meta, os.path.join(output_dir, "metadata.json"))
    return meta


def run_experiment_3(cfg: ExperimentConfig, output_dir) -> dict:
    """Mean recovery error across a sweep of sample counts l at fixed m.

    Writes results.csv and error_vs_L.csv; metadata carries the m**(2/3)
    reference marker.
    """
    if cfg.experiment_id != 3:
        raise ConfigError("run_experiment_3 got a config for another experiment")
    os.makedirs(output_dir, exist_ok=True)
    t_start = time.perf_counter()
    m = cfg.m
    n = cfg.n_effective
    trials = cfg.trials_effective
    sigma = _sigma_for(cfg.snr)
    if sigma == 0.0:
        raise ConfigError("experiment 3 needs a finite snr")
    prior = PriorSpec.circulant(one_over_f_profile(m))

    rows: list[ResultRow] = []
    streams = _trial_seeds(cfg.seed, len(cfg.l_sweep) * trials)
    for i_l, l in enumerate(cfg.l_sweep):
        for trial in range(trials):
            stream = streams[i_l * trials + trial]
            sig_seed, batch_seed, em_seed = _spawn_ints(stream, 3)
            t0 = time.perf_counter()
            truth = sample_prior(prior, m, np.random.default_rng(sig_seed))
            params = ModelParams(M=m, L=l, sigma=sigma, N=n, seed=batch_seed)
            batch = generate_batch(truth, params)
            em_cfg = EMConfig(max_iter=cfg.em_max_iter, tol=cfg.em_tol,
                              restarts=cfg.restarts, seed=em_seed)
            result = run_em(batch, prior, em_cfg)
            err = relative_error(result.estimate, truth)
            rows.append(ResultRow(3, trial, cfg.snr, m, l, n, err,
                                  result.iterations, result.converged,
                                  time.perf_counter() - t0))

    rows.sort(key=lambda r: (r.L, r.trial))
    write_table(os.path.join(output_dir, "results.csv"), "results",
                [r.cells() for r in rows])
    curve = []
    for l in sorted(cfg.l_sweep):
        errs = [r.relative_error for r in rows if r.L == l]
        curve.append((m, l, float(np.mean(errs)), len(errs)))
    write_table(os.path.join(output_dir, "error_vs_L.csv"), "error_vs_L", curve)
    meta = {
        "experiment_id": 3,
        "config": _config_echo(cfg),
        "seed": cfg.seed,
        "version": f"srmra-{__version__}",
        "wall_time_seconds": time.perf_counter() - t_start,
        "marker_L": float(m ** (2.0 / 3.0)),
        "mean_errors": {str(l): e for (_m, l, e, _c) in curve},
    }
    write_json(meta, os.path.join(output_dir, "metadata.json"))
    return meta


_RUNNERS = {1: run_experiment_1, 2: run_experiment_2, 3: run_experiment_3}


def run_experiment(cfg: ExperimentConfig, output_dir) -> dict:
    return _RUNNERS[cfg.experiment_id](cfg, output_dir)
