"""Signal recovery from shifted, down-sampled, noisy observations.

Recovers a length-M signal from many circularly shifted, K-fold
down-sampled, noisy copies.  The package provides the generative model
(:mod:`srmra.signal`), shift-invariant moments with noise-bias correction
(:mod:`srmra.invariants`), sub-signal orbit analysis and identifiability
checks (:mod:`srmra.orbit`), a prior-regularized EM estimator
(:mod:`srmra.em`), and reproducible experiment harnesses
(:mod:`srmra.experiments`) behind the ``srmra`` command line tool.
"""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalError
from .signal import (
    HighResSignal,
    ModelParams,
    ObservationBatch,
    PriorSpec,
    circular_shift,
    dft,
    idft,
    generate_batch,
    batch_from_shifts,
    sample_observation,
    sample_prior,
    sample_bandlimited_signal,
    one_over_f_profile,
    normalize_power,
    project_bandlimit,
    snr_value,
)
from .invariants import (
    BiasTerms,
    InvariantTriple,
    autocorrelation,
    bias_terms,
    debias,
    empirical_invariants,
    fourier_invariants,
    invariant_distance,
    mixed_invariants,
)
from .orbit import (
    OrbitElement,
    SubSignalSet,
    apply_orbit_element,
    compose_elements,
    coupon_collector_expectation,
    simulate_coupon_collection,
    decompose,
    demix_invariants,
    identifiability_bound,
    jacobian_rank_test,
    orbit_select_map,
    quadratic_form,
    recompose,
    recover_orbit_noiseless,
)
from .em import (
    EMConfig,
    EMResult,
    e_step,
    log_likelihood,
    log_posterior,
    m_step,
    per_frequency_error,
    relative_error,
    run_em,
)
from .experiments import (
    ExperimentConfig,
    ResultRow,
    build_config,
    fit_loglog_slope,
    flat_band_profile,
    parse_config_text,
    preset_config,
    run_experiment,
    run_experiment_1,
    run_experiment_2,
    run_experiment_3,
)

__all__ = [name for name in dir() if not name.startswith("_")]
