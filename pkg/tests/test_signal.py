"""Generator-side checks: shifts, DFT plumbing, sampling, priors, batches."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srmra.signal import (
    HighResSignal,
    ModelParams,
    ObservationBatch,
    PriorSpec,
    batch_from_shifts,
    circular_shift,
    dft,
    generate_batch,
    idft,
    normalize_power,
    one_over_f_profile,
    project_bandlimit,
    sample_bandlimited_signal,
    sample_observation,
    sample_prior,
    sampling_indices,
    snr_value,
)


def test_circular_shift_identity():
    assert np.array_equal(circular_shift([1, 2, 3, 4], 0), [1, 2, 3, 4])


def test_circular_shift_by_one():
    assert np.array_equal(circular_shift([1, 2, 3, 4], 1), [4, 1, 2, 3])


def test_circular_shift_modular_reduction():
    assert np.array_equal(circular_shift([1, 2, 3, 4], 5), [4, 1, 2, 3])


def test_circular_shift_index_formula():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(9)
    for s in range(-4, 14):
        out = circular_shift(z, s)
        want = np.array([z[(i - s) % 9] for i in range(9)])
        assert np.array_equal(out, want)


def test_circular_shift_preserves_norm_exactly():
    z = np.random.default_rng(1).standard_normal(13)
    for s in range(13):
        assert sorted(circular_shift(z, s)) == sorted(z)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=1, max_value=64),
    st.integers(min_value=-80, max_value=80),
    st.integers(min_value=-80, max_value=80),
    st.integers(min_value=0, max_value=2**31),
)
def test_shift_composition(n, a, b, seed):
    z = np.random.default_rng(seed).standard_normal(n)
    lhs = circular_shift(circular_shift(z, a), b)
    assert np.array_equal(lhs, circular_shift(z, a + b))


def test_shift_composition_exhaustive_small():
    for n in range(1, 9):
        z = np.random.default_rng(n).standard_normal(n)
        for a in range(n):
            for b in range(n):
                assert np.array_equal(
                    circular_shift(circular_shift(z, a), b),
                    circular_shift(z, a + b),
                )


def test_circular_shift_rejects_bad_input():
    with pytest.raises(ValueError):
        circular_shift(np.zeros((2, 2)), 1)
    with pytest.raises(ValueError):
        circular_shift(np.array([]), 1)


# --- DFT utilities ---------------------------------------------------------


def test_dft_delta():
    assert np.allclose(dft([1, 0, 0, 0]), [1, 1, 1, 1])


def test_dft_constant():
    assert np.allclose(dft([1, 1, 1, 1]), [4, 0, 0, 0])


def test_dft_idft_roundtrip():
    rng = np.random.default_rng(5)
    for n in (1, 2, 3, 8, 17):
        z = rng.standard_normal(n)
        assert np.max(np.abs(idft(dft(z)) - z)) <= 1e-10


def test_dft_matches_direct_sum():
    z = np.random.default_rng(2).standard_normal(6)
    k = np.arange(6)
    direct = np.array([np.sum(z * np.exp(-2j * np.pi * kk * k / 6)) for kk in k])
    assert np.allclose(dft(z), direct, atol=1e-12)


def test_project_bandlimit_zeroes_high_frequencies():
    z = np.random.default_rng(3).standard_normal(12)
    out = project_bandlimit(z, 3)
    zhat = np.fft.fft(out)
    freqs = np.minimum(np.arange(12), 12 - np.arange(12))
    assert np.max(np.abs(zhat[freqs > 3])) <= 1e-12
    # in-band content untouched
    assert np.allclose(zhat[freqs <= 3], np.fft.fft(z)[freqs <= 3])


def test_normalize_power_and_snr():
    z = np.random.default_rng(4).standard_normal(10) * 3.7
    out = normalize_power(z)
    assert np.isclose(out @ out, 10.0)
    assert np.isclose(snr_value(out, 0.5), 1 / 0.25)


# --- domain types ----------------------------------------------------------


def test_high_res_signal_validation():
    with pytest.raises(ValueError):
        HighResSignal(values=np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        HighResSignal(values=np.array([]))
    # bandlimit metadata must be honest
    z = np.random.default_rng(0).standard_normal(8)
    with pytest.raises(ValueError):
        HighResSignal(values=z, bandlimit=1)
    ok = HighResSignal(values=project_bandlimit(z, 1), bandlimit=1)
    assert ok.M == 8


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(M=10, L=4, sigma=1.0, N=3, seed=0)  # 4 does not divide 10
    with pytest.raises(ValueError):
        ModelParams(M=8, L=4, sigma=-1.0, N=3, seed=0)
    p = ModelParams(M=8, L=4, sigma=0.0, N=3, seed=0)
    assert p.K == 2


def test_observation_batch_validation():
    p = ModelParams(M=8, L=4, sigma=1.0, N=2, seed=0)
    with pytest.raises(ValueError):
        ObservationBatch(samples=np.zeros((2, 3)), params=p)
    with pytest.raises(ValueError):
        ObservationBatch(samples=np.zeros((2, 4)), params=p,
                         true_shifts=np.array([0, 8]))


def test_prior_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec.circulant(np.array([1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        PriorSpec.circulant(np.array([1.0, 2.0, 1.0, 3.0]))  # not symmetric
    with pytest.raises(ValueError):
        PriorSpec.dense(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        PriorSpec.dense(np.array([[1.0, 2.0], [2.0, 1.0]]))  # indefinite
    ok = PriorSpec.circulant(np.array([2.0, 1.0, 3.0, 1.0]))
    assert ok.form == "circulant" and ok.dim == 4


def test_circulant_precision_matrix_matches_spectral_form():
    prof = one_over_f_profile(8)
    prior = PriorSpec.circulant(prof)
    prec = prior.precision_matrix()
    # eigenvalues of the precision are the reciprocals of the profile
    eig = np.fft.fft(prec[:, 0])
    assert np.allclose(np.sort(eig.real), np.sort(1.0 / prof), atol=1e-10)
    assert np.max(np.abs(eig.imag)) <= 1e-10
    assert np.allclose(prec, prec.T)


# --- sampling operator -----------------------------------------------------


def test_sample_observation_shift_one():
    # with M=4, L=2 and shift 1 the samples are x[-1], x[1] = d, b
    x = HighResSignal(values=np.array([1.0, 2.0, 3.0, 4.0]))
    idx = sampling_indices(4, 2, 1)
    assert np.array_equal(x.values[idx], [4.0, 2.0])


def test_sample_observation_identity_case():
    x = HighResSignal(values=np.random.default_rng(0).standard_normal(6))
    p = ModelParams(M=6, L=6, sigma=0.0, N=1, seed=0)
    for seed in range(20):
        y, s = sample_observation(x, p, np.random.default_rng(seed))
        if s == 0:
            assert np.array_equal(y, x.values)
            break
    else:
        pytest.fail("never drew shift 0")


def test_shifts_K_apart_are_coarse_shifts_of_each_other():
    x = np.random.default_rng(1).standard_normal(4)
    for s in range(4):
        y1 = x[sampling_indices(4, 2, s)]
        y2 = x[sampling_indices(4, 2, s + 2)]
        assert np.allclose(y2, circular_shift(y1, 1))


def test_generate_batch_deterministic():
    x = sample_bandlimited_signal(12, 4, np.random.default_rng(0))
    p = ModelParams(M=12, L=4, sigma=0.8, N=40, seed=321)
    b1 = generate_batch(x, p)
    b2 = generate_batch(x, p)
    assert np.array_equal(b1.samples, b2.samples)
    assert np.array_equal(b1.true_shifts, b2.true_shifts)


def test_generate_batch_matches_per_observation_stream():
    x = sample_bandlimited_signal(8, 3, np.random.default_rng(1))
    p = ModelParams(M=8, L=4, sigma=0.0, N=3, seed=77)
    batch = generate_batch(x, p)
    streams = np.random.SeedSequence(77).spawn(3)
    for i, stream in enumerate(streams):
        y, s = sample_observation(x, p, np.random.default_rng(stream))
        assert np.array_equal(batch.samples[i], y)
        assert batch.true_shifts[i] == s


def test_noiseless_rows_are_templates():
    x = HighResSignal(values=np.random.default_rng(2).standard_normal(12))
    p = ModelParams(M=12, L=4, sigma=0.0, N=60, seed=5)
    batch = generate_batch(x, p)
    templates = np.stack([x.values[sampling_indices(12, 4, s)] for s in range(12)])
    for row in batch.samples:
        assert np.min(np.max(np.abs(templates - row), axis=1)) == 0.0


def test_noise_variance_monte_carlo():
    # x = 0 so every sample is pure noise with unit variance
    x = HighResSignal(values=np.zeros(8))
    p = ModelParams(M=8, L=4, sigma=1.0, N=10**5, seed=9)
    batch = generate_batch(x, p)
    flat = batch.samples.ravel()
    var = flat.var()
    se = np.sqrt(2.0 / flat.size)  # var of the sample variance of N(0,1)
    assert abs(var - 1.0) <= 3 * se


def test_shift_distribution_uniform():
    x = HighResSignal(values=np.zeros(6))
    p = ModelParams(M=6, L=3, sigma=0.0, N=30000, seed=3)
    batch = generate_batch(x, p)
    counts = np.bincount(batch.true_shifts, minlength=6)
    assert np.all(np.abs(counts - 5000) < 5 * np.sqrt(5000))


def test_batch_from_shifts_prescribed():
    x = HighResSignal(values=np.arange(8.0))
    shifts = np.array([0, 2, 5])
    batch = batch_from_shifts(x, 4, shifts)
    assert batch.params.sigma == 0.0
    for i, s in enumerate(shifts):
        assert np.array_equal(batch.samples[i], x.values[sampling_indices(8, 4, s)])
    assert np.array_equal(batch.true_shifts, shifts)


# --- priors ----------------------------------------------------------------


def test_sample_prior_identity_profile_covariance():
    # all-ones profile: unit covariance; normalization keeps it exact
    prior = PriorSpec.circulant(np.ones(6))
    draws = np.stack([
        sample_prior(prior, 6, np.random.default_rng(i)).values
        for i in range(10**4)
    ])
    cov = draws.T @ draws / draws.shape[0]
    se = np.sqrt(2.0 / draws.shape[0])
    assert np.max(np.abs(cov - np.eye(6))) <= 3 * max(se, np.sqrt(1.0 / draws.shape[0]))


def test_sample_prior_dense_identity_precision():
    prior = PriorSpec.dense(np.eye(5))
    draws = np.stack([
        sample_prior(prior, 5, np.random.default_rng(i)).values
        for i in range(10**4)
    ])
    cov = draws.T @ draws / draws.shape[0]
    assert np.max(np.abs(cov - np.eye(5))) <= 3 * np.sqrt(2.0 / draws.shape[0])


def test_sample_prior_raw_circulant_covariance():
    # with normalization off the draw is exactly Gaussian with the housed
    # covariance: circulant, first column ifft(profile)
    prof = one_over_f_profile(8)
    prior = PriorSpec.circulant(prof)
    draws = np.stack([
        sample_prior(prior, 8, np.random.default_rng(i), normalize=False).values
        for i in range(4 * 10**4)
    ])
    cov = draws.T @ draws / draws.shape[0]
    first = np.fft.ifft(prof).real
    idx = (np.arange(8)[:, None] - np.arange(8)[None, :]) % 8
    assert np.max(np.abs(cov - first[idx])) <= 0.05


def test_one_over_f_profile_spectrum_ratio():
    # raw (unnormalized) draws have E|xhat[f]|^2 = M * profile[f] exactly;
    # per-draw norm rescaling would couple the frequencies and skew ratios
    m = 16
    prior = PriorSpec.circulant(one_over_f_profile(m))
    draws = np.stack([
        sample_prior(prior, m, np.random.default_rng(i), normalize=False).values
        for i in range(10**4)
    ])
    power = np.mean(np.abs(np.fft.fft(draws, axis=1)) ** 2, axis=0)
    for f in (1, 2, 3):
        assert abs(power[f] / power[2 * f] - 2.0) <= 0.2


def test_one_over_f_profile_shape():
    prof = one_over_f_profile(10)
    assert prof.sum() == pytest.approx(10.0)
    assert np.allclose(prof, prof[(-np.arange(10)) % 10])
    # strictly decaying over the representative half beyond f=1
    half = prof[1:6]
    assert np.all(np.diff(half) < 0)


def test_sample_prior_normalizes_by_default():
    prior = PriorSpec.circulant(one_over_f_profile(12))
    x = sample_prior(prior, 12, np.random.default_rng(0))
    assert np.isclose(x.values @ x.values, 12.0)


def test_sample_bandlimited_constant_for_zero_band():
    x = sample_bandlimited_signal(9, 0, np.random.default_rng(0))
    assert np.allclose(x.values, x.values[0])


def test_sample_bandlimited_full_band_odd():
    x = sample_bandlimited_signal(9, 4, np.random.default_rng(1))
    assert np.min(np.abs(np.fft.fft(x.values))) > 1e-8


def test_sample_bandlimited_respects_band():
    for b in (0, 1, 3, 5):
        x = sample_bandlimited_signal(16, b, np.random.default_rng(b))
        freqs = np.minimum(np.arange(16), 16 - np.arange(16))
        xhat = np.fft.fft(x.values)
        assert np.max(np.abs(xhat[freqs > b])) <= 1e-9 * np.linalg.norm(xhat)
        assert x.bandlimit == b


def test_sample_bandlimited_rejects_wide_band():
    with pytest.raises(ValueError):
        sample_bandlimited_signal(8, 4, np.random.default_rng(0))


# --- coarse-grid commutation ----------------------------------------------


def test_subsampling_commutes_with_coarse_shifts():
    # shifting by c*K on the fine grid equals shifting the samples by c
    for m in range(2, 25):
        for l in range(1, m + 1):
            if m % l:
                continue
            k = m // l
            x = np.random.default_rng(m * 31 + l).standard_normal(m)
            base = x[sampling_indices(m, l, 0)]
            for c in range(l):
                shifted = circular_shift(x, c * k)
                assert np.array_equal(
                    shifted[sampling_indices(m, l, 0)],
                    circular_shift(base, c),
                )
