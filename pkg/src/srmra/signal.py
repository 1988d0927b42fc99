"""Core signal model: circular shifts, strided sampling, Gaussian priors,
and synthetic observation batches.

A length-M real signal x is circularly shifted by an offset s drawn
uniformly from {0, ..., M-1}, sampled at L equally spaced points (stride
K = M/L), and corrupted by i.i.d. Gaussian noise of standard deviation
sigma::

    y[l] = x[(l*K - s) mod M] + sigma * g[l],    g ~ N(0, I_L)

All containers are immutable after construction (their arrays are marked
read-only), so they can be shared freely across threads.  Randomness flows
through numpy Generators derived from explicit integer seeds; a batch is
bit-reproducible from (signal, params).

DFT convention: unnormalized forward transform,
``zhat[k] = sum_n z[n] * exp(-2j*pi*k*n/N)`` (the numpy default), with the
1/N factor on the inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HighResSignal",
    "ModelParams",
    "ObservationBatch",
    "PriorSpec",
    "circular_shift",
    "dft",
    "idft",
    "sample_observation",
    "generate_batch",
    "batch_from_shifts",
    "sample_prior",
    "sample_bandlimited_signal",
    "one_over_f_profile",
    "normalize_power",
    "project_bandlimit",
    "snr_value",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def dft(z) -> np.ndarray:
    """Unnormalized forward DFT: ``out[k] = sum_n z[n] exp(-2j pi k n / N)``."""
    return np.fft.fft(np.asarray(z))


def idft(coeffs) -> np.ndarray:
    """Inverse of :func:`dft` (includes the 1/N factor).  Returns complex."""
    return np.fft.ifft(np.asarray(coeffs))


def circular_shift(z, s: int) -> np.ndarray:
    """Cyclic right-shift: ``out[n] = z[(n - s) mod len(z)]``."""
    z = np.asarray(z)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("circular_shift expects a nonempty 1-D array")
    return np.roll(z, int(s))


def project_bandlimit(values, bandlimit: int) -> np.ndarray:
    """Zero every DFT coefficient with frequency index above ``bandlimit``.

    Frequency index means min(k, M-k); the result is real.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    if bandlimit < 0:
        raise ValueError("bandlimit must be nonnegative")
    coeffs = np.fft.fft(values)
    freqs = np.minimum(np.arange(m), m - np.arange(m))
    coeffs[freqs > bandlimit] = 0.0
    return np.fft.ifft(coeffs).real


def normalize_power(values) -> np.ndarray:
    """Rescale so that ``sum(x**2) == len(x)`` (unit average power)."""
    values = np.asarray(values, dtype=float)
    nrm = np.linalg.norm(values)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero signal")
    return values * np.sqrt(values.size) / nrm


def snr_value(values, sigma: float) -> float:
    """Signal-to-noise ratio ``||x||^2 / (M * sigma^2)``.

    Equals ``1 / sigma**2`` exactly when the signal is normalized to
    ``||x||^2 == M``.
    """
    values = np.asarray(values, dtype=float)
    if sigma <= 0:
        raise ValueError("sigma must be positive for an SNR value")
    return float(values @ values) / (values.size * sigma**2)


@dataclass(frozen=True)
class HighResSignal:
    """A real signal on the fine M-point grid.

    Parameters
    ----------
    values : array of float, shape (M,)
    bandlimit : int or None
        Largest nonzero frequency index.  When set, coefficients with
        min(k, M-k) > bandlimit must vanish (up to 1e-9 of the spectrum
        norm).
    """

    values: np.ndarray
    bandlimit: int | None = None

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("signal values must be a nonempty 1-D array")
        if not np.isfinite(values).all():
            raise ValueError("signal values must be finite")
        object.__setattr__(self, "values", values)
        if self.bandlimit is not None:
            b = int(self.bandlimit)
            if b < 0:
                raise ValueError("bandlimit must be nonnegative")
            coeffs = np.fft.fft(values)
            freqs = np.minimum(np.arange(values.size), values.size - np.arange(values.size))
            tail = np.abs(coeffs[freqs > b])
            if tail.size and tail.max() > 1e-9 * max(np.linalg.norm(coeffs), 1e-300):
                raise ValueError("signal is not bandlimited to the declared bandlimit")
            object.__setattr__(self, "bandlimit", b)

    @property
    def M(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ModelParams:
    """Observation model parameters.

    M is the fine grid size, L the number of observed samples (L must
    divide M, down-sampling factor K = M // L), sigma the noise level,
    N the number of observations, seed the batch seed.
    """

    M: int
    L: int
    sigma: float
    N: int
    seed: int

    def __post_init__(self):
        if self.M < 1 or self.L < 1:
            raise ValueError("M and L must be positive")
        if self.M % self.L != 0:
            raise ValueError(f"L={self.L} must divide M={self.M}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.N < 1:
            raise ValueError("N must be positive")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def K(self) -> int:
        return self.M // self.L


@dataclass(frozen=True)
class ObservationBatch:
    """N noisy down-sampled observations (rows) plus generation metadata."""

    samples: np.ndarray
    params: ModelParams
    true_shifts: np.ndarray | None = None

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        if samples.shape != (self.params.N, self.params.L):
            raise ValueError(
                f"samples shape {samples.shape} does not match params "
                f"(N={self.params.N}, L={self.params.L})"
            )
        object.__setattr__(self, "samples", samples)
        if self.true_shifts is not None:
            shifts = _frozen_array(self.true_shifts, dtype=np.int64)
            if shifts.shape != (self.params.N,):
                raise ValueError("true_shifts must have one entry per observation")
            if shifts.min() < 0 or shifts.max() >= self.params.M:
                raise ValueError("true_shifts must lie in [0, M)")
            object.__setattr__(self, "true_shifts", shifts)

    @property
    def N(self) -> int:
        return self.params.N


class PriorSpec:
    """Zero-mean Gaussian prior, either circulant or dense.

    Circulant form stores the covariance eigenvalues per frequency (the
    expected power spectrum profile); dense form stores the precision
    matrix directly.
    """

    __slots__ = ("form", "power_profile", "precision")

    def __init__(self, form: str, power_profile=None, precision=None):
        if form == "circulant":
            profile = _frozen_array(power_profile)
            if profile.ndim != 1 or profile.size < 1:
                raise ValueError("power profile must be a nonempty 1-D array")
            if not (profile > 0).all():
                raise ValueError("power profile entries must be strictly positive")
            mirrored = profile[(-np.arange(profile.size)) % profile.size]
            if not np.allclose(profile, mirrored, rtol=1e-12, atol=0):
                raise ValueError("power profile must be conjugate-symmetric: p[k] == p[M-k]")
            self.power_profile = profile
            self.precision = None
        elif form == "dense":
            prec = _frozen_array(precision)
            if prec.ndim != 2 or prec.shape[0] != prec.shape[1]:
                raise ValueError("precision must be a square matrix")
            if not np.allclose(prec, prec.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(prec).max())):
                raise ValueError("precision must be symmetric")
            if np.linalg.eigvalsh(np.asarray(prec)).min() <= 0:
                raise ValueError("precision must be positive-definite")
            self.precision = prec
            self.power_profile = None
        else:
            raise ValueError(f"unknown prior form {form!r}")
        self.form = form

    @classmethod
    def circulant(cls, power_profile) -> "PriorSpec":
        return cls("circulant", power_profile=power_profile)

    @classmethod
    def dense(cls, precision) -> "PriorSpec":
        return cls("dense", precision=precision)

    @property
    def dim(self) -> int:
        if self.form == "circulant":
            return self.power_profile.size
        return self.precision.shape[0]

    def precision_matrix(self) -> np.ndarray:
        """Dense M-by-M precision (inverse covariance) matrix."""
        if self.form == "dense":
            return np.array(self.precision)
        # A circulant covariance with eigenvalue lam[k] on the k-th Fourier
        # mode has precision entries (1/M) sum_k (1/lam[k]) e^{2 pi i k d / M},
        # which is the inverse DFT of 1/lam evaluated at d = row - col.
        m = self.dim
        first = np.fft.ifft(1.0 / self.power_profile).real
        idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
        return first[idx]

    def __eq__(self, other):
        if not isinstance(other, PriorSpec):
            return NotImplemented
        if self.form != other.form:
            return False
        if self.form == "circulant":
            return np.array_equal(self.power_profile, other.power_profile)
        return np.array_equal(self.precision, other.precision)

    def __repr__(self):
        return f"PriorSpec(form={self.form!r}, dim={self.dim})"


def one_over_f_profile(m: int, floor_index: int = 1) -> np.ndarray:
    """Power profile decaying like 1/f, normalized so the expected squared
    norm of a draw equals M.

    The eigenvalue at frequency f (0..M//2) is c / max(floor_index, f),
    mirrored conjugate-symmetrically.
    """
    if m < 1:
        raise ValueError("profile length must be positive")
    freqs = np.minimum(np.arange(m), m - np.arange(m))
    raw = 1.0 / np.maximum(float(floor_index), freqs)
    return raw * (m / raw.sum())


def sampling_indices(m: int, ell: int, shift: int) -> np.ndarray:
    """Fine-grid indices observed after shifting by ``shift``: (l*K - s) mod M."""
    k = m // ell
    return (np.arange(ell) * k - shift) % m


def sample_observation(x: HighResSignal, params: ModelParams, rng: np.random.Generator):
    """Draw one observation.  Returns (sample of length L, true shift).

    Consumes exactly one uniform integer and one length-L Gaussian block
    from ``rng``, in that order.
    """
    values = x.values
    if values.size != params.M:
        raise ValueError("signal length does not match params.M")
    shift = int(rng.integers(0, params.M))
    sample = values[sampling_indices(params.M, params.L, shift)]
    if params.sigma > 0:
        sample = sample + params.sigma * rng.standard_normal(params.L)
    else:
        sample = sample.copy()
    return sample, shift


def generate_batch(x: HighResSignal, params: ModelParams) -> ObservationBatch:
    """Generate N independent observations, bit-reproducible from the seed.

    Each observation draws from its own child stream of
    ``SeedSequence(params.seed)``, so generation could be parallelized
    without changing the output.
    """
    if x.values.size != params.M:
        raise ValueError("signal length does not match params.M")
    streams = np.random.SeedSequence(params.seed).spawn(params.N)
    samples = np.empty((params.N, params.L))
    shifts = np.empty(params.N, dtype=np.int64)
    for i, stream in enumerate(streams):
        samples[i], shifts[i] = sample_observation(x, params, np.random.default_rng(stream))
    return ObservationBatch(samples=samples, params=params, true_shifts=shifts)


def batch_from_shifts(x: HighResSignal, ell: int, shifts, sigma: float = 0.0,
                      seed: int = 0) -> ObservationBatch:
    """Build a batch with prescribed shifts (one observation per entry).

    Useful for controlled coverage of the shift residues; noise, if any,
    comes from a single stream seeded by ``seed``.
    """
    shifts = np.asarray(shifts, dtype=np.int64)
    m = x.values.size
    params = ModelParams(M=m, L=ell, sigma=float(sigma), N=shifts.size, seed=seed)
    rows = np.stack([x.values[sampling_indices(m, ell, int(s))] for s in shifts])
    if sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        rows = rows + sigma * rng.standard_normal(rows.shape)
    return ObservationBatch(samples=rows, params=params, true_shifts=shifts)


def _gaussian_fourier_coefficients(variances: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Conjugate-symmetric Gaussian DFT coefficients with E|c[k]|^2 = variances[k]."""
    m = variances.size
    coeffs = np.zeros(m, dtype=complex)
    coeffs[0] = np.sqrt(variances[0]) * rng.standard_normal()
    half = m // 2
    for k in range(1, (m + 1) // 2):
        a, b = rng.standard_normal(2)
        coeffs[k] = np.sqrt(variances[k] / 2.0) * (a + 1j * b)
        coeffs[m - k] = np.conj(coeffs[k])
    if m % 2 == 0 and m >= 2:
        coeffs[half] = np.sqrt(variances[half]) * rng.standard_normal()
    return coeffs


def sample_prior(prior: PriorSpec, m: int, rng: np.random.Generator,
                 normalize: bool = True) -> HighResSignal:
    """Draw a zero-mean Gaussian signal with the prior's covariance.

    By default the draw is rescaled to ``||x||^2 == M`` afterwards, pinning
    SNR = 1/sigma^2 (no longer exactly Gaussian); pass ``normalize=False``
    for the raw Gaussian draw.
    """
    if prior.dim != m:
        raise ValueError(f"prior dimension {prior.dim} does not match M={m}")
    if prior.form == "circulant":
        # Covariance eigenvalue lam[k] corresponds to E|xhat[k]|^2 = M*lam[k].
        coeffs = _gaussian_fourier_coefficients(m * prior.power_profile, rng)
        values = np.fft.ifft(coeffs).real
    else:
        import scipy.linalg

        chol = scipy.linalg.cholesky(np.asarray(prior.precision), lower=False)
        values = scipy.linalg.solve_triangular(chol, rng.standard_normal(m), lower=False)
    if normalize:
        values = normalize_power(values)
    return HighResSignal(values=values)


def sample_bandlimited_signal(m: int, bandlimit: int, rng: np.random.Generator,
                              normalize: bool = True) -> HighResSignal:
    """Random real signal whose spectrum is supported on |k| <= bandlimit.

    Coefficients inside the band are i.i.d. complex Gaussians (conjugate
    symmetric); requires 2*bandlimit + 1 <= M.  Normalized to
    ``||x||^2 == M`` by default.
    """
    if bandlimit < 0:
        raise ValueError("bandlimit must be nonnegative")
    if 2 * bandlimit + 1 > m:
        raise ValueError(f"band too wide: 2*{bandlimit}+1 > M={m}")
    variances = np.zeros(m)
    freqs = np.minimum(np.arange(m), m - np.arange(m))
    variances[freqs <= bandlimit] = 1.0
    coeffs = _gaussian_fourier_coefficients(variances, rng)
    values = np.fft.ifft(coeffs).real
    if normalize:
        values = normalize_power(values)
    return HighResSignal(values=values, bandlimit=bandlimit)
