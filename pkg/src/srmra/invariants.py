"""Shift-invariant moments of down-sampled observations.

For a length-L vector z with DFT zhat, the first three Fourier-domain
invariants are::

    mean        = zhat[0]
    power[k]    = zhat[k] * conj(zhat[k])
    bispec[a,b] = zhat[a] * zhat[b] * zhat[(-a-b) mod L]

These are invariant to cyclic shifts of z, and for a batch of noisy
observations their empirical averages converge to the average invariants
of the K sub-signals plus an explicit noise bias that :func:`debias`
removes.

Bias of the empirical moments for noise level sigma (derived from
E[ehat[a] ehat[b]] = sigma^2 L [a+b == 0 mod L] for real white noise):

* power spectrum: ``sigma^2 * L`` at every frequency;
* bispectrum: ``xbar * sigma^2 * L^2 * D`` where xbar is the signal's
  grand mean and D[a,b] = [a==0] + [b==0] + [(a+b) mod L == 0], i.e.
  support on the first row, first column and the anti-diagonal, with
  D[0,0] = 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import ObservationBatch

__all__ = [
    "InvariantTriple",
    "BiasTerms",
    "TripleStdErr",
    "autocorrelation",
    "fourier_invariants",
    "mixed_invariants",
    "empirical_invariants",
    "empirical_invariants_with_stderr",
    "bias_terms",
    "debias",
    "invariant_distance",
]


@dataclass(frozen=True)
class InvariantTriple:
    """First three shift-invariant moments of a length-L vector.

    mean is the DC Fourier coefficient (sum of entries), power_spectrum
    the squared coefficient magnitudes, bispectrum the L-by-L complex
    third-order invariant.  The bispectrum is symmetric in its two indices
    and conjugate-symmetric under negating both.
    """

    mean: float
    power_spectrum: np.ndarray
    bispectrum: np.ndarray

    def __post_init__(self):
        ps = np.array(self.power_spectrum, dtype=float)
        bis = np.array(self.bispectrum, dtype=complex)
        if ps.ndim != 1 or bis.shape != (ps.size, ps.size):
            raise ValueError("power spectrum must be length L, bispectrum L-by-L")
        ps.setflags(write=False)
        bis.setflags(write=False)
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "power_spectrum", ps)
        object.__setattr__(self, "bispectrum", bis)

    @property
    def L(self) -> int:
        return self.power_spectrum.size


@dataclass(frozen=True)
class TripleStdErr:
    """Standard errors of an empirical :class:`InvariantTriple` (real and
    imaginary parts tracked separately for the bispectrum)."""

    mean: float
    power_spectrum: np.ndarray
    bispectrum_real: np.ndarray
    bispectrum_imag: np.ndarray


@dataclass(frozen=True)
class BiasTerms:
    """Additive noise bias of the empirical invariants."""

    b2: np.ndarray
    b3: np.ndarray
    xbar: float


def autocorrelation(z, q: int) -> np.ndarray | float:
    """Time-domain circular autocorrelation of order q in {1, 2, 3}.

    Order 1 is the plain sum; order 2 returns a length-L vector
    ``a[l] = sum_i z[i] z[(i+l) mod L]``; order 3 an L-by-L matrix
    ``a[l1,l2] = sum_i z[i] z[(i+l1) mod L] z[(i+l2) mod L]``.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("autocorrelation expects a nonempty 1-D array")
    if q == 1:
        return float(z.sum())
    ell = z.size
    idx = (np.arange(ell)[:, None] + np.arange(ell)[None, :]) % ell
    shifted = z[idx]  # shifted[l, i] = z[(l + i) mod L]
    if q == 2:
        return shifted.T @ z  # out[l] = sum_i z[i] z[i + l]
    if q == 3:
        return np.einsum("i,ai,bi->ab", z, shifted[:, :], shifted[:, :])
    raise ValueError("autocorrelation order must be 1, 2, or 3")


def _bispectrum_index(ell: int) -> np.ndarray:
    grid = np.arange(ell)
    return (-(grid[:, None] + grid[None, :])) % ell


def _mirror_upper(bis: np.ndarray) -> np.ndarray:
    # Vectorized complex products are not bit-symmetric under transposition
    # (SIMD uses fused multiply-adds), so copy the upper triangle across the
    # diagonal to make the algebraic symmetry exact.
    upper = np.triu_indices(bis.shape[0], 1)
    bis[upper[1], upper[0]] = bis[upper]
    return bis


def fourier_invariants(z) -> InvariantTriple:
    """Invariant triple of a single vector (exact, Fourier domain)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("fourier_invariants expects a nonempty 1-D array")
    zh = np.fft.fft(z)
    power = (zh * zh.conj()).real
    bis = _mirror_upper(zh[:, None] * zh[None, :] * zh[_bispectrum_index(z.size)])
    return InvariantTriple(mean=zh[0].real, power_spectrum=power, bispectrum=bis)


def mixed_invariants(subs) -> InvariantTriple:
    """Uniform average of the invariant triples of K equal-length vectors."""
    subs = np.asarray(subs, dtype=float)
    if subs.ndim != 2 or subs.size == 0:
        raise ValueError("mixed_invariants expects a K-by-L array")
    k, ell = subs.shape
    zh = np.fft.fft(subs, axis=1)
    mean = zh[:, 0].real.mean()
    power = (zh * zh.conj()).real.mean(axis=0)
    neg = _bispectrum_index(ell)
    bis = _mirror_upper((zh[:, :, None] * zh[:, None, :] * zh[:, neg]).mean(axis=0))
    return InvariantTriple(mean=mean, power_spectrum=power, bispectrum=bis)


class _KahanAccumulator:
    """Compensated summation so the accumulation order cannot leak into the
    result beyond ~1e-16 per term."""

    def __init__(self, shape, dtype=float):
        self.total = np.zeros(shape, dtype=dtype)
        self._carry = np.zeros(shape, dtype=dtype)

    def add(self, term):
        y = term - self._carry
        t = self.total + y
        self._carry = (t - self.total) - y
        self.total = t


def _accumulate_invariants(batch: ObservationBatch, want_second_moments: bool):
    n, ell = batch.samples.shape
    neg = _bispectrum_index(ell)
    chunk = max(16, min(n, (1 << 22) // (ell * ell * 16)))
    sums = {
        "mean": _KahanAccumulator(()),
        "power": _KahanAccumulator(ell),
        "bis": _KahanAccumulator((ell, ell), dtype=complex),
    }
    if want_second_moments:
        sums["mean2"] = _KahanAccumulator(())
        sums["power2"] = _KahanAccumulator(ell)
        sums["bis_re2"] = _KahanAccumulator((ell, ell))
        sums["bis_im2"] = _KahanAccumulator((ell, ell))
    for start in range(0, n, chunk):
        rows = batch.samples[start:start + chunk]
        zh = np.fft.fft(rows, axis=1)
        means = zh[:, 0].real
        powers = (zh * zh.conj()).real
        bis = zh[:, :, None] * zh[:, None, :] * zh[:, neg]
        sums["mean"].add(means.sum())
        sums["power"].add(powers.sum(axis=0))
        sums["bis"].add(bis.sum(axis=0))
        if want_second_moments:
            sums["mean2"].add((means**2).sum())
            sums["power2"].add((powers**2).sum(axis=0))
            sums["bis_re2"].add((bis.real**2).sum(axis=0))
            sums["bis_im2"].add((bis.imag**2).sum(axis=0))
    return sums, n


def empirical_invariants(batch: ObservationBatch) -> InvariantTriple:
    """Sample average of the per-observation invariant triples (no debias)."""
    sums, n = _accumulate_invariants(batch, want_second_moments=False)
    return InvariantTriple(
        mean=sums["mean"].total / n,
        power_spectrum=sums["power"].total / n,
        bispectrum=sums["bis"].total / n,
    )


def empirical_invariants_with_stderr(batch: ObservationBatch):
    """Empirical triple plus per-entry standard errors of its components."""
    sums, n = _accumulate_invariants(batch, want_second_moments=True)
    triple = InvariantTriple(
        mean=sums["mean"].total / n,
        power_spectrum=sums["power"].total / n,
        bispectrum=sums["bis"].total / n,
    )

    def se(sum2, mean_val):
        var = np.maximum(sum2 / n - np.asarray(mean_val) ** 2, 0.0)
        return np.sqrt(var / n)

    errs = TripleStdErr(
        mean=float(se(sums["mean2"].total, triple.mean)),
        power_spectrum=se(sums["power2"].total, triple.power_spectrum),
        bispectrum_real=se(sums["bis_re2"].total, triple.bispectrum.real),
        bispectrum_imag=se(sums["bis_im2"].total, triple.bispectrum.imag),
    )
    return triple, errs


def bias_terms(sigma: float, ell: int, xbar: float) -> BiasTerms:
    """Noise bias of the empirical invariants at noise level sigma.

    The bispectrum support matrix D has 3 at (0,0) and 1 on the rest of the
    first row, first column, and anti-diagonal ((a, L-a) entries), which is
    where E[ehat[a] ehat[b]] = sigma^2 L [(a+b) mod L == 0] places mass.
    """
    if ell < 1:
        raise ValueError("L must be positive")
    grid = np.arange(ell)
    d = (
        (grid[:, None] == 0).astype(float)
        + (grid[None, :] == 0).astype(float)
        + ((grid[:, None] + grid[None, :]) % ell == 0).astype(float)
    )
    return BiasTerms(
        b2=sigma**2 * ell * np.ones(ell),
        b3=xbar * sigma**2 * ell**2 * d,
        xbar=float(xbar),
    )


def debias(triple: InvariantTriple, sigma: float, ell: int) -> InvariantTriple:
    """Subtract the noise bias from an empirical triple.

    The grand mean of the underlying signal is estimated from the triple
    itself (mean coefficient divided by L).  The mean component carries no
    bias and is returned unchanged.
    """
    if ell != triple.L:
        raise ValueError("L does not match the triple")
    terms = bias_terms(sigma, ell, xbar=triple.mean / ell)
    return InvariantTriple(
        mean=triple.mean,
        power_spectrum=triple.power_spectrum - terms.b2,
        bispectrum=triple.bispectrum - terms.b3,
    )


def invariant_distance(a: InvariantTriple, b: InvariantTriple,
                       weights=(1.0, 1.0, 1.0)) -> float:
    """Weighted squared distance between two invariant triples."""
    if a.L != b.L:
        raise ValueError("triples have different lengths")
    w1, w2, w3 = (float(w) for w in weights)
    dmean = a.mean - b.mean
    dps = a.power_spectrum - b.power_spectrum
    dbis = a.bispectrum - b.bispectrum
    return float(w1 * dmean**2 + w2 * (dps @ dps) + w3 * (dbis.real**2 + dbis.imag**2).sum())
