"""Correlated time-series analysis for Markov-chain measurements.

Autocorrelation functions are computed with zero-padded FFTs and the
per-lag 1/(N-k) normalization

    C(k) = 1/(N-k) sum_i (O_i - Obar)(O_{i+k} - Obar),   rho(k) = C(k)/C(0),

the integrated autocorrelation time is tau_int = 1/2 + sum_k rho(k)
truncated at the first non-positive rho (summing the noisy tail would not
converge), and error bars come from the stationary bootstrap with
geometrically distributed block lengths tied to 2 tau_int.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

#: below this fraction of <O^4>^(1/2), <O^2> is treated as zero and the
#: Binder ratio is reported as missing
_BINDER_EPS = 1e-12


@dataclass(frozen=True)
class SeriesStats:
    """Bootstrap statistics of one measured series."""

    mean: float
    mean_std: float
    binder: float
    binder_std: float
    tau_int: float


def _as_real(series):
    x = np.asarray(series)
    if np.iscomplexobj(x):
        scale = max(1.0, float(np.abs(x).max(initial=0.0)))
        if float(np.abs(x.imag).max(initial=0.0)) > 1e-12 * scale:
            raise ConfigurationError("series has non-negligible imaginary part")
        x = x.real
    return np.asarray(x, dtype=np.float64)


def autocorrelation(series) -> np.ndarray:
    """Normalized autocorrelation rho(k) for k = 0 .. N-1 via zero-padded FFT.

    Agrees with the direct O(N^2) sum to floating-point accuracy.  Raises
    for constant series, where rho is undefined.
    """
    x = _as_real(series)
    n = x.size
    if n < 2:
        raise ConfigurationError("autocorrelation needs a series of length >= 2")
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    acov /= n - np.arange(n)
    if acov[0] <= 0.0:
        raise ConfigurationError("autocorrelation of a constant series is undefined")
    return acov / acov[0]


def autocorrelation_direct(series) -> np.ndarray:
    """Direct O(N^2) reference evaluation of the same estimator."""
    x = _as_real(series)
    n = x.size
    x = x - x.mean()
    c = np.array([np.dot(x[: n - k], x[k:]) / (n - k) for k in range(n)])
    if c[0] <= 0.0:
        raise ConfigurationError("autocorrelation of a constant series is undefined")
    return c / c[0]


def tau_int(series) -> float:
    """Integrated autocorrelation time in units of recorded samples.

    1/2 for uncorrelated (or constant) data; the sum over rho(k) stops at
    the first non-positive value.
    """
    x = _as_real(series)
    if x.size < 2 or np.all(x == x[0]):
        return 0.5
    rho = autocorrelation(x)
    total = 0.5
    for k in range(1, rho.size):
        if rho[k] <= 0.0:
            break
        total += rho[k]
    return max(0.5, total)


def _binder(m2, m4):
    if m2 <= _BINDER_EPS * math.sqrt(m4) or m2 == 0.0:
        return math.nan
    return m4 / (m2 * m2)


def resample_indices(rng, n, expected_block_length):
    """One stationary-bootstrap index sequence of length n.

    Geometric block lengths with the given mean; blocks wrap around the
    series circularly, which keeps the resampled series stationary.
    """
    p = 1.0 / max(1.0, float(expected_block_length))
    restart = rng.random(n) < p
    restart[0] = True
    pos = np.arange(n)
    last_restart = np.maximum.accumulate(np.where(restart, pos, -1))
    starts = rng.integers(0, n, n)
    return (starts[last_restart] + (pos - last_restart)) % n


def stationary_bootstrap(series, n_resamples: int = 1000, rng=None,
                         expected_block_length=None) -> SeriesStats:
    """Mean and Binder ratio of a series with stationary-bootstrap errors.

    The reported mean/binder are those of the original series; the errors
    are standard deviations over resamples.  The expected block length
    defaults to max(1, round(2 tau_int)).
    """
    x = _as_real(series)
    n = x.size
    if n < 8:
        raise ConfigurationError(
            f"series of length {n} is too short for bootstrap errors; "
            "increase N_samples")
    if n_resamples < 1:
        raise ConfigurationError("n_resamples must be >= 1")
    rng = _as_generator(rng)

    ti = tau_int(x)
    if expected_block_length is None:
        expected_block_length = max(1, round(2.0 * ti))

    x2 = x * x
    x4 = x2 * x2
    mean = float(x.mean())
    binder = _binder(float(x2.mean()), float(x4.mean()))

    means = np.empty(n_resamples)
    binders = np.empty(n_resamples)
    for r in range(n_resamples):
        idx = resample_indices(rng, n, expected_block_length)
        means[r] = x[idx].mean()
        binders[r] = _binder(float(x2[idx].mean()), float(x4[idx].mean()))

    ddof = 1 if n_resamples > 1 else 0
    mean_std = float(np.std(means, ddof=ddof))
    finite = binders[np.isfinite(binders)]
    if math.isnan(binder) or finite.size < 2:
        binder_std = math.nan if math.isnan(binder) else 0.0
    else:
        binder_std = float(np.std(finite, ddof=1))
    return SeriesStats(mean=mean, mean_std=mean_std, binder=binder,
                       binder_std=binder_std, tau_int=ti)


def bootstrap_functional(arrays, reduce, n_resamples, rng,
                         expected_block_length) -> tuple:
    """Bootstrap a statistic that is a functional of one or more series.

    All series are resampled with the same indices per resample (they come
    from the same Markov chain), and `reduce` maps the tuple of resampled
    arrays to one number.  Returns (value on the original series, std over
    resamples, resample values).
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise ConfigurationError("functional bootstrap needs equal-length series")
    if n < 8:
        raise ConfigurationError(
            f"series of length {n} is too short for bootstrap errors; "
            "increase N_samples")
    rng = _as_generator(rng)
    value = reduce(*arrays)
    vals = np.empty(n_resamples)
    for r in range(n_resamples):
        idx = resample_indices(rng, n, expected_block_length)
        vals[r] = reduce(*(a[idx] for a in arrays))
    finite = vals[np.isfinite(vals)]
    if finite.size >= 2:
        std = float(np.std(finite, ddof=1))
    else:
        std = math.nan
    return float(value), std, vals


def _as_generator(rng):
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    return rng
