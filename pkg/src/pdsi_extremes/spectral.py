"""Morlet continuous wavelet transform of an annual series.

FFT-based, energy-normalized so that white noise of variance sigma^2 has
expected power sigma^2 at every scale; significance is the 95% point of
sigma^2 * chi2(2) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


def morlet_fourier_factor(omega0: float = 6.0) -> float:
    """Fourier period / scale for the Morlet wavelet (~1.033 at omega0=6)."""
    return 4 * math.pi / (omega0 + math.sqrt(2 + omega0**2))


@dataclass(frozen=True, eq=False)
class WaveletSpectrum:
    periods: np.ndarray
    scales: np.ndarray
    power: np.ndarray
    global_power: np.ndarray
    coi: np.ndarray
    significance: np.ndarray
    variance: float

    def inside_coi(self) -> np.ndarray:
        """Boolean (scale, time) mask of points unaffected by edge effects."""
        return self.periods[:, None] <= self.coi[None, :]


def default_periods(n: int, dt: float = 1.0, voices: int = 8, smallest: float = 2.0) -> np.ndarray:
    """Periods from ``smallest`` up to n*dt/2, ``voices`` per octave."""
    largest = n * dt / 2
    n_oct = math.log2(largest / smallest)
    j = np.arange(int(math.floor(n_oct * voices + 1e-9)) + 1)
    return smallest * 2.0 ** (j / voices)


def _prepare(series, detrend):
    x = np.asarray(series, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("series must be finite")
    x = x - x.mean()
    if detrend:
        t = np.arange(x.size, dtype=np.float64)
        t -= t.mean()
        x = x - t * (np.dot(t, x) / np.dot(t, t))
    return x


def cwt_morlet(
    series,
    omega0: float = 6.0,
    periods=None,
    voices: int = 8,
    detrend: bool = True,
    dt: float = 1.0,
    confidence: float = 0.95,
) -> WaveletSpectrum:
    """Wavelet power spectrum of a regularly sampled series.

    :param series: at least 16 finite values
    :param periods: analysis periods in units of ``dt``; dyadic 2..n/2 by default
    :param detrend: remove a least-squares line (the mean is always removed)
    """
    raw = np.asarray(series, dtype=np.float64)
    n = raw.size
    if n < 16:
        raise ValueError(f"wavelet analysis needs n >= 16, got {n}")
    x = _prepare(raw, detrend)
    variance = float(np.var(x))

    npad = 1 << (2 * n - 1).bit_length()  # >= 2n, keeps the large scales from wrapping
    xp = np.zeros(npad)
    xp[:n] = x
    f = np.fft.fft(xp)
    k = 2 * np.pi * np.fft.fftfreq(npad, d=dt)

    ff = morlet_fourier_factor(omega0)
    periods = default_periods(n, dt, voices) if periods is None else np.asarray(periods, dtype=np.float64)
    if periods.ndim != 1 or periods.size == 0 or (np.diff(periods) <= 0).any():
        raise ValueError("periods must be strictly increasing")
    scales = periods / ff

    power = np.empty((scales.size, n))
    pos = k > 0
    for j, s in enumerate(scales):
        daughter = np.zeros(npad)
        norm = math.sqrt(2 * math.pi * s / dt) * math.pi ** -0.25
        daughter[pos] = norm * np.exp(-((s * k[pos] - omega0) ** 2) / 2)
        w = np.fft.ifft(f * daughter)[:n]
        power[j] = w.real**2 + w.imag**2

    edge = np.minimum(np.arange(n), np.arange(n)[::-1]).astype(np.float64)
    coi = ff / math.sqrt(2) * dt * edge
    sig = np.full(scales.size, variance * stats.chi2.ppf(confidence, 2) / 2)
    return WaveletSpectrum(periods, scales, power, power.mean(axis=1), coi, sig, variance)


@dataclass(frozen=True)
class DominantPeriod:
    period: float | None
    significant: bool


def dominant_period(spectrum: WaveletSpectrum) -> DominantPeriod:
    """Strongest period among scales whose global power beats the threshold."""
    above = spectrum.global_power > spectrum.significance
    if not above.any():
        return DominantPeriod(None, False)
    idx = np.flatnonzero(above)
    best = idx[np.argmax(spectrum.global_power[idx])]
    return DominantPeriod(float(spectrum.periods[best]), True)


def global_spectrum_csv(spectrum: WaveletSpectrum) -> str:
    lines = ["period_years,power,significance"]
    lines += [
        f"{round(float(p), 6)!r},{float(f'{g:.10g}')!r},{float(f'{s:.10g}')!r}"
        for p, g, s in zip(spectrum.periods, spectrum.global_power, spectrum.significance)
    ]
    return "\n".join(lines) + "\n"
