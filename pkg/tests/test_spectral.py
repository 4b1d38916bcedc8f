import numpy as np
import pytest

from pdsi_extremes.grid import SyntheticSpec, generate_synthetic
from pdsi_extremes.spectral import cwt_morlet, default_periods, dominant_period, global_spectrum_csv, morlet_fourier_factor
from pdsi_extremes.trend import monthly_lnpv_counts


def test_fourier_factor():
    assert morlet_fourier_factor(6) == pytest.approx(1.0330, abs=1e-4)


def test_default_periods_dyadic():
    p = default_periods(115)
    assert p[0] == 2 and p[-1] <= 57.5
    np.testing.assert_allclose(p[8::8] / p[:-8:8], 2.0)


def test_planted_sinusoid():
    y = np.sin(2 * np.pi * np.arange(115) / 8)
    spec = cwt_morlet(y)
    assert 7 <= spec.periods[np.argmax(spec.global_power)] <= 9
    d = dominant_period(spec)
    assert d.significant and 7 <= d.period <= 9


def test_zero_series():
    spec = cwt_morlet(np.zeros(115))
    assert np.all(spec.power == 0)
    assert dominant_period(spec) == dominant_period(spec).__class__(None, False)


def test_errors():
    with pytest.raises(ValueError):
        cwt_morlet(np.ones(15))
    y = np.zeros(20)
    y[3] = np.nan
    with pytest.raises(ValueError):
        cwt_morlet(y)


def test_structure():
    y = np.random.default_rng(0).normal(size=115)
    s = cwt_morlet(y)
    assert s.power.shape == (s.periods.size, 115)
    assert np.all(s.power >= 0)
    np.testing.assert_allclose(s.global_power, s.power.mean(axis=1))
    assert np.all(np.diff(s.periods) > 0)
    rows = global_spectrum_csv(s).splitlines()
    assert rows[0] == "period_years,power,significance" and len(rows) == s.periods.size + 1


def test_linearity():
    y = np.random.default_rng(1).normal(size=100)
    a = cwt_morlet(y, detrend=False)
    b = cwt_morlet(3.5 * y, detrend=False)
    np.testing.assert_allclose(b.power, 3.5**2 * a.power, rtol=1e-9, atol=1e-12)


def test_circular_shift_covariance():
    # away from both ends and from the wrap point; scales whose spectrum runs into
    # Nyquist have long sinc tails, so only (omega0 + 4) / s < pi is checked
    y = np.random.default_rng(2).normal(size=128)
    a = cwt_morlet(y, detrend=False)
    b = cwt_morlet(np.roll(y, 17), detrend=False)
    shifted = np.roll(a.power, 17, axis=1)
    checked = 0
    for j, s in enumerate(a.scales):
        margin = int(np.ceil(4 * np.sqrt(2) * s))
        if (6 + 4) / s >= np.pi or 17 + 2 * margin >= 128 - margin:
            continue
        checked += 1
        t = np.arange(17 + margin, 128 - margin)
        np.testing.assert_allclose(b.power[j, t], shifted[j, t], rtol=1e-4, atol=1e-6 * a.power.max())
    assert checked >= 5


def test_white_noise_false_positive_rate():
    rates = []
    for seed in range(100):
        s = cwt_morlet(np.random.default_rng(seed).normal(size=115))
        mask = s.inside_coi()
        rates.append(np.mean(s.power[mask] > s.significance[:, None].repeat(115, 1)[mask]))
    assert np.mean(rates) <= 0.10


def test_power_tracks_variance():
    rng = np.random.default_rng(3)
    var, tot = [], []
    for _ in range(50):
        y = rng.normal(0, rng.uniform(0.2, 5), 115)
        s = cwt_morlet(y)
        var.append(np.var(y))
        tot.append(s.power.sum())
    assert np.corrcoef(var, tot)[0, 1] > 0.5


def _null_hits(phi):
    hits = 0
    for seed in range(100):
        ds = generate_synthetic(SyntheticSpec(n_cells=100, ar1_phi=phi), seed)
        hits += dominant_period(cwt_morlet(monthly_lnpv_counts(ds).annual)).significant
    return hits


def test_white_counts_rarely_periodic():
    assert _null_hits(0.0) <= 10


def test_stationary_counts_rarely_periodic():
    # default persistent cells; known to exceed the white-noise background (about 20 of 100)
    assert _null_hits(0.9) <= 10
