"""Monthly/annual counts of cells hitting one of their k worst months, and
the trend tests applied to them.

The null band simulates purely random timing of each cell's extremes: every
cell-month is an independent Bernoulli(p) trial with p = k / n_months.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from . import _kernels
from .extremes import lnpv_offsets
from .grid import GridDataset, MonthStamp

DEFAULT_WINDOWS = (10, 20, 30)


@dataclass(frozen=True, eq=False)
class CountSeries:
    months: tuple[MonthStamp, ...]
    monthly: np.ndarray
    years: np.ndarray
    annual: np.ndarray

    @property
    def total(self) -> int:
        return int(self.monthly.sum())


def monthly_lnpv_counts(dataset: GridDataset, k: int = 10) -> CountSeries:
    """Number of cells whose k most negative months include month t, for each t."""
    if dataset.n_cells == 0:
        raise ValueError("empty dataset")
    n = dataset.period.n_months
    monthly = np.zeros(n, dtype=np.int64)
    for row in dataset.values:
        monthly[lnpv_offsets(row, k)] += 1
    months = tuple(dataset.period.months())
    return _with_annual(months, monthly)


def _with_annual(months, monthly) -> CountSeries:
    yr = np.array([m.year for m in months])
    years = np.unique(yr)
    annual = np.zeros(years.size, dtype=np.int64)
    np.add.at(annual, yr - years[0], monthly)
    monthly = np.asarray(monthly, dtype=np.int64)
    monthly.setflags(write=False)
    annual.setflags(write=False)
    return CountSeries(tuple(months), monthly, years, annual)


# ---------------------------------------------------------------------------
# regression and Mann-Kendall


@dataclass(frozen=True)
class OlsTrend:
    slope: float
    intercept: float
    slope_per_decade: float


def ols_trend(series, steps_per_decade: float = 120) -> OlsTrend:
    """Least-squares line through (index, value); monthly input by default."""
    y = np.asarray(series, dtype=np.float64)
    if y.size < 2:
        raise ValueError("OLS needs at least 2 points")
    x = np.arange(y.size, dtype=np.float64)
    xm, ym = x.mean(), y.mean()
    slope = float(np.dot(x - xm, y - ym) / np.dot(x - xm, x - xm))
    intercept = float(ym - slope * xm)
    return OlsTrend(slope, intercept, slope * steps_per_decade)


@dataclass(frozen=True)
class MannKendallResult:
    n: int
    S: int
    var_S: float
    Z: float
    p_two_sided: float
    direction: str
    alpha: float


def tie_term(x) -> float:
    """Sum over tie groups of t(t-1)(2t+5)."""
    _, t = np.unique(np.asarray(x), return_counts=True)
    t = t[t > 1].astype(np.float64)
    return float(np.sum(t * (t - 1) * (2 * t + 5)))


def mann_kendall(series, alpha: float = 0.05) -> MannKendallResult:
    """Two-sided Mann-Kendall trend test with tie-corrected variance.

    Uses the normal approximation with continuity correction:
    Z = (S - 1)/sqrt(var_S) for S > 0, (S + 1)/sqrt(var_S) for S < 0.
    """
    x = np.ascontiguousarray(series, dtype=np.float64)
    n = x.size
    if n < 3:
        raise ValueError(f"Mann-Kendall needs n >= 3, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("series must be finite")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    s = int(_kernels.mk_score(x))
    var_s = (n * (n - 1) * (2 * n + 5) - tie_term(x)) / 18.0
    if var_s <= 0 or s == 0:
        z = 0.0
    elif s > 0:
        z = (s - 1) / math.sqrt(var_s)
    else:
        z = (s + 1) / math.sqrt(var_s)
    p = float(min(1.0, 2.0 * stats.norm.sf(abs(z))))
    if p < alpha and z > 0:
        direction = "increasing"
    elif p < alpha and z < 0:
        direction = "decreasing"
    else:
        direction = "none"
    return MannKendallResult(n, s, float(var_s), float(z), p, direction, alpha)


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean; element i is the mean of inputs i..i+window-1.

    The output has ``len(series) - window + 1`` entries and entry j lines up
    with input index ``j + window - 1``.
    """
    y = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > y.size:
        raise ValueError(f"window {window} longer than series ({y.size})")
    return sliding_window_view(y, window).mean(axis=1)


# ---------------------------------------------------------------------------
# Monte Carlo null band


@dataclass(frozen=True)
class NullBandParams:
    n_cells: int = 2755
    p: float = 10 / 1380
    reps: int = 100
    years: int = 115
    lower_pct: float = 5
    upper_pct: float = 95
    start_year: int = 1900
    months_per_year: int = 12
    cell_p: tuple[float, ...] | None = None

    def validate(self):
        if self.n_cells < 1 or self.years < 1 or self.months_per_year < 1:
            raise ValueError("n_cells, years and months_per_year must be >= 1")
        if self.reps < 2:
            raise ValueError(f"reps must be >= 2, got {self.reps}")
        if not 0 <= self.p < 1:
            raise ValueError(f"p must be in [0, 1), got {self.p}")
        if not 0 < self.lower_pct <= self.upper_pct <= 100:
            raise ValueError("need 0 < lower_pct <= upper_pct <= 100")
        if self.cell_p is not None:
            cp = np.asarray(self.cell_p)
            if cp.size != self.n_cells or ((cp < 0) | (cp > 1)).any():
                raise ValueError("cell_p must hold n_cells probabilities in [0, 1]")

    def probabilities(self) -> np.ndarray:
        if self.cell_p is not None:
            return np.asarray(self.cell_p, dtype=np.float64)
        return np.full(self.n_cells, self.p)


@dataclass(frozen=True, eq=False)
class NullBand:
    years: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    replicates: np.ndarray
    params: NullBandParams
    seed: int


def substream(seed: int, year_index: int, rep: int) -> np.random.Generator:
    """Counter-based generator for one (year, replicate) cell of the simulation."""
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, (year_index << 32) | rep], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def nearest_rank(sorted_counts: np.ndarray, pct: float) -> int:
    """Nearest-rank percentile of an ascending sample."""
    n = sorted_counts.shape[-1]
    rank = max(1, math.ceil(pct / 100.0 * n - 1e-12))
    return rank - 1


def _year_replicates(year_index, probs, params, seed):
    out = np.empty(params.reps, dtype=np.int64)
    for r in range(params.reps):
        u = substream(seed, year_index, r).random((params.n_cells, params.months_per_year))
        out[r] = np.count_nonzero(u < probs[:, None])
    return out


def null_band(params: NullBandParams | None = None, seed: int = 0, threads: int = 1) -> NullBand:
    """Percentile envelope of annual counts under random extreme timing.

    For each year, ``reps`` replicates each draw one uniform per cell-month
    and count draws below p. Each (year, replicate) uses its own keyed
    generator so results do not depend on ``threads``.
    """
    params = params or NullBandParams()
    params.validate()
    probs = params.probabilities()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reps = list(pool.map(lambda y: _year_replicates(y, probs, params, seed), range(params.years)))
    else:
        reps = [_year_replicates(y, probs, params, seed) for y in range(params.years)]
    reps = np.vstack(reps)
    srt = np.sort(reps, axis=1)
    lo = srt[:, nearest_rank(srt, params.lower_pct)]
    hi = srt[:, nearest_rank(srt, params.upper_pct)]
    years = np.arange(params.start_year, params.start_year + params.years)
    return NullBand(years, lo, hi, reps, params, int(seed))


def band_params_for(dataset: GridDataset, k: int = 10, reps: int = 100, respect_availability: bool = False) -> NullBandParams:
    """Null-band parameters matched to a dataset's cell count and period."""
    n_months = dataset.period.n_months
    years = dataset.period.years
    cell_p = None
    if respect_availability:
        valid = dataset.valid_counts()
        cell_p = tuple(float(min(1.0, k / v)) for v in valid)
    return NullBandParams(
        n_cells=dataset.n_cells,
        p=k / n_months,
        reps=reps,
        years=int(years.size),
        start_year=int(years[0]),
        cell_p=cell_p,
    )


@dataclass(frozen=True, eq=False)
class Exceedance:
    years: np.ndarray
    position: tuple[str, ...]
    onset: int | None

    def fraction_inside(self) -> float:
        return self.position.count("inside") / len(self.position)


def band_exceedance(years, annual, band: NullBand, run: int = 3) -> Exceedance:
    """Place each year below/inside/above the band (bounds inclusive).

    ``onset`` is the first year starting ``run`` consecutive years above the
    upper bound, or None.
    """
    years = np.asarray(years)
    annual = np.asarray(annual)
    if years.shape != band.years.shape or not np.array_equal(years, band.years):
        raise ValueError("count series and null band cover different years")
    pos = tuple(
        "below" if c < lo else "above" if c > hi else "inside" for c, lo, hi in zip(annual, band.lower, band.upper)
    )
    onset = None
    streak = 0
    for i, p in enumerate(pos):
        streak = streak + 1 if p == "above" else 0
        if streak == run:
            onset = int(years[i - run + 1])
            break
    return Exceedance(years, pos, onset)


# ---------------------------------------------------------------------------
# tables


def monthly_csv(counts: CountSeries) -> str:
    lines = ["month_serial,year,month,count"]
    lines += [f"{m.serial},{m.year},{m.month},{c}" for m, c in zip(counts.months, counts.monthly)]
    return "\n".join(lines) + "\n"


def annual_table(counts: CountSeries, band: NullBand | None = None, windows=DEFAULT_WINDOWS):
    """Rows of (year, count, ma per window..., band_lo, band_hi); None where absent."""
    n = counts.annual.size
    mas = []
    for w in windows:
        col = [None] * n
        if w <= n:
            for j, v in enumerate(moving_average(counts.annual, w)):
                col[j + w - 1] = float(v)
        mas.append(col)
    rows = []
    for i, y in enumerate(counts.years):
        lo = hi = None
        if band is not None:
            lo, hi = int(band.lower[i]), int(band.upper[i])
        rows.append((int(y), int(counts.annual[i]), *(m[i] for m in mas), lo, hi))
    return rows


def annual_csv(counts: CountSeries, band: NullBand | None = None, windows=DEFAULT_WINDOWS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "count", *(f"ma{x}" for x in windows), "band_lo", "band_hi"])
    for row in annual_table(counts, band, windows):
        w.writerow(["" if v is None else (repr(round(v, 6)) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def band_csv(band: NullBand) -> str:
    lines = ["year,band_lo,band_hi"]
    lines += [f"{y},{lo},{hi}" for y, lo, hi in zip(band.years, band.lower, band.upper)]
    return "\n".join(lines) + "\n"


def mann_kendall_csv(res: MannKendallResult) -> str:
    return (
        "n,S,var_S,Z,p_two_sided,direction,alpha\n"
        f"{res.n},{res.S},{res.var_S!r},{round(res.Z, 10)!r},{float(f'{res.p_two_sided:.10g}')!r},{res.direction},{res.alpha!r}\n"
    )


def mann_kendall_text(res: MannKendallResult, label: str = "series") -> str:
    verdict = {"increasing": "significant increasing trend", "decreasing": "significant decreasing trend"}.get(
        res.direction, "no significant monotonic trend"
    )
    return (
        f"Mann-Kendall on {label} (n={res.n}): S={res.S}, var(S)={res.var_S:.1f}, "
        f"Z={res.Z:.4f}, p={res.p_two_sided:.4g} -> {verdict} at alpha={res.alpha}\n"
    )
