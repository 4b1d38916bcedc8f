"""Gridded monthly PDSI: lattice geometry, CSV ingestion, coverage, synthesis.

The lattice is the global 2.5 degree land grid: 144 longitudes starting at
178.75W and 55 latitudes starting at 58.75S. A dataset holds a dense
``(n_cells, n_months)`` array with NaN marking absent months.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

_logger = logging.getLogger(__name__)

N_LON = 144
N_LAT = 55
N_LATTICE = N_LON * N_LAT
LON0 = -178.75
LAT0 = -58.75
STEP = 2.5

MISSING_SENTINEL = -99.99
PDSI_SOFT_LIMIT = 10.0
CSV_HEADER = ("lon", "lat", "year", "month", "pdsi")


class DataError(ValueError):
    """Input data is unusable (malformed rows, off-lattice cells, empty set)."""


@dataclass(frozen=True, order=True)
class GridCoordinate:
    lon_index: int
    lat_index: int

    def __post_init__(self):
        if not (0 <= self.lon_index < N_LON and 0 <= self.lat_index < N_LAT):
            raise ValueError(f"lattice index out of range: ({self.lon_index}, {self.lat_index})")

    @property
    def lon_deg(self) -> float:
        return LON0 + STEP * self.lon_index

    @property
    def lat_deg(self) -> float:
        return LAT0 + STEP * self.lat_index

    @property
    def flat_index(self) -> int:
        return self.lat_index * N_LON + self.lon_index

    @classmethod
    def from_flat(cls, flat: int) -> "GridCoordinate":
        return cls(flat % N_LON, flat // N_LON)

    @classmethod
    def from_degrees(cls, lon: float, lat: float) -> "GridCoordinate":
        """Snap-free lookup: raises unless (lon, lat) is exactly a lattice point."""
        i = _lattice_index(lon, LON0, N_LON)
        j = _lattice_index(lat, LAT0, N_LAT)
        if i is None:
            raise DataError(f"longitude {lon!r} is not on the 2.5 degree lattice")
        if j is None:
            raise DataError(f"latitude {lat!r} is not on the 2.5 degree lattice")
        return cls(i, j)


def _lattice_index(value: float, origin: float, count: int) -> int | None:
    if not math.isfinite(value):
        return None
    pos = (value - origin) / STEP
    idx = round(pos)
    # lattice values are exact multiples of 0.25, so decimal text parses to them exactly
    if 0 <= idx < count and origin + STEP * idx == value:
        return int(idx)
    return None


def lattice() -> Iterator[GridCoordinate]:
    """All 7920 lattice positions in flat-index order."""
    for flat in range(N_LATTICE):
        yield GridCoordinate.from_flat(flat)


@dataclass(frozen=True, order=True)
class MonthStamp:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be 1..12, got {self.month}")

    @property
    def serial(self) -> int:
        return (self.year - 1900) * 12 + (self.month - 1)

    @classmethod
    def from_serial(cls, serial: int) -> "MonthStamp":
        y, m = divmod(int(serial), 12)
        return cls(1900 + y, m + 1)

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        """Parse ``YYYY-MM``."""
        try:
            y, m = text.strip().split("-")
            return cls(int(y), int(m))
        except ValueError as exc:
            raise ValueError(f"expected YYYY-MM, got {text!r}") from exc

    def fractional_year(self) -> float:
        return self.year + (self.month - 0.5) / 12

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class Period:
    """Inclusive month range."""

    start: MonthStamp
    end: MonthStamp

    def __post_init__(self):
        if self.end.serial < self.start.serial:
            raise ValueError(f"period end {self.end} precedes start {self.start}")

    @property
    def n_months(self) -> int:
        return self.end.serial - self.start.serial + 1

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start.year, self.end.year + 1)

    def months(self) -> list[MonthStamp]:
        return [MonthStamp.from_serial(s) for s in range(self.start.serial, self.end.serial + 1)]

    def contains(self, stamp: MonthStamp) -> bool:
        return self.start.serial <= stamp.serial <= self.end.serial

    @classmethod
    def parse(cls, text: str) -> "Period":
        """Parse ``YYYY-MM:YYYY-MM``."""
        a, sep, b = text.partition(":")
        if not sep:
            raise ValueError(f"expected START:END as YYYY-MM:YYYY-MM, got {text!r}")
        return cls(MonthStamp.parse(a), MonthStamp.parse(b))

    def __str__(self) -> str:
        return f"{self.start}:{self.end}"


DEFAULT_PERIOD = Period(MonthStamp(1900, 1), MonthStamp(2014, 12))


@dataclass(frozen=True)
class PdsiSeries:
    """One cell's monthly values over a period; NaN marks an absent month."""

    cell: GridCoordinate
    period: Period
    values: np.ndarray

    @property
    def valid_count(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.values)))

    def present(self) -> Iterator[tuple[MonthStamp, float]]:
        base = self.period.start.serial
        for off in np.flatnonzero(~np.isnan(self.values)):
            yield MonthStamp.from_serial(base + int(off)), float(self.values[off])


@dataclass(frozen=True, eq=False)
class GridDataset:
    """Immutable set of cell series on a shared monthly axis.

    Cells are kept in ascending flat-index order so that every derived table
    is independent of input row order.
    """

    period: Period
    cells: tuple[GridCoordinate, ...]
    values: np.ndarray = field(repr=False)
    warnings: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape != (len(self.cells), self.period.n_months):
            raise ValueError(
                f"values shape {vals.shape} does not match {len(self.cells)} cells x {self.period.n_months} months"
            )
        if len(set(self.cells)) != len(self.cells):
            raise ValueError("duplicate grid coordinate")
        if np.isinf(vals).any():
            raise ValueError("PDSI values must be finite (use NaN for absent months)")
        keep = ~np.isnan(vals).all(axis=1)
        order = sorted((c.flat_index, i) for i, c in enumerate(self.cells) if keep[i])
        cells = tuple(self.cells[i] for _, i in order)
        vals = vals[[i for _, i in order]] if order else np.empty((0, self.period.n_months))
        vals.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "values", vals)
        n_out = int(np.count_nonzero(np.abs(vals[~np.isnan(vals)]) > PDSI_SOFT_LIMIT))
        if n_out:
            _logger.warning("%d values outside [-10, 10] retained", n_out)
            self.warnings.setdefault("out_of_range", n_out)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def series(self, i: int) -> PdsiSeries:
        return PdsiSeries(self.cells[i], self.period, self.values[i])

    def __iter__(self) -> Iterator[PdsiSeries]:
        for i in range(len(self.cells)):
            yield self.series(i)

    def valid_counts(self) -> np.ndarray:
        return np.count_nonzero(~np.isnan(self.values), axis=1)

    def equals(self, other: "GridDataset", atol: float = 0.0) -> bool:
        if self.period != other.period or self.cells != other.cells:
            return False
        a, b = self.values, other.values
        if not np.array_equal(np.isnan(a), np.isnan(b)):
            return False
        m = ~np.isnan(a)
        return bool(np.all(np.abs(a[m] - b[m]) <= atol))


# ---------------------------------------------------------------------------
# CSV


def ingest_csv(
    source,
    missing_sentinel: float = MISSING_SENTINEL,
    strict: bool = False,
    period: Period = DEFAULT_PERIOD,
) -> GridDataset:
    """Read ``lon,lat,year,month,pdsi`` rows into a :class:`GridDataset`.

    :param source: path, text stream or binary stream (UTF-8)
    :param missing_sentinel: pdsi value meaning "absent"
    :param strict: abort on the first malformed or duplicate row instead of
        skipping (malformed) or keeping the last occurrence (duplicate)
    :param period: records outside this window are dropped
    :return: dataset; counts of skipped/duplicate/out-of-period rows are in
        ``dataset.warnings``
    :raise DataError: malformed row in strict mode, off-lattice coordinate,
        duplicate in strict mode, or nothing left to analyze
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return _ingest(fh, missing_sentinel, strict, period)
    return _ingest(source, missing_sentinel, strict, period)


def _ingest(stream, sentinel, strict, period) -> GridDataset:
    if isinstance(stream, io.TextIOBase):
        text = stream
    else:
        text = io.TextIOWrapper(stream, encoding="utf-8", newline="")
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise DataError(f"line 1: expected header {','.join(CSV_HEADER)!r}, got {header!r}")

    counts = {"malformed": 0, "duplicate": 0, "outside_period": 0, "missing": 0}
    slots: dict[GridCoordinate, dict[int, float]] = {}
    base = period.start.serial
    n = period.n_months
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        try:
            if len(row) != 5:
                raise ValueError(f"expected 5 fields, got {len(row)}")
            lon, lat = float(row[0]), float(row[1])
            stamp = MonthStamp(int(row[2]), int(row[3]))
            value = float(row[4])
            if math.isnan(value) or math.isinf(value):
                raise ValueError(f"non-finite pdsi {row[4]!r}")
        except ValueError as exc:
            if strict:
                raise DataError(f"line {lineno}: malformed row ({exc})") from None
            counts["malformed"] += 1
            continue
        cell = GridCoordinate.from_degrees(lon, lat)
        off = stamp.serial - base
        if not 0 <= off < n:
            counts["outside_period"] += 1
            continue
        by_month = slots.setdefault(cell, {})
        if off in by_month:
            if strict:
                raise DataError(f"line {lineno}: duplicate record for {cell.lon_deg},{cell.lat_deg} {stamp}")
            counts["duplicate"] += 1
        if value == sentinel:
            counts["missing"] += 1
            by_month[off] = math.nan
        else:
            by_month[off] = value

    cells = list(slots)
    values = np.full((len(cells), n), np.nan)
    for i, cell in enumerate(cells):
        for off, v in slots[cell].items():
            values[i, off] = v
    ds = GridDataset(period, tuple(cells), values, warnings={k: v for k, v in counts.items() if v})
    if ds.n_cells == 0:
        raise DataError("dataset is empty: no cell has a present PDSI value in the period")
    if counts["duplicate"]:
        _logger.warning("%d duplicate (cell, month) rows; last occurrence kept", counts["duplicate"])
    if counts["malformed"]:
        _logger.warning("%d malformed rows skipped", counts["malformed"])
    return ds


def format_value(v: float) -> str:
    """Shortest round-tripping decimal text for a float."""
    return repr(float(v))


def iter_csv_rows(dataset: GridDataset, include_missing: bool = False) -> Iterable[list[str]]:
    months = dataset.period.months()
    for cell, row in zip(dataset.cells, dataset.values):
        lon, lat = format_value(cell.lon_deg), format_value(cell.lat_deg)
        for stamp, v in zip(months, row):
            if np.isnan(v):
                if not include_missing:
                    continue
                text = format_value(MISSING_SENTINEL)
            else:
                text = format_value(v)
            yield [lon, lat, str(stamp.year), str(stamp.month), text]


def dumps_csv(dataset: GridDataset, include_missing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(iter_csv_rows(dataset, include_missing))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# coverage


def coverage_profile(dataset: GridDataset) -> list[tuple[MonthStamp, float]]:
    """Percent of the 7920-cell lattice without a value, month by month."""
    if dataset.n_cells == 0:
        raise DataError("coverage of an empty dataset")
    present = np.count_nonzero(~np.isnan(dataset.values), axis=0)
    pct = 100.0 * (N_LATTICE - present) / N_LATTICE
    return list(zip(dataset.period.months(), (float(p) for p in pct)))


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the AR(1) surrogate generator.

    ``trend_onset`` restricts the linear drift to months from that year on
    (a ramp starting at zero); ``None`` applies it over the whole period.
    """

    n_cells: int = 100
    period: Period = DEFAULT_PERIOD
    ar1_phi: float = 0.9
    noise_sd: float = 1.0
    trend_per_century: float = 0.0
    missing_fraction: float = 0.0
    trend_onset: int | None = None

    def validate(self):
        if not isinstance(self.n_cells, (int, np.integer)) or not 1 <= self.n_cells <= N_LATTICE:
            raise ValueError(f"n_cells must be in 1..{N_LATTICE}, got {self.n_cells!r}")
        if not 0.0 <= self.ar1_phi < 1.0:
            raise ValueError(f"ar1_phi must be in [0, 1), got {self.ar1_phi}")
        if not self.noise_sd > 0:
            raise ValueError(f"noise_sd must be > 0, got {self.noise_sd}")
        if not math.isfinite(self.trend_per_century):
            raise ValueError("trend_per_century must be finite")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ValueError(f"missing_fraction must be in [0, 1), got {self.missing_fraction}")


SYNTHETIC_SD = 2.0


def generate_synthetic(spec: SyntheticSpec, seed: int) -> GridDataset:
    """Deterministic PDSI-like surrogate dataset.

    Each cell is a stationary AR(1) process rescaled to SD 2.0, plus optional
    linear drift, clipped to [-10, 10], with months dropped independently at
    ``missing_fraction``.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF))
    n, phi = spec.period.n_months, spec.ar1_phi
    flat = np.sort(rng.choice(N_LATTICE, size=spec.n_cells, replace=False))
    eps = rng.normal(0.0, spec.noise_sd, size=(spec.n_cells, n))
    x = np.empty_like(eps)
    stationary_sd = spec.noise_sd / math.sqrt(1.0 - phi * phi)
    x[:, 0] = eps[:, 0] / math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[:, t] = phi * x[:, t - 1] + eps[:, t]
    x *= SYNTHETIC_SD / stationary_sd

    years_elapsed = np.arange(n) / 12.0
    if spec.trend_onset is not None:
        onset = (spec.trend_onset - spec.period.start.year) * 12 - (spec.period.start.month - 1)
        years_elapsed = np.clip(np.arange(n) - onset, 0, None) / 12.0
    x += spec.trend_per_century * years_elapsed / 100.0
    np.clip(x, -PDSI_SOFT_LIMIT, PDSI_SOFT_LIMIT, out=x)

    if spec.missing_fraction > 0:
        x[rng.random(x.shape) < spec.missing_fraction] = np.nan
    cells = tuple(GridCoordinate.from_flat(int(f)) for f in flat)
    return GridDataset(spec.period, cells, x)
