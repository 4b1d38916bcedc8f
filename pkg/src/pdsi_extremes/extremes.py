"""Per-cell largest negative PDSI values (LNPV) and Palmer classification."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import GridCoordinate, GridDataset, MonthStamp, PdsiSeries

EXTREME_DROUGHT_LEVEL = -4.0
DEFAULT_K = 10


class PalmerClass(enum.Enum):
    ExtremeDrought = "extreme drought"
    SevereDrought = "severe drought"
    ModerateDrought = "moderate drought"
    MildDrought = "mild drought"
    IncipientDrySpell = "incipient dry spell"
    NearNormal = "near normal"
    IncipientWetSpell = "incipient wet spell"
    SlightlyWet = "slightly wet"
    ModeratelyWet = "moderately wet"
    VeryWet = "very wet"
    ExtremelyWet = "extremely wet"


# dry side: upper bounds, inclusive (v <= bound)
_DRY = (
    (-4.0, PalmerClass.ExtremeDrought),
    (-3.0, PalmerClass.SevereDrought),
    (-2.0, PalmerClass.ModerateDrought),
    (-1.0, PalmerClass.MildDrought),
    (-0.5, PalmerClass.IncipientDrySpell),
)
# wet side: lower bounds, inclusive (v >= bound), most extreme first
_WET = (
    (4.0, PalmerClass.ExtremelyWet),
    (3.0, PalmerClass.VeryWet),
    (2.0, PalmerClass.ModeratelyWet),
    (1.0, PalmerClass.SlightlyWet),
    (0.5, PalmerClass.IncipientWetSpell),
)


def classify_pdsi(value: float) -> PalmerClass:
    """Palmer class of a PDSI value.

    Shared boundaries go to the more extreme class, e.g. -3.0 is severe
    drought and 3.0 is very wet.
    """
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"cannot classify non-finite PDSI {value!r}")
    if v <= -0.5:
        for bound, cls in _DRY:
            if v <= bound:
                return cls
    if v >= 0.5:
        for bound, cls in _WET:
            if v >= bound:
                return cls
    return PalmerClass.NearNormal


def fractional_year(when: MonthStamp) -> float:
    """Mid-month decimal year: Jan 1900 -> 1900.0417."""
    return when.year + (when.month - 0.5) / 12


@dataclass(frozen=True)
class ExtremeEvent:
    cell: GridCoordinate
    when: MonthStamp
    value: float


@dataclass(frozen=True)
class LnpvSet:
    cell: GridCoordinate
    events: tuple[ExtremeEvent, ...]
    capacity: int = DEFAULT_K

    @property
    def reached_extreme(self) -> bool:
        """False when the cell's worst month is still above -4 (advisory)."""
        return bool(self.events) and self.events[0].value <= EXTREME_DROUGHT_LEVEL

    @property
    def rank1(self) -> ExtremeEvent:
        return self.events[0]


def lnpv_offsets(values: np.ndarray, k: int) -> np.ndarray:
    """Offsets of the k smallest present values, most negative first.

    Ties resolve to the earlier month because the sort is stable over a
    time-ordered array.
    """
    present = np.flatnonzero(~np.isnan(values))
    if present.size == 0:
        raise ValueError("series has no present values")
    vals = values[present]
    m = min(k, present.size)
    if m < present.size:
        # partition first, then keep every element tied with the m-th value so
        # the stable sort can resolve ties by month
        cut = np.partition(vals, m - 1)[m - 1]
        keep = vals <= cut
        present, vals = present[keep], vals[keep]
    order = np.argsort(vals, kind="stable")[:m]
    return present[order]


def extract_lnpv(series: PdsiSeries, k: int = DEFAULT_K) -> LnpvSet:
    """The k most negative months of one cell (all of them if fewer exist)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    base = series.period.start.serial
    offs = lnpv_offsets(series.values, k)
    events = tuple(
        ExtremeEvent(series.cell, MonthStamp.from_serial(base + int(o)), float(series.values[o])) for o in offs
    )
    return LnpvSet(series.cell, events, k)


def lnpv_map(dataset: GridDataset, k: int = DEFAULT_K, threads: int = 1) -> list[LnpvSet]:
    """One :class:`LnpvSet` per cell, in the dataset's cell order."""
    if dataset.n_cells == 0:
        raise ValueError("empty dataset")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda s: extract_lnpv(s, k), dataset))
    return [extract_lnpv(s, k) for s in dataset]


def rank1_points(sets: list[LnpvSet]) -> np.ndarray:
    """``(n, 2)`` array of (fractional year, value) for each cell's worst month."""
    return np.array([[fractional_year(s.rank1.when), s.rank1.value] for s in sets], dtype=np.float64).reshape(-1, 2)


def rank1_year_counts(sets: list[LnpvSet]) -> dict[int, int]:
    """How many cells had their single worst month in each calendar year."""
    out: dict[int, int] = {}
    for s in sets:
        y = s.rank1.when.year
        out[y] = out.get(y, 0) + 1
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# exports


def lnpv_csv(sets: list[LnpvSet]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lon", "lat", "rank", "year", "month", "pdsi"])
    for s in sets:
        for rank, ev in enumerate(s.events, start=1):
            w.writerow([repr(s.cell.lon_deg), repr(s.cell.lat_deg), rank, ev.when.year, ev.when.month, repr(ev.value)])
    return buf.getvalue()


def point_feature(cell: GridCoordinate, properties: dict) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [cell.lon_deg, cell.lat_deg]},
        "properties": properties,
    }


def feature_collection(features: list[dict]) -> str:
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=1, sort_keys=True) + "\n"


def lnpv_geojson(sets: list[LnpvSet]) -> str:
    feats = []
    for s in sets:
        ev = s.rank1
        feats.append(
            point_feature(
                s.cell,
                {
                    "lnpv": ev.value,
                    "fractional_year": round(fractional_year(ev.when), 6),
                    "palmer_class": classify_pdsi(ev.value).value,
                    "reached_extreme": s.reached_extreme,
                },
            )
        )
    return feature_collection(feats)
