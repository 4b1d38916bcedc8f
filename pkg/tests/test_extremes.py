import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdsi_extremes.extremes import (
    PalmerClass,
    classify_pdsi,
    extract_lnpv,
    fractional_year,
    lnpv_csv,
    lnpv_geojson,
    lnpv_map,
    rank1_points,
    rank1_year_counts,
)
from pdsi_extremes.grid import GridCoordinate, MonthStamp, PdsiSeries, Period, SyntheticSpec, generate_synthetic
from conftest import make_dataset

P = PalmerClass


def _series(values, start=MonthStamp(1900, 1)):
    values = np.asarray(values, dtype=float)
    return PdsiSeries(GridCoordinate(0, 0), Period(start, MonthStamp.from_serial(start.serial + len(values) - 1)), values)


@pytest.mark.parametrize(
    "value, expected",
    [
        (-4.5, P.ExtremeDrought),
        (-4.0, P.ExtremeDrought),
        (-3.99, P.SevereDrought),
        (-3.0, P.SevereDrought),
        (-2.0, P.ModerateDrought),
        (-1.0, P.MildDrought),
        (-0.5, P.IncipientDrySpell),
        (-0.49, P.NearNormal),
        (0.0, P.NearNormal),
        (0.49, P.NearNormal),
        (0.5, P.IncipientWetSpell),
        (1.0, P.SlightlyWet),
        (2.0, P.ModeratelyWet),
        (3.0, P.VeryWet),
        (4.0, P.ExtremelyWet),
        (11.0, P.ExtremelyWet),
    ],
)
def test_classify_table(value, expected):
    assert classify_pdsi(value) is expected


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_classify_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        classify_pdsi(bad)


@given(st.floats(-20, 20, allow_nan=False))
def test_classify_total_and_monotone(v):
    order = list(PalmerClass)
    c = classify_pdsi(v)
    assert order.index(classify_pdsi(v + 0.5)) >= order.index(c)


def test_fractional_year():
    assert fractional_year(MonthStamp(1900, 1)) == pytest.approx(1900 + 1 / 24, abs=1e-12)
    assert fractional_year(MonthStamp(2014, 12)) == pytest.approx(2014.958333333, abs=1e-9)
    assert fractional_year(MonthStamp(1957, 7)) == pytest.approx(1957.541666667, abs=1e-9)


def test_extract_fewer_values_than_k():
    s = _series([-2.0] + [np.nan] * 11)
    got = extract_lnpv(s, 10)
    assert len(got.events) == 1
    assert (got.events[0].value, got.events[0].when) == (-2.0, MonthStamp(1900, 1))
    assert not got.reached_extreme


def test_extract_tie_break_earlier_month():
    got = extract_lnpv(_series([-1, -5, -5, -3]), 2)
    assert [(e.value, e.when.month) for e in got.events] == [(-5, 2), (-5, 3)]
    assert got.reached_extreme


def test_extract_requires_present_value():
    with pytest.raises(ValueError):
        extract_lnpv(_series([np.nan, np.nan]), 3)
    with pytest.raises(ValueError):
        extract_lnpv(_series([1.0]), 0)


def _brute(values, k):
    pairs = sorted((v, t) for t, v in enumerate(values) if not math.isnan(v))
    return pairs[:k]


series_values = st.lists(
    st.one_of(st.sampled_from([-4.0, -2.0, 0.0, 1.5]), st.floats(-9, 9, allow_nan=False), st.just(math.nan)),
    min_size=1,
    max_size=60,
).filter(lambda xs: any(not math.isnan(x) for x in xs))


@settings(max_examples=200, deadline=None)
@given(series_values)
def test_extract_matches_full_sort_and_nests(values):
    s = _series(values)
    n_valid = s.valid_count
    prev = ()
    for k in range(1, n_valid + 2):
        got = extract_lnpv(s, k)
        assert [(e.value, e.when.serial) for e in got.events] == _brute(values, k)
        assert len(got.events) == min(k, n_valid)
        assert got.events[: len(prev)] == prev
        assert len({e.when for e in got.events}) == len(got.events)
        prev = got.events


def test_lnpv_map_and_year_slice():
    vals = np.zeros((3, 12 * 115))
    vals[0, (2012 - 1900) * 12 + 6] = -7.0
    vals[1, 5] = -5.0
    vals[2, 700] = -6.0
    ds = make_dataset({(0, 0): vals[0], (1, 1): vals[1], (2, 2): vals[2]})
    sets = lnpv_map(ds, 10)
    assert len(sets) == 3
    for s in sets:
        assert len(s.events) == 10
        v = [e.value for e in s.events]
        assert v == sorted(v)
    counts = rank1_year_counts(sets)
    assert counts[2012] == 1
    pts = rank1_points(sets)
    assert pts.shape == (3, 2) and pts[0, 1] == -7.0


def test_lnpv_map_threads_and_row_order_invariant():
    ds = generate_synthetic(SyntheticSpec(n_cells=30, missing_fraction=0.3), 4)
    a = lnpv_map(ds, 10)
    assert lnpv_map(ds, 10, threads=4) == a
    perm = np.random.default_rng(0).permutation(ds.n_cells)
    from pdsi_extremes.grid import GridDataset

    shuffled = GridDataset(ds.period, tuple(ds.cells[i] for i in perm), ds.values[perm])
    assert lnpv_map(shuffled, 10) == a


def test_exports(tiny_dataset):
    sets = lnpv_map(tiny_dataset, 3)
    rows = lnpv_csv(sets).splitlines()
    assert rows[0] == "lon,lat,rank,year,month,pdsi"
    assert len(rows) == 1 + 3 * 3
    fc = json.loads(lnpv_geojson(sets))
    assert fc["type"] == "FeatureCollection" and len(fc["features"]) == 3
    f = fc["features"][0]
    lon, lat = f["geometry"]["coordinates"]
    assert -180 <= lon <= 180 and -90 <= lat <= 90
    assert {"lnpv", "fractional_year", "palmer_class"} <= set(f["properties"])
