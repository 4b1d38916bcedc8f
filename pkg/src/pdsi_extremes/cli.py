"""Command-line entry point: ``pdsi-extremes <command> [options]``.

Exit status: 0 success, 1 usage/configuration error, 2 data error. Output
files are staged in memory and only written (each via temp file + rename)
once the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import KMeansOptions, cluster_lnpv, clusters_csv, clusters_geojson, silhouette_csv, summary_csv
from .extremes import (
    PalmerClass,
    classify_pdsi,
    lnpv_csv,
    lnpv_geojson,
    lnpv_map,
    rank1_year_counts,
)
from .grid import (
    DEFAULT_PERIOD,
    MISSING_SENTINEL,
    DataError,
    Period,
    SyntheticSpec,
    coverage_profile,
    dumps_csv,
    generate_synthetic,
    ingest_csv,
)
from .spectral import cwt_morlet, dominant_period, global_spectrum_csv
from .svg import line_plot
from .trend import (
    annual_csv,
    band_csv,
    band_exceedance,
    band_params_for,
    mann_kendall,
    mann_kendall_csv,
    mann_kendall_text,
    monthly_csv,
    monthly_lnpv_counts,
    moving_average,
    null_band,
    ols_trend,
)

_logger = logging.getLogger("pdsi_extremes")

CONFIG_NAME = "config.txt"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Every knob of a run. Defaults reproduce the published settings."""

    input: str = ""
    period: str = str(DEFAULT_PERIOD)
    sentinel: float = MISSING_SENTINEL
    strict: bool = False
    k: int = 10
    clusters: str = "auto"
    k_min: int = 2
    k_max: int = 10
    scaling: str = "none"
    init: str = "kmeans_pp"
    restarts: int = 10
    points: str = "rank1"
    reps: int = 100
    p_mode: str = "uniform"
    formats: str = "csv,geojson,svg"
    seed: int = 0

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in dataclasses.fields(cls)}

    def dumps(self) -> str:
        lines = [f"{f.name}={getattr(self, f.name)}" for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> dict:
        types = cls.field_types()
        out = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise UsageError(f"config line {lineno}: unknown or malformed entry {line!r}")
            out[key] = _coerce(types[key], value.strip(), key)
        return out

    def validate(self):
        try:
            Period.parse(self.period)
        except ValueError as exc:
            raise UsageError(f"period: {exc}") from None
        if self.k < 1:
            raise UsageError("k must be >= 1")
        if self.clusters != "auto":
            try:
                if int(self.clusters) < 1:
                    raise ValueError
            except ValueError:
                raise UsageError(f"clusters must be 'auto' or a positive integer, got {self.clusters!r}") from None
        if not 2 <= self.k_min <= self.k_max:
            raise UsageError("need 2 <= k_min <= k_max")
        if self.scaling not in ("none", "standardize"):
            raise UsageError("scaling must be none or standardize")
        if self.init not in ("kmeans_pp", "random"):
            raise UsageError("init must be kmeans_pp or random")
        if self.points not in ("rank1", "all10"):
            raise UsageError("points must be rank1 or all10")
        if self.p_mode not in ("uniform", "availability"):
            raise UsageError("p_mode must be uniform or availability")
        if self.reps < 2 or self.restarts < 1:
            raise UsageError("reps must be >= 2 and restarts >= 1")
        bad = set(self.format_set()) - {"csv", "geojson", "svg"}
        if bad:
            raise UsageError(f"unknown output format(s): {', '.join(sorted(bad))}")

    def format_set(self) -> set[str]:
        return {f.strip() for f in self.formats.split(",") if f.strip()}

    def kmeans_options(self) -> KMeansOptions:
        return KMeansOptions(init=self.init, n_restarts=self.restarts, scaling=self.scaling)


def _coerce(typ, value: str, key: str):
    try:
        if typ in (bool, "bool"):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ in (int, "int"):
            return int(value)
        if typ in (float, "float"):
            return float(value)
        return value
    except ValueError:
        raise UsageError(f"config: bad value for {key}: {value!r}") from None


# ---------------------------------------------------------------------------
# output staging


class OutputTree:
    """Collects files and writes them only when the command succeeds."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def commit(self) -> list[Path]:
        self.root.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.files):
            dest = self.root / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=dest.parent, prefix=f".{dest.name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(self.files[name])
                os.replace(tmp, dest)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            written.append(dest)
        return written


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, data=True, out=True):
    S = argparse.SUPPRESS
    if data:
        p.add_argument("--input", "-i", default=S, help="CSV with header lon,lat,year,month,pdsi")
        p.add_argument("--period", default=S, help="analysis window START:END as YYYY-MM:YYYY-MM (default 1900-01:2014-12)")
        p.add_argument("--sentinel", type=float, default=S, help="missing-value sentinel (default -99.99)")
        p.add_argument("--strict", action="store_true", default=S, help="abort on malformed or duplicate rows")
    if out:
        p.add_argument("--out", "-o", default=".", help="output directory")
        p.add_argument("--formats", default=S, help="comma list of csv,geojson,svg")
    p.add_argument("--config", help="key=value config file; explicit flags override it")
    p.add_argument("--seed", type=int, default=S, help="seed for all randomness")
    p.add_argument("--threads", type=int, default=1, help="worker threads (does not change results)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--quiet", "-q", action="store_true")
    g.add_argument("--verbose", "-v", action="store_true")


def _lnpv_opts(p):
    p.add_argument("--k", type=int, default=argparse.SUPPRESS, help="LNPV events per cell (default 10)")


def _cluster_opts(p):
    S = argparse.SUPPRESS
    p.add_argument("--clusters", default=S, help="number of clusters or 'auto' (silhouette)")
    p.add_argument("--k-min", dest="k_min", type=int, default=S)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)
    p.add_argument("--scaling", choices=["none", "standardize"], default=S)
    p.add_argument("--init", choices=["kmeans_pp", "random"], default=S)
    p.add_argument("--restarts", type=int, default=S)
    p.add_argument("--points", choices=["rank1", "all10"], default=S)


def _band_opts(p):
    S = argparse.SUPPRESS
    p.add_argument("--reps", type=int, default=S, help="Monte Carlo replicates per year (default 100)")
    p.add_argument(
        "--respect-availability",
        dest="p_mode",
        action="store_const",
        const="availability",
        default=S,
        help="use per-cell p = k / valid months instead of k / period months",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdsi-extremes", description="Extreme-drought analysis of gridded monthly PDSI.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="validate a CSV and write a normalized copy")
    _common(p)

    p = sub.add_parser("coverage", help="percent of the lattice without data, per month")
    _common(p)

    p = sub.add_parser("extract", help="per-cell LNPV tables and maps")
    _common(p)
    _lnpv_opts(p)

    p = sub.add_parser("classify", help="Palmer class of values, or of each cell's LNPV")
    _common(p)
    _lnpv_opts(p)
    p.add_argument("values", nargs="*", type=float, help="PDSI values to classify")

    p = sub.add_parser("cluster", help="K-means of LNPV points with silhouette selection")
    _common(p)
    _lnpv_opts(p)
    _cluster_opts(p)

    p = sub.add_parser("trend", help="monthly/annual counts, OLS, Mann-Kendall, moving averages, null band")
    _common(p)
    _lnpv_opts(p)
    _band_opts(p)

    p = sub.add_parser("nullband", help="Monte Carlo random-timing band")
    _common(p, data=False)
    p.add_argument("--cells", type=int, default=2755)
    p.add_argument("--p", type=float, default=10 / 1380)
    p.add_argument("--years", type=int, default=115)
    p.add_argument("--start-year", type=int, default=1900)
    _band_opts(p)

    p = sub.add_parser("wavelet", help="Morlet wavelet scan of annual counts")
    _common(p)
    _lnpv_opts(p)

    p = sub.add_parser("synth", help="write a synthetic AR(1) dataset")
    _common(p, data=False)
    p.add_argument("--cells", type=int, default=100)
    p.add_argument("--period", default=str(DEFAULT_PERIOD))
    p.add_argument("--phi", type=float, default=0.9)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--trend", type=float, default=0.0, help="drift in PDSI units per century")
    p.add_argument("--trend-onset", type=int, default=None, help="year the drift starts (default: period start)")
    p.add_argument("--missing", type=float, default=0.0, help="fraction of months dropped")
    p.add_argument("--output", default="synthetic.csv", help="file name inside --out")

    p = sub.add_parser("report", help="full pipeline: every table, map and plot")
    _common(p)
    _lnpv_opts(p)
    _cluster_opts(p)
    _band_opts(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        values.update(RunConfig.loads(text))
    names = RunConfig.field_types()
    for key, val in vars(args).items():
        if key in names and val is not None:
            values[key] = val
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _load(cfg: RunConfig):
    if not cfg.input:
        raise UsageError("--input is required")
    if not Path(cfg.input).is_file():
        raise UsageError(f"input file not found: {cfg.input}")
    ds = ingest_csv(cfg.input, missing_sentinel=cfg.sentinel, strict=cfg.strict, period=Period.parse(cfg.period))
    _logger.info("ingested %d cells over %s", ds.n_cells, ds.period)
    return ds


# ---------------------------------------------------------------------------
# commands


def _coverage_csv(ds) -> str:
    lines = ["year,month,percent_missing"]
    lines += [f"{m.year},{m.month},{pct:.4f}" for m, pct in coverage_profile(ds)]
    return "\n".join(lines) + "\n"


def _rank1_years_csv(sets) -> str:
    lines = ["year,cells"] + [f"{y},{c}" for y, c in rank1_year_counts(sets).items()]
    return "\n".join(lines) + "\n"


def cmd_ingest(cfg, args, out: OutputTree):
    ds = _load(cfg)
    out.add("dataset.csv", dumps_csv(ds))
    print(f"cells: {ds.n_cells}  period: {ds.period}  values: {int(np.count_nonzero(~np.isnan(ds.values)))}")
    for key, val in sorted(ds.warnings.items()):
        print(f"{key}: {val}")


def cmd_coverage(cfg, args, out):
    out.add("coverage.csv", _coverage_csv(_load(cfg)))


def cmd_extract(cfg, args, out):
    ds = _load(cfg)
    sets = lnpv_map(ds, cfg.k, threads=args.threads)
    fmts = cfg.format_set()
    if "csv" in fmts:
        out.add("lnpv.csv", lnpv_csv(sets))
        out.add("rank1_years.csv", _rank1_years_csv(sets))
    if "geojson" in fmts:
        out.add("lnpv.geojson", lnpv_geojson(sets))


def cmd_classify(cfg, args, out):
    for v in args.values:
        try:
            print(f"{v!r},{classify_pdsi(v).value}")
        except ValueError as exc:
            raise DataError(str(exc)) from None
    if cfg.input:
        sets = lnpv_map(_load(cfg), cfg.k, threads=args.threads)
        tally = {c: 0 for c in PalmerClass}
        for s in sets:
            tally[classify_pdsi(s.rank1.value)] += 1
        lines = ["palmer_class,cells"] + [f"{c.value},{n}" for c, n in tally.items()]
        out.add("lnpv_classes.csv", "\n".join(lines) + "\n")
    elif not args.values:
        raise UsageError("give PDSI values or --input")


def _cluster_outputs(cfg, ds, threads, out):
    k = None if cfg.clusters == "auto" else int(cfg.clusters)
    res = cluster_lnpv(
        ds,
        k=k,
        options=cfg.kmeans_options(),
        seed=cfg.seed,
        lnpv_k=cfg.k,
        points=cfg.points,
        k_range=range(cfg.k_min, cfg.k_max + 1),
        threads=threads,
    )
    fmts = cfg.format_set()
    if "csv" in fmts:
        out.add("clusters.csv", clusters_csv(res))
        out.add("cluster_summary.csv", summary_csv(res))
        if res.silhouettes:
            out.add("silhouette.csv", silhouette_csv(res.silhouettes))
    if "geojson" in fmts:
        out.add("clusters.geojson", clusters_geojson(res))
    if "svg" in fmts and len(res.silhouettes) > 1:
        ks = sorted(res.silhouettes)
        out.add(
            "silhouette.svg",
            line_plot([("mean silhouette", ks, [res.silhouettes[k] for k in ks], "line")],
                      title="Silhouette analysis", xlabel="k", ylabel="mean silhouette"),
        )
    return res


def cmd_cluster(cfg, args, out):
    res = _cluster_outputs(cfg, _load(cfg), args.threads, out)
    print(f"k = {res.model.k}, inertia = {res.model.inertia:.6g}")


def _trend_outputs(cfg, ds, threads, out):
    counts = monthly_lnpv_counts(ds, cfg.k)
    params = band_params_for(ds, cfg.k, cfg.reps, respect_availability=cfg.p_mode == "availability")
    band = null_band(params, cfg.seed, threads=threads)
    exc = band_exceedance(counts.years, counts.annual, band)
    mk_monthly = mann_kendall(counts.monthly)
    mk_annual = mann_kendall(counts.annual)
    ols_m = ols_trend(counts.monthly, steps_per_decade=120)
    ols_a = ols_trend(counts.annual, steps_per_decade=10)
    fmts = cfg.format_set()
    if "csv" in fmts:
        out.add("monthly_counts.csv", monthly_csv(counts))
        out.add("annual_counts.csv", annual_csv(counts, band))
        out.add("nullband.csv", band_csv(band))
        out.add("mann_kendall_monthly.csv", mann_kendall_csv(mk_monthly))
        out.add("mann_kendall_annual.csv", mann_kendall_csv(mk_annual))
        out.add(
            "ols.csv",
            "series,slope_per_step,intercept,slope_per_decade\n"
            f"monthly,{ols_m.slope!r},{ols_m.intercept!r},{ols_m.slope_per_decade!r}\n"
            f"annual,{ols_a.slope!r},{ols_a.intercept!r},{ols_a.slope_per_decade!r}\n",
        )
    if "svg" in fmts:
        frac = [m.year + (m.month - 0.5) / 12 for m in counts.months]
        fit = [ols_m.intercept + ols_m.slope * i for i in range(len(frac))]
        out.add(
            "monthly_counts.svg",
            line_plot([("monthly count", frac, counts.monthly.tolist(), "line"), ("OLS fit", frac, fit, "dashed")],
                      title="Cells at one of their LNPV, by month", xlabel="year", ylabel="cells"),
        )
        yrs = counts.years.tolist()
        layers = [("annual count", yrs, counts.annual.tolist(), "line")]
        for w in (10, 20, 30):
            if w <= len(yrs):
                ma = moving_average(counts.annual, w)
                layers.append((f"{w}-yr moving average", yrs, [None] * (w - 1) + ma.tolist(), "line"))
        layers.append(("band 5%", yrs, band.lower.tolist(), "dashed"))
        layers.append(("band 95%", yrs, band.upper.tolist(), "dashed"))
        out.add("annual_counts.svg", line_plot(layers, title="Annual LNPV cells vs random-timing band",
                                               xlabel="year", ylabel="cells"))
    return counts, band, exc, mk_monthly, mk_annual, ols_m


def cmd_trend(cfg, args, out):
    ds = _load(cfg)
    counts, band, exc, mk_m, mk_a, ols_m = _trend_outputs(cfg, ds, args.threads, out)
    text = mann_kendall_text(mk_m, "monthly counts") + mann_kendall_text(mk_a, "annual counts")
    text += f"OLS slope: {ols_m.slope_per_decade:.4f} cells/decade (monthly series)\n"
    text += f"sustained band exceedance onset: {exc.onset if exc.onset is not None else 'none'}\n"
    out.add("trend_summary.txt", text)
    sys.stdout.write(text)


def cmd_nullband(cfg, args, out):
    from .trend import NullBandParams

    params = NullBandParams(
        n_cells=args.cells, p=args.p, reps=cfg.reps, years=args.years, start_year=args.start_year
    )
    try:
        band = null_band(params, cfg.seed, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if "csv" in cfg.format_set():
        out.add("nullband.csv", band_csv(band))
    if "svg" in cfg.format_set():
        yrs = band.years.tolist()
        out.add("nullband.svg", line_plot([("5th pct", yrs, band.lower.tolist(), "line"),
                                           ("95th pct", yrs, band.upper.tolist(), "line")],
                                          title="Random-timing null band", xlabel="year", ylabel="cells"))


def _wavelet_outputs(cfg, annual, out):
    spec = cwt_morlet(annual)
    dom = dominant_period(spec)
    if "csv" in cfg.format_set():
        out.add("wavelet_global.csv", global_spectrum_csv(spec))
    if "svg" in cfg.format_set():
        per = spec.periods.tolist()
        out.add("wavelet_global.svg", line_plot(
            [("global power", per, spec.global_power.tolist(), "line"),
             ("95% white noise", per, spec.significance.tolist(), "dashed")],
            title="Global wavelet spectrum of annual counts", xlabel="period (years)", ylabel="power", logx=True))
    return spec, dom


def cmd_wavelet(cfg, args, out):
    counts = monthly_lnpv_counts(_load(cfg), cfg.k)
    _, dom = _wavelet_outputs(cfg, counts.annual, out)
    if dom.significant:
        print(f"dominant period: {dom.period:.2f} years (significant)")
    else:
        print("no significant period")


def cmd_synth(cfg, args, out):
    try:
        spec = SyntheticSpec(
            n_cells=args.cells,
            period=Period.parse(args.period),
            ar1_phi=args.phi,
            noise_sd=args.noise_sd,
            trend_per_century=args.trend,
            missing_fraction=args.missing,
            trend_onset=args.trend_onset,
        )
        ds = generate_synthetic(spec, cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.add(args.output, dumps_csv(ds))


def cmd_report(cfg, args, out):
    ds = _load(cfg)
    threads = args.threads
    fmts = cfg.format_set()
    sets = lnpv_map(ds, cfg.k, threads=threads)
    if "csv" in fmts:
        out.add("coverage.csv", _coverage_csv(ds))
        out.add("lnpv.csv", lnpv_csv(sets))
        out.add("rank1_years.csv", _rank1_years_csv(sets))
    if "geojson" in fmts:
        out.add("lnpv.geojson", lnpv_geojson(sets))
    if "svg" in fmts:
        cov = coverage_profile(ds)
        out.add("coverage.svg", line_plot(
            [("% of lattice without data", [m.fractional_year() for m, _ in cov], [p for _, p in cov], "line")],
            title="Missing data", xlabel="year", ylabel="percent"))
    res = _cluster_outputs(cfg, ds, threads, out)
    counts, band, exc, mk_m, mk_a, ols_m = _trend_outputs(cfg, ds, threads, out)
    spec, dom = _wavelet_outputs(cfg, counts.annual, out)

    top = sorted(rank1_year_counts(sets).items(), key=lambda kv: (-kv[1], kv[0]))[:3]
    never = sum(1 for s in sets if not s.reached_extreme)
    empty_months = [str(m) for m, c in zip(counts.months, counts.monthly) if c == 0]
    lines = [
        f"cells processed: {ds.n_cells}",
        f"period: {ds.period} ({ds.period.n_months} months)",
        f"LNPV per cell: {cfg.k}",
        f"cells never at extreme drought (LNPV > -4): {never}",
        "years with most rank-1 LNPV: " + ", ".join(f"{y} ({c})" for y, c in top),
        f"months with no LNPV event: {len(empty_months)}" + (f" ({', '.join(empty_months[:12])})" if empty_months else ""),
        f"clusters: k = {res.model.k} ({'silhouette-selected' if cfg.clusters == 'auto' else 'fixed'}), "
        f"mean silhouette = {res.model.mean_silhouette if res.model.mean_silhouette is None else round(res.model.mean_silhouette, 6)}",
    ]
    for c, (t, v) in enumerate(res.model.centroids):
        lines.append(f"  centroid {c}: ({t:.2f}, {v:.2f})")
    lines.append(mann_kendall_text(mk_m, "monthly counts").rstrip())
    lines.append(mann_kendall_text(mk_a, "annual counts").rstrip())
    lines.append(f"OLS slope (monthly counts): {ols_m.slope_per_decade:.4f} cells/decade")
    inside = exc.fraction_inside()
    lines.append(f"years inside null band: {inside:.1%}; sustained exceedance onset: "
                 f"{exc.onset if exc.onset is not None else 'none'}")
    lines.append(
        "wavelet: " + (f"dominant period {dom.period:.2f} years" if dom.significant else "no significant period")
    )
    for key, val in sorted(ds.warnings.items()):
        lines.append(f"ingest warning: {key} = {val}")
    out.add("summary.txt", "\n".join(lines) + "\n")
    if not args.quiet:
        print("\n".join(lines))


COMMANDS = {
    "ingest": cmd_ingest,
    "coverage": cmd_coverage,
    "extract": cmd_extract,
    "classify": cmd_classify,
    "cluster": cmd_cluster,
    "trend": cmd_trend,
    "nullband": cmd_nullband,
    "wavelet": cmd_wavelet,
    "synth": cmd_synth,
    "report": cmd_report,
}

# commands whose outputs are a pure function of the config and so get a replay file
_REPLAYABLE = {"extract", "cluster", "trend", "wavelet", "report", "coverage"}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else 1
    level = logging.ERROR if args.quiet else logging.DEBUG if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = resolve_config(args)
        out = OutputTree(args.out)
        COMMANDS[args.command](cfg, args, out)
        if args.command in _REPLAYABLE:
            out.add(CONFIG_NAME, cfg.dumps())
        out.commit()
    except UsageError as exc:
        print(f"pdsi-extremes: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError) as exc:
        print(f"pdsi-extremes: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
