"""Extreme-drought analysis of gridded monthly PDSI.

Extract each grid cell's largest negative PDSI values (LNPV), cluster them in
(time, severity) space, and test whether the number of cells hitting a
historical extreme trends beyond what random timing allows.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .cluster import ClusterModel, KMeansOptions, cluster_lnpv, kmeans, select_k, silhouette_mean
from .extremes import (
    ExtremeEvent,
    LnpvSet,
    PalmerClass,
    classify_pdsi,
    extract_lnpv,
    fractional_year,
    lnpv_map,
)
from .grid import (
    DataError,
    GridCoordinate,
    GridDataset,
    MonthStamp,
    PdsiSeries,
    Period,
    SyntheticSpec,
    coverage_profile,
    generate_synthetic,
    ingest_csv,
)
from .spectral import WaveletSpectrum, cwt_morlet, dominant_period
from .trend import (
    CountSeries,
    MannKendallResult,
    NullBand,
    NullBandParams,
    band_exceedance,
    band_params_for,
    mann_kendall,
    monthly_lnpv_counts,
    moving_average,
    null_band,
    ols_trend,
)
