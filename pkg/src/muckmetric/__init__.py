"""Dyadic Muckenhoupt characteristics and the BMO-type weight metric d_*.

Weights on [0,1) are positive cell values on a dyadic grid, identified up to
scaling (geometric mean one).  The package computes A_p / A_1 / A_inf
characteristics over dyadic (optionally half-shifted) interval families,
the metric d_*(u,v) = ||log u - log v||_BMO, weighted operator norm lower
bounds for martingale transforms, the periodic Hilbert transform, the Riesz
projection and the dyadic maximal function, and the experiments relating
norm continuity in d_* to characteristic growth.
"""

from .config import RunConfig, build_weight, parse_config
from .errors import (
    ConfigError,
    FitError,
    ParameterError,
    PlotError,
    RangeError,
    SearchError,
)
from .experiments import (
    ContinuityResult,
    ContinuityRow,
    NoncompletenessResult,
    NoncompletenessRow,
    RateFit,
    SharpnessResult,
    Theorem2Result,
    Theorem2Row,
    WeightFamily,
    continuity_sweep,
    convexity_check,
    duality_check,
    exp_bmo_direction,
    haar_direction,
    log_distance_profile,
    noncompleteness_demo,
    parallel_map,
    power_circle_family,
    random_cells_family,
    rate_fit,
    scale_to_characteristic,
    sharpness_search,
    theorem2_sweep,
    worker_count,
)
from .grid import (
    CircleGrid,
    Grid,
    GridFunction,
    Interval,
    IntervalFamily,
    average,
    dyadic_intervals,
    grid_function,
    make_circle,
    make_grid,
)
from .interpolation import (
    FactorizationResult,
    InterpolationParams,
    SteinWeissReport,
    continuity_upper_bound,
    factorize,
    interpolated_weight,
    interpolation_params,
    stein_weiss_check,
    t_of_delta,
)
from .operators import (
    DenseMatrix,
    DyadicMaximal,
    MartingaleTransform,
    NormEstimate,
    PeriodicHilbert,
    RieszProjection,
    alternating_signs,
    apply,
    czo_bound_F,
    identity_signs,
    maximal_bound_F,
    random_signs,
    signs_from_string,
    signs_to_string,
    weighted_l2_norm,
    weighted_lp_norm,
)
from .report import CsvTable, emit_svg_plot, render_cell
from .weights import (
    CharacteristicReport,
    Weight,
    a1_characteristic,
    ainfty_characteristic,
    ap_characteristic,
    blo_constant,
    bmo_norm,
    d_star,
    dual_weight,
    exp_weight,
    gj_lambda_star,
    holder_interpolant,
    lemma_gap_check,
    load_weight,
    log_power_profile,
    make_weight,
    normalize_mean_ratio,
    normalize_weight,
    power_weight,
    random_weight,
    save_weight,
    unit_weight,
    weight_ratio,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
