"""Scheduling of a hybrid wind/electrolyzer plant.

Four hydrogen production curve formulations (piece-wise linear with
binaries, its linear relaxation, a conic relaxation of a quadratic fit and
a segmented mixed-integer conic variant), a branch-and-bound engine over
an intermediate problem representation, two-stage stochastic extension,
and tools to check relaxation exactness and evaluate schedules ex post.
"""

from .curve import (
    CurveError,
    QuadraticCurve,
    QuadraticPiece,
    Segment,
    SegmentSet,
    TabulatedCurve,
    default_curve,
    evaluate,
    fit_quadratic,
    linearize,
    partition_breakpoints,
    partition_counts,
    peak_efficiency,
    quadratic_per_segment,
    read_curve_csv,
    write_curve_csv,
)
from .ir import ProblemIR
from .model import (
    CURVE_MODELS,
    DemandSpec,
    MarketSeries,
    ModelError,
    PlantConfig,
    ScheduleSolution,
    attach_hyp_l,
    attach_hyp_mil,
    attach_hyp_misoc,
    attach_hyp_soc,
    build,
    build_base,
    full_load_demand,
    soc_reformulate,
    solve,
    solve_daily,
)
from .stochastic import ScenarioSet, StochasticSolution, build_two_stage, solve_two_stage, synthetic_scenarios

__version__ = "0.1.0"
