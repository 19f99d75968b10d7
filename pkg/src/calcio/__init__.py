"""Event-log econometrics for in-game soccer decision analysis.

Pipeline: ingest minute-stamped event logs, balance them into 90-minute
panels with intensity weights, build the cross-sectional match dataset,
fit Gaussian / logit / ordered-logit models with robust and bootstrap
inference, search the block-structured specification space, and average
the top candidates with Akaike weights and BCa bootstrap intervals.
"""

from .events import (
    EventKind,
    Formation,
    MatchMeta,
    RawEvent,
    Role,
    Side,
    parse_event_log,
    serialize_events,
    serialize_metas,
    validate_log,
)
from .panel import MinutePanel, MinuteRow, balance_match, compute_weights, weighted_extra_time
from .features import (
    MatchRecord,
    StandingsTable,
    build_cross_section,
    build_match_record,
    compute_standings,
    league_day_rank,
    offensiveness_index,
    records_to_frame,
    scheme_series,
)
from .estimators import (
    DesignMatrix,
    FitResult,
    GAUSSIAN,
    LOGIT,
    OLOGIT,
    bootstrap_vcov,
    fit_logit,
    fit_ologit,
    fit_ols,
    hc3_vcov,
    marginal_effects,
    predict,
)
from .diagnostics import (
    FitMetrics,
    TestResult,
    associations,
    brant_test,
    breusch_pagan,
    describe,
    fit_metrics,
    hosmer_lemeshow,
    lipsitz_test,
    normality_tests,
    reset_test,
)
from .selection import ModelSpec, RankedSearch, enumerate_specs, fit_spec, partition_sets, search, top_fraction
from .inference import (
    AveragedEstimate,
    BootstrapCI,
    akaike_weights,
    averaged_ci,
    bootstrap_ci,
    model_average,
)
from .synth import League, LeagueConfig, generate_league, recover_theta

__version__ = "0.1.0"
