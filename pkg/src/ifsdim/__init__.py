"""Dimension estimates and transversality audits for C1 iterated function
systems: sub-additive pressure roots, Lyapunov dimensions of Bernoulli
measures, box-counting estimates, and empirical checks of the parameter
transversality inequality."""

__version__ = "0.1.0"

from .errors import BudgetError, ConfigError, IfsdimError, NumericError
from .expr import differentiate, eval_expr, parse_expr, render
from .ifs import (
    ContractionData,
    DomainBox,
    IfsSpec,
    SmoothMap,
    TranslationalFamily,
    code_point,
    compose_jacobian,
    contraction_data,
    direct_product,
    translate,
)
from .measures import (
    BernoulliMeasure,
    entropy,
    lyapunov_dimension,
    lyapunov_functional,
    pushforward_local_dimension,
)
from .pressure import (
    DimensionEstimate,
    PressureCurve,
    affinity_oracle,
    moran_oracle,
    pressure_n,
    singularity_dimension,
)
from .estimators import (
    BoxCountResult,
    PointCloud,
    box_counting_dimension,
    sample_attractor,
    survey_translations,
)
from .smallmat import singular_values, svf, z_min
from .symbolic import PeriodicPoint, Word, common_prefix, enumerate_words, periodic_point
from .transversality import (
    ConditionReport,
    GtcAuditReport,
    audit_gtc,
    check_theorem_conditions,
    distortion_constant,
    kstar_select,
    z_function,
)
