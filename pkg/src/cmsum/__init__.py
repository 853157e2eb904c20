"""Risk measures of the sum of two counter-monotonic random variables.

The counter-monotonic sum S = F1^{-1}(U) + F2^{-1}(1-U) is the convex
lower bound over all dependence structures with the given marginals.
This package computes its VaR, TVaR and stop-loss premium through exact
decompositions over the crossing set of the quantile-sum function, with
comonotonic baselines and brute-force oracles for verification.
"""

from .crossing import (
    CrossingPoint,
    CrossingSet,
    GPair,
    alpha_at,
    crossing_set,
    extrema,
    g_eval,
    g_limits,
    sum_cdf,
    sum_quantile,
)
from .decomposition import (
    approximation_report,
    spread,
    stoploss_comonotonic,
    stoploss_countermonotonic,
    stoploss_single_crossing,
    tvar_comonotonic,
    tvar_countermonotonic,
    tvar_simple,
    var_comonotonic,
    var_countermonotonic,
)
from .errors import (
    CapExceeded,
    CmsumError,
    DegenerateSum,
    InsufficientSamples,
    MismatchedTarget,
    RangeError,
    UnresolvedOscillation,
)
from .marginals import (
    Degenerate,
    EmpiricalDiscrete,
    Gamma,
    Marginal,
    Normal,
    Poisson,
    SupportBounds,
    Uniform,
    from_descriptor,
)
from .oracle import OracleReport, compare, mc_measures, mc_sample, quad_stoploss, quad_tvar
from .transforms import TailValue, lower_tail, ltvar, tvar, tvar_quadrature, upper_tail

__version__ = "0.1.0"
