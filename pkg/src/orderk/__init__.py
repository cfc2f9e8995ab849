"""Exact laws, simulation and hitting probabilities for Poisson processes of order i
and their weighted, subordinated and iterated variants."""

from .core import (
    Composition,
    OrderParams,
    ParameterError,
    WeightTable,
    composition_terms,
    count_compositions,
    enumerate_compositions,
    iter_compositions,
)
from .exactdist import (
    JumpLaw,
    Pmf,
    jump_law_u,
    jump_law_w,
    jump_law_y,
    jump_law_z,
    pgf_u,
    pgf_weighted,
    pgf_y,
    pmf_iterated_u,
    pmf_order_i,
    pmf_table_u,
    pmf_table_weighted,
    pmf_table_y,
    pmf_weighted,
)
from .hitting import (
    HitQuery,
    HittingReport,
    hit_report,
    integral_form_hit_prob,
    iterated_hit_prob_general,
    mc_hit_prob,
    oracle_hit_prob,
    paper_hit_density_z,
    paper_hit_prob_u,
    paper_hit_prob_w,
    paper_hit_prob_y,
    paper_hit_prob_z,
)
from .simulate import PathSample, SimConfig, sample_skeleton
from .subordinators import BernsteinFn, DerivativeUnavailableError

__version__ = "0.1.0"

__all__ = [
    "BernsteinFn",
    "Composition",
    "DerivativeUnavailableError",
    "HitQuery",
    "HittingReport",
    "JumpLaw",
    "OrderParams",
    "ParameterError",
    "PathSample",
    "Pmf",
    "SimConfig",
    "WeightTable",
    "composition_terms",
    "count_compositions",
    "enumerate_compositions",
    "hit_report",
    "integral_form_hit_prob",
    "iter_compositions",
    "iterated_hit_prob_general",
    "jump_law_u",
    "jump_law_w",
    "jump_law_y",
    "jump_law_z",
    "mc_hit_prob",
    "oracle_hit_prob",
    "paper_hit_density_z",
    "paper_hit_prob_u",
    "paper_hit_prob_w",
    "paper_hit_prob_y",
    "paper_hit_prob_z",
    "pgf_u",
    "pgf_weighted",
    "pgf_y",
    "pmf_iterated_u",
    "pmf_order_i",
    "pmf_table_u",
    "pmf_table_weighted",
    "pmf_table_y",
    "pmf_weighted",
    "sample_skeleton",
]
