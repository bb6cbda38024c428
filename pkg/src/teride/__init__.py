"""Topic-aware entity resolution over incomplete textual data streams."""

from .cdd import AttrConstraint, CddRule, detect_cdds, rules_from_text, rules_to_text
from .engine import Engine, Event, MatchResultSet, precompute
from .errors import TerideError
from .grid import ErGrid, TupleSummary, summarize
from .impute import ImputedTuple, expand_instances, impute_tuple
from .index import build_cdd_index, build_dr_index
from .metric import DistanceFn, jaccard_dist, jaccard_sim, tuple_sim
from .model import (
    QueryConfig,
    Repository,
    SlidingWindow,
    StreamTuple,
    read_repository,
    read_tuples,
    tokenize,
    write_tuples,
)
from .pivot import PivotSet, select_pivots
from .prune import judge_pair, pair_probability

__version__ = "0.1.0"

__all__ = [
    "AttrConstraint",
    "CddRule",
    "DistanceFn",
    "Engine",
    "ErGrid",
    "Event",
    "ImputedTuple",
    "MatchResultSet",
    "PivotSet",
    "QueryConfig",
    "Repository",
    "SlidingWindow",
    "StreamTuple",
    "TerideError",
    "TupleSummary",
    "build_cdd_index",
    "build_dr_index",
    "detect_cdds",
    "expand_instances",
    "impute_tuple",
    "jaccard_dist",
    "jaccard_sim",
    "judge_pair",
    "pair_probability",
    "precompute",
    "read_repository",
    "read_tuples",
    "rules_from_text",
    "rules_to_text",
    "select_pivots",
    "summarize",
    "tokenize",
    "tuple_sim",
    "write_tuples",
]
