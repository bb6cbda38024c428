"""Pair-level pruning cascade and exact match-probability computation.

For a candidate tuple pair the checks run in a fixed order: topic keyword,
similarity upper bound (token sizes, then pivot distances), Paley-Zygmund
probability upper bound, and finally instance-pair-level pruning interleaved
with refinement.  Every bound overestimates, so no qualifying pair is lost.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .grid import STAGE_KEYWORD, STAGE_PIVOT, STAGE_SIZE, TupleSummary
from .impute import ImputedTuple
from .metric import DistanceFn, attr_min_dist, attr_ub_sim_by_size
from .model import contains_keyword

STAGE_PROB = "prob_ub"
STAGE_INSTANCE = "instance_level"
STAGE_REFINED = "refined"

STAGES = (STAGE_KEYWORD, STAGE_SIZE, STAGE_PIVOT, STAGE_PROB, STAGE_INSTANCE)

_TOL = 1e-9


@dataclass(frozen=True)
class PairVerdict:
    """Outcome for one candidate pair: the stage that settled it and the probability.

    ``prob`` is the exact match probability when ``stage`` is "refined" and
    None when the pair was discarded by a bound without full evaluation.
    """

    stage: str
    matched: bool = False
    prob: float | None = None


def sim_matches(sim: float, gamma: float) -> bool:
    """Strict similarity threshold; values within tolerance of gamma do not pass."""
    return sim > gamma + _TOL


def prob_reports(prob: float, alpha: float) -> bool:
    """Strict probability threshold for reporting a pair."""
    return prob > alpha + _TOL


def keyword_prune(si: TupleSummary, sj: TupleSummary) -> bool:
    """True when no instance of either tuple can contain a topic keyword."""
    return not si.keywords and not sj.keywords


def sim_ub_size(si: TupleSummary, sj: TupleSummary) -> float:
    return sum(attr_ub_sim_by_size(a, b) for a, b in zip(si.sizes, sj.sizes))


def sim_ub_pivot(si: TupleSummary, sj: TupleSummary) -> float:
    d = len(si.box)
    return d - sum(
        attr_min_dist(a, b) for a, b in zip(si.dist_intervals(), sj.dist_intervals())
    )


def pivot_stats(summary: TupleSummary) -> tuple:
    """(expectation, lower bound, upper bound) of the tuple's main-pivot distance.

    The expectation weighs each candidate value's main-pivot distance by its
    existence probability; present attributes contribute a fixed distance.
    """
    it = summary.imputed
    exp = lb = ub = 0.0
    for x, (lo, hi) in enumerate(summary.box):
        lb += lo
        ub += hi
        exp += sum(
            p * c for (_, p), c in zip(it.attr_options(x), summary.option_coords[x])
        )
    return exp, lb, ub


def prob_ub_paley_zygmund(stats_i: tuple, stats_j: tuple, d: int, gamma: float) -> float:
    """Probability upper bound from main-pivot distance distributions.

    Two symmetric branches apply when the distance ranges of the two tuples
    are separated; otherwise the bound degenerates to 1.
    """
    slack = d - gamma
    best = 1.0
    for (e_a, lb_a, ub_a), (e_b, lb_b, ub_b) in ((stats_i, stats_j), (stats_j, stats_i)):
        if lb_a < ub_b - _TOL:
            continue  # ranges not separated in this orientation
        gap = e_a - e_b
        spread = ub_a - lb_b
        if gap <= _TOL or spread <= _TOL:
            continue
        theta = slack / gap
        if -_TOL <= theta <= 1.0 + _TOL:
            best = min(best, 1.0 - (1.0 - theta) ** 2 * gap / spread)
    return best


def _pair_options(it: ImputedTuple, keywords: frozenset) -> list:
    """Per-attribute (value, prob, has_keyword) option lists for one tuple."""
    d = len(it.base.attrs)
    out = []
    for x in range(d):
        opts = []
        for v, p in it.attr_options(x):
            opts.append((v, p, contains_keyword(v, keywords)))
        out.append(opts)
    return out


def pair_probability(
    it_i: ImputedTuple,
    it_j: ImputedTuple,
    gamma: float,
    keywords: frozenset,
    dist: DistanceFn,
) -> float:
    """Exact match probability by the full double sum over instance pairs.

    Both the engine's refinement and the reference evaluation call this,
    accumulating in the same natural enumeration order.
    """
    opts_i = _pair_options(it_i, keywords)
    opts_j = _pair_options(it_j, keywords)
    d = len(opts_i)
    # per-attribute option-vs-option similarity tables
    sim_tab = [
        [[dist.sim(vi, vj) for vj, _, _ in opts_j[x]] for vi, _, _ in opts_i[x]]
        for x in range(d)
    ]
    total = 0.0
    for ci in itertools.product(*(range(len(o)) for o in opts_i)):
        p_i = 1.0
        kw_i = False
        for x, ix in enumerate(ci):
            p_i *= opts_i[x][ix][1]
            kw_i = kw_i or opts_i[x][ix][2]
        for cj in itertools.product(*(range(len(o)) for o in opts_j)):
            p_j = 1.0
            kw_j = False
            for x, jx in enumerate(cj):
                p_j *= opts_j[x][jx][1]
                kw_j = kw_j or opts_j[x][jx][2]
            if not (kw_i or kw_j):
                continue
            sim = sum(sim_tab[x][ix][jx] for x, (ix, jx) in enumerate(zip(ci, cj)))
            if sim_matches(sim, gamma):
                total += p_i * p_j
    return total


def instance_level_scan(
    it_i: ImputedTuple,
    it_j: ImputedTuple,
    gamma: float,
    alpha: float,
    keywords: frozenset,
    dist: DistanceFn,
    max_pairs: int | None = None,
) -> tuple:
    """Partial scan over instance pairs in descending joint probability.

    Returns (pruned, confirmed) where ``pruned`` is True once the confirmed
    probability plus the unexamined mass can no longer exceed alpha.  With
    ``max_pairs`` the scan gives up (without pruning) after that many pairs,
    capping the effort spent before full refinement.
    """
    inst_i = it_i.instances()
    inst_j = it_j.instances()
    pairs = sorted(
        ((pi * pj, a, b) for a, (_, pi) in enumerate(inst_i) for b, (_, pj) in enumerate(inst_j)),
        key=lambda t: -t[0],
    )
    confirmed = 0.0
    seen_mass = 0.0
    kw_i = [_instance_has_keyword(t, keywords) for t, _ in inst_i]
    kw_j = [_instance_has_keyword(t, keywords) for t, _ in inst_j]
    for examined, (mass, a, b) in enumerate(pairs):
        if max_pairs is not None and examined >= max_pairs:
            return False, confirmed
        ti, _ = inst_i[a]
        tj, _ = inst_j[b]
        if (kw_i[a] or kw_j[b]) and sim_matches(
            sum(dist.sim(x, y) for x, y in zip(ti.attrs, tj.attrs)), gamma
        ):
            confirmed += mass
        seen_mass += mass
        if confirmed + (1.0 - seen_mass) <= alpha + _TOL:
            return True, confirmed
    return False, confirmed


def _instance_has_keyword(t, keywords) -> bool:
    return any(contains_keyword(v, keywords) for v in t.attrs)


def judge_pair(
    si: TupleSummary,
    sj: TupleSummary,
    gamma: float,
    alpha: float,
    keywords: frozenset,
    dist: DistanceFn,
    instance_cap: int | None = None,
) -> PairVerdict:
    """Run the full cascade on one candidate pair."""
    if keyword_prune(si, sj):
        return PairVerdict(stage=STAGE_KEYWORD)
    if sim_ub_size(si, sj) <= gamma + _TOL:
        return PairVerdict(stage=STAGE_SIZE)
    if sim_ub_pivot(si, sj) <= gamma + _TOL:
        return PairVerdict(stage=STAGE_PIVOT)
    d = len(si.box)
    ub = prob_ub_paley_zygmund(pivot_stats(si), pivot_stats(sj), d, gamma)
    if ub <= alpha + _TOL:
        return PairVerdict(stage=STAGE_PROB)
    max_pairs = None if instance_cap is None else instance_cap * instance_cap
    pruned, _ = instance_level_scan(
        si.imputed, sj.imputed, gamma, alpha, keywords, dist, max_pairs=max_pairs
    )
    if pruned:
        return PairVerdict(stage=STAGE_INSTANCE)
    prob = pair_probability(si.imputed, sj.imputed, gamma, keywords, dist)
    return PairVerdict(stage=STAGE_REFINED, matched=prob_reports(prob, alpha), prob=prob)
