"""Imputation of missing attributes via rules, and probabilistic tuple expansion.

A single rule contributes, for each repository sample satisfying its
determinants, every domain value whose distance to the sample's dependent
value lies in the rule's dependent interval.  Frequencies from all applicable
rules are pooled and normalized into an existence-probability distribution.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .cdd import CddRule, satisfies_determinants
from .errors import ImputationFailed, NoSupportingSample
from .metric import DistanceFn
from .model import Repository, StreamTuple, TokenSet, token_key

PROB_TOL = 1e-9
DEFAULT_INSTANCE_LIMIT = 64
FALLBACK_TOP_K = 5


@dataclass
class CandidateDistribution:
    """Frequency counts of candidate values for one missing attribute."""

    attr: int
    entries: dict  # value -> positive frequency

    def total(self) -> int:
        return sum(self.entries.values())


def impute_single_rule(
    r: StreamTuple,
    rule: CddRule,
    repo: Repository,
    dist: DistanceFn,
    samples: Optional[Sequence[StreamTuple]] = None,
) -> CandidateDistribution:
    """Candidate frequencies from one rule, scanning the given samples (default: whole repo)."""
    if samples is None:
        samples = repo.samples
    j = rule.dependent
    domain = repo.domain(j)
    entries: dict = {}
    supported = False
    for s in samples:
        if not satisfies_determinants(rule, r, s, dist):
            continue
        supported = True
        sv = s.attrs[j]
        for val in domain:
            if rule.dep_admits(dist(sv, val)):
                entries[val] = entries.get(val, 0) + 1
    if not supported:
        raise NoSupportingSample(f"no sample satisfies rule determinants for tuple {r.rid}")
    return CandidateDistribution(attr=j, entries=entries)


def impute_multi_rule(
    r: StreamTuple,
    rules: Sequence[CddRule],
    repo: Repository,
    dist: DistanceFn,
    samples_per_rule: Optional[dict] = None,
) -> list:
    """Pooled candidate probabilities over all applicable rules.

    Returns (value, prob) pairs sorted by descending probability.  Rules with
    no supporting sample contribute nothing (to either sum).
    """
    totals: dict = {}
    denom = 0
    for rule in rules:
        samples = None if samples_per_rule is None else samples_per_rule.get(rule)
        try:
            cd = impute_single_rule(r, rule, repo, dist, samples=samples)
        except NoSupportingSample:
            continue
        for val, freq in cd.entries.items():
            totals[val] = totals.get(val, 0) + freq
            denom += freq
    if denom == 0:
        raise ImputationFailed(f"no rule yields a candidate for tuple {r.rid}")
    out = [(val, freq / denom) for val, freq in totals.items()]
    out.sort(key=lambda vp: (-vp[1], token_key(vp[0])))
    return out


def fallback_candidates(repo: Repository, attr: int, k: int = FALLBACK_TOP_K) -> list:
    """Uniform distribution over the k most frequent domain values."""
    top = repo.top_values(attr, k)
    p = 1.0 / len(top)
    return [(val, p) for val in top]


@dataclass
class ImputedTuple:
    """A probabilistic tuple: per-missing-attribute weighted candidate values.

    Complete tuples have no candidate entries and exactly one instance with
    probability 1.  Candidate probabilities per attribute sum to 1.
    """

    base: StreamTuple
    per_attr_candidates: dict = field(default_factory=dict)  # attr -> [(value, prob)]
    fallback_attrs: frozenset = frozenset()
    _instances: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        missing = set(self.base.missing_attrs())
        if set(self.per_attr_candidates) != missing:
            raise ImputationFailed(
                f"tuple {self.base.rid}: candidates cover {sorted(self.per_attr_candidates)} "
                f"but missing attrs are {sorted(missing)}"
            )
        for j, cands in self.per_attr_candidates.items():
            if not cands:
                raise ImputationFailed(f"tuple {self.base.rid}: empty candidate list for attr {j}")
            total = sum(p for _, p in cands)
            if abs(total - 1.0) > PROB_TOL:
                raise ImputationFailed(f"tuple {self.base.rid}: attr {j} probs sum to {total}")

    @property
    def rid(self) -> str:
        return self.base.rid

    @property
    def stream_id(self) -> int:
        return self.base.stream_id

    def attr_options(self, j: int) -> list:
        """(value, prob) options for attribute j; a single certain option if present."""
        v = self.base.attrs[j]
        if v is not None:
            return [(v, 1.0)]
        return list(self.per_attr_candidates[j])

    def instance_count(self) -> int:
        n = 1
        for cands in self.per_attr_candidates.values():
            n *= len(cands)
        return n

    def instances(self) -> list:
        """All concrete instances as (complete StreamTuple, prob), descending prob."""
        if self._instances is None:
            self._instances = _enumerate_instances(self, None)[0]
        return self._instances


def _enumerate_instances(it: ImputedTuple, limit: Optional[int]):
    """Instances in descending probability order, plus truncated residual mass."""
    base = it.base
    missing = sorted(it.per_attr_candidates)
    if not missing:
        base.require_complete()
        return [(base, 1.0)], 0.0
    option_lists = []
    for j in missing:
        opts = sorted(it.per_attr_candidates[j], key=lambda vp: (-vp[1], token_key(vp[0])))
        option_lists.append(opts)
    # best-first search over the index lattice (probabilities multiply)
    out = []
    start = tuple(0 for _ in missing)
    seen = {start}
    heap = [(-_joint(option_lists, start), start)]
    kept_mass = 0.0
    while heap and (limit is None or len(out) < limit):
        negp, idx = heapq.heappop(heap)
        prob = -negp
        attrs = list(base.attrs)
        for j, opts, i in zip(missing, option_lists, idx):
            attrs[j] = opts[i][0]
        inst = StreamTuple(
            rid=base.rid, stream_id=base.stream_id, arrival_time=base.arrival_time, attrs=tuple(attrs)
        )
        out.append((inst, prob))
        kept_mass += prob
        for pos in range(len(missing)):
            if idx[pos] + 1 < len(option_lists[pos]):
                nxt = idx[:pos] + (idx[pos] + 1,) + idx[pos + 1 :]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (-_joint(option_lists, nxt), nxt))
    residual = max(0.0, 1.0 - kept_mass) if heap else 0.0
    return out, residual


def _joint(option_lists, idx) -> float:
    p = 1.0
    for opts, i in zip(option_lists, idx):
        p *= opts[i][1]
    return p


def expand_instances(it: ImputedTuple, limit: int = DEFAULT_INSTANCE_LIMIT):
    """Top-``limit`` instances by probability and the residual truncated mass."""
    if limit < 1:
        raise ImputationFailed("instance limit must be >= 1")
    return _enumerate_instances(it, limit)


def impute_tuple(
    r: StreamTuple,
    rules_by_dep: dict,
    repo: Repository,
    dist: DistanceFn,
    fallback_k: int = FALLBACK_TOP_K,
    samples_per_rule: Optional[dict] = None,
) -> ImputedTuple:
    """Impute every missing attribute of r independently; complete tuples pass through.

    When no rule yields support for an attribute, falls back to a uniform
    distribution over the most frequent domain values and flags the tuple.
    """
    if r.is_complete():
        return ImputedTuple(base=r)
    per_attr: dict = {}
    fallback: set = set()
    for j in r.missing_attrs():
        applicable = [rule for rule in rules_by_dep.get(j, ()) if rule.applicable_to(r)]
        cands = None
        if applicable:
            try:
                cands = impute_multi_rule(r, applicable, repo, dist, samples_per_rule=samples_per_rule)
            except ImputationFailed:
                cands = None
        if cands is None:
            cands = fallback_candidates(repo, j, fallback_k)
            fallback.add(j)
        per_attr[j] = cands
    return ImputedTuple(base=r, per_attr_candidates=per_attr, fallback_attrs=frozenset(fallback))
