"""Shared fixtures: the numeric reference repository and workload builders."""

from __future__ import annotations

import itertools

import pytest

from teride.cli import gen_synthetic, inject_missing
from teride.metric import DistanceFn
from teride.model import Repository, StreamTuple


def ts(*tokens):
    """Shorthand for a token-set value."""
    return frozenset(tokens)


def make_tuple(rid, stream_id, t, *values):
    """Build a StreamTuple from token sets (None stays missing)."""
    return StreamTuple(rid=rid, stream_id=stream_id, arrival_time=t, attrs=tuple(values))


@pytest.fixture
def numeric_repo():
    """Three-attribute repository with numeric B/C cells treated as singleton tokens."""
    rows = [
        make_tuple("s1", -1, 0, ts("a1"), ts("0.2"), ts("0.1")),
        make_tuple("s2", -1, 0, ts("a1"), ts("0.3"), ts("0.2")),
        make_tuple("s3", -1, 0, ts("a1"), ts("0.5"), ts("0.35")),
        make_tuple("s4", -1, 0, ts("a2"), ts("0.7"), ts("0.7")),
    ]
    return Repository(rows)


@pytest.fixture
def absdiff():
    return DistanceFn(DistanceFn.ABSDIFF)


def make_workload(
    seed: int,
    n_streams: int = 2,
    d: int = 3,
    length: int = 30,
    vocab: int = 40,
    topics: int = 3,
    xi: float = 0.3,
    m: int = 1,
    repo_size: int = 40,
):
    """Seeded synthetic repository + injected stream trace."""
    repo_rows, streams = gen_synthetic(
        d=d,
        n_streams=n_streams,
        length=length,
        vocab_size=vocab,
        topic_count=topics,
        seed=seed,
        repo_size=repo_size,
    )
    trace = [t for rows in streams for t in rows]
    trace = inject_missing(trace, xi, m, seed=seed + 1)
    return Repository(repo_rows), trace


def naive_pair_probability(it_i, it_j, gamma, keywords, dist):
    """Independent exhaustive evaluation of the matching probability.

    Enumerates the full cross product of instances, checks the topic keyword
    and strict similarity conditions directly, and sums joint probabilities.
    """
    total = 0.0
    for inst_a, p_a in it_i.instances():
        for inst_b, p_b in it_j.instances():
            has_kw = any(not v.isdisjoint(keywords) for v in inst_a.attrs) or any(
                not v.isdisjoint(keywords) for v in inst_b.attrs
            )
            sim = sum(dist.sim(x, y) for x, y in zip(inst_a.attrs, inst_b.attrs))
            if has_kw and sim > gamma + 1e-9:
                total += p_a * p_b
    return total


def all_instance_pairs(it_i, it_j):
    return list(itertools.product(it_i.instances(), it_j.instances()))
