"""Grid synopsis over live probabilistic tuples, keyed by main-pivot coordinates.

Each tuple occupies the hyper-rectangle spanned by the main-pivot coordinates
of its possible instances and is registered in every grid cell that rectangle
intersects.  Cells keep covering aggregates (keyword unions, pivot-distance
intervals, token-size intervals) so whole cells can be skipped during
candidate retrieval, with each skip attributed to the pruning stage that
caused it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .errors import DuplicateTuple, UnknownTuple
from .impute import ImputedTuple
from .metric import DistanceFn, DistInterval, SizeInterval, attr_min_dist, attr_ub_sim_by_size
from .pivot import PivotSet, convert

CELL_WIDTH = 0.1
_TOL = 1e-9

STAGE_KEYWORD = "keyword"
STAGE_SIZE = "sim_ub_size"
STAGE_PIVOT = "sim_ub_pivot"
_STAGE_ORDER = {STAGE_KEYWORD: 0, STAGE_SIZE: 1, STAGE_PIVOT: 2}


@dataclass
class TupleSummary:
    """Index-ready digest of one probabilistic tuple."""

    imputed: ImputedTuple
    box: list  # per-attr (lo, hi) of the main-pivot coordinate over all options
    aux: dict  # (attr, pivot_idx) -> (lo, hi) over all options, pivot_idx >= 1
    sizes: list  # per-attr SizeInterval over all options
    keywords: frozenset  # query keywords present in at least one option
    option_coords: list  # per-attr main-pivot coordinate per option, aligned with attr_options

    @property
    def rid(self) -> str:
        return self.imputed.rid

    @property
    def stream_id(self) -> int:
        return self.imputed.stream_id

    def dist_intervals(self) -> list:
        return [DistInterval(lo, hi) for lo, hi in self.box]


def summarize(
    it: ImputedTuple, pivots: PivotSet, keywords: frozenset, dist: DistanceFn
) -> TupleSummary:
    d = pivots.d
    box = []
    aux: dict = {}
    sizes = []
    kws: set = set()
    option_coords = []
    for x in range(d):
        options = it.attr_options(x)
        coords = [convert(v, x, pivots, dist) for v, _ in options]
        option_coords.append([c[0] for c in coords])
        box.append((min(c[0] for c in coords), max(c[0] for c in coords)))
        for a in range(1, pivots.n_pivots(x)):
            aux[(x, a)] = (min(c[a] for c in coords), max(c[a] for c in coords))
        sizes.append(
            SizeInterval(min(len(v) for v, _ in options), max(len(v) for v, _ in options))
        )
        for v, _ in options:
            kws.update(keywords & v)
    return TupleSummary(
        imputed=it,
        box=box,
        aux=aux,
        sizes=sizes,
        keywords=frozenset(kws),
        option_coords=option_coords,
    )


def _cell_span(lo: float, hi: float) -> range:
    n_cells = int(round(1.0 / CELL_WIDTH))
    c_lo = max(0, min(int(lo / CELL_WIDTH + _TOL), n_cells - 1))
    c_hi = max(0, min(int(hi / CELL_WIDTH + _TOL), n_cells - 1))
    return range(c_lo, c_hi + 1)


@dataclass
class _Cell:
    members: dict = field(default_factory=dict)  # rid -> TupleSummary
    keywords: frozenset = frozenset()
    box: list = None  # covering (lo, hi) per attr of main coordinates
    aux: dict = field(default_factory=dict)
    sizes: list = None  # covering (min, max) token sizes per attr

    def absorb(self, s: TupleSummary) -> None:
        """Extend the covering aggregates with one new member (insert path)."""
        if self.box is None:
            self.keywords = s.keywords
            self.box = list(s.box)
            self.aux = dict(s.aux)
            self.sizes = [(si.min_size, si.max_size) for si in s.sizes]
            return
        if not (s.keywords <= self.keywords):
            self.keywords |= s.keywords
        self.box = [
            (min(lo, slo), max(hi, shi)) for (lo, hi), (slo, shi) in zip(self.box, s.box)
        ]
        for key, (lo, hi) in s.aux.items():
            cur = self.aux.get(key)
            self.aux[key] = (lo, hi) if cur is None else (min(cur[0], lo), max(cur[1], hi))
        self.sizes = [
            (min(lo, si.min_size), max(hi, si.max_size))
            for (lo, hi), si in zip(self.sizes, s.sizes)
        ]

    def recompute(self) -> None:
        """Rebuild aggregates exactly from the remaining members (evict path)."""
        self.keywords, self.box, self.aux, self.sizes = frozenset(), None, {}, None
        for s in self.members.values():
            self.absorb(s)


class ErGrid:
    """Per-stream grid over [0, 1]^d with cell-level pruning aggregates."""

    def __init__(self, d: int):
        self.d = d
        self._cells: dict = {}  # cell key tuple -> _Cell
        self._kw_cells: dict = {}  # same keys, keyword-bearing members only
        self._tuples: dict = {}  # rid -> (TupleSummary, list of cell keys)
        self._rids: set = set()
        self._kw_rids: set = set()

    def __len__(self) -> int:
        return len(self._tuples)

    def __contains__(self, rid: str) -> bool:
        return rid in self._tuples

    def summaries(self):
        return [s for s, _ in self._tuples.values()]

    def insert(self, summary: TupleSummary) -> None:
        rid = summary.rid
        if rid in self._tuples:
            raise DuplicateTuple(f"tuple {rid} is already registered")
        keys = list(product(*(_cell_span(lo, hi) for lo, hi in summary.box)))
        has_kw = bool(summary.keywords)
        for key in keys:
            cell = self._cells.setdefault(key, _Cell())
            cell.members[rid] = summary
            cell.absorb(summary)
            if has_kw:
                kw_cell = self._kw_cells.setdefault(key, _Cell())
                kw_cell.members[rid] = summary
                kw_cell.absorb(summary)
        self._tuples[rid] = (summary, keys)
        self._rids.add(rid)
        if has_kw:
            self._kw_rids.add(rid)

    def evict(self, rid: str) -> TupleSummary:
        entry = self._tuples.pop(rid, None)
        if entry is None:
            raise UnknownTuple(f"tuple {rid} is not registered")
        summary, keys = entry
        has_kw = rid in self._kw_rids
        for key in keys:
            cell = self._cells[key]
            del cell.members[rid]
            if cell.members:
                cell.recompute()
            else:
                del self._cells[key]
            if has_kw:
                kw_cell = self._kw_cells[key]
                del kw_cell.members[rid]
                if kw_cell.members:
                    kw_cell.recompute()
                else:
                    del self._kw_cells[key]
        self._rids.discard(rid)
        self._kw_rids.discard(rid)
        return summary

    def candidates(self, query: TupleSummary, gamma: float, keywords: frozenset):
        """Candidate summaries for a probe tuple, plus per-stage skipped rids.

        A keyword-free probe can only pair with keyword-bearing tuples, so it
        scans the keyword-restricted cells (whose aggregates are tighter) and
        keyword-skips every other live tuple in one set difference.  Each
        surviving cell must pass every cell-level check; a tuple skipped in
        all its cells is attributed to the first stage that discarded it.
        """
        if query.keywords:
            cells = self._cells
            skipped_kw: set = set()
        else:
            cells = self._kw_cells
            skipped_kw = self._rids - self._kw_rids
        survivors: dict = {}
        skipped_stage: dict = {}
        for cell in cells.values():
            stage = self._cell_stage(cell, query, gamma)
            if stage is None:
                survivors.update(cell.members)
            else:
                order = _STAGE_ORDER[stage]
                for rid in cell.members:
                    cur = skipped_stage.get(rid)
                    if cur is None or order < _STAGE_ORDER[cur]:
                        skipped_stage[rid] = stage
        skipped = {STAGE_KEYWORD: skipped_kw, STAGE_SIZE: set(), STAGE_PIVOT: set()}
        for rid, stage in skipped_stage.items():
            if rid not in survivors:
                skipped[stage].add(rid)
        return list(survivors.values()), skipped

    @staticmethod
    def _cell_stage(cell, query, gamma):
        """First cell-level check that discards the whole cell, or None."""
        ub_size = 0.0
        for qs, (lo, hi) in zip(query.sizes, cell.sizes):
            q_lo, q_hi = qs.min_size, qs.max_size
            if q_lo > hi:
                ub_size += hi / q_lo
            elif q_hi < lo:
                ub_size += q_hi / lo
            else:
                ub_size += 1.0
        if ub_size <= gamma + _TOL:
            return STAGE_SIZE
        min_total = 0.0
        for (q_lo, q_hi), (c_lo, c_hi) in zip(query.box, cell.box):
            if q_lo > c_hi:
                min_total += q_lo - c_hi
            elif c_lo > q_hi:
                min_total += c_lo - q_hi
        if len(query.box) - min_total <= gamma + _TOL:
            return STAGE_PIVOT
        return None

    def snapshot(self) -> dict:
        """Structural view for invariant checking: cell keys, members, aggregates."""
        return {
            key: {
                "members": sorted(cell.members),
                "keywords": sorted(cell.keywords),
                "box": list(cell.box),
                "sizes": list(cell.sizes),
            }
            for key, cell in self._cells.items()
        }
