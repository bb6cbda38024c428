import pytest
from hypothesis import given
from hypothesis import strategies as st

from teride.errors import (
    ConfigError,
    EmptyValue,
    IncompleteTuple,
    OutOfOrderArrival,
)
from teride.model import (
    MISSING_CELL,
    QueryConfig,
    Repository,
    SlidingWindow,
    StreamTuple,
    contains_keyword,
    read_repository,
    read_tuples,
    tokenize,
    write_tuples,
)

from .conftest import make_tuple, ts


class TestTokenize:
    def test_lowercase_split_dedupe(self):
        assert tokenize("Weight Loss, weight-gain") == {"weight", "loss", "gain"}

    def test_numbers_kept(self):
        assert tokenize("type 2 diabetes") == {"type", "2", "diabetes"}

    def test_empty_raises(self):
        with pytest.raises(EmptyValue):
            tokenize("  ,;  ")

    @given(st.text())
    def test_never_returns_empty_without_raising(self, raw):
        try:
            tokens = tokenize(raw)
        except EmptyValue:
            return
        assert tokens and all(t for t in tokens)


class TestContainsKeyword:
    def test_hit_and_miss(self):
        assert contains_keyword(ts("diabetes", "type"), frozenset({"diabetes"}))
        assert not contains_keyword(ts("flu"), frozenset({"diabetes"}))

    def test_empty_keywords_rejected(self):
        with pytest.raises(ConfigError):
            contains_keyword(ts("flu"), frozenset())


class TestStreamTuple:
    def test_missing_attrs_and_completeness(self):
        r = make_tuple("r1", 0, 1, ts("a"), None, ts("c"))
        assert not r.is_complete()
        assert r.missing_attrs() == (1,)
        with pytest.raises(IncompleteTuple):
            r.require_complete()

    def test_empty_present_value_rejected(self):
        with pytest.raises(EmptyValue):
            make_tuple("r1", 0, 1, frozenset())

    def test_negative_time_rejected(self):
        with pytest.raises(ConfigError):
            make_tuple("r1", 0, -1, ts("a"))


class TestSlidingWindow:
    def test_eviction_after_capacity(self):
        w = SlidingWindow(2)
        r1 = make_tuple("r1", 0, 1, ts("a"))
        r2 = make_tuple("r2", 0, 2, ts("b"))
        r3 = make_tuple("r3", 0, 3, ts("c"))
        assert w.advance(r1) is None
        assert w.advance(r2) is None
        assert w.pending_eviction(0) is r1
        assert w.advance(r3) is r1
        assert w.contents(0) == [r2, r3]

    def test_streams_are_independent(self):
        w = SlidingWindow(1)
        w.advance(make_tuple("a", 0, 1, ts("x")))
        w.advance(make_tuple("b", 1, 1, ts("y")))
        assert len(w) == 2
        assert [r.rid for r in w.live_other(0)] == ["b"]

    def test_out_of_order_rejected(self):
        w = SlidingWindow(3)
        w.advance(make_tuple("a", 0, 5, ts("x")))
        with pytest.raises(OutOfOrderArrival):
            w.advance(make_tuple("b", 0, 5, ts("y")))

    def test_capacity_validation(self):
        with pytest.raises(ConfigError):
            SlidingWindow(0)


class TestRepository:
    def test_domains_and_top_values(self, numeric_repo):
        assert numeric_repo.d == 3
        assert numeric_repo.domain(0) == [ts("a1"), ts("a2")]
        assert set(numeric_repo.domain(2)) == {ts("0.1"), ts("0.2"), ts("0.35"), ts("0.7")}
        assert numeric_repo.top_values(0, 1) == [ts("a1")]

    def test_incomplete_sample_rejected(self):
        with pytest.raises(IncompleteTuple):
            Repository([make_tuple("s", -1, 0, ts("a"), None)])

    def test_empty_repo_rejected(self):
        with pytest.raises(ConfigError):
            Repository([])


class TestQueryConfig:
    def test_gamma_is_rho_times_d(self):
        cfg = QueryConfig(keywords=frozenset({"k"}), d=4, rho=0.7, alpha=0.1, window_size=10)
        assert cfg.gamma == pytest.approx(2.8)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(rho=0.0),
            dict(rho=1.0),
            dict(alpha=1.0),
            dict(alpha=-0.1),
            dict(window_size=0),
            dict(keywords=frozenset()),
        ],
    )
    def test_validation(self, kw):
        base = dict(keywords=frozenset({"k"}), d=3, rho=0.5, alpha=0.2, window_size=5)
        base.update(kw)
        with pytest.raises(ConfigError):
            QueryConfig(**base)


class TestCsv:
    def test_roundtrip_preserves_missing(self, tmp_path):
        rows = [
            make_tuple("r1", 0, 1, ts("alpha", "beta"), None),
            make_tuple("r2", 1, 2, ts("gamma"), ts("delta")),
        ]
        path = tmp_path / "s.csv"
        write_tuples(path, rows, 2)
        assert MISSING_CELL in path.read_text()
        back = read_tuples(path)
        assert back == rows

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(ConfigError):
            read_tuples(path)

    def test_read_repository_requires_complete(self, tmp_path, numeric_repo):
        path = tmp_path / "r.csv"
        write_tuples(path, numeric_repo.samples, 3)
        repo = read_repository(path)
        assert len(repo) == 4
