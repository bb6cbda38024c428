import pytest

from teride.cdd import (
    CONST,
    INTERVAL,
    AttrConstraint,
    CddRule,
    detect_cdds,
    rule_is_valid,
    rules_from_text,
    rules_to_text,
    satisfies_determinants,
)
from teride.errors import ConfigError, DeterminantMissing, NoRulesFound
from teride.model import Repository

from .conftest import make_tuple, ts


def cdd1():
    """{A: a1, B: [0, 0.1]} -> C within [0, 0.1]."""
    return CddRule(
        determinants=(
            AttrConstraint(attr=0, kind=CONST, value=ts("a1")),
            AttrConstraint(attr=1, kind=INTERVAL, lo=0.0, hi=0.1),
        ),
        dependent=2,
        dep_lo=0.0,
        dep_hi=0.1,
    )


def cdd2():
    """{A: a1, B: (0.1, 0.2]} -> C within [0, 0.2]."""
    return CddRule(
        determinants=(
            AttrConstraint(attr=0, kind=CONST, value=ts("a1")),
            AttrConstraint(attr=1, kind=INTERVAL, lo=0.1, hi=0.2, min_open=True),
        ),
        dependent=2,
        dep_lo=0.0,
        dep_hi=0.2,
    )


class TestConstraints:
    def test_interval_admits_with_relaxed_lower_bound(self):
        c = AttrConstraint(attr=0, kind=INTERVAL, lo=0.2, hi=0.4)
        assert c.admits(0.2) and c.admits(0.4)
        assert not c.admits(0.19) and not c.admits(0.41)

    def test_open_lower_endpoint(self):
        c = AttrConstraint(attr=0, kind=INTERVAL, lo=0.1, hi=0.2, min_open=True)
        assert not c.admits(0.1)
        assert c.admits(0.15) and c.admits(0.2)

    def test_validation(self):
        with pytest.raises(ConfigError):
            AttrConstraint(attr=0, kind=CONST, value=None)
        with pytest.raises(ConfigError):
            AttrConstraint(attr=0, kind=INTERVAL, lo=0.5, hi=0.2)
        with pytest.raises(ConfigError):
            AttrConstraint(attr=0, kind="weird")


class TestRule:
    def test_dependent_cannot_be_determinant(self):
        with pytest.raises(ConfigError):
            CddRule(
                determinants=(AttrConstraint(attr=2, kind=CONST, value=ts("a")),),
                dependent=2,
                dep_lo=0.0,
                dep_hi=0.1,
            )

    def test_applicable_to(self):
        rule = cdd1()
        missing_c = make_tuple("r", 0, 1, ts("a1"), ts("0.3"), None)
        assert rule.applicable_to(missing_c)
        complete = make_tuple("r", 0, 1, ts("a1"), ts("0.3"), ts("0.1"))
        assert not rule.applicable_to(complete)
        missing_det = make_tuple("r", 0, 1, None, ts("0.3"), None)
        assert not rule.applicable_to(missing_det)


class TestSatisfies:
    def test_reference_samples(self, numeric_repo, absdiff):
        r = make_tuple("r", 0, 1, ts("a1"), ts("0.3"), None)
        s1, s2, s3, s4 = numeric_repo.samples
        assert satisfies_determinants(cdd1(), r, s1, absdiff)
        assert satisfies_determinants(cdd1(), r, s2, absdiff)
        assert not satisfies_determinants(cdd1(), r, s3, absdiff)
        assert not satisfies_determinants(cdd1(), r, s4, absdiff)
        # the open lower bound admits only the sample at distance 0.2
        assert not satisfies_determinants(cdd2(), r, s1, absdiff)
        assert satisfies_determinants(cdd2(), r, s3, absdiff)

    def test_missing_determinant_raises(self, numeric_repo, absdiff):
        r = make_tuple("r", 0, 1, None, ts("0.3"), None)
        with pytest.raises(DeterminantMissing):
            satisfies_determinants(cdd1(), r, numeric_repo.samples[0], absdiff)


class TestDetection:
    def test_reference_rule_is_mined(self, numeric_repo, absdiff):
        rules = detect_cdds(numeric_repo, absdiff, min_support=3)
        target = cdd1()
        found = [
            r
            for r in rules
            if r.dependent == 2
            and any(c.kind == CONST and c.value == ts("a1") for c in r.determinants)
            and any(
                c.kind == INTERVAL and c.lo == 0.0 and c.hi == pytest.approx(0.1)
                for c in r.determinants
            )
        ]
        assert found, "expected the {A: a1, B: [0, 0.1]} -> C rule"
        for r in found:
            assert r.dep_lo >= target.dep_lo - 1e-9
            assert r.dep_hi <= target.dep_hi + 1e-9

    def test_all_mined_rules_hold_on_repository(self, numeric_repo, absdiff):
        for rule in detect_cdds(numeric_repo, absdiff):
            assert rule_is_valid(rule, numeric_repo, absdiff)

    def test_mined_rules_hold_on_text_repository(self):
        from .conftest import make_workload

        repo, _ = make_workload(seed=7, length=12, repo_size=24)
        from teride.metric import DistanceFn

        dist = DistanceFn()
        rules = detect_cdds(repo, dist)
        for rule in rules:
            assert rule_is_valid(rule, repo, dist)
        # dedup: one rule per determinant-structure signature
        sigs = [
            (
                rule.dependent,
                tuple(
                    (c.attr, c.kind, c.value, round(c.lo, 9), round(c.hi, 9))
                    for c in sorted(rule.determinants, key=lambda c: c.attr)
                ),
            )
            for rule in rules
        ]
        assert len(sigs) == len(set(sigs))

    def test_interval_width_threshold_enforced(self, numeric_repo, absdiff):
        for rule in detect_cdds(numeric_repo, absdiff, max_interval_width=0.3):
            assert rule.dep_hi - rule.dep_lo <= 0.3 + 1e-9

    def test_support_threshold(self, numeric_repo, absdiff):
        with pytest.raises(ConfigError):
            detect_cdds(numeric_repo, absdiff, min_support=1)

    def test_no_rules_raises(self, absdiff):
        repo = Repository(
            [
                make_tuple("x1", -1, 0, ts("0.0"), ts("0.0")),
                make_tuple("x2", -1, 0, ts("0.5"), ts("1.0")),
            ]
        )
        with pytest.raises(NoRulesFound):
            detect_cdds(repo, absdiff, min_support=3, max_interval_width=0.05)


class TestSerialization:
    def test_roundtrip(self, numeric_repo, absdiff):
        rules = detect_cdds(numeric_repo, absdiff)
        text = rules_to_text(rules)
        back = rules_from_text(text)
        assert back == rules

    def test_bad_line_reports_number(self):
        with pytest.raises(ConfigError, match="line 1"):
            rules_from_text("not a rule\n")

    def test_open_interval_not_serializable(self):
        with pytest.raises(ConfigError):
            rules_to_text([cdd2()])
