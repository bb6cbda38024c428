import json

import pytest

from teride.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    f_score,
    gen_synthetic,
    inject_missing,
    main,
    subsample_repo,
)
from teride.errors import InvalidRate
from teride.model import Repository, read_tuples, write_tuples

from .conftest import make_workload


class TestInject:
    def _trace(self, seed=1):
        _, streams = gen_synthetic(d=3, n_streams=2, length=10, vocab_size=30, topic_count=2, seed=seed)
        return [t for rows in streams for t in rows]

    def test_zero_rate_is_identity(self):
        trace = self._trace()
        assert inject_missing(trace, 0.0, 1, seed=3) == trace

    def test_full_rate_one_attr_each(self):
        trace = self._trace()
        out = inject_missing(trace, 1.0, 1, seed=3)
        assert all(len(r.missing_attrs()) == 1 for r in out)

    def test_partial_rate_counts(self):
        trace = self._trace()
        out = inject_missing(trace, 0.5, 2, seed=3)
        holes = [r for r in out if r.missing_attrs()]
        assert len(holes) == int(0.5 * len(trace))
        assert all(len(r.missing_attrs()) == 2 for r in holes)

    def test_seed_replay_is_byte_identical(self, tmp_path):
        trace = self._trace()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_tuples(a, inject_missing(trace, 0.3, 1, seed=9), 3)
        write_tuples(b, inject_missing(trace, 0.3, 1, seed=9), 3)
        assert a.read_bytes() == b.read_bytes()

    def test_rate_validation(self):
        trace = self._trace()
        with pytest.raises(InvalidRate):
            inject_missing(trace, 1.5, 1, seed=0)
        with pytest.raises(InvalidRate):
            inject_missing(trace, 0.5, 3, seed=0)  # m must stay below d


class TestGen:
    def test_same_seed_identical_corpus(self, tmp_path):
        for sub in ("one", "two"):
            rc = main(
                [
                    "gen",
                    "--out-dir",
                    str(tmp_path / sub),
                    "--d",
                    "3",
                    "--streams",
                    "2",
                    "--length",
                    "8",
                    "--vocab",
                    "25",
                    "--topics",
                    "2",
                    "--seed",
                    "5",
                ]
            )
            assert rc == EXIT_OK
        for name in ("repository.csv", "stream_0.csv", "stream_1.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_zero_length_streams_are_header_only(self, tmp_path):
        rc = main(
            [
                "gen",
                "--out-dir",
                str(tmp_path),
                "--d",
                "3",
                "--streams",
                "1",
                "--length",
                "0",
                "--vocab",
                "10",
                "--topics",
                "1",
                "--repo-size",
                "4",
            ]
        )
        assert rc == EXIT_OK
        lines = (tmp_path / "stream_0.csv").read_text().strip().splitlines()
        assert len(lines) == 1

    def test_cross_stream_duplicates_share_most_tokens(self):
        _, streams = gen_synthetic(d=3, n_streams=2, length=20, vocab_size=40, topic_count=3, seed=8)
        shares = []
        for a, b in zip(streams[0], streams[1]):
            for x, y in zip(a.attrs, b.attrs):
                shares.append(len(x & y) / len(x | y))
        assert sum(shares) / len(shares) > 0.5


class TestSubsample:
    def test_ratio_and_determinism(self):
        repo, _ = make_workload(seed=2, length=10, repo_size=20)
        sub1 = subsample_repo(repo, 0.5, seed=4)
        sub2 = subsample_repo(repo, 0.5, seed=4)
        assert len(sub1) == 10
        assert [s.rid for s in sub1.samples] == [s.rid for s in sub2.samples]

    def test_full_ratio_identity(self):
        repo, _ = make_workload(seed=2, length=10, repo_size=20)
        assert subsample_repo(repo, 1.0, seed=4) is repo

    def test_ratio_validation(self):
        repo, _ = make_workload(seed=2, length=5, repo_size=10)
        with pytest.raises(InvalidRate):
            subsample_repo(repo, 0.0, seed=1)


class TestFScore:
    def test_perfect(self):
        keys = {(1, "a", "b"), (2, "c", "d")}
        assert f_score(keys, set(keys)) == 1.0

    def test_partial(self):
        res = {(1, "a", "b"), (1, "x", "y")}
        truth = {(1, "a", "b"), (2, "c", "d")}
        assert f_score(res, truth) == pytest.approx(0.5)

    def test_empty_cases(self):
        assert f_score(set(), set()) == 1.0
        assert f_score({(1, "a", "b")}, set()) == 0.0


@pytest.fixture
def workspace(tmp_path):
    rc = main(
        [
            "gen",
            "--out-dir",
            str(tmp_path),
            "--d",
            "3",
            "--streams",
            "2",
            "--length",
            "12",
            "--vocab",
            "30",
            "--topics",
            "2",
            "--repo-size",
            "30",
            "--seed",
            "13",
        ]
    )
    assert rc == EXIT_OK
    for sid in (0, 1):
        rc = main(
            [
                "inject",
                "--input",
                str(tmp_path / f"stream_{sid}.csv"),
                "--out",
                str(tmp_path / f"stream_{sid}.csv"),
                "--missing-rate",
                "0.3",
                "--missing-attrs",
                "1",
                "--seed",
                str(20 + sid),
            ]
        )
        assert rc == EXIT_OK
    return tmp_path


def run_args(ws, mode, results, metrics=None, extra=()):
    args = [
        "run",
        "--repo",
        str(ws / "repository.csv"),
        "--streams",
        str(ws / "stream_0.csv"),
        str(ws / "stream_1.csv"),
        "--keywords",
        "topic0",
        "--alpha",
        "0.2",
        "--rho",
        "0.6",
        "--window",
        "5",
        "--mode",
        mode,
        "--results",
        str(results),
    ]
    if metrics:
        args += ["--metrics", str(metrics)]
    args += list(extra)
    return args


class TestRunAndBench:
    def test_detect_and_pivots_write_files(self, workspace):
        rules = workspace / "rules.txt"
        pivots = workspace / "pivots.txt"
        assert main(["detect", "--repo", str(workspace / "repository.csv"), "--out", str(rules)]) == EXIT_OK
        assert main(["pivots", "--repo", str(workspace / "repository.csv"), "--out", str(pivots)]) == EXIT_OK
        assert rules.read_text().strip()
        assert pivots.read_text().startswith("PARAMS P=10")

    def test_engine_equals_oracle_results_files(self, workspace):
        out_e = workspace / "engine.jsonl"
        out_o = workspace / "oracle.jsonl"
        assert main(run_args(workspace, "engine", out_e)) == EXIT_OK
        assert main(run_args(workspace, "oracle", out_o)) == EXIT_OK
        assert out_e.read_bytes() == out_o.read_bytes()

    def test_precomputed_rules_and_pivots_reused(self, workspace):
        rules = workspace / "rules.txt"
        pivots = workspace / "pivots.txt"
        main(["detect", "--repo", str(workspace / "repository.csv"), "--out", str(rules)])
        main(["pivots", "--repo", str(workspace / "repository.csv"), "--out", str(pivots)])
        out_a = workspace / "a.jsonl"
        out_b = workspace / "b.jsonl"
        assert main(run_args(workspace, "engine", out_a)) == EXIT_OK
        assert (
            main(
                run_args(
                    workspace,
                    "engine",
                    out_b,
                    extra=["--rules", str(rules), "--pivots", str(pivots)],
                )
            )
            == EXIT_OK
        )
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_metrics_report_f_score_one_against_own_results(self, workspace):
        out = workspace / "r.jsonl"
        metrics = workspace / "m.json"
        assert main(run_args(workspace, "engine", out)) == EXIT_OK
        assert (
            main(
                run_args(
                    workspace, "engine", out, metrics=metrics, extra=["--groundtruth", str(out)]
                )
            )
            == EXIT_OK
        )
        rec = json.loads(metrics.read_text())
        assert rec["schema"] == 1
        assert rec["f_score"] == 1.0
        assert "pruning_power_by_stage" in rec

    def test_bench_reports_both_modes(self, workspace):
        metrics = workspace / "bench.json"
        args = run_args(workspace, "engine", workspace / "ignored.jsonl", metrics=metrics)
        args[0] = "bench"
        # bench has no --mode/--results/--groundtruth flags
        for flag in ("--mode", "--results"):
            i = args.index(flag)
            del args[i : i + 2]
        assert main(args) == EXIT_OK
        rec = json.loads(metrics.read_text())
        assert set(rec["modes"]) == {"engine", "noindex"}
        assert rec["speedup"] > 0

    def test_results_jsonl_schema(self, workspace):
        out = workspace / "r.jsonl"
        assert main(run_args(workspace, "engine", out)) == EXIT_OK
        for line in out.read_text().splitlines():
            rec = json.loads(line)
            assert set(rec) == {"ts", "kind", "rid_a", "rid_b", "prob"}
            assert rec["kind"] in ("match", "expire")


class TestExitCodes:
    def test_config_error_is_2(self, workspace):
        out = workspace / "r.jsonl"
        args = run_args(workspace, "engine", out)
        args[args.index("--rho") + 1] = "2.0"  # gamma outside (0, d)
        assert main(args) == EXIT_CONFIG

    def test_missing_file_is_3(self, tmp_path):
        args = [
            "run",
            "--repo",
            str(tmp_path / "absent.csv"),
            "--streams",
            str(tmp_path / "also-absent.csv"),
            "--keywords",
            "k",
            "--alpha",
            "0.1",
            "--rho",
            "0.5",
            "--window",
            "5",
        ]
        assert main(args) == EXIT_IO

    def test_bad_usage_is_2(self):
        assert main(["run"]) == EXIT_CONFIG

    def test_unknown_verb_is_2(self):
        assert main(["frobnicate"]) == EXIT_CONFIG
