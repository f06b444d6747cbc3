import json

import pytest

from immunorec.cli import main

GEN_ARGS = [
    "gen", "--users", "30", "--movies", "40", "--clusters", "2", "--noise", "0.1",
    "--ratings-min", "25", "--ratings-max", "30", "--seed", "42",
]


@pytest.fixture
def data_file(tmp_path):
    path = tmp_path / "data.csv"
    assert main(GEN_ARGS + ["-o", str(path)]) == 0
    return path


@pytest.fixture
def reference_file(tmp_path):
    """Ratings file holding the hand-checked reference pair."""
    rows = [
        (1, 153, 4), (1, 253, 4), (1, 296, 6), (1, 349, 5),
        (1, 355, 3), (1, 457, 6), (1, 553, 6), (1, 595, 6),
        (2, 153, 5), (2, 253, 5), (2, 296, 3), (2, 349, 5),
        (2, 355, 1), (2, 457, 5), (2, 553, 4), (2, 595, 5),
        (3, 900, 2), (3, 901, 3),
    ]
    path = tmp_path / "reference.csv"
    path.write_text("".join(f"{u},{m},{c}\n" for u, m, c in rows), encoding="utf-8")
    return path


class TestGen:
    def test_writes_data_and_sidecar(self, tmp_path):
        out = tmp_path / "data.csv"
        assert main(GEN_ARGS + ["-o", str(out)]) == 0
        assert out.exists()
        sidecar = json.loads((tmp_path / "data.csv.meta.json").read_text())
        assert sidecar["command"] == "gen"
        assert sidecar["config"]["seed"] == 42

    def test_rerun_is_byte_identical(self, tmp_path):
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        assert main(GEN_ARGS + ["-o", str(first)]) == 0
        assert main(GEN_ARGS + ["-o", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        meta_a = (tmp_path / "a.csv.meta.json").read_text()
        meta_b = (tmp_path / "b.csv.meta.json").read_text()
        assert meta_a == meta_b

    def test_missing_seed_exits_one(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["gen", "--users", "10", "--movies", "10", "-o", str(tmp_path / "x.csv")])
        assert excinfo.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_bad_noise_exits_one(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(GEN_ARGS[:8] + ["--noise", "1.5", "--seed", "1", "-o", str(tmp_path / "x.csv")])
        assert excinfo.value.code == 1

    def test_invalid_range_is_config_error(self, tmp_path, capsys):
        code = main([
            "gen", "--users", "10", "--movies", "10", "--ratings-min", "8",
            "--ratings-max", "20", "--seed", "1", "-o", str(tmp_path / "x.csv"),
        ])
        assert code == 1
        assert "config error" in capsys.readouterr().err


class TestIngestCheck:
    def test_smoke(self, data_file, capsys):
        assert main(["ingest-check", str(data_file), "--min-ratings", "1"]) == 0
        out = capsys.readouterr().out
        assert "users kept:    30" in out

    def test_report_file(self, data_file, tmp_path):
        report_path = tmp_path / "report.json"
        assert main([
            "ingest-check", str(data_file), "--min-ratings", "1", "-o", str(report_path)
        ]) == 0
        report = json.loads(report_path.read_text())
        assert report["users_kept"] == 30
        assert report["rows_rejected"] == 0

    def test_missing_file_exits_two(self, tmp_path, capsys):
        assert main(["ingest-check", str(tmp_path / "absent.csv")]) == 2
        assert "data error" in capsys.readouterr().err

    def test_bad_row_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,5,9\n", encoding="utf-8")
        assert main(["ingest-check", str(bad), "--min-ratings", "1"]) == 2
        assert "line 1" in capsys.readouterr().err


class TestAffinity:
    def test_reference_pair_values(self, reference_file, capsys):
        assert main(["affinity", str(reference_file), "--min-ratings", "1", "1", "2"]) == 0
        out = capsys.readouterr().out
        assert "8 common movies" in out
        assert "0.725000" in out
        assert "0.107143" in out
        assert "concordant 9, discordant 6" in out
        assert "ignored 13 of 28" in out

    def test_user_against_itself(self, reference_file, capsys):
        assert main(["affinity", str(reference_file), "--min-ratings", "1", "1", "1"]) == 0
        assert "weighted kappa: 1.000000" in capsys.readouterr().out

    def test_disjoint_pair_prints_flags(self, reference_file, capsys):
        assert main(["affinity", str(reference_file), "--min-ratings", "1", "1", "3"]) == 0
        out = capsys.readouterr().out
        assert out.count("insufficient overlap") == 3

    def test_unknown_user_exits_two(self, reference_file, capsys):
        assert main(["affinity", str(reference_file), "--min-ratings", "1", "1", "99"]) == 2
        assert "data error" in capsys.readouterr().err


class TestRecommend:
    def test_deterministic_output(self, data_file, tmp_path, capsys):
        args = [
            "recommend", str(data_file), "--min-ratings", "1", "--user", "1",
            "--count", "5", "--seed", "7",
        ]
        first_json = tmp_path / "one.json"
        second_json = tmp_path / "two.json"
        assert main(args + ["-o", str(first_json)]) == 0
        first_out = capsys.readouterr().out
        assert main(args + ["-o", str(second_json)]) == 0
        second_out = capsys.readouterr().out
        assert first_out == second_out
        assert first_json.read_bytes() == second_json.read_bytes()
        payload = json.loads(first_json.read_text())
        assert payload["converged"] is True
        assert len(payload["entries"]) == 5

    def test_count_zero_rejected(self, data_file):
        with pytest.raises(SystemExit) as excinfo:
            main([
                "recommend", str(data_file), "--min-ratings", "1", "--user", "1",
                "--count", "0", "--seed", "7",
            ])
        assert excinfo.value.code == 1

    def test_user_who_rated_everything(self, tmp_path, capsys):
        # two users covering the same movie set: nothing left to recommend
        rows = "".join(f"1,{m},4\n2,{m},5\n" for m in range(1, 9))
        path = tmp_path / "tiny.csv"
        path.write_text(rows, encoding="utf-8")
        assert main([
            "recommend", str(path), "--min-ratings", "1", "--user", "1",
            "--count", "3", "--seed", "7",
        ]) == 0
        assert "no recommendations" in capsys.readouterr().out

    def test_unknown_user_exits_two(self, data_file):
        assert main([
            "recommend", str(data_file), "--min-ratings", "1", "--user", "4999",
            "--count", "3", "--seed", "7",
        ]) == 2

    def test_empty_pool_exits_three(self, tmp_path, capsys):
        path = tmp_path / "single.csv"
        path.write_text("".join(f"1,{m},4\n" for m in range(1, 6)), encoding="utf-8")
        assert main([
            "recommend", str(path), "--min-ratings", "1", "--user", "1",
            "--count", "3", "--seed", "7",
        ]) == 3
        assert "runtime error" in capsys.readouterr().err

    def test_golden_standard_fixture_list(self, tmp_path):
        # pinned from the first verified run on the standard dataset
        fixture = tmp_path / "standard.csv"
        assert main([
            "gen", "--users", "500", "--movies", "300", "--clusters", "4",
            "--noise", "0.1", "--ratings-min", "30", "--ratings-max", "60",
            "--seed", "42", "-o", str(fixture),
        ]) == 0
        out = tmp_path / "rec.json"
        assert main([
            "recommend", str(fixture), "--user", "1", "--count", "5",
            "--seed", "42", "-o", str(out),
        ]) == 0
        payload = json.loads(out.read_text())
        assert payload["converged"] is True
        assert payload["iterations"] == 10
        golden = [
            (182, 0.9016629577437353, 14),
            (6, 0.894145562830612, 11),
            (143, 0.8729216856932911, 11),
            (14, 0.8339609831781103, 14),
            (12, 0.8255754387472574, 8),
        ]
        actual = [(e["movie_id"], e["value"], e["support"]) for e in payload["entries"]]
        for (gm, gv, gs), (am, av, asup) in zip(golden, actual):
            assert (gm, gs) == (am, asup)
            assert av == pytest.approx(gv, abs=1e-12)


class TestEval:
    def test_accuracy_report(self, data_file, tmp_path, capsys):
        report_path = tmp_path / "report.csv"
        args = [
            "eval", "accuracy", str(data_file), "--min-ratings", "1",
            "--users", "3", "--trials", "3", "--population", "20",
            "--seed", "5", "-o", str(report_path),
        ]
        assert main(args) == 0
        out = capsys.readouterr().out
        assert "median" in out
        lines = report_path.read_text().splitlines()
        assert lines[0] == "user_id,num_ratings,accuracy,fallback_trials"
        assert len(lines) == 4
        assert (tmp_path / "report.csv.meta.json").exists()

    def test_accuracy_rerun_byte_identical(self, data_file, tmp_path):
        args = [
            "eval", "accuracy", str(data_file), "--min-ratings", "1",
            "--users", "2", "--trials", "2", "--population", "15", "--seed", "5",
            "--report-format", "json",
        ]
        one = tmp_path / "one.json"
        two = tmp_path / "two.json"
        assert main(args + ["-o", str(one)]) == 0
        assert main(args + ["-o", str(two)]) == 0
        assert one.read_bytes() == two.read_bytes()

    def test_accuracy_insufficient_users_exits_two(self, data_file, capsys):
        assert main([
            "eval", "accuracy", str(data_file), "--min-ratings", "1",
            "--users", "500", "--trials", "3", "--seed", "5",
        ]) == 2
        assert "data error" in capsys.readouterr().err

    def test_ties_report(self, data_file, tmp_path, capsys):
        report_path = tmp_path / "ties.csv"
        assert main([
            "eval", "ties", str(data_file), "--min-ratings", "1",
            "--users", "5", "--peers", "10", "--seed", "3", "-o", str(report_path),
        ]) == 0
        lines = report_path.read_text().splitlines()
        assert lines[0] == "user_id,num_ratings,tie_fraction,pairs_skipped"
        assert len(lines) == 6

    def test_compare_smoke(self, data_file, tmp_path, capsys):
        out_path = tmp_path / "compare.json"
        assert main([
            "eval", "compare", str(data_file), "--min-ratings", "1",
            "--measures", "wk,kt", "--users", "2", "--trials", "2",
            "--population", "15", "--remap-negative", "--seed", "5",
            "-o", str(out_path),
        ]) == 0
        out = capsys.readouterr().out
        assert "measure wk" in out
        assert "measure kt" in out
        assert "paired comparison" in out
        payload = json.loads(out_path.read_text())
        assert payload["measures"] == ["wk", "kt"]
        assert len(payload["reports"]) == 2

    def test_compare_needs_two_measures(self, data_file, capsys):
        assert main([
            "eval", "compare", str(data_file), "--min-ratings", "1",
            "--measures", "wk", "--users", "2", "--trials", "2", "--seed", "5",
        ]) == 1
        assert "config error" in capsys.readouterr().err

    def test_split_threshold(self, data_file, capsys):
        # ids 1..30; threshold 10 puts 20 users in the pool, 10 in the test side
        assert main([
            "eval", "accuracy", str(data_file), "--min-ratings", "1",
            "--users", "2", "--trials", "2", "--population", "10",
            "--pool-threshold", "10", "--seed", "5",
        ]) == 0


    def test_shared_population_flag(self, data_file):
        assert main([
            "eval", "accuracy", str(data_file), "--min-ratings", "1",
            "--users", "2", "--trials", "2", "--population", "15",
            "--shared-population", "--seed", "5",
        ]) == 0


def test_unknown_command_exits_one():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 1


def test_log_env_var_controls_verbosity(data_file):
    import subprocess
    import sys

    result = subprocess.run(
        [sys.executable, "-m", "immunorec.cli", "ingest-check", str(data_file),
         "--min-ratings", "1"],
        capture_output=True,
        text=True,
        env={"IMMUNOREC_LOG": "info", "PATH": "/usr/bin:/bin"},
    )
    assert result.returncode == 0
    assert "INFO immunorec.datastore: loaded" in result.stderr

    quiet = subprocess.run(
        [sys.executable, "-m", "immunorec.cli", "ingest-check", str(data_file),
         "--min-ratings", "1"],
        capture_output=True,
        text=True,
        env={"IMMUNOREC_LOG": "error", "PATH": "/usr/bin:/bin"},
    )
    assert quiet.returncode == 0
    assert "INFO" not in quiet.stderr
