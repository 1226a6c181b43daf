"""CLI pipeline tests: subcommands, exit codes, reproducibility."""

from __future__ import annotations

import pytest

from latte.cli import EXIT_FORMAT, EXIT_INVALID, EXIT_IO, EXIT_OK, main


def run_pipeline(base, seed=11, docs=150, queries=8, extra_search=()):
    """synth -> index -> search -> eval inside `base`; returns paths."""
    base.mkdir(parents=True, exist_ok=True)
    paths = {
        "docs": base / "docs.lir",
        "queries": base / "queries.lir",
        "qrels": base / "qrels.tsv",
        "index": base / "index",
        "run": base / "run.txt",
        "report": base / "report.tsv",
    }
    assert main([
        "synth", "--seed", str(seed), "--docs", str(docs), "--queries", str(queries),
        "--dim", "16", "--doc-tokens", "6:10", "--query-tokens", "3:5",
        "--strength", "0.9", "--relevant", "1",
        "--out-docs", str(paths["docs"]), "--out-queries", str(paths["queries"]),
        "--out-qrels", str(paths["qrels"]),
    ]) == EXIT_OK
    assert main([
        "index", "--records", str(paths["docs"]), "--out", str(paths["index"]),
    ]) == EXIT_OK
    assert main([
        "search", "--index", str(paths["index"]), "--queries", str(paths["queries"]),
        "--k", "10", "--mode", "both", "--delta-override", "1.0",
        "--out", str(paths["run"]), *extra_search,
    ]) == EXIT_OK
    assert main([
        "eval", "--run", str(paths["run"]), "--qrels", str(paths["qrels"]),
        "--metric", "recall@10", "--metric", "success@5",
        "--out", str(paths["report"]),
    ]) == EXIT_OK
    return paths


class TestPipeline:
    def test_end_to_end_produces_report(self, tmp_path, capsys):
        paths = run_pipeline(tmp_path)
        report = paths["report"].read_text()
        assert "recall@10\tALL\t" in report and "success@5\tALL\t" in report
        out = capsys.readouterr().out
        assert "evaluated 8 queries" in out

    def test_reruns_are_byte_identical(self, tmp_path):
        first = run_pipeline(tmp_path / "a")
        second = run_pipeline(tmp_path / "b")
        assert first["run"].read_text() == second["run"].read_text()
        assert first["report"].read_text() == second["report"].read_text()
        assert first["docs"].read_bytes() == second["docs"].read_bytes()

    def test_worker_count_does_not_change_run(self, tmp_path):
        serial = run_pipeline(tmp_path / "s", extra_search=("--workers", "1"))
        parallel = run_pipeline(tmp_path / "p", extra_search=("--workers", "4"))
        assert serial["run"].read_text() == parallel["run"].read_text()


class TestToyFixtureSearch:
    def make_toy(self, base):
        assert main([
            "synth", "--toy",
            "--out-docs", str(base / "toy_docs.lir"),
            "--out-queries", str(base / "toy_q.lir"),
            "--out-qrels", str(base / "toy_qrels.tsv"),
        ]) == EXIT_OK
        assert main([
            "index", "--records", str(base / "toy_docs.lir"),
            "--out", str(base / "toy_index"),
        ]) == EXIT_OK

    def test_mode_none_vs_both_top1(self, tmp_path):
        self.make_toy(tmp_path)
        run_none = tmp_path / "none.txt"
        run_both = tmp_path / "both.txt"
        assert main([
            "search", "--index", str(tmp_path / "toy_index"),
            "--queries", str(tmp_path / "toy_q.lir"),
            "--k", "3", "--mode", "none", "--out", str(run_none),
        ]) == EXIT_OK
        assert main([
            "search", "--index", str(tmp_path / "toy_index"),
            "--queries", str(tmp_path / "toy_q.lir"),
            "--k", "3", "--mode", "both", "--delta-override", "1.0",
            "--out", str(run_both),
        ]) == EXIT_OK
        top_none = run_none.read_text().splitlines()[0].split()[2]
        top_both = run_both.read_text().splitlines()[0].split()[2]
        assert top_none == "toy-d2"
        assert top_both == "toy-d1"

    def test_score_subcommand_explains(self, tmp_path, capsys):
        self.make_toy(tmp_path)
        assert main([
            "score", "--queries", str(tmp_path / "toy_q.lir"),
            "--docs", str(tmp_path / "toy_index"),
            "--query-id", "toy-q", "--doc-id", "toy-d1",
            "--mode", "both", "--delta-override", "1.0",
        ]) == EXIT_OK
        out = capsys.readouterr().out
        assert "mode=both" in out and "score=" in out
        # one detail row per query token
        rows = [l for l in out.splitlines() if l and l[0].isdigit()]
        assert len(rows) == 5


class TestSweep:
    def test_one_report_per_l(self, tmp_path):
        paths = run_pipeline(tmp_path)
        out_dir = tmp_path / "sweep"
        assert main([
            "sweep", "--index", str(paths["index"]), "--queries", str(paths["queries"]),
            "--qrels", str(paths["qrels"]), "--k", "10", "--mode", "both",
            "--sweep-l", "50,150,300", "--metric", "recall@10",
            "--out-dir", str(out_dir),
        ]) == EXIT_OK
        for l_value in (50, 150, 300):
            assert (out_dir / f"run_l{l_value}.txt").exists()
            assert (out_dir / f"report_l{l_value}.tsv").exists()


class TestErrors:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["search", "--nonsense"])
        assert exc.value.code == 2

    def test_mode_choices_are_exact(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main([
                "search", "--index", str(tmp_path), "--queries", str(tmp_path),
                "--mode", "query_only", "--out", str(tmp_path / "o.txt"),
            ])
        assert exc.value.code == 2  # flags use the dashed spellings

    def test_missing_file_exit_code(self, tmp_path):
        code = main([
            "index", "--records", str(tmp_path / "absent.lir"),
            "--out", str(tmp_path / "idx"),
        ])
        assert code == EXIT_IO

    def test_malformed_qrels_line_cited(self, tmp_path, capsys):
        paths = run_pipeline(tmp_path)
        bad = tmp_path / "bad_qrels.tsv"
        bad.write_text("q0000\td000000\t1\nq0001\td000001\t1\nnot a qrel\n")
        code = main([
            "eval", "--run", str(paths["run"]), "--qrels", str(bad),
            "--metric", "recall@10", "--out", str(tmp_path / "r.tsv"),
        ])
        assert code == EXIT_FORMAT
        assert "line 3" in capsys.readouterr().err

    def test_bad_lire_magic_exit_code(self, tmp_path):
        bad = tmp_path / "bad.lir"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code = main(["index", "--records", str(bad), "--out", str(tmp_path / "i")])
        assert code == EXIT_FORMAT

    def test_invalid_config_value(self, tmp_path):
        paths = run_pipeline(tmp_path)
        code = main([
            "search", "--index", str(paths["index"]), "--queries", str(paths["queries"]),
            "--k", "10", "--delta-override", "2.0", "--out", str(tmp_path / "x.txt"),
        ])
        assert code == EXIT_INVALID

    def test_unknown_metric(self, tmp_path):
        paths = run_pipeline(tmp_path)
        code = main([
            "eval", "--run", str(paths["run"]), "--qrels", str(paths["qrels"]),
            "--metric", "map", "--out", str(tmp_path / "r.tsv"),
        ])
        assert code == EXIT_INVALID


class TestConfigFile:
    def test_config_file_supplies_values_flags_win(self, tmp_path):
        base = run_pipeline(tmp_path)
        config = tmp_path / "latte.conf"
        config.write_text("# search defaults\nk=3\nmode=none\n")
        out_a = tmp_path / "a.txt"
        assert main([
            "search", "--config", str(config), "--index", str(base["index"]),
            "--queries", str(base["queries"]), "--out", str(out_a),
        ]) == EXIT_OK
        # 8 queries x k=3 from the config file
        assert len(out_a.read_text().splitlines()) == 24
        out_b = tmp_path / "b.txt"
        assert main([
            "search", "--config", str(config), "--index", str(base["index"]),
            "--queries", str(base["queries"]), "--k", "5", "--out", str(out_b),
        ]) == EXIT_OK
        assert len(out_b.read_text().splitlines()) == 40

    def test_unknown_config_key_rejected(self, tmp_path):
        base = run_pipeline(tmp_path)
        config = tmp_path / "bad.conf"
        config.write_text("bogus=1\n")
        code = main([
            "search", "--config", str(config), "--index", str(base["index"]),
            "--queries", str(base["queries"]), "--out", str(tmp_path / "o.txt"),
        ])
        assert code == EXIT_INVALID
