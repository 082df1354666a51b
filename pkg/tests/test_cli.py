"""Command-line interface: exit codes, file formats, and smoke paths."""

from __future__ import annotations

import csv
import io
import json

import pytest

from conpredict.cli import main

from conftest import COUNTER_SRC
from test_ccfg import figure2_text


def run_cli(argv, capsys):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestExitCodes:
    def test_success_is_zero(self, tmp_path, capsys):
        src = tmp_path / "p.mcc"
        src.write_text("fn main() { print(1); }")
        code, out, _ = run_cli(["parse", str(src)], capsys)
        assert code == 0
        summary = json.loads(out)
        assert summary["functions"][0]["name"] == "main"

    def test_unknown_command_is_usage_error(self, capsys):
        code, _, err = run_cli(["frobnicate"], capsys)
        assert code == 1
        assert "usage error" in err

    def test_missing_required_option_is_usage_error(self, tmp_path, capsys):
        src = tmp_path / "p.mcc"
        src.write_text(COUNTER_SRC)
        code, _, err = run_cli(["mutate", str(src)], capsys)
        assert code == 1

    def test_bad_option_value_is_usage_error(self, tmp_path, capsys):
        ccfg = tmp_path / "g.ccfg"
        ccfg.write_text(figure2_text())
        code, _, _ = run_cli(
            ["metrics", str(ccfg), "--node-weight", "0"], capsys
        )
        assert code == 1

    def test_missing_input_file_is_input_error(self, capsys):
        code, _, err = run_cli(["parse", "/nonexistent/x.mcc"], capsys)
        assert code == 2
        assert "input error" in err

    def test_syntax_error_is_input_error(self, tmp_path, capsys):
        src = tmp_path / "bad.mcc"
        src.write_text("fn main() { int a = ; }")
        code, _, err = run_cli(["parse", str(src)], capsys)
        assert code == 2

    def test_malformed_ccfg_is_input_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.ccfg"
        bad.write_text("{not json")
        code, _, _ = run_cli(["metrics", str(bad)], capsys)
        assert code == 2

    def test_internal_failure_is_three(self, tmp_path, capsys, monkeypatch):
        import conpredict.cli as climod

        def boom(*a, **k):
            raise RuntimeError("invariant violated")

        monkeypatch.setattr(climod, "build_ccfg", boom)
        src = tmp_path / "p.mcc"
        src.write_text("fn main() { print(1); }")
        code, _, err = run_cli(["ccfg", str(src)], capsys)
        assert code == 3
        assert "internal error" in err


class TestMetrics:
    def test_worked_example_row(self, tmp_path, capsys):
        ccfg = tmp_path / "figure2.ccfg"
        ccfg.write_text(figure2_text())
        code, out, _ = run_cli(
            ["metrics", str(ccfg), "--node-weight", "2"], capsys
        )
        assert code == 0
        rows = {r["function"]: r for r in read_csv(out)}
        foo = rows["foo"]
        assert [foo[k] for k in ("SPC", "SVC", "CSC", "CEC", "CCC", "SVD")] == [
            "2", "2", "2", "4", "7", "9",
        ]

    def test_source_input_adds_sequential_columns(self, tmp_path, capsys):
        src = tmp_path / "counter.mcc"
        src.write_text(COUNTER_SRC)
        code, out, _ = run_cli(["metrics", str(src)], capsys)
        assert code == 0
        rows = read_csv(out)
        assert {"CC", "CP", "nloc", "SPC"} <= set(rows[0].keys())
        assert {r["function"] for r in rows} == {"inc", "main"}


class TestMutateExec:
    def test_mutate_writes_manifest_and_sources(self, tmp_path, capsys):
        src = tmp_path / "counter.mcc"
        src.write_text(COUNTER_SRC)
        out_dir = tmp_path / "mut"
        code, _, _ = run_cli(
            ["mutate", str(src), "--ops", "rmlock", "--out-dir", str(out_dir)],
            capsys,
        )
        assert code == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert len(manifest["mutants"]) == 1
        entry = manifest["mutants"][0]
        assert entry["operator"] == "rmlock"
        mutated = (out_dir / entry["file"]).read_text()
        assert "lock(m)" not in mutated

    def test_exec_kill_matrix(self, tmp_path, capsys):
        src = tmp_path / "counter.mcc"
        src.write_text(COUNTER_SRC)
        out_dir = tmp_path / "mut"
        assert run_cli(
            ["mutate", str(src), "--ops", "rmlock", "--out-dir", str(out_dir)],
            capsys,
        )[0] == 0
        tests = tmp_path / "tests.jsonl"
        tests.write_text(json.dumps(
            {"entry": "main", "args": [], "observables": ["g"]}
        ) + "\n")
        res_dir = tmp_path / "res"
        code, _, _ = run_cli(
            ["exec", str(src), "--tests", str(tests),
             "--mutants", str(out_dir / "manifest.json"),
             "--seeds", "100", "--out-dir", str(res_dir)],
            capsys,
        )
        assert code == 0
        km = read_csv((res_dir / "killmatrix.csv").read_text())
        assert km[0]["executed"] == "1" and km[0]["killed"] == "1"
        mm = read_csv((res_dir / "mutation_metrics.csv").read_text())
        inc = next(r for r in mm if r["function"] == "inc")
        assert inc["MuS_rmlock"] == "1"
        assert inc["MuDuE_rmlock"] == "100"
        assert inc["MuDuK_rmlock"] == "100"


class TestDataCommands:
    def make_synth(self, tmp_path, capsys, n=60, extra=()):
        out = tmp_path / "data.csv"
        code, _, _ = run_cli(
            ["synth", "--n", str(n), "--faulty", "0.3", "--seed", "5",
             "-o", str(out), *extra],
            capsys,
        )
        assert code == 0
        return out

    def test_synth_deterministic_files(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for path in (a, b):
            assert run_cli(
                ["synth", "--n", "40", "--seed", "9", "-o", str(path)], capsys
            )[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_train_then_predict(self, tmp_path, capsys):
        data = self.make_synth(tmp_path, capsys)
        model = tmp_path / "model.json"
        code, _, _ = run_cli(
            ["train", str(data), "--classifier", "naive-bayes",
             "--no-select", "--smote-percent", "0", "-o", str(model)],
            capsys,
        )
        assert code == 0
        code, out, _ = run_cli(["predict", str(model), str(data)], capsys)
        assert code == 0
        rows = read_csv(out)
        assert len(rows) == 60
        assert all(0.0 <= float(r["probability"]) <= 1.0 for r in rows)

    def test_evaluate_report_columns(self, tmp_path, capsys):
        data = self.make_synth(tmp_path, capsys)
        code, out, _ = run_cli(
            ["evaluate", str(data), "--classifier", "naive-bayes",
             "--folds", "3", "--no-select", "--smote-percent", "0"],
            capsys,
        )
        assert code == 0
        rows = read_csv(out)
        assert {"feature_set", "classifier", "repeat", "precision",
                "recall", "f1", "auc", "pofb20", "popt"} <= set(rows[0])

    def test_assemble_joins_tables(self, tmp_path, capsys):
        f1 = tmp_path / "t1.csv"
        f1.write_text("program,function,A\np,f,1\np,g,2\n")
        f2 = tmp_path / "t2.csv"
        f2.write_text("program,function,B\np,f,3\np,g,4\n")
        labels = tmp_path / "labels.csv"
        labels.write_text("program,function,label\np,f,1\np,g,0\n")
        code, out, _ = run_cli(
            ["assemble", str(f1), str(f2), "--labels", str(labels)], capsys
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0]["A"] == "1" and rows[0]["B"] == "3"
        assert rows[0]["label"] == "1" and rows[1]["label"] == "0"

    def test_assemble_missing_function_is_input_error(self, tmp_path, capsys):
        f1 = tmp_path / "t1.csv"
        f1.write_text("program,function,A\np,f,1\n")
        labels = tmp_path / "labels.csv"
        labels.write_text("program,function,label\np,missing,1\n")
        code, _, _ = run_cli(
            ["assemble", str(f1), "--labels", str(labels)], capsys
        )
        assert code == 2


def test_seed_environment_fallback(tmp_path, capsys, monkeypatch):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    monkeypatch.setenv("CONPREDICT_SEED", "123")
    assert main(["synth", "--n", "30", "-o", str(out1)]) == 0
    monkeypatch.delenv("CONPREDICT_SEED")
    assert main(["synth", "--n", "30", "--seed", "123", "-o", str(out2)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()
