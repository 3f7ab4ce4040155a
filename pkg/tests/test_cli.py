from __future__ import annotations

import subprocess
import sys

import pytest

from analogon.cli import EXIT_DATA, EXIT_USAGE, main
from analogon.macfac import retrieve_ranked


@pytest.fixture(scope="module")
def corpus_dir(corpus, tmp_path_factory):
    return corpus.write(tmp_path_factory.mktemp("corpus"))


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_usage_errors(capsys, corpus_dir):
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run(capsys, "retrieve", "--library", corpus_dir)[0] == EXIT_USAGE
    code, _, err = run(capsys, "retrieve", "--library", corpus_dir, "--probe", "x", "--top", "0")
    assert code == EXIT_USAGE and "must be >= 1" in err
    assert run(capsys, "gen-corpus", "--out", "x", "--families", "ambush,nope")[0] == EXIT_USAGE
    assert run(capsys, "experiment", "--corpus", corpus_dir, "--out", "x", "--ablation", "half")[0] == EXIT_USAGE


def test_data_errors(capsys, corpus_dir, tmp_path):
    code, _, err = run(capsys, "retrieve", "--library", tmp_path, "--probe", corpus_dir / "ambush-1.problem.case")
    assert code == EXIT_DATA and "index.txt" in err
    bad = tmp_path / "bad.case"
    bad.write_text("(case x :kind problem (entity h (isa Hill)) (fact (near h ghost)))")
    code, _, err = run(capsys, "retrieve", "--library", corpus_dir, "--probe", bad)
    assert code == EXIT_DATA and "ghost" in err
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"normalizer": 7}')
    code, _, err = run(capsys, "--config", cfg, "retrieve", "--library", corpus_dir,
                       "--probe", corpus_dir / "ambush-1.problem.case")
    assert code == EXIT_DATA and "normalizer" in err
    code, _, _ = run(capsys, "suggest", "--library", corpus_dir, "--probe", corpus_dir / "ambush-1.problem.case",
                     "--precedent", "nope-9")
    assert code == EXIT_DATA
    report = tmp_path / "r.txt"
    report.write_text("task 1: type=Ambush unit=u loc=(x y)\n")
    code, _, _ = run(capsys, "score", "--suggestions", report, "--expert", corpus_dir / "ambush-1.solution.case")
    assert code == EXIT_DATA


def test_retrieve_top1(capsys, corpus_dir, library):
    code, out, _ = run(capsys, "retrieve", "--library", corpus_dir, "--probe", corpus_dir / "seize-2.problem.case")
    assert code == 0
    expected = retrieve_ranked(library.get("seize-2").problem, library, 1)[0]
    assert out == f"1 {expected.id} {expected.similarity:.4f}\n"
    code, out, _ = run(capsys, "retrieve", "--library", corpus_dir, "--probe", corpus_dir / "seize-2.problem.case",
                       "--top", 3)
    assert code == 0 and len(out.splitlines()) == 3 and "seize-2 " not in out


def test_suggest_and_score_identity(capsys, corpus_dir, tmp_path):
    code, out, _ = run(capsys, "suggest", "--library", corpus_dir, "--probe", corpus_dir / "defend-1.problem.case",
                       "--precedent", "defend-1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# config partitions=on remap=on")
    assert lines[1] == "# precedent defend-1"
    assert any(line.startswith("task 1: type=") for line in lines)
    report = tmp_path / "s.txt"
    report.write_text(out)
    args = ["score", "--suggestions", report, "--expert", corpus_dir / "defend-1.solution.case",
            "--probe", corpus_dir / "defend-1.problem.case"]
    code, out, _ = run(capsys, *args)
    assert (code, out) == (0, "1.0000\n")
    code, out, _ = run(capsys, *args, "--paper-normalizer")
    assert (code, out) == (0, "0.8000\n")


def test_suggest_flags_echoed(capsys, corpus_dir):
    code, out, _ = run(capsys, "suggest", "--library", corpus_dir, "--probe", corpus_dir / "ambush-2.problem.case",
                       "--no-partitions", "--no-remap")
    assert code == 0
    assert out.startswith("# config partitions=off remap=off")
    assert out.splitlines()[1].startswith("# precedent ambush-")


def test_gen_corpus_subset(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-corpus", "--seed", 2, "--out", tmp_path, "--families", "ambush", "--variants", 2)
    assert code == 0 and out.startswith("wrote 2 cases")
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "ambush-1.problem.case", "ambush-1.solution.case", "ambush-2.problem.case", "ambush-2.solution.case",
        "index.txt"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "analogon", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gen-corpus" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "analogon", "bogus"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
