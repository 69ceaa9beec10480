import json
import subprocess
import sys

import numpy as np
import pytest

from contentmap.cli import main

BARBELL = "a\tb\na\tc\nb\tc\nd\te\nd\tf\ne\tf\nc\td\n"
ONEHOT = "".join(f"{v}\t{0 if v in 'abc' else 1}\t1\n" for v in "abcdef")


@pytest.fixture
def files(tmp_path):
    (tmp_path / "e.tsv").write_text(BARBELL)
    (tmp_path / "x.tsv").write_text(ONEHOT)
    (tmp_path / "l.tsv").write_text("".join(f"{v}\t{'L' if v in 'abc' else 'R'}\n" for v in "abcdef"))
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


def test_partition_barbell(files):
    out = files / "o"
    assert run("partition", "--edges", files / "e.tsv", "--attrs", files / "x.tsv", "--labels", files / "l.tsv",
               "--objective", "cme", "--method", "top-down", "--seed", 0, "--out", out,
               "--trace", files / "t.csv") == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["total_bits"] == pytest.approx(2.3207, abs=1e-3) and rep["m"] == 2
    assert rep["metrics"]["f_measure"] == 1.0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["inputs"]) == {str(files / n) for n in ("e.tsv", "x.tsv", "l.tsv")}
    assert man["flags"]["seed"] == 0 and man["version"]
    assert (files / "t.csv").read_text().startswith("step,total_bits,m\n")
    assert (out / "nodes.tsv").read_text().splitlines()[0] == "0\ta"


def test_partition_byte_identical(files):
    for k in (1, 2):
        assert run("partition", "--edges", files / "e.tsv", "--attrs", files / "x.tsv", "--seed", 3,
                   "--out", files / f"o{k}", "--workers", k) == 0
    for name in ("partition.tsv", "report.json"):
        assert (files / "o1" / name).read_bytes() == (files / "o2" / name).read_bytes()


@pytest.mark.parametrize("method", ["bottom-up", "exhaustive"])
def test_other_methods(files, method):
    assert run("partition", "--edges", files / "e.tsv", "--attrs", files / "x.tsv", "--method", method,
               "--out", files / method) == 0
    assert json.loads((files / method / "report.json").read_text())["m"] == 2


def test_cme_requires_attrs(files, capsys):
    assert run("partition", "--edges", files / "e.tsv", "--objective", "cme") == 2
    assert "cme requires --attrs" in capsys.readouterr().err


def test_input_error_names_line(files, capsys):
    (files / "bad.tsv").write_text("a\tb\nc\n")
    assert run("partition", "--edges", files / "bad.tsv", "--objective", "me", "--out", files / "o") == 2
    assert "bad.tsv:2" in capsys.readouterr().err


def test_non_convergence_exit_code(files, capsys):
    assert run("partition", "--edges", files / "e.tsv", "--objective", "me", "--directed", "--max-iter", 2,
               "--out", files / "o") == 3
    assert "residual" in capsys.readouterr().err


def test_score(files, capsys):
    (files / "p.tsv").write_text("".join(f"{v}\t{'x' if v in 'abc' else 'y'}\n" for v in "abcdef"))
    assert run("score", "--edges", files / "e.tsv", "--attrs", files / "x.tsv", "--labels", files / "l.tsv",
               "--partition", files / "p.tsv") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["total_bits"] == pytest.approx(2.3207, abs=1e-3)
    assert rep["metrics"] == {"f_measure": 1.0, "purity": 1.0, "accuracy": 1.0, "n_labeled": 6, "m_scored": 2}


def test_score_missing_node(tmp_path, capsys):
    (tmp_path / "e.tsv").write_text("".join(f"{i}\t{i + 1}\n" for i in range(6)))
    (tmp_path / "p.tsv").write_text("".join(f"{i}\t0\n" for i in (0, 1, 2, 3, 4, 6)))
    assert run("score", "--edges", tmp_path / "e.tsv", "--partition", tmp_path / "p.tsv") == 2
    assert "node 5" in capsys.readouterr().err


def test_toy(capsys):
    assert run("toy", "--figure", "1b", "--d", 4, "--json") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["argmin"]["undirected"]["cme"] == ["A"]
    assert run("toy", "--figure", "1a", "--cut", "A") == 0
    assert "argmin cme: A" in capsys.readouterr().out
    assert run("toy", "--figure", "1a", "--cut", "Q") == 2


def test_convert_linqs(tmp_path):
    (tmp_path / "c.content").write_text("p1 1 0 1 X\np2 0 1 0 Y\np3 1 1 0 X\np4 0 0 1 Y\n")
    (tmp_path / "c.cites").write_text("p1 p2\np2 p1\np3 p1\np9 p1\n")
    assert run("convert-linqs", "--content", tmp_path / "c.content", "--cites", tmp_path / "c.cites",
               "--out", tmp_path / "o") == 0
    edges = (tmp_path / "o" / "edges.tsv").read_text().splitlines()
    assert edges == ["p1\tp2", "p1\tp3", "p4\tp4"]
    assert "p1\t2\t1" in (tmp_path / "o" / "attrs.tsv").read_text()
    assert len((tmp_path / "o" / "labels.tsv").read_text().splitlines()) == 4


def test_version_and_entry_point():
    res = subprocess.run([sys.executable, "-m", "contentmap.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().startswith("contentmap ")
