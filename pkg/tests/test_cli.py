import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from privdude import cli, mechanisms, problems
from privdude.errors import InternalAssertionError
from privdude.problems import KnapsackInstance


def _run(args, env=None):
    full = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "privdude", *args], capture_output=True, text=True, env=full)


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.json"
    inst = KnapsackInstance([1.0, 0.8, 0.5], [[1.0]] * 3, [2.0])
    problems.save(inst, path)
    return path


def test_generate_round_trip(tmp_path):
    out = tmp_path / "k.json"
    res = _run(["generate", "knapsack", "--n", "3", "--k", "1", "--seed", "7", "--out", str(out)])
    assert res.returncode == 0
    assert json.loads(res.stdout)["metadata"]["width"] == 3.0
    first = out.read_bytes()
    inst = problems.load(out)
    assert problems.dumps(inst).encode() == first
    again = problems.generate("knapsack", seed=7, n=3, k=1)
    assert np.array_equal(inst.values, again.values) and np.array_equal(inst.weights, again.weights)
    _run(["generate", "knapsack", "--n", "3", "--k", "1", "--seed", "7", "--out", str(out)])
    assert out.read_bytes() == first


def test_generate_errors(tmp_path):
    assert _run(["generate", "lottery", "--out", str(tmp_path / "x")]).returncode == 1
    assert cli.main(["generate", "knapsack", "--n", "0"]) == 1
    assert cli.main(["generate", "knapsack", "--n", "3", "--out", str(tmp_path / "missing" / "x.json")]) == 2


def test_solve_tiny_privdude(tiny_file, tmp_path):
    out = tmp_path / "r.json"
    res = _run(["solve", str(tiny_file), "--algo", "privdude", "--no-noise", "--T-override", "2000", "--out", str(out)])
    assert res.returncode == 0, res.stderr
    report = json.loads(out.read_text())
    audit = report["audit"]
    for key in ("structure_ok", "violation_ok", "objective_ok", "lambda_in_box", "billboard_ok", "passed"):
        assert audit[key] is True
    assert "wall time" in res.stderr


def test_solve_flow_truedude_needs_null(tmp_path):
    path = tmp_path / "f.json"
    problems.save(problems.generate("flow", seed=1, n=3, nodes=4), path)
    res = _run(["solve", str(path), "--algo", "truedude", "--T-override", "10"])
    assert res.returncode == 1 and "null action required" in res.stderr


def test_solve_missing_file(tmp_path):
    assert cli.main(["solve", str(tmp_path / "nope.json")]) == 2


def test_solve_internal_assertion_exit(tiny_file, monkeypatch):
    def boom(*args, **kwargs):
        raise InternalAssertionError("forced")
    monkeypatch.setattr(mechanisms, "tightdude", boom)
    assert cli.main(["solve", str(tiny_file), "--algo", "tightdude"]) == 3


def test_solve_all_algorithms(tmp_path):
    path = tmp_path / "k.json"
    problems.save(problems.KnapsackInstance([0.5] * 6, [[1.0]] * 6, [1e6]), path)
    for algo in cli.ALGOS:
        out = tmp_path / f"{algo}.json"
        assert cli.main(["solve", str(path), "--algo", algo, "--T-override", "50", "--out", str(out)]) == 0, algo
        assert json.loads(out.read_text())["algo"] == algo


def test_sweep(tiny_file, tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", str(tiny_file), "--epsilons", "1.0", "--trials", "1", "--T-override", "50",
                     "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["epsilon", "seed", "objective", "opt", "gap", "violation", "rp_bound", "satisfied_frac"]
    assert len(rows) == 2
    assert cli.main(["sweep", str(tiny_file), "--epsilons", "1,abc"]) == 1
    assert cli.main(["sweep", str(tiny_file), "--epsilons", "-1"]) == 1


def test_sweep_violation_shrinks_with_epsilon(tmp_path):
    path = tmp_path / "k.json"
    problems.save(problems.generate("knapsack", seed=3, n=20, k=1), path)
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", str(path), "--epsilons", "0.1,10", "--trials", "50", "--T-override", "400",
                     "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    low = np.median([float(r["violation"]) for r in rows if float(r["epsilon"]) == 0.1])
    high = np.median([float(r["violation"]) for r in rows if float(r["epsilon"]) == 10.0])
    assert low >= high


def test_usage_errors_exit_one():
    assert _run(["solve"]).returncode == 1
    assert _run([]).returncode == 1
    assert _run(["generate", "knapsack", "--n", "x"]).returncode == 1
