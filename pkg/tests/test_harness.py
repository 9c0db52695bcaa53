import csv
import json
import logging
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from geese import cli
from geese.errors import ConfigError
from geese.evaluators import builtin_problem
from geese.harness import (
    ExperimentConfig,
    build_config,
    generate_cases,
    parse_config_text,
    run_ablations,
    run_experiment,
    run_sensitivity,
)
from geese.plots import emit_plots

TINY = {"hidden": (6,), "generator_hidden": (6,), "ensemble_size": 2, "max_train_iters": 5,
        "init_train_iters": 5, "n_exploit": 8, "n_explore": 8}


def tiny_exp(tmp_path, **kw):
    base = dict(problem="S1", algorithms=("geese",), n_cases=2, budget=30, epsilons=(0.1,),
                init_sizes=(6,), seed=5, out=str(tmp_path), geese=dict(TINY))
    base.update(kw)
    return ExperimentConfig(**base)


def test_generate_cases():
    p = builtin_problem("S1")
    one = generate_cases(p, 1, 3, 8)
    again = generate_cases(p, 1, 3, 8)
    assert len(one) == 1 and one[0].seed == again[0].seed
    assert np.array_equal(one[0].init_points, again[0].init_points)
    cases = generate_cases(p, 100, 42, 4)
    assert len({c.seed for c in cases}) == 100
    for c in cases:
        assert p.accumulated(c.failed_state)[0] > p.epsilon
        assert np.all((c.init_points >= 0) & (c.init_points <= 1))
    with pytest.raises(ConfigError):
        generate_cases(builtin_problem("S1", epsilon=100.0), 1, 0, 4, max_tries=50)
    with pytest.raises(ConfigError):
        generate_cases(p, 0, 0)


def test_experiment_outputs(tmp_path):
    rows, records = run_experiment(tiny_exp(tmp_path))
    assert len(rows) == 1 and len(records) == 2
    with open(tmp_path / "summary.csv") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 1
    assert list(table[0])[:10] == ["algorithm", "problem", "epsilon", "init_size", "failure_times", "query_mean",
                                   "query_std", "query_mean_excl_init", "n_cases", "seed"]
    lines = (tmp_path / "traces.jsonl").read_text().splitlines()
    assert len(lines) == 2
    # aggregation recomputed from the traces
    traces = [json.loads(s) for s in lines]
    charged = [t["total_queries"] if t["success"] else 30 for t in traces]
    assert float(table[0]["query_mean"]) == pytest.approx(np.mean(charged), abs=1e-9)
    assert float(table[0]["query_std"]) == pytest.approx(np.std(charged), abs=1e-9)
    assert int(table[0]["failure_times"]) == sum(not t["success"] for t in traces)


def test_all_fail_convention(tmp_path):
    exp = tiny_exp(tmp_path, algorithms=("random", "ga"), epsilons=(1e-9,), budget=24, n_cases=3)
    rows, _ = run_experiment(exp)
    for r in rows:
        assert r.failure_times == 3 and r.query_mean == 24 and r.query_std == 0
        assert math.isnan(r.query_mean_successes)


def test_case_isolation_under_algorithm_order(tmp_path):
    _, a = run_experiment(tiny_exp(tmp_path / "a", algorithms=("geese", "random")), write=False)
    _, b = run_experiment(tiny_exp(tmp_path / "b", algorithms=("random", "geese")), write=False)
    key = lambda r: (r["algorithm"], r["case_id"])
    assert sorted(a, key=key) == sorted(b, key=key)


def test_worker_pool_matches_serial(tmp_path):
    _, serial = run_experiment(tiny_exp(tmp_path, algorithms=("random", "pso")), write=False)
    _, pooled = run_experiment(tiny_exp(tmp_path, algorithms=("random", "pso"), workers=2), write=False)
    assert serial == pooled


def test_ablations(tmp_path):
    rows = run_ablations(tiny_exp(tmp_path, epsilons=(0.05,)), which=(3, 4))
    assert [r["arm"] for r in rows] == ["with_early_stop", "without_early_stop", "with_focus", "without_focus"]
    meta = json.loads((tmp_path / "ablations_meta.json").read_text())
    seeds = list(meta["arms"].values())
    assert all(s == seeds[0] for s in seeds)
    recs = [json.loads(s) for s in (tmp_path / "ablation_traces.jsonl").read_text().splitlines()]
    for r in recs:
        if r["arm"] == "without_focus":
            assert not any(t["exploit_skipped"] for t in r["traces"])
        if r["arm"] == "without_early_stop":
            assert all(t["n_early"] == 0 for t in r["traces"])
    with pytest.raises(ConfigError):
        run_ablations(tiny_exp(tmp_path), which=(5,))


def test_sensitivity(tmp_path):
    rows = run_sensitivity(tiny_exp(tmp_path, n_cases=1), grids=("L",))
    assert [r["value"] for r in rows] == [2, 4, 8]
    assert (tmp_path / "sensitivity.csv").exists()


def test_config_defaults_and_parsing(tmp_path):
    exp = ExperimentConfig()
    assert exp.epsilons == (0.05, 0.075, 0.1) and exp.init_sizes == (16, 32, 64) and exp.budget == 1000
    text = "# comment\nproblem = S2\nalgos = random,ga\ncases=3\nepsilon=0.05,0.1\ngeese.focus = 2.5\n"
    exp = build_config(parse_config_text(text))
    assert exp.problem == "S2" and exp.algorithms == ("random", "ga") and exp.n_cases == 3
    assert exp.epsilons == (0.05, 0.1) and exp.geese == {"focus": 2.5}
    with pytest.raises(ConfigError):
        build_config({"bogus": "1"})
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")
    with pytest.raises(ConfigError):
        ExperimentConfig(algorithms=("simplex",))


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["algorithm", "problem", "epsilon", "init_size", "query_mean", "query_std"])
        w.writeheader()
        w.writerows(rows)


def test_plots(tmp_path, caplog):
    empty = tmp_path / "empty.csv"
    write_csv(empty, [])
    with caplog.at_level(logging.WARNING):
        assert emit_plots(empty) == []
    assert "nothing to plot" in caplog.text
    assert not list(tmp_path.glob("*.svg"))

    two = tmp_path / "two.csv"
    write_csv(two, [
        dict(algorithm="geese", problem="S1", epsilon=0.075, init_size=8, query_mean=20, query_std=4),
        dict(algorithm="random", problem="S1", epsilon=0.075, init_size=8, query_mean=30, query_std=9),
    ])
    paths = emit_plots(two)
    assert len(paths) == 1
    root = ET.parse(paths[0]).getroot()
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}rect")) == 2

    bad = tmp_path / "bad.csv"
    bad.write_text("algorithm,query_mean\ngeese,1\n")
    with pytest.raises(ValueError):
        emit_plots(bad)


def test_cli_run_and_plot(tmp_path, capsys):
    out = tmp_path / "res"
    args = ["run", "--problem", "S1", "--algos", "random,ga", "--cases", "2", "--budget", "40",
            "--epsilon", "0.1", "--init", "8", "--seed", "42", "--out", str(out)]
    assert cli.main(args) == 0
    assert (out / "summary.csv").exists() and (out / "traces.jsonl").exists()
    assert cli.main(["plot", str(out / "summary.csv")]) == 0
    assert list(out.glob("*.svg"))
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"problem=S1\nalgos=random\ncases=1\nbudget=20\nout={out}\n")
    assert cli.main(["sweep", "--config", str(cfg), "--epsilon", "0.1,0.2", "--init", "4"]) == 0
    with open(out / "summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    assert cli.main(["run", "--algos", "simplex", "--out", str(out)]) == 2
    assert cli.main(["calibrate", "--fraction", "0.05", "--samples", "5000"]) == 0
    assert float(capsys.readouterr().out.strip().splitlines()[-1]) > 0
