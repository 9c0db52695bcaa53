"""Experiment orchestration: cases, metric aggregation, sweeps, ablations, sensitivity.

Every (algorithm, threshold, initial size) cell runs the same cases. A case
fixes its own seed, initial design and failed starting state, so results do
not depend on the order cells are executed in.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from geese.baselines import ALGORITHMS as BASELINES, BaselineConfig, run_baseline
from geese.errors import ConfigError
from geese.evaluators import ProblemSpec, builtin_problem, calibrate_epsilon
from geese.generators import LatentSpec
from geese.optimizer import GeeseConfig, RunOutcome, preset, run

log = logging.getLogger(__name__)

ALGORITHMS = ("geese", *BASELINES)
CSV_COLUMNS = [
    "algorithm", "problem", "epsilon", "init_size", "failure_times", "query_mean",
    "query_std", "query_mean_excl_init", "n_cases", "seed", "query_mean_successes",
]
ABLATIONS = {
    1: ("surrogate", [("elementwise", {}), ("error_sum", {"surrogate_mode": "sum"})]),
    2: ("exploration", [("random_weights", {}), ("trained", {"train_explore": True})]),
    3: ("early_stopping", [("with_early_stop", {}), ("without_early_stop", {"early_stop": 0.0})]),
    4: ("focus", [("with_focus", {}), ("without_focus", {"focus": math.inf})]),
}
SENSITIVITY = {
    "L": ("ensemble_size", (2, 4, 8)),
    "NIT": ("n_exploit", (1, 32, 64, 128)),
    "lr": ("lr_generator", (1e-1, 1e-2, 1e-3)),
    "eps_e": ("early_stop", (1e-3, 1e-4, 1e-5)),
}
FULL_HIDDEN = (1024, 2028, 1024)


@dataclass
class CaseSpec:
    case_id: int
    seed: int
    failed_state: np.ndarray  # physical units
    init_points: np.ndarray  # unit search cube, shape (max N, D)


def generate_cases(
    problem: ProblemSpec,
    n_cases: int,
    seed: int,
    init_size: int = 64,
    max_tries: int = 100_000,
) -> list[CaseSpec]:
    """Independent cases: each gets an initial design and an infeasible start."""
    if n_cases < 1:
        raise ConfigError("need at least one case")
    children = np.random.SeedSequence(seed).spawn(n_cases)
    cases = []
    for i, child in enumerate(children):
        case_seed = int(child.generate_state(1)[0])
        rng = np.random.default_rng(case_seed)
        init = rng.uniform(size=(init_size, problem.state_dim))
        for _ in range(max_tries):
            x = problem.from_unit(problem.search_to_unit(rng.uniform(size=problem.state_dim)))
            if problem.accumulated(x)[0] > problem.epsilon:
                break
        else:
            raise ConfigError(
                f"no infeasible state found for {problem.name} at epsilon={problem.epsilon}"
            )
        cases.append(CaseSpec(i, case_seed, x, init))
    return cases


@dataclass
class ExperimentConfig:
    problem: str = "S1"
    algorithms: tuple[str, ...] = ALGORITHMS
    n_cases: int = 20
    budget: int = 1000
    epsilons: tuple[float, ...] = (0.05, 0.075, 0.1)
    init_sizes: tuple[int, ...] = (16, 32, 64)
    ablations: tuple[int, ...] = (1, 2, 3, 4)
    sensitivity: tuple[str, ...] = ("L", "NIT", "lr", "eps_e")
    seed: int = 42
    out: str = "results"
    workers: int = 1
    desk: bool = True
    full_scale: bool = False
    geese: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_cases < 1:
            raise ConfigError("n_cases must be >= 1")
        for name in ("algorithms", "epsilons", "init_sizes"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms: {', '.join(bad)}")


def geese_config(exp: ExperimentConfig, init_size: int, seed: int, **overrides) -> GeeseConfig:
    kw = dict(exp.geese)
    kw.update(overrides)
    if exp.full_scale:
        kw.setdefault("hidden", FULL_HIDDEN)
    latent_kw = {k: kw.pop(k) for k in ("n_exploit", "n_explore", "latent_dim", "latent_range") if k in kw}
    cfg = preset(exp.problem, desk=exp.desk, init_size=init_size, budget=exp.budget, seed=seed, **kw)
    if latent_kw:
        lat = cfg.latent
        cfg = replace(cfg, latent=LatentSpec(
            dim=latent_kw.get("latent_dim", lat.dim),
            range=latent_kw.get("latent_range", lat.range),
            n_exploit=latent_kw.get("n_exploit", lat.n_exploit),
            n_explore=latent_kw.get("n_explore", lat.n_explore),
            explore_range=lat.explore_range,
        ))
    return cfg


def run_case(problem: ProblemSpec, algorithm: str, case: CaseSpec, init_size: int, exp: ExperimentConfig,
             overrides: dict | None = None) -> RunOutcome:
    init = case.init_points[:init_size]
    if algorithm == "geese":
        return run(problem, geese_config(exp, init_size, case.seed, **(overrides or {})), init)
    cfg = BaselineConfig(algo=algorithm, population=init_size, seed=case.seed)
    return run_baseline(problem, cfg, exp.budget, init)


def _run_job(job):
    problem, algorithm, case, init_size, exp, overrides = job
    if isinstance(problem, tuple):
        problem = builtin_problem(*problem)
    return run_case(problem, algorithm, case, init_size, exp, overrides)


def _map(jobs, workers):
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    # problems hold closures, so workers rebuild them from (name, epsilon)
    jobs = [((j[0].name, j[0].epsilon), *j[1:]) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


@dataclass
class MetricsRow:
    algorithm: str
    problem: str
    epsilon: float
    init_size: int
    failure_times: int
    query_mean: float
    query_std: float
    query_mean_excl_init: float
    n_cases: int
    seed: int
    query_mean_successes: float


def case_queries(outcome: RunOutcome, budget: int) -> tuple[int, int]:
    """Queries charged to a case (failures count the full budget), with and without init."""
    total = outcome.total_queries if outcome.success else budget
    return total, total - outcome.init_queries


def aggregate(outcomes: list[RunOutcome], budget: int, **labels) -> MetricsRow:
    charged = np.array([case_queries(o, budget) for o in outcomes], dtype=float)
    successes = [o.total_queries for o in outcomes if o.success]
    return MetricsRow(
        failure_times=sum(not o.success for o in outcomes),
        query_mean=float(charged[:, 0].mean()),
        query_std=float(charged[:, 0].std()),
        query_mean_excl_init=float(charged[:, 1].mean()),
        n_cases=len(outcomes),
        query_mean_successes=float(np.mean(successes)) if successes else math.nan,
        **labels,
    )


def case_record(case: CaseSpec, outcome: RunOutcome, **labels) -> dict:
    rec = dict(labels)
    rec.update(case_id=case.case_id, case_seed=case.seed, failed_state=case.failed_state.tolist())
    rec.update(outcome.to_dict())
    return rec


def _write_csv(path: Path, rows: Iterable[dict], columns: list[str]):
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
            w.writeheader()
            for r in rows:
                w.writerow(r)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write_jsonl(path: Path, records: Iterable[dict]):
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps(r, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def load_problem(exp: ExperimentConfig, epsilon: float) -> ProblemSpec:
    return builtin_problem(exp.problem, epsilon)


def run_experiment(exp: ExperimentConfig, write: bool = True) -> tuple[list[MetricsRow], list[dict]]:
    """Run every (algorithm, epsilon, init size) cell over the same cases.

    Writes ``summary.csv`` and ``traces.jsonl`` under ``exp.out``.
    """
    rows, records = [], []
    n_max = max(exp.init_sizes)
    for eps in exp.epsilons:
        problem = load_problem(exp, eps)
        cases = generate_cases(problem, exp.n_cases, exp.seed, n_max)
        for N in exp.init_sizes:
            for algo in exp.algorithms:
                log.info("running %s on %s (epsilon=%g, N=%d)", algo, exp.problem, eps, N)
                outs = _map([(problem, algo, c, N, exp, None) for c in cases], exp.workers)
                labels = dict(algorithm=algo, problem=exp.problem, epsilon=eps, init_size=N)
                rows.append(aggregate(outs, exp.budget, seed=exp.seed, **labels))
                records += [case_record(c, o, **labels) for c, o in zip(cases, outs)]
    if write:
        out = Path(exp.out)
        _write_csv(out / "summary.csv", (asdict(r) for r in rows), CSV_COLUMNS)
        _write_jsonl(out / "traces.jsonl", records)
    return rows, records


def _arm_stats(outs: list[RunOutcome]) -> dict:
    skipped = [np.mean([t.exploit_skipped for t in o.traces]) if o.traces else 0.0 for o in outs]
    n_early = [np.mean([t.n_early for t in o.traces]) if o.traces else 0.0 for o in outs]
    return dict(mean_skipped=float(np.mean(skipped)), mean_n_early=float(np.mean(n_early)))


def run_ablations(exp: ExperimentConfig, which: Iterable[int] | None = None, write: bool = True) -> list[dict]:
    """Paired GEESE arms on shared cases for each requested ablation."""
    which = tuple(which or exp.ablations)
    unknown = [w for w in which if w not in ABLATIONS]
    if unknown:
        raise ConfigError(f"unknown ablations {unknown}; choose from 1-4")
    eps, N = exp.epsilons[0], exp.init_sizes[0]
    problem = load_problem(exp, eps)
    cases = generate_cases(problem, exp.n_cases, exp.seed, N)
    seeds = [c.seed for c in cases]
    rows, records, meta = [], [], {"epsilon": eps, "init_size": N, "arms": {}}
    for w in which:
        name, arms = ABLATIONS[w]
        for arm, overrides in arms:
            outs = _map([(problem, "geese", c, N, exp, overrides) for c in cases], exp.workers)
            labels = dict(algorithm="geese", problem=exp.problem, epsilon=eps, init_size=N)
            row = asdict(aggregate(outs, exp.budget, seed=exp.seed, **labels))
            row.update(ablation=w, name=name, arm=arm, **_arm_stats(outs))
            rows.append(row)
            meta["arms"][f"{w}:{arm}"] = seeds
            records += [case_record(c, o, ablation=w, arm=arm, **labels) for c, o in zip(cases, outs)]
    if write:
        out = Path(exp.out)
        cols = ["ablation", "name", "arm"] + CSV_COLUMNS + ["mean_skipped", "mean_n_early"]
        _write_csv(out / "ablations.csv", rows, cols)
        _write_jsonl(out / "ablation_traces.jsonl", records)
        (out / "ablations_meta.json").write_text(json.dumps(meta, indent=2))
    return rows


def run_sensitivity(exp: ExperimentConfig, grids: Iterable[str] | None = None, write: bool = True) -> list[dict]:
    """One-at-a-time hyperparameter sweeps for GEESE on shared cases."""
    grids = tuple(grids or exp.sensitivity)
    unknown = [g for g in grids if g not in SENSITIVITY]
    if unknown:
        raise ConfigError(f"unknown sensitivity grids {unknown}; choose from {', '.join(SENSITIVITY)}")
    eps, N = exp.epsilons[0], exp.init_sizes[0]
    problem = load_problem(exp, eps)
    cases = generate_cases(problem, exp.n_cases, exp.seed, N)
    rows = []
    for g in grids:
        key, values = SENSITIVITY[g]
        for v in values:
            outs = _map([(problem, "geese", c, N, exp, {key: v}) for c in cases], exp.workers)
            row = asdict(aggregate(outs, exp.budget, seed=exp.seed, algorithm="geese",
                                   problem=exp.problem, epsilon=eps, init_size=N))
            row.update(parameter=g, value=v)
            rows.append(row)
    if write:
        _write_csv(Path(exp.out) / "sensitivity.csv", rows, ["parameter", "value"] + CSV_COLUMNS)
    return rows


def calibrated_epsilon(problem: str, fraction: float, n_samples: int = 100_000, seed: int = 0) -> float:
    return calibrate_epsilon(builtin_problem(problem), fraction, n_samples, seed)


# -- config files -------------------------------------------------------------

_LIST_KEYS = {"algorithms": str, "epsilons": float, "init_sizes": int, "ablations": int, "sensitivity": str}
_ALIASES = {
    "algos": "algorithms", "epsilon": "epsilons", "init": "init_sizes", "cases": "n_cases",
    "which": "ablations", "grid": "sensitivity",
}


def _coerce_scalar(text: str):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return math.inf
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        return tuple(_coerce_scalar(t) for t in text.split(",") if t.strip())
    return text.strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` comments; lists are comma-separated."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def build_config(settings: dict) -> ExperimentConfig:
    """Turn string settings (file or CLI) into an ``ExperimentConfig``."""
    kw: dict = {}
    geese_kw: dict = {}
    names = {f.name for f in fields(ExperimentConfig)}
    for raw_key, value in settings.items():
        key = _ALIASES.get(raw_key, raw_key)
        if key.startswith("geese."):
            geese_kw[key[6:]] = _coerce_scalar(value) if isinstance(value, str) else value
            continue
        if key not in names:
            raise ConfigError(f"unknown config key {raw_key!r}")
        if key in _LIST_KEYS:
            cast = _LIST_KEYS[key]
            items = value.split(",") if isinstance(value, str) else value
            kw[key] = tuple(cast(str(v).strip()) for v in items if str(v).strip())
        elif key in ("problem", "out"):
            kw[key] = str(value)
        elif key in ("desk", "full_scale"):
            kw[key] = value if isinstance(value, bool) else str(value).lower() == "true"
        else:
            kw[key] = int(value)
    for k in ("hidden", "generator_hidden", "explore_hidden"):
        if k in geese_kw and not isinstance(geese_kw[k], tuple):
            geese_kw[k] = (geese_kw[k],)
    kw["geese"] = geese_kw
    return ExperimentConfig(**kw)


def print_rows(rows, file=None):
    head = f"{'algorithm':<16} {'eps':>7} {'N':>4} {'fail':>5} {'queries':>18} {'excl.init':>10}"
    print(head, file=file)
    for r in rows:
        r = r if isinstance(r, dict) else asdict(r)
        label = r.get("arm") or (f"{r.get('parameter')}={r.get('value')}" if "parameter" in r else r["algorithm"])
        print(
            f"{label:<16} {r['epsilon']:>7.4g} {r['init_size']:>4} {r['failure_times']:>5} "
            f"{r['query_mean']:>9.2f} ± {r['query_std']:<6.2f} {r['query_mean_excl_init']:>10.2f}",
            file=file,
        )
