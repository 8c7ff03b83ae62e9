"""Monte Carlo campaigns reproducing the security-parameter tables and figure data.

Seeding: every run draws from
``SeedSequence(master_seed, spawn_key=(experiment, series, cell..., run))``,
so a run's stream depends only on its own coordinates. Reordering runs or
running them in a worker pool leaves every result unchanged.

Standard deviations are population values (divisor ``n``).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .attack import run_recovery
from .lsa import (
    LsaTrace,
    discard_probability,
    generic_sifted_substrings,
    lsa_honest,
    lsa_malicious_greedy,
    shift_add_random,
)
from .sources import MALICIOUS, WEAK_COHERENT, SourceParams, gen_generic_raw_key, rrdps_substrings

EXPERIMENTS = ("table1", "table2", "fig2", "fig3", "attack", "session")
_EXP_CODE = {name: code for code, name in enumerate(EXPERIMENTS, start=1)}


def run_rng(master_seed: int, *coords: int) -> np.random.Generator:
    """Independent generator for one run, addressed by integer coordinates."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(int(c) for c in coords)))


@dataclass
class ExperimentConfig:
    experiment: str
    N: list[int] = field(default_factory=list)
    l: list[int] = field(default_factory=list)
    mu: float = 0.1
    p: float = 0.25
    n_a: list[int] = field(default_factory=lambda: [1, 2, 3])
    runs: int = 100
    seed: int = 2017
    k_max: int = 24
    out: Optional[str] = None
    format: str = "csv"
    full_scale: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    @classmethod
    def defaults(cls, experiment: str, **overrides) -> "ExperimentConfig":
        base = {
            "table1": dict(N=[900, 2500, 10_000], l=[8]),
            "table2": dict(N=[10_000], l=[8, 10, 16]),
            "fig2": dict(N=[2500], l=[8], runs=1),
            "fig3": dict(N=[10_000], l=[8, 10, 16]),
            "attack": dict(N=[900], l=[], runs=25),
            "session": dict(N=[64], l=[8], runs=1),
        }[experiment]
        base.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(experiment=experiment, **base)
        if cfg.full_scale:
            if experiment == "table1" and 90_000 not in cfg.N:
                cfg.N = cfg.N + [90_000]
            if experiment == "table2" and 100_000 not in cfg.N:
                cfg.N = cfg.N + [100_000]
            if experiment == "attack" and 10_000 not in cfg.N:
                cfg.N = cfg.N + [10_000]
        if not cfg.N or (experiment not in ("attack",) and not cfg.l):
            raise ValueError("parameter grid must be non-empty")
        return cfg

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        exp = data.pop("experiment")
        return cls.defaults(exp, **data)


@dataclass
class RunStats:
    """Summary of per-run values; ``failures`` counts runs that did not converge."""

    values: list[float]
    failures: int = 0

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def maximum(self) -> float:
        return max(self.values) if self.values else math.nan

    @property
    def minimum(self) -> float:
        return min(self.values) if self.values else math.nan

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else math.nan

    @property
    def std(self) -> float:
        return float(np.std(self.values)) if self.values else math.nan

    def summary(self) -> dict:
        return {
            "runs": self.n + self.failures,
            "max": self.maximum,
            "min": self.minimum,
            "mean": round(self.mean, 6),
            "std": round(self.std, 6),
            "failures": self.failures,
        }


def _collect(values: Sequence[Optional[float]]) -> RunStats:
    ok = [v for v in values if v is not None]
    return RunStats(ok, len(values) - len(ok))


def _pmap(fn: Callable, tasks: list, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [fn(t) for t in tasks]


def padded_length(n: int, l: int) -> int:
    return -(-n // l) * l


# -- per-run workers (top level so a process pool can pickle them) --


def honest_k(task) -> Optional[int]:
    """Additions an honest user needs before she knows a single final bit (single-photon blocks)."""
    seed, n, l, run = task
    rng = run_rng(seed, _EXP_CODE["table1"], 0, n, l, run)
    n = padded_length(n, l)
    i = int(rng.integers(n))
    _, _, trace = lsa_honest(rrdps_substrings(n, l, SourceParams(), rng), i, l, rng, stop=1)
    return trace.final_k if trace.converged else None


def malicious_k(task) -> Optional[int]:
    """Additions before a greedy multi-photon adversary is down to one known bit."""
    seed, n, l, mu, run = task
    rng = run_rng(seed, _EXP_CODE["table1"], 1, n, l, run)
    n = padded_length(n, l)
    src = SourceParams(WEAK_COHERENT, mu, MALICIOUS)
    trace = lsa_malicious_greedy(rrdps_substrings(n, l, src, rng), l, stop=1)
    return trace.final_k if trace.converged else None


def generic_greedy_trace(task) -> LsaTrace:
    seed, n, l, p, stop, run = task
    rng = run_rng(seed, _EXP_CODE["table2"], n, l, run)
    return lsa_malicious_greedy(generic_sifted_substrings(padded_length(n, l), l, p, rng), l, stop=stop)


def lowshift_curve(task) -> list[int]:
    seed, n, l, p, k_max, run = task
    rng = run_rng(seed, _EXP_CODE["fig3"], l, n, run)
    trace = lsa_malicious_greedy(generic_sifted_substrings(padded_length(n, l), l, p, rng), l, stop=None, max_k=k_max)
    return trace.n_known


def _raw_stream(n, p, rng):
    while True:
        yield gen_generic_raw_key(n, p, rng)


def fullrange_curve(task) -> list[int]:
    seed, n, p, k_max, run = task
    rng = run_rng(seed, _EXP_CODE["fig3"], 0, n, run)
    trace = shift_add_random(_raw_stream(n, p, rng), "full", choice="optimal", max_k=k_max)
    return trace.n_known


def attack_run(task) -> dict:
    seed, n, mu, strategy, run = task
    # both strategies share the database and photon stream seed for paired comparison
    rng = run_rng(seed, _EXP_CODE["attack"], n, run)
    res = run_recovery(n, SourceParams(WEAK_COHERENT, mu, MALICIOUS), rng, strategy=strategy)
    return {"queries": res.queries, "completed": res.completed, "correct": res.correct, "growth": res.growth}


# -- campaigns --


def run_table1(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for n in cfg.N:
        for l in cfg.l:
            hk = _collect(_pmap(honest_k, [(cfg.seed, n, l, r) for r in range(cfg.runs)], cfg.workers))
            mk = _collect(_pmap(malicious_k, [(cfg.seed, n, l, cfg.mu, r) for r in range(cfg.runs)], cfg.workers))
            for who, st in (("honest", hk), ("malicious", mk)):
                rows.append({"alice": who, "N": n, "l": l, "mu": cfg.mu, **st.summary()})
    return rows


def run_table2(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    stop = min(cfg.n_a)
    for n in cfg.N:
        for l in cfg.l:
            tasks = [(cfg.seed, n, l, cfg.p, stop, r) for r in range(cfg.runs)]
            traces = _pmap(generic_greedy_trace, tasks, cfg.workers)
            for n_a in sorted(cfg.n_a, reverse=True):
                st = _collect([t.first_k_at_most(n_a) for t in traces])
                rows.append({
                    "N": n, "l": l, "p": cfg.p, "n_A": n_a, **st.summary(),
                    "p_discard": round(discard_probability(cfg.p, l), 6),
                })
    return rows


def run_fig2(cfg: ExperimentConfig) -> list[dict]:
    """Per-index class after each addition (0 unknown, 1 known, 2 parity-correlated) for one greedy run."""
    n, l = cfg.N[0], cfg.l[0]
    rng = run_rng(cfg.seed, _EXP_CODE["fig2"], n, l, 0)
    src = SourceParams(WEAK_COHERENT, cfg.mu, MALICIOUS)
    trace = lsa_malicious_greedy(rrdps_substrings(padded_length(n, l), l, src, rng), l, stop=1, snapshots=True)
    rows = []
    for k, nk, mk, snap in zip(trace.k, trace.n_known, trace.n_correlated, trace.snapshots):
        rows.append({"k": k, "n_known": nk, "n_correlated": mk, "classes": "".join(map(str, snap.tolist()))})
    return rows


def run_fig3(cfg: ExperimentConfig) -> list[dict]:
    """Mean known final bits versus ``k`` for low-shift series and unrestricted shifts."""
    rows = []
    for n in cfg.N:
        series = {}
        for l in cfg.l:
            tasks = [(cfg.seed, n, l, cfg.p, cfg.k_max, r) for r in range(cfg.runs)]
            series[f"low-shift l={l}"] = _pmap(lowshift_curve, tasks, cfg.workers)
        tasks = [(cfg.seed, n, cfg.p, cfg.k_max, r) for r in range(cfg.runs)]
        series["full-range"] = _pmap(fullrange_curve, tasks, cfg.workers)
        for name, curves in series.items():
            arr = np.array(curves, dtype=np.float64)
            for k in range(cfg.k_max):
                rows.append({
                    "N": n, "series": name, "k": k + 1,
                    "mean_n_A": round(float(arr[:, k].mean()), 6),
                    "max_n_A": int(arr[:, k].max()),
                })
    return rows


def run_attack(cfg: ExperimentConfig, strategies: Sequence[str] = ("optimal", "random")) -> tuple[list[dict], list[dict]]:
    """Per-run query counts (one row per run and strategy) and knowledge-growth rows."""
    rows, growth = [], []
    for n in cfg.N:
        for strategy in strategies:
            tasks = [(cfg.seed, n, cfg.mu, strategy, r) for r in range(cfg.runs)]
            for r, res in enumerate(_pmap(attack_run, tasks, cfg.workers)):
                rows.append({"N": n, "strategy": strategy, "run": r, "queries": res["queries"],
                             "completed": res["completed"], "correct": res["correct"]})
                growth.extend({"N": n, "strategy": strategy, "run": r, "query": q + 1, "known": g}
                              for q, g in enumerate(res["growth"]))
    return rows, growth


def summarize_attack(rows: list[dict]) -> list[dict]:
    out = []
    keys = sorted({(r["N"], r["strategy"]) for r in rows})
    for n, strategy in keys:
        sel = [r for r in rows if r["N"] == n and r["strategy"] == strategy]
        st = _collect([r["queries"] if r["completed"] else None for r in sel])
        out.append({"N": n, "strategy": strategy, **st.summary(),
                    "all_correct": all(r["correct"] for r in sel)})
    return out


def format_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    if rows:
        fields = list(rows[0])
        for r in rows[1:]:
            fields.extend(k for k in r if k not in fields)
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def write_rows(rows: list[dict], path: Optional[str], fmt: str) -> None:
    text = format_rows(rows, fmt)
    if path is None:
        print(text, end="")
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
