"""Check simulation output against the reference numbers in ``data/expectations.json``.

Each check yields a row ``{criterion, check, observed, expected, tolerance, passed}``.
``runs`` overrides every Monte Carlo run count (useful for quick smoke runs;
tolerances are not rescaled).
"""

from __future__ import annotations

import json
from importlib import resources
from itertools import combinations
from typing import Iterator, Optional

import numpy as np

from .experiments import (
    attack_run,
    fullrange_curve,
    honest_k,
    lowshift_curve,
    malicious_k,
    padded_length,
    generic_greedy_trace,
    run_rng,
    _collect,
)
from .gf2 import LinearSpanOracle, knowledge_from_constraints, oracle_equivalent
from .lsa import block_sift, discard_probability, double_run_failure, jprotocol_stats, lsa_malicious_greedy
from .protocol import Database, SessionConfig, run_improved
from .sources import MALICIOUS, WEAK_COHERENT, SourceParams, gen_generic_raw_key, rrdps_substrings

CRITERIA = ("jprotocol", "p_discard", "table1", "table2", "zero_failure", "greedy_drop", "fig3", "attack", "oracle")


def load_expectations() -> dict:
    return json.loads(resources.files("qpq_sim").joinpath("data/expectations.json").read_text())


def _row(criterion, check, observed, expected, tolerance, passed) -> dict:
    if isinstance(observed, float):
        observed = round(observed, 6)
    return {"criterion": criterion, "check": check, "observed": observed, "expected": expected,
            "tolerance": tolerance, "passed": bool(passed)}


def check_jprotocol(exp: dict, **_) -> list[dict]:
    rows = []
    for cell in exp["jprotocol"]:
        known, fail = jprotocol_stats(cell["N"], cell["p"], cell["k"])
        tag = f"N={cell['N']} p={cell['p']} k={cell['k']}"
        rows.append(_row("jprotocol", f"{tag} expected known", known, cell["known"], cell["known_tol"],
                         abs(known - cell["known"]) <= cell["known_tol"]))
        rows.append(_row("jprotocol", f"{tag} failure", fail, cell["failure"], cell["failure_tol"],
                         abs(fail - cell["failure"]) <= cell["failure_tol"]))
    d = exp["double_run"]
    v = double_run_failure(d["f1"], d["f2"])
    rows.append(_row("jprotocol", "double run failure", v, d["expected"], d["tol"], abs(v - d["expected"]) <= d["tol"]))
    return rows


def check_p_discard(exp: dict, seed: int = 0, **_) -> list[dict]:
    e = exp["p_discard"]
    rows = []
    for l_str, expected in e["cells"].items():
        l = int(l_str)
        exact = discard_probability(e["p"], l)
        rows.append(_row("p_discard", f"l={l} analytic", exact, expected, e["exact_tol"],
                         abs(exact - expected) <= e["exact_tol"]))
        rng = run_rng(seed, 20, l)
        n = e["raw_bits"] // l * l
        _, frac = block_sift(gen_generic_raw_key(n, e["p"], rng), l)
        rows.append(_row("p_discard", f"l={l} block_sift", float(frac), expected, e["empirical_tol"],
                         abs(frac - expected) <= e["empirical_tol"]))
    return rows


def check_table1(exp: dict, seed: int = 0, runs: Optional[int] = None, full_scale: bool = False, workers: int = 1, **_) -> list[dict]:
    from .experiments import _pmap

    e = exp["table1"]
    runs = runs or e["runs"]
    sizes = e["desk_N"] + (e["full_scale_N"] if full_scale else [])
    rows = []
    for n in sizes:
        ref_h, ref_m = e["honest"][str(n)], e["malicious"][str(n)]
        hk = _collect(_pmap(honest_k, [(seed, n, e["l"], r) for r in range(runs)], workers))
        mk = _collect(_pmap(malicious_k, [(seed, n, e["l"], e["mu"], r) for r in range(runs)], workers))
        rows.append(_row("table1", f"N={n} mean k_H", hk.mean, ref_h["mean"], e["mean_tol"],
                         hk.failures == 0 and abs(hk.mean - ref_h["mean"]) <= e["mean_tol"]))
        rows.append(_row("table1", f"N={n} mean k_M", mk.mean, ref_m["mean"], e["mean_tol"],
                         mk.failures == 0 and abs(mk.mean - ref_m["mean"]) <= e["mean_tol"]))
        rows.append(_row("table1", f"N={n} max k_M", mk.maximum, ref_m["max"], f"+{e['max_slack']}",
                         mk.maximum <= ref_m["max"] + e["max_slack"]))
    return rows


def check_table2(exp: dict, seed: int = 0, runs: Optional[int] = None, workers: int = 1, **_) -> list[dict]:
    from .experiments import _pmap

    e = exp["table2"]
    runs = runs or e["runs"]
    rows = []
    ls = sorted({int(l) for cell in e["cells"].values() for l in cell["mean"]})
    stop = min(int(n_a) for n_a in e["cells"])
    for l in ls:
        traces = _pmap(generic_greedy_trace, [(seed, e["N"], l, e["p"], stop, r) for r in range(runs)], workers)
        for n_a, cell in e["cells"].items():
            st = _collect([t.first_k_at_most(int(n_a)) for t in traces])
            ref = cell["mean"][str(l)]
            rows.append(_row("table2", f"N={e['N']} l={l} n_A={n_a} mean k", st.mean, ref, cell["tol"],
                             st.failures == 0 and abs(st.mean - ref) <= cell["tol"]))
    return rows


def zero_failure_sessions(exp: dict, seed: int = 0, sessions: Optional[int] = None) -> Iterator[tuple[bool, bool, bool]]:
    """Yield ``(known_count_ok, address_known, retrieval_correct)`` per honest improved session."""
    e = exp["zero_failure"]
    sessions = sessions or e["sessions"]
    grid = [(n, l, k, src) for n in e["N"] for l in e["l"] for k in e["k"] for src in e["sources"]]
    for s in range(sessions):
        n, l, k, src = grid[s % len(grid)]
        rng = run_rng(seed, 30, s)
        source = SourceParams(**src)
        i = int(rng.integers(1, n + 1))
        db = Database.random(n, rng)
        cfg = SessionConfig("improved", N=n, l=l, k=k, i=i, source=source, seed=int(rng.integers(2**31)))
        try:
            tr = run_improved(cfg, db)
        except AssertionError:
            yield False, False, False
            continue
        yield tr.final_known_bits >= 1, i in tr.recovered, tr.recovered.get(i) == int(db.items[i - 1])


def check_zero_failure(exp: dict, seed: int = 0, runs: Optional[int] = None, **_) -> list[dict]:
    sessions = runs * 100 if runs else None
    res = np.array(list(zero_failure_sessions(exp, seed, sessions)), dtype=bool)
    n = len(res)
    return [
        _row("zero_failure", "final known bits >= 1", int(res[:, 0].sum()), n, 0, res[:, 0].all()),
        _row("zero_failure", "address bit known", int(res[:, 1].sum()), n, 0, res[:, 1].all()),
        _row("zero_failure", "retrieval correct", int(res[:, 2].sum()), n, 0, res[:, 2].all()),
    ]


def greedy_transitions(n: int, l: int, mu: float, seed: int, runs: int, min_transitions: int) -> list[tuple[int, int]]:
    """``(n_k, n_{k+1})`` pairs with ``n_k >= 2`` from malicious greedy folds."""
    out = []
    r = 0
    src = SourceParams(WEAK_COHERENT, mu, MALICIOUS)
    while r < runs or len(out) < min_transitions:
        rng = run_rng(seed, 40, n, l, r)
        tr = lsa_malicious_greedy(rrdps_substrings(padded_length(n, l), l, src, rng), l, stop=1)
        out.extend((a, b) for a, b in zip(tr.n_known, tr.n_known[1:]) if a >= 2)
        r += 1
    return out


def check_greedy_drop(exp: dict, seed: int = 0, runs: Optional[int] = None, **_) -> list[dict]:
    e = exp["greedy_drop"]
    min_tr = e["min_transitions"] if runs is None else 1
    trans = greedy_transitions(e["N"], e["l"], e["mu"], seed, runs or e["runs"], min_tr)
    frac = float(np.mean([b < a for a, b in trans]))
    return [
        _row("greedy_drop", "transitions with n_k >= 2", len(trans), min_tr, 0, len(trans) >= min_tr),
        _row("greedy_drop", "P(n_k+1 < n_k)", frac, e["bound"], -e["slack"], frac >= e["bound"] - e["slack"]),
    ]


def check_fig3(exp: dict, seed: int = 0, runs: Optional[int] = None, workers: int = 1, **_) -> list[dict]:
    from .experiments import _pmap

    e = exp["fig3"]
    runs = runs or e["runs"]
    full = np.array(_pmap(fullrange_curve, [(seed, e["N"], e["p"], e["random_k"], r) for r in range(runs)], workers))
    low = np.array(_pmap(lowshift_curve, [(seed, e["N"], e["low_l"], e["p"], e["low_k"], r) for r in range(runs)], workers))
    m_full = float(full[:, e["random_k"] - 1].mean())
    m_low = float(low[:, e["low_k"] - 1].mean())
    return [
        _row("fig3", f"full-range mean n_A at k={e['random_k']}", m_full, f">={e['random_min_mean']}", 0,
             m_full >= e["random_min_mean"]),
        _row("fig3", f"low-shift l={e['low_l']} mean n_A at k={e['low_k']}", m_low, e["low_mean"], 0,
             m_low == e["low_mean"]),
    ]


def check_attack(exp: dict, seed: int = 0, runs: Optional[int] = None, full_scale: bool = False, workers: int = 1, **_) -> list[dict]:
    from .experiments import _pmap

    e = exp["attack"]
    runs = runs or e["runs"]
    rows = []
    n = e["N"]
    opt = _pmap(attack_run, [(seed, n, e["mu"], "optimal", r) for r in range(runs)], workers)
    rnd = _pmap(attack_run, [(seed, n, e["mu"], "random", r) for r in range(runs)], workers)
    q_opt = np.array([r["queries"] for r in opt], dtype=float)
    q_rnd = np.array([r["queries"] for r in rnd], dtype=float)
    rows.append(_row("attack", f"N={n} mean queries", float(q_opt.mean()), f"<{n}", 0, q_opt.mean() < n))
    rows.append(_row("attack", f"N={n} exact reconstruction", sum(r["correct"] for r in opt), runs, 0,
                     all(r["correct"] for r in opt)))
    rows.append(_row("attack", f"N={n} optimal minus random (paired mean)", float((q_opt - q_rnd).mean()), "<0", 0,
                     (q_opt - q_rnd).mean() < 0))
    if full_scale:
        f = e["full_scale"]
        big = _pmap(attack_run, [(seed, f["N"], e["mu"], "optimal", r) for r in range(e["runs"])], workers)
        m = float(np.mean([r["queries"] for r in big]))
        rows.append(_row("attack", f"N={f['N']} mean queries", m, f["mean"], f"{f['rel_tol']:.0%}",
                         abs(m - f["mean"]) <= f["rel_tol"] * f["mean"]))
    return rows


def random_instance(rng: np.random.Generator, max_length: int, max_constraints: int):
    """Random consistent instance: ``(length, bits, constraints)`` with arity <= 2."""
    n = int(rng.integers(1, max_length + 1))
    bits = rng.integers(0, 2, n)
    cons = []
    for _ in range(int(rng.integers(0, max_constraints + 1))):
        arity = min(int(rng.integers(1, 3)), n)
        idx = sorted(rng.choice(n, arity, replace=False).tolist())
        cons.append((idx, int(bits[idx].sum() % 2)))
    return n, bits, cons


def exhaustive_instances(max_length: int) -> Iterator[tuple[int, list]]:
    """Constraint sets over every singleton/pair functional.

    Every subset for ``n <= 5`` (all truth vectors for ``n <= 3``), subsets
    of size <= 4 for larger ``n``.
    """
    for n in range(1, max_length + 1):
        funcs = [(i,) for i in range(n)] + list(combinations(range(n), 2))
        max_size = len(funcs) if n <= 5 else 4
        truths = [np.array([(t >> i) & 1 for i in range(n)]) for t in range(2**n)] if n <= 3 \
            else [np.array([(0b1011001 >> i) & 1 for i in range(n)])]
        for bits in truths:
            for size in range(max_size + 1):
                for subset in combinations(funcs, size):
                    yield n, [(list(f), int(bits[list(f)].sum() % 2)) for f in subset]


def check_oracle(exp: dict, seed: int = 0, runs: Optional[int] = None, **_) -> list[dict]:
    e = exp["oracle"]
    instances = runs * 100 if runs else e["instances"]
    rng = run_rng(seed, 50)
    bad = 0
    for _ in range(instances):
        n, _, cons = random_instance(rng, e["max_length"], e["max_constraints"])
        if not oracle_equivalent(knowledge_from_constraints(n, cons), LinearSpanOracle(n, cons)):
            bad += 1
    rows = [_row("oracle", f"random instances ({instances})", bad, 0, 0, bad == 0)]
    if runs is None:
        bad_ex, total = 0, 0
        for n, cons in exhaustive_instances(e["exhaustive_length"]):
            total += 1
            if not oracle_equivalent(knowledge_from_constraints(n, cons), LinearSpanOracle(n, cons)):
                bad_ex += 1
        rows.append(_row("oracle", f"exhaustive instances ({total})", bad_ex, 0, 0, bad_ex == 0))
    return rows


CHECKS = {
    "jprotocol": check_jprotocol,
    "p_discard": check_p_discard,
    "table1": check_table1,
    "table2": check_table2,
    "zero_failure": check_zero_failure,
    "greedy_drop": check_greedy_drop,
    "fig3": check_fig3,
    "attack": check_attack,
    "oracle": check_oracle,
}


def run_verify(seed: int = 2017, runs: Optional[int] = None, full_scale: bool = False, only=None,
               workers: int = 1, expectations: Optional[dict] = None) -> list[dict]:
    exp = expectations or load_expectations()
    rows = []
    for name in only or CRITERIA:
        rows.extend(CHECKS[name](exp, seed=seed, runs=runs, full_scale=full_scale, workers=workers))
    return rows
