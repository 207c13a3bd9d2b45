"""Exit criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
Criteria that are known not to hold are marked ``xfail(strict=True)``: they
run in full and report FAIL, and pytest flags them if they ever start
passing.  The analysis for each lives in the decisions log.
"""

import itertools
import math
import statistics
import subprocess
import sys

import numpy as np
import pytest

from oupm.cbn.distributions import NEG_INF
from oupm.cbn.structure import core, extend_to_minimal, finite_domain, upsilon
from oupm.infer.chain import ChainState, init_chain, make_rng, run, step
from oupm.infer.config import SamplerConfig
from oupm.infer.gibbs import gibbs_candidates, restrict
from oupm.infer.mh import acceptance_log_ratio, propose, reachable
from oupm.oracle import _all_extensions, enumerate_worlds, exact_posterior, naive_transition_ratio

from conftest import get_model, model_path, record
from reference import chain_posterior, chi_square_p, radar_posterior, smallnet_joint

pytestmark = pytest.mark.acceptance

SEEDS = range(20)
HELI_TEXT = "WingType(Source(b1))"


# -- 1. chain posterior ----------------------------------------------------------------

def test_criterion_1_chain_posterior():
    chain = get_model("chain")
    post = exact_posterior(enumerate_worlds(chain), "X")
    oracle = [post[v] for v in (0, 1, 2)]
    hand = chain_posterior()
    assert all(abs(a - b) < 1e-12 for a, b in zip(oracle, hand))
    assert [round(p, 4) for p in oracle] == [0.1132, 0.6792, 0.2075]
    worst = 0.0
    for s in SEEDS:
        est = run(chain, SamplerConfig(kind="gibbs", steps=100000, burn_in=1000, seed=s)).estimates[0]
        worst = max(worst, max(abs(est.probability(v) - oracle[v]) for v in (0, 1, 2)))
    ok = worst <= 0.01
    record("1", ok, f"oracle {oracle[0]:.4f}/{oracle[1]:.4f}/{oracle[2]:.4f}; "
                    f"worst Gibbs deviation over 20 seeds {worst:.4f}, tolerance 0.01")
    assert ok


# -- 2. reduced MH ratio -----------------------------------------------------------------

def _pairs(name, n, rng):
    worlds = [w for w, _, _ in enumerate_worlds(get_model(name)).worlds]
    for _ in range(n):
        w = worlds[int(rng.integers(len(worlds)))]
        xs = w.latent_vars()
        x = xs[int(rng.integers(len(xs)))]
        yield w, propose(w, x, rng), x


def test_criterion_2_reduced_ratio():
    rng = np.random.default_rng(2024)
    worst, n = 0.0, 0
    for name in ("smallnet", "chain"):
        for w, new, x in _pairs(name, 1000, rng):
            a = acceptance_log_ratio(w, new, x)
            r = naive_transition_ratio(w, new, x)
            b = math.log(r) if r > 0 else NEG_INF
            d = 0.0 if a == b else abs(a - b)
            worst = max(worst, d)
            n += 1
    ok = worst < 1e-10
    record("2", ok, f"{n} random pairs; worst log-space difference {worst:.2e}, tolerance 1e-10")
    assert ok


# -- 3. reachability and core properties ------------------------------------------------

def _reach_sets(w):
    out = {}
    for x in w.latent_vars():
        keys = set()
        for v in dict.fromkeys(finite_domain(w, x)):
            if w.traces[x].dist.logpdf(v) > NEG_INF:
                keys.update(nw.key() for nw in _all_extensions(w, x, v))
        out[x] = keys
    return out


def _agree(a, b, vars_):
    return all(v in b.values and b.values[v] == a.values[v] for v in vars_)


def _core_witnesses(a, b):
    return [x for x in a.latent_vars()
            if x in b.values and a.values[x] != b.values[x] and _agree(a, b, core(a, x))]


def _exhaustive_counterexamples(name):
    ws = [w for w, _, _ in enumerate_worlds(get_model(name)).worlds]
    reach = {id(w): _reach_sets(w) for w in ws}
    bad = checked = 0
    for a, b in itertools.product(ws, ws):
        witnesses = []
        for x in a.latent_vars():
            by_move = b.key() in reach[id(a)][x]
            bad += by_move != reachable(a, b, x)
            if by_move:
                witnesses.append(x)
            if _agree(a, b, core(a, x)):
                bad += core(b, x) != core(a, x) or set(upsilon(b, x)) != set(upsilon(a, x))
            checked += 1
        if a.key() != b.key():
            bad += len(witnesses) > 1
            bad += len(_core_witnesses(a, b)) > 1
    return bad, checked


def _radar_counterexamples(n_worlds=40, seed=31):
    m = get_model("radar")
    st = init_chain(m, SamplerConfig(kind="gibbs", steps=1, seed=seed))
    rng = np.random.default_rng(seed)
    worlds = []
    for t in range(n_worlds * 10):
        step(st)
        if t % 10 == 0:
            worlds.append(st.world)
    bad = checked = 0
    for a in worlds:
        for x in a.latent_vars():
            # MH proposals are reachable by x and by nothing else
            b = propose(a, x, rng)
            bad += not reachable(a, b, x)
            if b.key() != a.key():
                bad += sum(reachable(a, b, y) for y in a.latent_vars() if y in b.values) > 1
            checked += 1
            dom = finite_domain(a, x)
            if dom is None:
                continue
            c = core(a, x)
            for v in dict.fromkeys(dom):
                if a.traces[x].dist.logpdf(v) == NEG_INF:
                    continue
                cand = restrict(a, c, x, v)
                extend_to_minimal(cand, rng)
                bad += core(cand, x) != c or set(upsilon(cand, x)) != set(upsilon(a, x))
                bad += len(_core_witnesses(a, cand)) > 1
                checked += 1
    for a, b in itertools.product(worlds, worlds):
        bad += len(_core_witnesses(a, b)) > 1
        checked += 1
    return bad, checked


def test_criterion_3_propositions():
    parts = []
    total_bad = 0
    for name in ("chain", "switch", "example1", "smallnet"):
        bad, n = _exhaustive_counterexamples(name)
        total_bad += bad
        parts.append(f"{name} exhaustive {bad}/{n}")
    bad, n = _radar_counterexamples()
    total_bad += bad
    parts.append(f"radar random {bad}/{n}")
    ok = total_bad == 0
    record("3", ok, "counterexamples/checks: " + "; ".join(parts))
    assert ok


# -- 4. stationarity -----------------------------------------------------------------------

def test_criterion_4_stationarity():
    dist = enumerate_worlds(get_model("chain"))
    worlds = [w for w, _, _ in dist.worlds]
    probs = np.array([p * m for _, p, m in dist.worlds])
    index = {w.key(): i for i, w in enumerate(worlds)}
    rng = make_rng(4)
    n = 10 ** 6
    starts = rng.multinomial(n, probs / probs.sum())
    st = ChainState(worlds[0], rng, SamplerConfig(kind="gibbs", steps=1))
    counts = [0] * len(worlds)
    for i, k in enumerate(starts):
        for _ in range(k):
            st.world = worlds[i]
            step(st)
            counts[index[st.world.key()]] += 1
    p = chi_square_p(counts, list(probs))
    ok = p > 0.001
    record("4", ok, f"{n} one-step transitions over {len(worlds)} worlds; chi-square p = {p:.3g}")
    assert ok


# -- 5. non-switching reduction --------------------------------------------------------------

def test_criterion_5_non_switching_reduction():
    rng = np.random.default_rng(5)
    worst, n = 0.0, 0
    for w, _, _ in enumerate_worlds(get_model("smallnet")).worlds:
        base = {v.func: val for v, val in w.values.items()}
        for x in w.latent_vars():
            cands = {v: lw for v, _, lw in gibbs_candidates(w, x, rng)}
            ref = {a: smallnet_joint({**base, x.func: a}) for a in (True, False)}
            got = math.exp(cands[True] - cands[False])
            want = ref[True] / ref[False]
            worst = max(worst, abs(got / want - 1.0))
            n += 1
    ok = worst < 1e-12
    record("5", ok, f"{n} (world, variable) cases; worst relative error {worst:.2e}, tolerance 1e-12")
    assert ok


# -- 6 and 7. radar -------------------------------------------------------------------------------

_radar_cache = {}


def radar_oracle():
    if "oracle" not in _radar_cache:
        dist = enumerate_worlds(get_model("radar"), keep_worlds=False)
        _radar_cache["oracle"] = (exact_posterior(dist, HELI_TEXT), dist.truncation_bound)
    return _radar_cache["oracle"]


def radar_estimates(kind):
    """P(b1's source is a helicopter) after 2e5 steps, one value per seed."""
    if kind not in _radar_cache:
        m = get_model("radar")
        heli = m.symbol_objects.get("Helicopter")
        out = []
        for s in SEEDS:
            cfg = SamplerConfig(kind=kind, steps=200000, burn_in=20000, seed=s)
            est = run(m, cfg).estimates[0]
            out.append(est.probability(heli))
        _radar_cache[kind] = out
    return _radar_cache[kind]


def test_criterion_6_radar_posterior():
    post, bound = radar_oracle()
    heli = post[get_model("radar").symbol_objects["Helicopter"]]
    closed = radar_posterior()["Helicopter"]
    assert abs(heli - closed) < bound + 1e-9
    ests = radar_estimates("gibbs")
    worst = max(abs(e - heli) for e in ests)
    ok = bound < 1e-4 and worst <= 0.02
    record("6", ok, f"oracle P(Helicopter) = {heli:.4f} (bound {bound:.1e}); "
                    f"worst Gibbs deviation over 20 seeds {worst:.4f}, tolerance 0.02")
    assert ok


@pytest.mark.xfail(strict=True, reason="exact posterior is 0.482, below the 0.5 the qualitative check expects")
def test_criterion_6_radar_posterior_is_high():
    post, _ = radar_oracle()
    heli = post[get_model("radar").symbol_objects["Helicopter"]]
    ok = heli > 0.5
    record("6 (qualitative)", ok, f"P(Helicopter) = {heli:.4f}, expected > 0.5")
    assert ok


def _ablation(kind):
    post, _ = radar_oracle()
    heli = post[get_model("radar").symbol_objects["Helicopter"]]
    gibbs_worst = max(abs(e - heli) for e in radar_estimates("gibbs"))
    devs = [abs(e - heli) for e in radar_estimates(kind)]
    typical = statistics.mean(devs)
    ok = typical > 5 * gibbs_worst
    return ok, (f"{kind} mean deviation {typical:.4f} (range {min(devs):.4f} to {max(devs):.4f}) "
                f"vs 5 x Gibbs worst {5 * gibbs_worst:.4f}")


def test_criterion_7_ablation_noblock():
    ok, detail = _ablation("gibbs-noblock")
    record("7 (gibbs-noblock)", ok, detail)
    assert ok


@pytest.mark.xfail(strict=True, reason="parent-conditional MH converges on this model within the budget")
def test_criterion_7_ablation_parent_mh():
    ok, detail = _ablation("parent-mh")
    record("7 (parent-mh)", ok, detail)
    assert ok


# -- 8. urn ------------------------------------------------------------------------------------------

def test_criterion_8_urn_stability():
    m = get_model("urn")
    means = []
    for s in SEEDS:
        est = run(m, SamplerConfig(kind="parent-mh", steps=100000, burn_in=10000, seed=s)).estimates[0]
        means.append(est.mean)
    sd = statistics.stdev(means)
    ok = sd < 2.0
    record("8 (urn)", ok, f"posterior mean of TrueWeight(BallDrawn(Draw1)) over 20 seeds: "
                          f"{statistics.mean(means):.2f}, cross-seed sd {sd:.3f}, tolerance 2.0")
    assert ok


def test_criterion_8_discretized_urn():
    m = get_model("urn_discrete")
    post = exact_posterior(enumerate_worlds(m), 0)
    est = run(m, SamplerConfig(kind="gibbs", steps=100000, burn_in=10000, seed=8)).estimates[0]
    values = sorted(set(post.probs) | set(est.counts), key=lambda v: (v is None, v))
    worst = max(abs(est.probability(v) - post[v]) for v in values)
    ok = worst <= 0.02
    record("8 (discretized urn)", ok, f"worst per-bin difference {worst:.4f} "
                                      f"(oracle bound {post.bound:.1e}), tolerance 0.02")
    assert ok


# -- 9. determinism ------------------------------------------------------------------------------------

def test_criterion_9_cli_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        cmd = [sys.executable, "-m", "oupm", "run", str(model_path("radar")), "--sampler", "gibbs",
               "--steps", "2000", "--runs", "3", "--seed", "7", "--out", str(out)]
        subprocess.run(cmd, check=True)
        outs.append((out.read_bytes(), (tmp_path / f"run{k}.agg.csv").read_bytes()))
    ok = outs[0] == outs[1]
    record("9", ok, "two identical CLI invocations produced byte-identical CSV" if ok
           else "CSV output differed between identical invocations")
    assert ok
