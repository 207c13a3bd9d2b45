import copy
import math

import numpy as np
import pytest

from oupm.cbn.distributions import NEG_INF
from oupm.cbn.structure import children, core, finite_domain, upsilon
from oupm.cbn.values import Obj, Var, number_var
from oupm.cbn.world import World
from oupm.dsl import load
from oupm.errors import ContractViolation, InitializationError
from oupm.infer import birth_death as bd
from oupm.infer.chain import (ChainState, QueryEstimate, init_chain, initial_world, make_rng, run,
                              step)
from oupm.infer.config import SamplerConfig
from oupm.infer.gibbs import gibbs_candidates, gibbs_move, gibbs_weight, select
from oupm.infer.mh import acceptance_log_ratio, acceptance_ratio, mh_move, propose, proposal_logprob
from oupm.oracle import _all_extensions, enumerate_worlds, naive_transition_ratio

from conftest import get_model
from reference import chain_posterior, chi_square_p, smallnet_joint

X, Y1, Y2, Y3 = Var("X"), Var("Y", (1,)), Var("Y", (2,)), Var("Y", (3,))
HELI = Obj("AircraftType", "Helicopter")
FIXED = Obj("AircraftType", "FixedWingPlane")
SHORT = Obj("Length", "Short")
A1, A2 = Obj("Aircraft", 1), Obj("Aircraft", 2)


def chain_world(**assign):
    names = {"X": X, "Y1": Y1, "Y2": Y2, "Y3": Y3}
    return World.from_assignment(get_model("chain"), {names[k]: v for k, v in assign.items()})


def state_at(world, seed=0, kind="gibbs"):
    return ChainState(world, make_rng(seed), SamplerConfig(kind=kind, steps=1))


def radar_world(extra=None, sources=None):
    """Two aircraft (a helicopter and a fixed wing), every blip a false alarm
    unless ``sources`` says otherwise."""
    r = get_model("radar")
    a = {number_var("Aircraft"): 2, Var("WingType", (A1,)): HELI, Var("WingType", (A2,)): FIXED}
    for i in range(1, 7):
        b = r.symbol_objects[f"b{i}"]
        a[Var("Source", (b,))] = (sources or {}).get(i)
    a.update(extra or {})
    return World.from_assignment(r, a)


# -- Gibbs weights ----------------------------------------------------------------------

def test_gibbs_weight_sigma1():
    s1 = chain_world(X=1)
    ups = upsilon(s1, X)
    assert ups == (Y1,)
    assert gibbs_weight(s1, X, ups) == pytest.approx(0.3, abs=1e-12)


def test_gibbs_weight_sigma0():
    s0 = chain_world(X=0, Y2=1)
    ups = upsilon(s0, X)
    assert ups == (Y1,)
    assert gibbs_weight(s0, X, ups) == pytest.approx(0.025, abs=1e-12)


def test_gibbs_weight_zero_for_infeasible_candidate():
    # X=0 forces Y(2)=1; a candidate with Y(2)=0 has zero density
    bad = chain_world(X=0, Y2=0)
    assert gibbs_weight(bad, X, (Y1,)) > 0.0
    assert gibbs_weight(bad, X, (Y1, Y2)) == 0.0


def test_gibbs_candidates_from_sigma0(rng):
    s0 = chain_world(X=0, Y2=1)
    seen_y2 = set()
    for _ in range(100):
        cands = gibbs_candidates(s0, X, rng)
        by_value = {v: (w, lw) for v, w, lw in cands}
        assert set(by_value) == {0, 1, 2}
        assert by_value[0][0] is s0
        assert by_value[1][0].values == {X: 1, Y1: 1}
        w2 = by_value[2][0]
        assert set(w2.values) == {X, Y1, Y2}
        seen_y2.add(w2.values[Y2])
        assert math.exp(by_value[1][1]) == pytest.approx(0.3)
        assert math.exp(by_value[0][1]) == pytest.approx(0.025)
    assert seen_y2 == {0, 1}


def test_radar_gibbs_drops_rotor_length(rng):
    b1 = get_model("radar").symbol_objects["b1"]
    rl = Var("RotorLength", (A1,))
    wt = Var("WingType", (A1,))
    w = radar_world({rl: SHORT}, sources={1: A1})
    assert rl not in core(w, wt)
    cands = gibbs_candidates(w, wt, rng)
    by_value = {v: (c, lw) for v, c, lw in cands}
    assert set(by_value) == {HELI, FIXED}
    assert rl not in by_value[FIXED][0].values
    assert all(lw > NEG_INF for _, lw in by_value.values())
    assert Var("BladeFlash", (b1,)) in upsilon(w, wt)


def test_select_aborts_when_every_weight_is_zero(rng):
    with pytest.raises(ContractViolation):
        select([(0, None, NEG_INF), (1, None, NEG_INF)], rng)


def test_select_never_picks_zero_weight(rng):
    cands = [(0, None, NEG_INF), (1, None, math.log(0.2)), (2, None, NEG_INF)]
    assert all(select(cands, rng) == 1 for _ in range(200))


def _random_states(name, n, kind="gibbs", seed=4, every=5):
    st = init_chain(get_model(name), SamplerConfig(kind=kind, steps=n * every, seed=seed))
    out = []
    for t in range(n * every):
        step(st)
        if t % every == 0:
            out.append(st.world)
    return out


@pytest.mark.parametrize("name", ["chain", "radar", "switch", "urn_discrete"])
def test_gibbs_never_rejects(name):
    """The installed world is one of the weighted candidates, with positive weight."""
    rng = make_rng(9)
    for w in _random_states(name, 30):
        for x in w.latent_vars():
            if finite_domain(w, x) is None:
                continue
            probe = copy.deepcopy(rng)
            cands = gibbs_candidates(w, x, probe)
            st = ChainState(w, rng, SamplerConfig(steps=1))
            gibbs_move(st, x)
            keys = {c.key(): lw for _, c, lw in cands}
            assert st.world.key() in keys
            assert keys[st.world.key()] > NEG_INF


# -- non-switching reduction --------------------------------------------------------------

def _eq6_weights(world, x):
    """Full-joint weights of each value of x with everything else fixed."""
    base = {v.func: val for v, val in world.values.items()}
    out = {}
    for a in (True, False):
        out[a] = smallnet_joint({**base, x.func: a})
    return out


def test_smallnet_candidate_weights_match_full_conditional(rng):
    sm = get_model("smallnet")
    dist = enumerate_worlds(sm)
    assert len(dist.worlds) == 8
    for w, _, _ in dist.worlds:
        for x in w.latent_vars():
            assert core(w, x) == set(w.values) - {x}
            cands = {v: lw for v, _, lw in gibbs_candidates(w, x, rng)}
            ref = _eq6_weights(w, x)
            for a in (True, False):
                ratio = math.exp(cands[a] - cands[not a])
                assert ratio == pytest.approx(ref[a] / ref[not a], rel=1e-12)


def test_noblock_equals_gibbs_without_switching(rng):
    for w, _, _ in enumerate_worlds(get_model("smallnet")).worlds:
        for x in w.latent_vars():
            a = {v: (c.key(), lw) for v, c, lw in gibbs_candidates(w, x, rng)}
            b = {v: (c.key(), lw) for v, c, lw in gibbs_candidates(w, x, rng, block=False)}
            assert a.keys() == b.keys()
            for v in a:
                assert a[v][0] == b[v][0]
                assert a[v][1] == pytest.approx(b[v][1], abs=1e-12)


# -- noblock -------------------------------------------------------------------------------

def test_noblock_pinned_null_rotor_length_blocks_helicopter(rng):
    rl, wt = Var("RotorLength"), Var("WingType")
    w = World.from_assignment(get_model("example1"), {wt: FIXED, rl: None})
    noblock = {v: lw for v, _, lw in gibbs_candidates(w, wt, rng, block=False)}
    assert noblock[HELI] == NEG_INF and noblock[FIXED] > NEG_INF
    block = {v: lw for v, _, lw in gibbs_candidates(w, wt, rng)}
    assert block[HELI] > NEG_INF


def test_noblock_radar_pinned_null(rng):
    b1 = get_model("radar").symbol_objects["b1"]
    wt, rl = Var("WingType", (A1,)), Var("RotorLength", (A1,))
    w = radar_world({wt: FIXED, rl: None}, sources={1: A1})
    noblock = {v: lw for v, _, lw in gibbs_candidates(w, wt, rng, block=False)}
    assert noblock[HELI] == NEG_INF
    st = state_at(w, kind="gibbs-noblock")
    for _ in range(50):
        gibbs_move(st, wt, block=False)
        assert st.world.values[wt] == FIXED
    assert Var("BladeFlash", (b1,)) in children(w, wt)


def test_noblock_chain_x1_reachable_from_sigma0(rng):
    s0 = chain_world(X=0, Y2=1)
    cands = {v: (c, lw) for v, c, lw in gibbs_candidates(s0, X, rng, block=False)}
    assert cands[1][1] > NEG_INF
    assert cands[1][0].values == {X: 1, Y1: 1}


# -- parent-conditional MH ------------------------------------------------------------------

def test_mh_acceptance_sigma1_to_x0():
    s1, s2 = chain_world(X=1), chain_world(X=0, Y2=1)
    assert acceptance_ratio(s1, s2, X) == pytest.approx(0.5, abs=1e-12)
    assert naive_transition_ratio(s1, s2, X) == pytest.approx(0.5, abs=1e-12)


def test_proposal_logprob_sigma1_to_x0():
    s1, s2 = chain_world(X=1), chain_world(X=0, Y2=1)
    assert proposal_logprob(s1, s2, X) == pytest.approx(-math.log(1) + math.log(0.1) + math.log(1.0))


def test_identical_proposal_always_accepted():
    s1 = chain_world(X=1)
    assert acceptance_ratio(s1, s1, X) == 1.0
    assert naive_transition_ratio(s1, s1, X) == 1.0


def test_proposal_logprob_value_change_only(smallnet):
    ws = enumerate_worlds(smallnet).worlds
    w = ws[0][0]
    x = Var("Burglary")
    new = w.copy()
    v = not w.values[x]
    new.set_value(x, v)
    expect = -math.log(w.latent_count()) + w.traces[x].dist.logpdf(v)
    assert proposal_logprob(w, new, x) == pytest.approx(expect, abs=1e-12)


def test_no_shared_children_same_size_accepts():
    m = load("random Boolean A; random Boolean B; A ~ Bernoulli[0.5]; B ~ Bernoulli[0.3];"
             "query A; query B;")
    w = World.from_assignment(m, {Var("A"): True, Var("B"): False})
    new = w.copy()
    new.set_value(Var("A"), False)
    assert acceptance_ratio(w, new, Var("A")) == 1.0


def test_non_reachable_pair_is_contract_violation():
    a, b = chain_world(X=2, Y2=0), chain_world(X=0, Y2=1)
    for f in (acceptance_ratio, proposal_logprob, naive_transition_ratio):
        with pytest.raises(ContractViolation):
            f(a, b, X)


@pytest.mark.parametrize("name", ["chain", "switch", "smallnet", "example1"])
def test_proposal_probabilities_sum_to_one(name):
    for w, _, _ in enumerate_worlds(get_model(name)).worlds:
        total = 0.0
        for x in w.latent_vars():
            for v in dict.fromkeys(finite_domain(w, x)):
                if w.traces[x].dist.logpdf(v) == NEG_INF:
                    continue
                for nw in _all_extensions(w, x, v):
                    total += math.exp(proposal_logprob(w, nw, x))
        assert total == pytest.approx(1.0, abs=1e-12)


def _log_naive(w, new, x):
    r = naive_transition_ratio(w, new, x)
    return math.log(r) if r > 0 else NEG_INF


def reduction_pairs(name, n, seed):
    """Random (world, proposal, variable) triples from exact posterior worlds."""
    rng = np.random.default_rng(seed)
    worlds = [w for w, _, _ in enumerate_worlds(get_model(name)).worlds]
    out = []
    while len(out) < n:
        w = worlds[int(rng.integers(len(worlds)))]
        xs = w.latent_vars()
        x = xs[int(rng.integers(len(xs)))]
        out.append((w, propose(w, x, rng), x))
    return out


@pytest.mark.parametrize("name", ["chain", "smallnet", "switch", "example1"])
def test_reduced_ratio_matches_naive(name):
    for w, new, x in reduction_pairs(name, 200, seed=1):
        a, b = acceptance_log_ratio(w, new, x), _log_naive(w, new, x)
        if b == NEG_INF:
            assert a == NEG_INF
        else:
            assert abs(a - b) < 1e-10


def test_reduced_ratio_matches_naive_on_radar():
    """Random worlds visited by a radar chain, with proposals from them."""
    rng = np.random.default_rng(2)
    k = 0
    for w in _random_states("radar", 40, kind="parent-mh"):
        for x in w.latent_vars():
            new = propose(w, x, rng)
            a, b = acceptance_log_ratio(w, new, x), _log_naive(w, new, x)
            if b == NEG_INF:
                assert a == NEG_INF
            else:
                assert abs(a - b) < 1e-10
            k += 1
    assert k > 100


def test_mh_move_records_rejections():
    st = state_at(chain_world(X=1), seed=3, kind="parent-mh")
    outcomes = {mh_move(st, X) for _ in range(200)}
    assert outcomes == {True, False}


# -- birth and death --------------------------------------------------------------------------

def test_birth_adds_an_unreferenced_object(radar, rng):
    w = initial_world(radar, rng)       # every blip a false alarm
    nv = number_var("Aircraft")
    n = w.values[nv]
    new, ext = bd.propose_birth(w, "Aircraft", rng)
    assert new.values[nv] == n + 1
    assert ext == 0.0
    assert set(new.values) == set(w.values)
    assert not new.objrefs.get(Obj("Aircraft", n + 1))
    # aircraft count Poisson(1 + 4), blip count Poisson(2 + n), six null sources 2 / (2 + n)
    expect = (math.log(5.0 / (n + 1)) - 1.0 + 6 * math.log((3.0 + n) / (2.0 + n))
              + 6 * math.log((2.0 + n) / (3.0 + n)))
    assert new.log_prob() - w.log_prob() == pytest.approx(expect, abs=1e-12)


def test_birth_then_death_restores_log_prob(rng):
    for w in _random_states("radar", 20):
        if "Aircraft" not in bd.movable_types(w):
            continue
        new, _ = bd.propose_birth(w, "Aircraft", rng)
        back = bd.propose_death(new, "Aircraft", rng)
        assert back is not None
        assert back[0].log_prob() == pytest.approx(w.log_prob(), abs=1e-12)
        assert back[0].key() == w.key()


def test_death_only_targets_objects_without_dependents(rng):
    w = radar_world({Var("RotorLength", (A1,)): SHORT}, sources={1: A1})
    # the top object (a fixed wing nothing refers to) can die
    res = bd.propose_death(w, "Aircraft", rng)
    assert res is not None and res[0].values[number_var("Aircraft")] == 1
    w2 = radar_world(sources={2: A2})
    assert bd.propose_death(w2, "Aircraft", rng) is None


def test_birth_death_keeps_count_prior():
    """A uniform pick among the objects leaves the count at its Poisson prior.

    With one object the pick refers to it, so the count never returns to
    zero; the reachable part of the posterior is the prior given n >= 1.
    """
    m = load("type A; #A ~ Poisson[3.0]; random A Pick; Pick ~ UniformChoice({A a}); query Pick;")
    st = init_chain(m, SamplerConfig(steps=1, birth_death_rate=0.5, seed=2))
    counts = {}
    n_steps = 40000
    for _ in range(n_steps):
        step(st)
        n = st.world.values[number_var("A")]
        counts[n] = counts.get(n, 0) + 1
    z = 1.0 - math.exp(-3.0)
    mean = sum(k * c for k, c in counts.items()) / n_steps
    assert abs(mean - 3.0 / z) < 0.15
    assert abs(counts.get(1, 0) / n_steps - 3.0 * math.exp(-3.0) / z) < 0.03


def test_relaxed_ratio_ignores_children(radar, rng):
    w = initial_world(radar, rng)
    n = w.values[number_var("Aircraft")]
    new, _ = bd.propose_birth(w, "Aircraft", rng)
    st = state_at(w)
    # same world change; relaxed acceptance only sees the count pmf
    assert bd._count_logp(new, number_var("Aircraft"), n + 1) - bd._count_logp(w, number_var("Aircraft"), n) \
        == pytest.approx(math.log(5.0 / (n + 1)))
    assert bd.movable_types(w) == ["Aircraft"]
    assert bd.birth_death_move(st, relaxed=True) in (True, False)


# -- initialization and runs -------------------------------------------------------------------

def test_initial_world_chain_is_valid(chain, rng):
    w = initial_world(chain, rng)
    assert w.values[Y1] == 1 and w.log_prob() > NEG_INF


def test_infeasible_evidence_fails_initialization():
    m = load("random Boolean A; random Boolean B; A ~ Bernoulli[0.5];"
             "B ~ TabularCPD[[1.0, 0.0], [1.0, 0.0]](A); obs B = false; query A;")
    with pytest.raises(InitializationError) as ei:
        init_chain(m, SamplerConfig(steps=1, max_init_attempts=25))
    assert "25" in str(ei.value)


def test_radar_all_false_alarms_is_feasible(radar, rng):
    w = radar_world()
    assert w.log_prob() > NEG_INF
    init = initial_world(radar, rng)
    for i in range(1, 7):
        assert init.values[Var("Source", (radar.symbol_objects[f"b{i}"],))] is None


def test_same_seed_gives_identical_estimates(chain):
    cfg = SamplerConfig(steps=2000, burn_in=100, seed=42)
    a, b = run(chain, cfg), run(chain, cfg)
    assert a.estimates[0].counts == b.estimates[0].counts
    assert a.world.key() == b.world.key()
    c = run(chain, SamplerConfig(steps=2000, burn_in=100, seed=43))
    assert c.estimates[0].counts != a.estimates[0].counts


def test_no_samples_after_burn_in(chain):
    res = run(chain, SamplerConfig(steps=50, burn_in=50, seed=1))
    assert res.estimates[0].rows() == [("", "no samples")]
    assert math.isnan(res.estimates[0].probability(1))


def test_query_estimate_frequencies_sum_to_count():
    q = QueryEstimate("X")
    for v in [1, 2, 1, 0, None]:
        q.add(v)
    assert sum(q.counts.values()) == q.count == 5
    assert sum(q.frequencies().values()) == pytest.approx(1.0)
    assert q.mean == pytest.approx(1.0)


def test_init_phase_excluded_from_statistics(chain):
    res = run(chain, SamplerConfig(steps=100, burn_in=10, init_phase=40, seed=1))
    assert res.estimates[0].count == 60


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(kind="nuts")
    with pytest.raises(ValueError):
        SamplerConfig(steps=10, burn_in=11)
    with pytest.raises(ValueError):
        SamplerConfig(birth_death_rate=1.0)
    assert SamplerConfig(kind="mh").kind == "parent-mh"
    assert SamplerConfig(burn_in=100, steps=200).init_phase == 10


def test_chain_gibbs_posterior_short_run(chain):
    exact = chain_posterior()
    res = run(chain, SamplerConfig(steps=20000, burn_in=500, seed=5))
    est = res.estimates[0]
    for v in (0, 1, 2):
        assert abs(est.probability(v) - exact[v]) < 0.02


# -- kernel properties ------------------------------------------------------------------------

def _oracle_table(name):
    dist = enumerate_worlds(get_model(name))
    worlds = [w for w, _, _ in dist.worlds]
    probs = [p * m for _, p, m in dist.worlds]
    return worlds, probs


def one_step_counts(name, n, seed, kind="gibbs"):
    """Draw n worlds from the exact posterior, apply one step to each and
    count the resulting worlds."""
    worlds, probs = _oracle_table(name)
    index = {w.key(): i for i, w in enumerate(worlds)}
    rng = make_rng(seed)
    starts = rng.multinomial(n, np.array(probs) / sum(probs))
    st = ChainState(worlds[0], rng, SamplerConfig(kind=kind, steps=1))
    out = [0] * len(worlds)
    for i, k in enumerate(starts):
        for _ in range(k):
            st.world = worlds[i]
            step(st)
            out[index[st.world.key()]] += 1
    return out, probs


@pytest.mark.parametrize("name,kind", [("chain", "gibbs"), ("switch", "gibbs"),
                                       ("example1", "gibbs"), ("chain", "parent-mh"),
                                       ("smallnet", "gibbs")])
def test_one_step_preserves_posterior(name, kind):
    counts, probs = one_step_counts(name, 20000, seed=17, kind=kind)
    assert chi_square_p(counts, probs) > 0.001


def flow_check(name, seed, n_steps):
    """Compare empirical transition frequencies between every pair of worlds
    with the ratio of their exact probabilities."""
    worlds, probs = _oracle_table(name)
    index = {w.key(): i for i, w in enumerate(worlds)}
    rng = make_rng(seed)
    start = int(rng.choice(len(worlds), p=np.array(probs) / sum(probs)))
    st = ChainState(worlds[start], rng, SamplerConfig(steps=n_steps))
    visits = [0] * len(worlds)
    flows = {}
    cur = start
    for _ in range(n_steps):
        visits[cur] += 1
        step(st)
        nxt = index[st.world.key()]
        if nxt != cur:
            flows[(cur, nxt)] = flows.get((cur, nxt), 0) + 1
        cur = nxt
    checked = 0
    for (i, j), nij in flows.items():
        nji = flows.get((j, i), 0)
        assert nji > 0, "a transition without its reverse"
        if nij < 30 or nji < 30:
            continue
        q_ij, q_ji = nij / visits[i], nji / visits[j]
        se = math.sqrt(1 / nij + 1 / nji)
        z = (math.log(q_ij / q_ji) - math.log(probs[j] / probs[i])) / se
        assert abs(z) < 3.0, (worlds[i].dump(), worlds[j].dump(), z)
        checked += 1
    return checked


@pytest.mark.parametrize("name", ["chain", "switch"])
def test_detailed_balance(name):
    assert flow_check(name, seed=23, n_steps=60000) >= 2


def test_uniform_ergodicity_from_every_start():
    exact = chain_posterior()
    worlds, _ = _oracle_table("chain")
    assert len(worlds) == 4
    for k, w in enumerate(worlds):
        st = ChainState(w, make_rng(100 + k), SamplerConfig(steps=30000))
        counts = [0, 0, 0]
        for _ in range(30000):
            step(st)
            counts[st.world.values[X]] += 1
        tv = 0.5 * sum(abs(c / 30000 - p) for c, p in zip(counts, exact))
        assert tv < 0.02
