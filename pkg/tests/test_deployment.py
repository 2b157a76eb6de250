import math

import numpy as np
import pytest

from leoplan import (
    DeploymentInstance,
    DeploymentMdp,
    LinearPolicy,
    Microservice,
    SatelliteNode,
    ServiceDag,
    evaluate_policy,
    plan_from_policy,
    solve_exact,
    solve_greedy,
    train_policy_gradient,
)
from leoplan.deployment import DEAD_END_REWARD, N_FEATURES, rollout

from oracles import enumerate_best_assignment, random_deployment_instance, sat, toy_snapshot


def ms(sid, flops=1e12, mem=1.0, out=1e6):
    return Microservice(sid, flops, mem, out)


def chain_task(ids, flops=1e12, mem=1.0, payload=1e6, task_id="t"):
    services = tuple(ms(i, flops=flops, mem=mem) for i in ids)
    edges = tuple((a, b, payload) for a, b in zip(ids, ids[1:]))
    return ServiceDag(task_id, services, edges, (ids[0],), ids[-1])


def two_sat_instance(thr0=1e12, thr1=2e12, mem=10.0, rate=1e9, **kw):
    snap = toy_snapshot([("o0s0", "o0s1", rate)])
    sats = [SatelliteNode(sat("o0s0"), thr0, mem),
            SatelliteNode(sat("o0s1"), thr1, mem)]
    return DeploymentInstance(kw.pop("tasks", [chain_task(["a", "b"])]), sats, snap, **kw)


def test_instance_validation():
    snap = toy_snapshot([("o0s0", "o0s1", 1e9)])
    sats = [SatelliteNode(sat("o0s0"), 1e12, 1.0)]
    with pytest.raises(ValueError, match="at least one task"):
        DeploymentInstance([], sats, snap)
    with pytest.raises(ValueError, match="at least one satellite"):
        DeploymentInstance([chain_task(["a"])], [], snap)
    with pytest.raises(ValueError, match="throughput must be positive"):
        DeploymentInstance([chain_task(["a"])],
                           [SatelliteNode(sat("o0s0"), 0.0, 1.0)], snap)
    t1 = chain_task(["a", "b"], task_id="t1")
    t2 = ServiceDag("t2", (ms("a", flops=9e9),), (), ("a",), "a")
    with pytest.raises(ValueError, match="microservice a redefined across tasks"):
        DeploymentInstance([t1, t2], sats, snap)


def test_instance_satellites_sorted():
    snap = toy_snapshot([("o0s0", "o0s1", 1e9)])
    sats = [SatelliteNode(sat("o0s1"), 1e12, 1.0), SatelliteNode(sat("o0s0"), 1e12, 1.0)]
    inst = DeploymentInstance([chain_task(["a"])], sats, snap)
    assert [s.id.label for s in inst.satellites] == ["o0s0", "o0s1"]


def test_merged_order_respects_dependencies():
    t1 = chain_task(["a", "c"], task_id="t1")
    t2 = chain_task(["b", "c2"], task_id="t2")
    inst = two_sat_instance(tasks=[t1, t2])
    order = inst.order
    assert set(order) == {"a", "b", "c", "c2"}
    assert order.index("a") < order.index("c")
    assert order.index("b") < order.index("c2")


def test_transfer_seconds():
    snap = toy_snapshot([("o0s0", "o0s1", 1e6, 0.02)], extra_sats=("o0s2",))
    sats = [SatelliteNode(sat(f"o0s{i}"), 1e12, 10.0) for i in range(3)]
    inst = DeploymentInstance([chain_task(["a"])], sats, snap)
    assert inst.transfer_seconds(sat("o0s0"), sat("o0s0"), 1e9) == 0.0
    assert abs(inst.transfer_seconds(sat("o0s0"), sat("o0s1"), 2e6) - 2.02) < 1e-12
    with pytest.raises(ValueError, match="not connected in the snapshot"):
        inst.transfer_seconds(sat("o0s0"), sat("o0s2"), 1.0)


def test_exact_picks_faster_host():
    inst = two_sat_instance(tasks=[chain_task(["solo"])])
    plan = solve_exact(inst)
    assert plan.feasible
    assert plan.assignment == {"solo": sat("o0s1")}
    assert abs(plan.objective - 0.5) < 1e-12


def test_exact_colocates_over_slow_link():
    # Splitting the chain across the 1e3 bps link costs 1000 s of transfer,
    # so both services belong on the fast satellite: 0.5 + 0.5 = 1.0.
    inst = two_sat_instance(thr0=2e12, thr1=1e12, rate=1e3)
    plan = solve_exact(inst)
    assert plan.assignment == {"a": sat("o0s0"), "b": sat("o0s0")}
    assert abs(plan.objective - 1.0) < 1e-12


def test_memory_forces_split():
    inst = two_sat_instance(thr0=2e12, thr1=1e12, mem=1.0, rate=1e9,
                            tasks=[chain_task(["a", "b"], mem=1.0)])
    plan = solve_exact(inst)
    assert plan.feasible
    hosts = set(plan.assignment.values())
    assert hosts == {sat("o0s0"), sat("o0s1")}
    #  a on the fast host, then 1e6/1e9 transfer, then b on the slow host
    assert abs(plan.objective - (0.5 + 1e-3 + 1.0)) < 1e-12


def test_exact_infeasible_instance():
    inst = two_sat_instance(tasks=[chain_task(["a", "b"], mem=99.0)])
    plan = solve_exact(inst)
    assert not plan.feasible
    assert plan.assignment == {} and plan.objective is None
    greedy = solve_greedy(inst)
    assert not greedy.feasible
    assert greedy.assignment == {} and greedy.solver == "greedy"


def test_exact_size_bound():
    snap = toy_snapshot([("o0s0", "o0s1", 1e9)])
    sats = [SatelliteNode(sat("o0s0"), 1e12, 100.0), SatelliteNode(sat("o0s1"), 1e12, 100.0)]
    big = chain_task([f"s{i}" for i in range(9)])
    inst = DeploymentInstance([big], sats, snap)
    with pytest.raises(ValueError, match="size bound exceeded: exact solver accepts "
                                         "at most 6 satellites and 8 microservices "
                                         r"\(got 2 and 9\)"):
        solve_exact(inst)


def test_empty_task_trivial_plan():
    inst = two_sat_instance(tasks=[ServiceDag("t", (), (), (), None)])
    plan = solve_exact(inst)
    assert plan.feasible and plan.assignment == {} and plan.objective == 0.0
    env = DeploymentMdp(inst)
    assert env.reset().done


def test_energy_budget_filter():
    snap = toy_snapshot([("o0s0", "o0s1", 1e9)])
    sats = [SatelliteNode(sat("o0s0"), 2e12, 10.0, energy_budget_j=0.5),
            SatelliteNode(sat("o0s1"), 1e12, 10.0)]
    task = chain_task(["a"], flops=1e12)  # 1 J at 1e-12 J/flop
    relaxed = DeploymentInstance([task], sats, snap)
    assert solve_exact(relaxed).assignment == {"a": sat("o0s0")}
    strict = DeploymentInstance([task], sats, snap, enforce_energy_budget=True)
    plan = solve_exact(strict)
    assert plan.assignment == {"a": sat("o0s1")}


def test_exact_matches_enumeration_oracle():
    rng = np.random.default_rng(606)
    harder = 0
    for _ in range(45):
        tasks, sats_, snap = random_deployment_instance(rng)
        inst = DeploymentInstance(tasks, sats_, snap)
        plan = solve_exact(inst)
        want_obj, _, feasible_count = enumerate_best_assignment(tasks, sats_, snap)
        assert feasible_count > 0
        assert plan.feasible
        assert abs(plan.objective - want_obj) < 1e-9
        greedy = solve_greedy(inst)
        assert greedy.feasible
        assert greedy.objective >= plan.objective - 1e-12
        if greedy.objective > plan.objective + 1e-9:
            harder += 1
    del harder  # greedy may or may not hit the optimum; both cases are fine


def test_mdp_reset_and_feasible_actions():
    inst = two_sat_instance()
    env = DeploymentMdp(inst)
    state = env.reset()
    assert state.next_index == 0 and not state.done
    assert state.residual_memory == (10.0, 10.0)
    assert env.feasible_actions(state) == (("a", sat("o0s0")), ("a", sat("o0s1")))


def test_mdp_rewards_telescope_to_objective():
    rng = np.random.default_rng(33)
    for _ in range(10):
        tasks, sats_, snap = random_deployment_instance(rng)
        inst = DeploymentInstance(tasks, sats_, snap)
        plan = solve_exact(inst)
        env = DeploymentMdp(inst)
        state = env.reset()
        total = 0.0
        for sid in inst.order:
            tr = env.step(state, (sid, plan.assignment[sid]))
            total += tr.reward
            state = tr.state
        assert state.done and not state.dead_end
        assert abs(total + plan.objective) < 1e-9
        assert state.placed() == plan.assignment


def test_mdp_step_errors():
    inst = two_sat_instance(tasks=[chain_task(["a", "b"], mem=4.0)])
    env = DeploymentMdp(inst)
    state = env.reset()
    with pytest.raises(ValueError, match=r"not feasible; feasible: \[\('a', "):
        env.step(state, ("b", sat("o0s0")))
    done = env.step(env.step(state, ("a", sat("o0s0"))).state, ("b", sat("o0s0"))).state
    assert done.done
    with pytest.raises(ValueError, match="episode is over"):
        env.step(done, ("a", sat("o0s0")))


def test_mdp_dead_end():
    # One satellite with room for the first service but not the second.
    snap = toy_snapshot([("o0s0", "o0s1", 1e9)], extra_sats=())
    sats = [SatelliteNode(sat("o0s0"), 1e12, 3.0)]
    inst = DeploymentInstance([chain_task(["a", "b"], mem=2.0)], sats, snap)
    env = DeploymentMdp(inst)
    tr = env.step(env.reset(), ("a", sat("o0s0")))
    assert tr.done and tr.state.dead_end
    assert tr.reward <= DEAD_END_REWARD
    assert rollout(env, lambda s: env.feasible_actions(s)[0]) <= DEAD_END_REWARD


def test_rollout_dead_on_arrival():
    snap = toy_snapshot([("o0s0", "o0s1", 1e9)])
    sats = [SatelliteNode(sat("o0s0"), 1e12, 1.0)]
    inst = DeploymentInstance([chain_task(["a"], mem=5.0)], sats, snap)
    env = DeploymentMdp(inst)
    assert env.feasible_actions(env.reset()) == ()
    assert rollout(env, lambda s: None) == DEAD_END_REWARD


def benchmark_env():
    labels = ["o0s0", "o0s1", "o0s2"]
    snap = toy_snapshot([(labels[i], labels[(i + 1) % 3], 1e8) for i in range(3)])
    thr = {"o0s0": 2e12, "o0s1": 1e12, "o0s2": 0.5e12}
    sats = [SatelliteNode(sat(lb), thr[lb], 50.0) for lb in labels]
    task = chain_task([f"svc{i}" for i in range(5)], flops=1e12, payload=1e6)
    return DeploymentMdp(DeploymentInstance([task], sats, snap))


def test_uniform_policy_is_uniform():
    env = benchmark_env()
    uniform = LinearPolicy(np.zeros(N_FEATURES))
    plan_from_policy(env, uniform)  # warms the feature scales
    actions, feats, probs = uniform.distribution(env, env.reset())
    assert len(actions) == 3
    assert feats.shape == (3, N_FEATURES)
    assert np.allclose(probs, 1.0 / 3.0)


def test_training_is_deterministic():
    p1, r1 = train_policy_gradient(benchmark_env(), episodes=40, seed=9)
    p2, r2 = train_policy_gradient(benchmark_env(), episodes=40, seed=9)
    assert np.array_equal(p1.theta, p2.theta)
    assert r1.returns == r2.returns
    assert r1.episodes == 40
    assert len(r1.greedy_returns) == 1


def test_trained_policy_beats_uniform():
    env = benchmark_env()
    policy, report = train_policy_gradient(env, episodes=300, seed=0)
    uniform = LinearPolicy(np.zeros(N_FEATURES))
    for eval_seed in (101, 202):
        trained = evaluate_policy(env, policy, episodes=50, seed=eval_seed)
        base = evaluate_policy(env, uniform, episodes=50, seed=eval_seed)
        assert trained > base
    plan = plan_from_policy(env, policy)
    assert plan.feasible
    # -mean_return is an average objective; greedy decode must not be worse
    # than the optimum by more than the uniform policy's slack.
    exact = solve_exact(env.instance)
    assert plan.objective >= exact.objective - 1e-12


def test_training_report_gap():
    env = benchmark_env()
    exact = solve_exact(env.instance)
    _, report = train_policy_gradient(env, episodes=200, seed=3,
                                      optima=[exact.objective])
    assert report.mean_gap is not None
    assert report.mean_gap >= -1e-9
