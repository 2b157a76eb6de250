"""Placing microservices onto satellites.

Three routes to a plan, all minimizing the summed end-to-end latency of the
instance's tasks under per-satellite memory limits:

* solve_exact: best-first branch and bound with an admissible compute-only
  lower bound; guaranteed optimal but guarded by a size bound.
* solve_greedy: one pass in dependency order, cheapest feasible host each time.
* DeploymentMdp + train_policy_gradient: the same decision process wrapped as
  a Markov decision process with a linear softmax policy trained by REINFORCE.
  This is a deliberately small learned baseline, not a deep-RL replica.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import SatelliteId, TopologySnapshot
from .interorbit import all_pairs_shortest, build_weighted_graph
from .msdag import ServiceDag

EXACT_MAX_SATELLITES = 6
EXACT_MAX_SERVICES = 8
DEAD_END_REWARD = -1e6


@dataclass(frozen=True)
class SatelliteNode:
    """A candidate host: compute throughput, memory, and an energy allowance."""

    id: SatelliteId
    throughput_flops: float
    memory_bytes: float
    energy_budget_j: float = math.inf

    def validate(self) -> None:
        if self.throughput_flops <= 0:
            raise ValueError(f"{self.id}: throughput must be positive")
        if self.memory_bytes < 0:
            raise ValueError(f"{self.id}: memory must be nonnegative")


class DeploymentInstance:
    """Tasks to place, candidate satellites, and the snapshot used for routing."""

    def __init__(self, tasks, satellites, snapshot: TopologySnapshot,
                 enforce_energy_budget: bool = False, e_flop_j: float = 1e-12):
        self.tasks = tuple(tasks)
        self.satellites = tuple(sorted(satellites, key=lambda s: s.id))
        self.snapshot = snapshot
        self.enforce_energy_budget = enforce_energy_budget
        self.e_flop_j = e_flop_j
        if not self.tasks:
            raise ValueError("instance needs at least one task")
        if not self.satellites:
            raise ValueError("instance needs at least one satellite")
        for sat in self.satellites:
            sat.validate()

        self.services: dict = {}
        for dag in self.tasks:
            for svc in dag.services:
                seen = self.services.get(svc.id)
                if seen is not None and seen != svc:
                    raise ValueError(f"microservice {svc.id} redefined across tasks")
                self.services[svc.id] = svc

        self.order = _merged_topological_order(self.tasks)
        self._task_preds = [
            {sid: dag.predecessors(sid) for sid in dag.service_ids()} for dag in self.tasks
        ]
        self._task_topos = [dag.topological_order() for dag in self.tasks]
        self._throughput = {sat.id: sat.throughput_flops for sat in self.satellites}
        self._metrics_cache: dict = {}
        self._routes = all_pairs_shortest(build_weighted_graph(snapshot))
        self.max_throughput = max(s.throughput_flops for s in self.satellites)

    def throughput(self, sat_id: SatelliteId) -> float:
        return self._throughput[sat_id]

    def transfer_seconds(self, u: SatelliteId, v: SatelliteId, bits: float) -> float:
        if u == v:
            return 0.0
        key = (u, v)
        if key not in self._metrics_cache:
            m = self._routes.path_metrics(u, v)
            self._metrics_cache[key] = m
        m = self._metrics_cache[key]
        if m is None:
            raise ValueError(f"hosts {u} and {v} are not connected in the snapshot")
        return bits / m[0] + m[1]

    def service_fits(self, service_id: str, sat: SatelliteNode, residual_memory: float) -> bool:
        svc = self.services[service_id]
        if svc.memory_bytes > residual_memory:
            return False
        if self.enforce_energy_budget and svc.flops * self.e_flop_j > sat.energy_budget_j:
            return False
        return True


def _merged_topological_order(tasks) -> list:
    """Dependency-respecting order over the union of all task DAGs."""
    nodes: set = set()
    edges: set = set()
    for dag in tasks:
        nodes.update(dag.service_ids())
        edges.update((u, v) for (u, v, _) in dag.edges)
    indeg = {n: 0 for n in nodes}
    for (_, v) in edges:
        indeg[v] += 1
    ready = sorted(n for n in nodes if indeg[n] == 0)
    order = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        newly = []
        for (a, b) in edges:
            if a == u:
                indeg[b] -= 1
                if indeg[b] == 0:
                    newly.append(b)
        ready = sorted(ready + newly)
    if len(order) != len(nodes):
        raise ValueError("task union contains a dependency cycle")
    return order


def _objective(instance: DeploymentInstance, placed: dict, optimistic: bool = False) -> float:
    """Summed longest-path latency over whichever nodes are placed.

    With optimistic=True unplaced nodes run on the fastest satellite for free
    transfers, which lower-bounds every completion of the partial assignment.
    """
    total = 0.0
    for t, dag in enumerate(instance.tasks):
        finish: dict = {}
        best = 0.0
        for sid in instance._task_topos[t]:
            hosted = sid in placed
            if not hosted and not optimistic:
                continue
            svc = instance.services[sid]
            run = svc.flops / (instance.throughput(placed[sid]) if hosted
                               else instance.max_throughput)
            start = 0.0
            for (u, bits) in instance._task_preds[t][sid]:
                if u not in finish:
                    continue
                if hosted and u in placed:
                    arrival = finish[u] + instance.transfer_seconds(placed[u], placed[sid], bits)
                else:
                    arrival = finish[u]
                start = max(start, arrival)
            finish[sid] = start + run
            best = max(best, finish[sid])
        total += best
    return total


@dataclass(frozen=True)
class DeploymentPlan:
    assignment: dict = field(compare=False)
    feasible: bool = True
    objective: float | None = None
    solver: str = ""


def _residuals_after(instance, residuals: tuple, sat_index: int, service_id: str) -> tuple:
    lst = list(residuals)
    lst[sat_index] -= instance.services[service_id].memory_bytes
    return tuple(lst)


def solve_exact(instance: DeploymentInstance,
                max_satellites: int = EXACT_MAX_SATELLITES,
                max_services: int = EXACT_MAX_SERVICES) -> DeploymentPlan:
    """Optimal plan by best-first branch and bound.

    Raises:
        ValueError: when the instance exceeds the size bound; the exact solver
            is meant for desk-scale instances only.
    """
    if len(instance.satellites) > max_satellites or len(instance.order) > max_services:
        raise ValueError(
            f"size bound exceeded: exact solver accepts at most {max_satellites} "
            f"satellites and {max_services} microservices "
            f"(got {len(instance.satellites)} and {len(instance.order)})")

    order = instance.order
    if not order:
        return DeploymentPlan({}, True, 0.0, "exact")
    start_res = tuple(s.memory_bytes for s in instance.satellites)
    counter = itertools.count()
    heap = [(0.0, next(counter), {}, start_res)]
    best_plan: dict | None = None
    best_obj = math.inf

    while heap:
        lb, _, placed, residuals = heapq.heappop(heap)
        if lb >= best_obj:
            continue
        depth = len(placed)
        if depth == len(order):
            if lb < best_obj:
                best_obj = lb
                best_plan = placed
            continue
        sid = order[depth]
        for i, sat in enumerate(instance.satellites):
            if not instance.service_fits(sid, sat, residuals[i]):
                continue
            child = dict(placed)
            child[sid] = sat.id
            child_lb = _objective(instance, child, optimistic=True)
            if child_lb < best_obj:
                heapq.heappush(heap, (child_lb, next(counter), child,
                                      _residuals_after(instance, residuals, i, sid)))

    if best_plan is None:
        return DeploymentPlan({}, False, None, "exact")
    return DeploymentPlan(best_plan, True, _objective(instance, best_plan), "exact")


def solve_greedy(instance: DeploymentInstance) -> DeploymentPlan:
    """Place services in dependency order on the host that grows latency least.

    Ties go to the lowest satellite id. Returns an infeasible plan with an
    empty assignment if some service fits nowhere.
    """
    placed: dict = {}
    residuals = {sat.id: sat.memory_bytes for sat in instance.satellites}
    for sid in instance.order:
        best_sat = None
        best_obj = math.inf
        for sat in instance.satellites:
            if not instance.service_fits(sid, sat, residuals[sat.id]):
                continue
            placed[sid] = sat.id
            obj = _objective(instance, placed)
            del placed[sid]
            if obj < best_obj:
                best_obj, best_sat = obj, sat
        if best_sat is None:
            return DeploymentPlan({}, False, None, "greedy")
        placed[sid] = best_sat.id
        residuals[best_sat.id] -= instance.services[sid].memory_bytes
    return DeploymentPlan(placed, True, _objective(instance, placed), "greedy")


@dataclass(frozen=True)
class MdpState:
    next_index: int
    assignment: tuple
    residual_memory: tuple
    objective: float
    done: bool
    dead_end: bool = False

    def placed(self) -> dict:
        return dict(self.assignment)


@dataclass(frozen=True)
class MdpTransition:
    state: MdpState
    reward: float
    done: bool


class DeploymentMdp:
    """Sequential placement as an MDP: one service per step, reward is the
    negative latency increment, dead ends cost dead_end_reward."""

    def __init__(self, instance: DeploymentInstance, dead_end_reward: float = DEAD_END_REWARD):
        self.instance = instance
        self.dead_end_reward = dead_end_reward

    def reset(self, seed: int = 0) -> MdpState:
        del seed  # transitions are deterministic; kept for interface symmetry
        res = tuple(s.memory_bytes for s in self.instance.satellites)
        done = len(self.instance.order) == 0
        return MdpState(0, (), res, 0.0, done)

    def feasible_actions(self, state: MdpState) -> tuple:
        if state.done:
            return ()
        sid = self.instance.order[state.next_index]
        return tuple((sid, sat.id) for i, sat in enumerate(self.instance.satellites)
                     if self.instance.service_fits(sid, sat, state.residual_memory[i]))

    def step(self, state: MdpState, action) -> MdpTransition:
        if state.done:
            raise ValueError("episode is over")
        sid, sat_id = action
        feasible = self.feasible_actions(state)
        if action not in feasible:
            raise ValueError(f"action {action} is not feasible; feasible: {list(feasible)}")
        sat_index = next(i for i, s in enumerate(self.instance.satellites) if s.id == sat_id)
        placed = state.placed()
        placed[sid] = sat_id
        objective = _objective(self.instance, placed)
        reward = -(objective - state.objective)
        next_state = MdpState(
            state.next_index + 1,
            state.assignment + ((sid, sat_id),),
            _residuals_after(self.instance, state.residual_memory, sat_index, sid),
            objective,
            state.next_index + 1 == len(self.instance.order),
        )
        if not next_state.done and not self.feasible_actions(next_state):
            reward += self.dead_end_reward
            next_state = MdpState(next_state.next_index, next_state.assignment,
                                  next_state.residual_memory, next_state.objective,
                                  True, dead_end=True)
        return MdpTransition(next_state, reward, next_state.done)


def _feature_scales(env: DeploymentMdp):
    inst = env.instance
    min_thr = min(s.throughput_flops for s in inst.satellites)
    compute = max((svc.flops for svc in inst.services.values()), default=1.0) / min_thr
    total = sum(svc.flops for svc in inst.services.values()) / min_thr
    return max(compute, 1e-12), max(total, 1e-12)


def action_features(env: DeploymentMdp, state: MdpState, action) -> np.ndarray:
    """Hand-crafted linear features for one (state, action) pair."""
    sid, sat_id = action
    inst = env.instance
    compute_scale, obj_scale = env._scales  # cached on the env by the trainer
    svc = inst.services[sid]
    run = svc.flops / inst.throughput(sat_id) / compute_scale

    placed = state.placed()
    placed[sid] = sat_id
    delta = (_objective(inst, placed) - state.objective) / obj_scale

    sat_index = next(i for i, s in enumerate(inst.satellites) if s.id == sat_id)
    capacity = inst.satellites[sat_index].memory_bytes
    residual = (state.residual_memory[sat_index] - svc.memory_bytes) / capacity if capacity else 0.0

    preds = [u for t in range(len(inst.tasks))
             for (u, _) in inst._task_preds[t].get(sid, [])]
    hosted_preds = [u for u in preds if u in dict(state.assignment)]
    colocated = (sum(1 for u in hosted_preds if dict(state.assignment)[u] == sat_id)
                 / len(hosted_preds)) if hosted_preds else 0.0
    return np.array([1.0, run, delta, residual, colocated])


N_FEATURES = 5


@dataclass
class LinearPolicy:
    """Softmax over feasible actions with a linear score per action."""

    theta: np.ndarray

    def distribution(self, env: DeploymentMdp, state: MdpState):
        actions = env.feasible_actions(state)
        feats = np.stack([action_features(env, state, a) for a in actions])
        scores = feats @ self.theta
        scores -= scores.max()
        probs = np.exp(scores)
        probs /= probs.sum()
        return actions, feats, probs

    def act(self, env: DeploymentMdp, state: MdpState, rng: np.random.Generator,
            greedy: bool = False):
        actions, _, probs = self.distribution(env, state)
        if greedy:
            return actions[int(np.argmax(probs))]
        return actions[int(rng.choice(len(actions), p=probs))]


@dataclass
class TrainingReport:
    episodes: int
    returns: list
    mean_return: float
    greedy_returns: list
    mean_gap: float | None = None


def _ensure_scales(env: DeploymentMdp) -> None:
    if not hasattr(env, "_scales"):
        env._scales = _feature_scales(env)


def rollout(env: DeploymentMdp, choose, record=None) -> float:
    """Play one episode; choose(state) -> action; returns the episode return."""
    state = env.reset()
    total = 0.0
    while not state.done:
        if not env.feasible_actions(state):
            total += env.dead_end_reward  # nothing fits before the first placement
            break
        action = choose(state)
        if record is not None:
            record.append((state, action))
        tr = env.step(state, action)
        total += tr.reward
        state = tr.state
    return total


def train_policy_gradient(envs, episodes: int, seed: int, lr: float = 0.15,
                          optima=None):
    """REINFORCE with a running-mean baseline over one or more environments.

    Args:
        envs: a DeploymentMdp or a sequence of them; training cycles through.
        episodes: number of sampled episodes.
        seed: RNG seed; identical seeds give identical training runs.
        lr: step size on the linear policy weights.
        optima: optional per-env optimal objectives; enables mean_gap in the
            report (mean of greedy-policy objective minus optimum).

    Returns:
        (LinearPolicy, TrainingReport)
    """
    if isinstance(envs, DeploymentMdp):
        envs = [envs]
    envs = list(envs)
    for env in envs:
        _ensure_scales(env)
    rng = np.random.default_rng(seed)
    policy = LinearPolicy(np.zeros(N_FEATURES))
    baselines = [0.0] * len(envs)
    counts = [0] * len(envs)
    returns = []

    for ep in range(episodes):
        idx = ep % len(envs)
        env = envs[idx]
        state = env.reset()
        grads = np.zeros(N_FEATURES)
        total = 0.0
        while not state.done:
            if not env.feasible_actions(state):
                total += env.dead_end_reward
                break
            actions, feats, probs = policy.distribution(env, state)
            choice = int(rng.choice(len(actions), p=probs))
            grads += feats[choice] - probs @ feats
            tr = env.step(state, actions[choice])
            total += tr.reward
            state = tr.state
        counts[idx] += 1
        baselines[idx] += (total - baselines[idx]) / counts[idx]
        policy.theta = policy.theta + lr * (total - baselines[idx]) * grads
        returns.append(total)

    greedy_returns = []
    for env in envs:
        greedy_returns.append(rollout(env, lambda s, e=env: policy.act(e, s, rng, greedy=True)))
    mean_gap = None
    if optima is not None:
        gaps = [(-g) - opt for g, opt in zip(greedy_returns, optima)]
        mean_gap = float(np.mean(gaps))
    report = TrainingReport(episodes, returns, float(np.mean(returns[-max(1, episodes // 4):])),
                            greedy_returns, mean_gap)
    return policy, report


def plan_from_policy(env: DeploymentMdp, policy: LinearPolicy) -> DeploymentPlan:
    """Deterministic greedy rollout of a trained policy into a plan."""
    _ensure_scales(env)
    rng = np.random.default_rng(0)
    state = env.reset()
    while not state.done:
        if not env.feasible_actions(state):
            return DeploymentPlan({}, False, None, "pg")
        action = policy.act(env, state, rng, greedy=True)
        state = env.step(state, action).state
    if state.dead_end:
        return DeploymentPlan({}, False, None, "pg")
    return DeploymentPlan(state.placed(), True, state.objective, "pg")


def evaluate_policy(env: DeploymentMdp, policy: LinearPolicy, episodes: int, seed: int,
                    greedy: bool = False) -> float:
    """Mean episode return of a policy on one environment."""
    _ensure_scales(env)
    rng = np.random.default_rng(seed)
    totals = [rollout(env, lambda s: policy.act(env, s, rng, greedy=greedy))
              for _ in range(episodes)]
    return float(np.mean(totals))
