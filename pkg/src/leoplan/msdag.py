"""Microservice DAG modeling: validation, shared-module detection, and
end-to-end latency of a placed task over a topology snapshot.

A task is a DAG of microservices; several tasks may reference the same
microservice id, in which case the module is shared and runs once per epoch
no matter how many tasks call it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constellation import SatelliteId, TopologySnapshot
from .interorbit import ShortestPaths, all_pairs_shortest, build_weighted_graph


@dataclass(frozen=True)
class Microservice:
    id: str
    flops: float
    memory_bytes: float
    output_bits: float

    def validate(self) -> None:
        if not self.id:
            raise ValueError("microservice id must be nonempty")
        if self.flops < 0 or self.memory_bytes < 0 or self.output_bits < 0:
            raise ValueError(f"microservice {self.id}: negative resource figure")


@dataclass(frozen=True)
class ServiceDag:
    """One task decomposed into microservices with dataflow edges.

    edges are (producer_id, consumer_id, payload_bits) triples. A DAG with no
    services is the empty task; exit_node is then None.
    """

    task_id: str
    services: tuple
    edges: tuple
    entries: tuple
    exit_node: str | None

    def service(self, service_id: str) -> Microservice:
        for s in self.services:
            if s.id == service_id:
                return s
        raise KeyError(service_id)

    def service_ids(self) -> list:
        return [s.id for s in self.services]

    def predecessors(self, node: str) -> list:
        return [(u, bits) for (u, v, bits) in self.edges if v == node]

    def topological_order(self) -> list:
        ids = self.service_ids()
        indeg = {i: 0 for i in ids}
        for (_, v, _) in self.edges:
            indeg[v] += 1
        ready = sorted(i for i in ids if indeg[i] == 0)
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            newly = []
            for (a, b, _) in self.edges:
                if a == u:
                    indeg[b] -= 1
                    if indeg[b] == 0:
                        newly.append(b)
            ready = sorted(ready + newly)
        if len(order) != len(ids):
            raise ValueError(f"task {self.task_id}: dependency cycle")
        return order


@dataclass
class ValidationReport:
    ok: bool
    cycle: list = field(default_factory=list)
    unreachable_from_entry: list = field(default_factory=list)
    cannot_reach_exit: list = field(default_factory=list)
    messages: list = field(default_factory=list)


def validate_dag(dag: ServiceDag) -> ValidationReport:
    """Structural checks: unique ids, known endpoints, acyclicity, connectivity."""
    report = ValidationReport(ok=True)

    ids = dag.service_ids()
    if len(set(ids)) != len(ids):
        report.ok = False
        report.messages.append("duplicate microservice ids")
    for s in dag.services:
        try:
            s.validate()
        except ValueError as exc:
            report.ok = False
            report.messages.append(str(exc))
    known = set(ids)
    for (u, v, bits) in dag.edges:
        if u not in known or v not in known:
            report.ok = False
            report.messages.append(f"edge {u}->{v} references unknown microservice")
        if bits < 0:
            report.ok = False
            report.messages.append(f"edge {u}->{v} has negative payload")
    for e in dag.entries:
        if e not in known:
            report.ok = False
            report.messages.append(f"entry {e} is not a microservice of the task")
    if dag.services and dag.exit_node not in known:
        report.ok = False
        report.messages.append("exit node is not a microservice of the task")
    if dag.services and not dag.entries:
        report.ok = False
        report.messages.append("task has no entry nodes")
    if not report.ok:
        return report
    if not dag.services:
        return report

    succ = {i: [] for i in ids}
    pred = {i: [] for i in ids}
    for (u, v, _) in dag.edges:
        succ[u].append(v)
        pred[v].append(u)

    # Cycle detection with an explicit stack; reports one offending cycle.
    color = {i: 0 for i in ids}
    stack_path: list = []

    def visit(u: str) -> list | None:
        color[u] = 1
        stack_path.append(u)
        for v in succ[u]:
            if color[v] == 1:
                return stack_path[stack_path.index(v):] + [v]
            if color[v] == 0:
                found = visit(v)
                if found:
                    return found
        stack_path.pop()
        color[u] = 2
        return None

    for i in sorted(ids):
        if color[i] == 0:
            cyc = visit(i)
            if cyc:
                report.ok = False
                report.cycle = cyc
                report.messages.append("dependency cycle: " + " -> ".join(cyc))
                return report

    def reachable(seeds, nxt):
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            u = frontier.pop()
            for v in nxt[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return seen

    from_entry = reachable(dag.entries, succ)
    to_exit = reachable([dag.exit_node], pred)
    report.unreachable_from_entry = sorted(set(ids) - from_entry)
    report.cannot_reach_exit = sorted(set(ids) - to_exit)
    if report.unreachable_from_entry:
        report.ok = False
        report.messages.append(
            "unreachable from entries: " + ", ".join(report.unreachable_from_entry))
    if report.cannot_reach_exit:
        report.ok = False
        report.messages.append(
            "cannot reach exit: " + ", ".join(report.cannot_reach_exit))
    return report


@dataclass(frozen=True)
class DedupStats:
    invocations_without_sharing: int
    invocations_with_sharing: int

    @property
    def saved_per_epoch(self) -> int:
        return self.invocations_without_sharing - self.invocations_with_sharing


def shared_modules(tasks):
    """Microservice ids used by two or more tasks, plus dedup statistics.

    Returns (shared_ids, DedupStats): without sharing every task runs its own
    copy each epoch; with sharing each distinct id runs once per epoch.
    """
    tasks = list(tasks)
    if len(tasks) < 2:
        raise ValueError("shared-module analysis needs at least two tasks")
    usage: dict = {}
    for task in tasks:
        for sid in set(task.service_ids()):
            usage[sid] = usage.get(sid, 0) + 1
    shared = {sid for sid, count in usage.items() if count >= 2}
    without = sum(usage.values())
    return shared, DedupStats(without, len(usage))


@dataclass(frozen=True)
class TaskRequest:
    """A concrete invocation: where the sensing data enters and where results land."""

    dag_id: str
    source_satellite: SatelliteId
    destination: str | None = None
    input_bits: float = 0.0
    release_time: float = 0.0


@dataclass(frozen=True)
class LatencyModel:
    """Compute throughput per host plus a fixed per-hop handoff overhead."""

    default_throughput_flops: float = 1e12
    throughput_overrides: dict = field(default_factory=dict, compare=False)
    edge_overhead_s: float = 0.0

    def throughput(self, host) -> float:
        return self.throughput_overrides.get(host, self.default_throughput_flops)


@dataclass(frozen=True)
class LatencyBreakdown:
    total_seconds: float
    critical_path: tuple


class Router:
    """Caches all-pairs routes over a snapshot for repeated latency queries."""

    def __init__(self, snapshot: TopologySnapshot, include_ground: bool = True):
        self._paths: ShortestPaths = all_pairs_shortest(
            build_weighted_graph(snapshot, include_ground=include_ground))

    def link_metrics(self, u, v):
        if u == v:
            return (float("inf"), 0.0)
        if u not in self._paths.index or v not in self._paths.index:
            raise ValueError(f"host {v if u in self._paths.index else u} not in topology")
        metrics = self._paths.path_metrics(u, v)
        if metrics is None:
            raise ValueError(f"no route from {u} to {v} in snapshot")
        return metrics


def _transfer_seconds(router: Router, model: LatencyModel, u, v, payload_bits: float) -> float:
    if u == v:
        return 0.0
    bottleneck, prop = router.link_metrics(u, v)
    return payload_bits / bottleneck + prop + model.edge_overhead_s


def dag_latency(
    dag: ServiceDag,
    placement,
    router: Router,
    model: LatencyModel,
    source: SatelliteId | None = None,
    input_bits: float = 0.0,
    destination: str | None = None,
) -> LatencyBreakdown:
    """Longest entry-to-exit path of a placed DAG.

    A node starts when all inbound payloads have arrived and runs
    flops/throughput on its host; an edge costs payload/bottleneck plus
    propagation along the snapshot's min-weight route between the hosts.
    """
    if not dag.services:
        return LatencyBreakdown(0.0, ())
    for sid in dag.service_ids():
        if sid not in placement:
            raise ValueError(f"microservice {sid} has no host in the placement")

    finish: dict = {}
    via: dict = {}
    for sid in dag.topological_order():
        host = placement[sid]
        run = dag.service(sid).flops / model.throughput(host)
        preds = dag.predecessors(sid)
        if preds:
            arrivals = [(finish[u] + _transfer_seconds(router, model, placement[u], host, bits), u)
                        for (u, bits) in preds]
            start, via[sid] = max(arrivals, key=lambda a: (a[0], a[1]))
        else:
            start = 0.0
            via[sid] = None
            if source is not None:
                start = _transfer_seconds(router, model, source, host, input_bits)
        finish[sid] = start + run

    total = finish[dag.exit_node]
    path = [dag.exit_node]
    while via[path[-1]] is not None:
        path.append(via[path[-1]])
    path.reverse()
    if destination is not None:
        total += _transfer_seconds(router, model, placement[dag.exit_node], destination,
                                   dag.service(dag.exit_node).output_bits)
        path.append(destination)
    return LatencyBreakdown(total, tuple(path))


def end_to_end_latency(
    request: TaskRequest,
    dag: ServiceDag,
    placement,
    snapshot: TopologySnapshot,
    model: LatencyModel,
) -> LatencyBreakdown:
    """Convenience wrapper that builds a router from the snapshot first."""
    if request.dag_id != dag.task_id:
        raise ValueError("request does not match the task DAG")
    router = Router(snapshot, include_ground=True)
    return dag_latency(dag, placement, router, model,
                       source=request.source_satellite,
                       input_bits=request.input_bits,
                       destination=request.destination)
