"""Routing one task's dataflow to its hosting satellites at minimum energy.

The snapshot is recast as a digraph whose edge weights are joules: radio
energy for pushing the hop payload both ways plus, on edges entering a
hosting satellite, the compute energy of the stages it runs. Reaching every
host (and the egress gateway) from the request's ingress satellite is then a
minimum directed Steiner tree problem, solved two ways: a shortest-path-tree
heuristic and an exact dynamic program over terminal subsets for small
instances. A full-hosting reduction report compares the exact tree against a
minimum spanning arborescence when every node is a terminal.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import networkx as nx

from .constellation import LinkKind, TopologySnapshot
from .interorbit import _node_key
from .msdag import ServiceDag

EXACT_MAX_TERMINALS = 6
EXACT_MAX_NODES = 12


@dataclass(frozen=True)
class EnergyModel:
    """Per-bit radio energy and per-flop compute energy."""

    e_tx_j_per_bit: float = 1e-9
    e_rx_j_per_bit: float = 1e-9
    e_flop_j: float = 1e-12

    def validate(self) -> None:
        if self.e_tx_j_per_bit < 0 or self.e_rx_j_per_bit < 0 or self.e_flop_j < 0:
            raise ValueError("energy coefficients must be nonnegative")


class AugmentedGraph:
    """Digraph over satellites with per-edge energy cost in joules."""

    def __init__(self):
        self.nodes: list = []
        self._node_set: set = set()
        self.edges: dict = {}
        self.adjacency: dict = {}
        self.hosting: dict = {}

    def add_node(self, node) -> None:
        if node not in self._node_set:
            self._node_set.add(node)
            self.nodes.append(node)
            self.adjacency[node] = []

    def add_edge(self, u, v, energy_j: float) -> None:
        if energy_j < 0:
            raise ValueError("edge energy must be nonnegative")
        self.add_node(u)
        self.add_node(v)
        if (u, v) not in self.edges:
            self.adjacency[u].append(v)
        self.edges[(u, v)] = energy_j

    def sorted_nodes(self) -> list:
        return sorted(self.nodes, key=_node_key)


@dataclass(frozen=True)
class SteinerInstance:
    root: object
    terminals: frozenset

    def validate(self) -> None:
        if not self.terminals:
            raise ValueError("terminal set must be nonempty")


@dataclass(frozen=True)
class SteinerTree:
    edges: frozenset
    total_energy: float

    @property
    def nodes(self) -> set:
        out = set()
        for (u, v) in self.edges:
            out.add(u)
            out.add(v)
        return out


def build_augmented_graph(
    snapshot: TopologySnapshot,
    assignment,
    dag: ServiceDag,
    energy_model: EnergyModel,
    root,
    gateway=None,
    hop_payload_bits: float | None = None,
):
    """Energy-weighted digraph plus the Steiner instance for one request.

    Every satellite of the snapshot is a node (non-hosting satellites relay).
    Edge energy is (e_tx + e_rx) * hop payload, plus e_flop * flops of the
    stages hosted at the edge's head; in any tree each host has exactly one
    inbound edge, so compute energy is charged once per host. The default hop
    payload is the largest inter-stage payload of the DAG.

    Returns:
        (AugmentedGraph, SteinerInstance) with terminals = hosting satellites
        plus the gateway when given.
    """
    energy_model.validate()
    for sid in dag.service_ids():
        if sid not in assignment:
            raise ValueError(f"microservice {sid} is not placed")
    if hop_payload_bits is None:
        hop_payload_bits = max((bits for (_, _, bits) in dag.edges), default=0.0)

    hosting: dict = {}
    for sid in dag.topological_order():
        hosting.setdefault(assignment[sid], []).append(sid)

    g = AugmentedGraph()
    g.hosting = {host: tuple(sids) for host, sids in hosting.items()}
    for sat in sorted(snapshot.positions, key=_node_key):
        g.add_node(sat)

    def edge_energy(head) -> float:
        e = (energy_model.e_tx_j_per_bit + energy_model.e_rx_j_per_bit) * hop_payload_bits
        for sid in g.hosting.get(head, ()):
            e += energy_model.e_flop_j * dag.service(sid).flops
        return e

    for link in snapshot.links:
        if not link.available or link.kind not in (
                LinkKind.INTRA_ORBIT_ISL, LinkKind.INTER_ORBIT_ISL, LinkKind.CROSS_SEAM_ISL):
            continue
        a, b = link.endpoints
        g.add_edge(a, b, edge_energy(b))
        g.add_edge(b, a, edge_energy(a))

    terminals = set(g.hosting)
    if gateway is not None:
        terminals.add(gateway)
    instance = SteinerInstance(root, frozenset(terminals))
    instance.validate()
    return g, instance


def _dijkstra(graph: AugmentedGraph, root):
    dist = {root: 0.0}
    prev: dict = {}
    heap = [(0.0, _node_key(root), root)]
    settled = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        for v in sorted(graph.adjacency.get(u, []), key=_node_key):
            nd = d + graph.edges[(u, v)]
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, _node_key(v), v))
    return dist, prev


def dst_heuristic(graph: AugmentedGraph, instance: SteinerInstance) -> SteinerTree:
    """Shortest-path tree heuristic: route each terminal along the Dijkstra
    tree from the root and merge the paths; shared prefixes are counted once."""
    instance.validate()
    dist, prev = _dijkstra(graph, instance.root)
    edges: set = set()
    for t in sorted(instance.terminals, key=_node_key):
        if t not in dist:
            raise ValueError(f"terminal {t} unreachable from root {instance.root}")
        node = t
        while node != instance.root:
            edges.add((prev[node], node))
            node = prev[node]
    total = sum(graph.edges[e] for e in edges)
    return SteinerTree(frozenset(edges), total)


def dst_exact(graph: AugmentedGraph, instance: SteinerInstance,
              max_terminals: int = EXACT_MAX_TERMINALS,
              max_nodes: int = EXACT_MAX_NODES) -> SteinerTree:
    """Minimum directed Steiner tree by dynamic programming over terminal subsets.

    Size-guarded: intended for desk-scale verification, not production graphs.

    Raises:
        ValueError: when bounds are exceeded or a terminal is unreachable.
    """
    instance.validate()
    nodes = graph.sorted_nodes()
    if len(nodes) > max_nodes:
        raise ValueError(f"size bound exceeded: {len(nodes)} nodes > {max_nodes}")
    terms = sorted(instance.terminals - {instance.root}, key=_node_key)
    if len(terms) > max_terminals:
        raise ValueError(f"size bound exceeded: {len(terms)} terminals > {max_terminals}")
    if not terms:
        return SteinerTree(frozenset(), 0.0)

    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    dist = [[math.inf] * n for _ in range(n)]
    nxt = [[-1] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = 0.0
        nxt[i][i] = i
    for (u, v), w in graph.edges.items():
        i, j = index[u], index[v]
        if w < dist[i][j]:
            dist[i][j] = w
            nxt[i][j] = j
    for k in range(n):
        for i in range(n):
            dik = dist[i][k]
            if dik == math.inf:
                continue
            for j in range(n):
                alt = dik + dist[k][j]
                if alt < dist[i][j]:
                    dist[i][j] = alt
                    nxt[i][j] = nxt[i][k]

    for t in terms:
        if dist[index[instance.root]][index[t]] == math.inf:
            raise ValueError(f"terminal {t} unreachable from root {instance.root}")

    k = len(terms)
    full = (1 << k) - 1
    # f[mask][v] = cheapest arborescence rooted at v covering the masked terminals.
    f = [[math.inf] * n for _ in range(full + 1)]
    choice: dict = {}
    for ti, t in enumerate(terms):
        for v in range(n):
            f[1 << ti][v] = dist[v][index[t]]

    masks = sorted(range(1, full + 1), key=lambda m: bin(m).count("1"))
    for mask in masks:
        if bin(mask).count("1") < 2:
            continue
        g_row = [math.inf] * n
        g_choice = [None] * n
        low = mask & (-mask)
        sub = (mask - 1) & mask
        while sub:
            if sub & low:  # pivot stays in one side to halve the enumeration
                rest = mask ^ sub
                for v in range(n):
                    cand = f[sub][v] + f[rest][v]
                    if cand < g_row[v]:
                        g_row[v] = cand
                        g_choice[v] = (sub, rest)
            sub = (sub - 1) & mask
        for v in range(n):
            best, arg = math.inf, None
            for u in range(n):
                if g_row[u] == math.inf or dist[v][u] == math.inf:
                    continue
                cand = dist[v][u] + g_row[u]
                if cand < best:
                    best, arg = cand, u
            f[mask][v] = best
            if arg is not None:
                choice[(mask, v)] = (arg, g_choice[arg])

    root_i = index[instance.root]
    total = f[full][root_i]

    # Rebuild the edge set by unwinding the DP, then prune duplicates into a tree.
    edges: set = set()

    def expand_path(i: int, j: int) -> None:
        while i != j:
            step = nxt[i][j]
            edges.add((nodes[i], nodes[step]))
            i = step

    def unwind(mask: int, v: int) -> None:
        if bin(mask).count("1") == 1:
            ti = mask.bit_length() - 1
            expand_path(v, index[terms[ti]])
            return
        u, (sub, rest) = choice[(mask, v)]
        expand_path(v, u)
        unwind(sub, u)
        unwind(rest, u)

    unwind(full, root_i)
    tree_edges = _prune_to_tree(graph, edges, instance)
    pruned_total = sum(graph.edges[e] for e in tree_edges)
    if pruned_total > total + 1e-9:
        raise AssertionError("reconstruction produced a costlier tree than the DP value")
    # Pruning duplicates can only tie the optimum; report the edge-consistent sum.
    return SteinerTree(frozenset(tree_edges), pruned_total)


def _prune_to_tree(graph: AugmentedGraph, edges: set, instance: SteinerInstance) -> set:
    """Within the chosen edges, keep one cheapest path per terminal."""
    adj: dict = {}
    for (u, v) in edges:
        adj.setdefault(u, []).append(v)
    dist = {instance.root: 0.0}
    prev: dict = {}
    heap = [(0.0, _node_key(instance.root), instance.root)]
    settled = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        for v in sorted(adj.get(u, []), key=_node_key):
            nd = d + graph.edges[(u, v)]
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, _node_key(v), v))
    kept: set = set()
    for t in instance.terminals:
        node = t
        while node != instance.root:
            kept.add((prev[node], node))
            node = prev[node]
    return kept


def shortest_path_sum(graph: AugmentedGraph, instance: SteinerInstance) -> float:
    """Energy of routing every terminal independently (no path sharing)."""
    dist, _ = _dijkstra(graph, instance.root)
    total = 0.0
    for t in instance.terminals:
        if t not in dist:
            raise ValueError(f"terminal {t} unreachable from root {instance.root}")
        total += dist[t]
    return total


@dataclass(frozen=True)
class ReductionReport:
    """Exact Steiner result vs minimum spanning arborescence when every node hosts."""

    dst_energy: float
    arborescence_energy: float
    dst_edges: frozenset
    arborescence_edges: frozenset
    equal_within_tol: bool


def full_hosting_reduction_check(graph: AugmentedGraph, instance: SteinerInstance,
                                 tol: float = 1e-9) -> ReductionReport:
    """Compare dst_exact against an Edmonds minimum spanning arborescence.

    Meaningful when the terminals cover every node (universal hosting); the
    report states both energies without asserting equality.
    """
    tree = dst_exact(graph, instance)

    g = nx.DiGraph()
    g.add_nodes_from(graph.nodes)
    for (u, v), w in graph.edges.items():
        if v == instance.root:
            continue  # forcing the arborescence root
        g.add_edge(u, v, weight=w)
    arb = nx.algorithms.tree.branchings.minimum_spanning_arborescence(
        g, attr="weight", preserve_attrs=True)
    arb_edges = frozenset(arb.edges())
    arb_energy = float(sum(graph.edges[e] for e in arb_edges))
    return ReductionReport(tree.total_energy, arb_energy, tree.edges, arb_edges,
                           abs(tree.total_energy - arb_energy) <= tol)


def stage_host_order(dag: ServiceDag, assignment) -> list:
    """(stage, host) pairs in dependency order; the CLI reports this."""
    return [(sid, assignment[sid]) for sid in dag.topological_order()]


def validate_tree(graph: AugmentedGraph, instance: SteinerInstance,
                  tree: SteinerTree) -> None:
    """Raise ValueError unless tree is a root-arborescence reaching all terminals."""
    if not tree.edges:
        if instance.terminals - {instance.root}:
            raise ValueError("empty tree cannot reach terminals")
        return
    heads = [v for (_, v) in tree.edges]
    if len(set(heads)) != len(heads):
        raise ValueError("a node has two parents")
    if instance.root in heads:
        raise ValueError("root must not have a parent")
    adj: dict = {}
    for (u, v) in tree.edges:
        adj.setdefault(u, []).append(v)
    seen = {instance.root}
    frontier = [instance.root]
    while frontier:
        u = frontier.pop()
        for v in adj.get(u, []):
            if v not in seen:
                seen.add(v)
                frontier.append(v)
    if len(seen) != len(tree.nodes | {instance.root}):
        raise ValueError("tree has edges not reachable from the root")
    missing = instance.terminals - seen
    if missing:
        raise ValueError(f"terminals not covered: {sorted(missing, key=_node_key)}")
    if len(tree.edges) != len(tree.nodes | {instance.root}) - 1:
        raise ValueError("edge count does not match a tree")
