"""Directed coordination-graph machinery.

A coordination graph is an unweighted directed graph on agents 1..N.
An edge (i, j) means agent i's state and action feed into agent j's
transition and observation, so i's parameters influence j's rewards.
From the graph we derive:

* the clustering of agents into strongly connected components (agents
  on a common directed cycle share a cluster),
* per-agent reachability: who agent i can influence (``reach``), the
  same set closed with i itself (``reach_closed``), and who can
  influence i (``ancestors``),
* the learning graph: agent j must forward its realized reward to
  agent i exactly when i can reach j, so that i can assemble the value
  made up of every reward it influences,
* the cluster condensation, a DAG on clusters that lets reachability
  be computed once per cluster and expanded to agents instead of
  running one traversal per agent.

Agent indices are 1-based in every public structure.  Cluster indices
are 0-based positions into ``ClusterDecomposition.clusters``.  All
derived orderings are deterministic: clusters are sorted by smallest
member, neighbor lists and member lists ascending.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping


@dataclass(frozen=True)
class CoordinationGraph:
    """Validated directed graph on agents 1..num_agents, no self-loops."""

    num_agents: int
    edges: frozenset[tuple[int, int]]

    @cached_property
    def _out(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.num_agents + 1)]
        for i, j in self.edges:
            out[i].append(j)
        return tuple(tuple(sorted(n)) for n in out)

    @cached_property
    def _in(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.num_agents + 1)]
        for i, j in self.edges:
            inc[j].append(i)
        return tuple(tuple(sorted(n)) for n in inc)

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        """Agents j with (i, j) an edge, ascending."""
        return self._out[i]

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        """Agents j with (j, i) an edge, ascending."""
        return self._in[i]

    def observation_set(self, i: int) -> tuple[int, ...]:
        """In-neighborhood closed with i itself, ascending: the agents
        whose stock appears in i's observation."""
        return tuple(sorted(set(self._in[i]) | {i}))

    @property
    def agents(self) -> range:
        return range(1, self.num_agents + 1)


def build_graph(num_agents: int, edges: Iterable[tuple[int, int]]) -> CoordinationGraph:
    """Validate and normalize an edge list into a CoordinationGraph.

    Rejects out-of-range endpoints, self-loops, and duplicate edges,
    naming the offending edge.
    """
    if num_agents < 1:
        raise ValueError(f"num_agents must be >= 1, got {num_agents}")
    seen: set[tuple[int, int]] = set()
    for e in edges:
        i, j = e
        if not (1 <= i <= num_agents and 1 <= j <= num_agents):
            raise ValueError(f"edge ({i}, {j}) has an endpoint outside 1..{num_agents}")
        if i == j:
            raise ValueError(f"edge ({i}, {j}) is a self-loop")
        if (i, j) in seen:
            raise ValueError(f"edge ({i}, {j}) appears more than once")
        seen.add((i, j))
    return CoordinationGraph(num_agents, frozenset(seen))


@dataclass(frozen=True)
class ClusterDecomposition:
    """Partition of agents into strongly connected components.

    ``clusters`` is ordered by smallest member; each cluster is an
    ascending tuple.  ``cluster_of`` maps agent -> cluster index.
    """

    clusters: tuple[tuple[int, ...], ...]
    cluster_of: Mapping[int, int]

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def on_cycle(self, i: int) -> bool:
        """True when agent i lies on a directed cycle (cluster size >= 2)."""
        return len(self.clusters[self.cluster_of[i]]) >= 2


def strongly_connected_components(g: CoordinationGraph) -> ClusterDecomposition:
    """Tarjan's algorithm, iterative so 10^4-agent graphs do not hit the
    recursion limit."""
    n = g.num_agents
    adj = g._out
    indices = [0] * (n + 1)  # 0 = unvisited
    lowlink = [0] * (n + 1)
    on_stack = bytearray(n + 1)
    stack: list[int] = []
    counter = 1
    comps: list[list[int]] = []

    for root in g.agents:
        if indices[root]:
            continue
        work: list[list[int]] = [[root, 0]]
        while work:
            frame = work[-1]
            v, pi = frame
            if pi == 0:
                indices[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = 1
            nbrs = adj[v]
            advanced = False
            while pi < len(nbrs):
                w = nbrs[pi]
                pi += 1
                if not indices[w]:
                    frame[1] = pi
                    work.append([w, 0])
                    advanced = True
                    break
                if on_stack[w] and indices[w] < lowlink[v]:
                    lowlink[v] = indices[w]
            if advanced:
                continue
            work.pop()
            if lowlink[v] == indices[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = 0
                    comp.append(w)
                    if w == v:
                        break
                comp.sort()
                comps.append(comp)
            if work and lowlink[v] < lowlink[work[-1][0]]:
                lowlink[work[-1][0]] = lowlink[v]

    comps.sort(key=lambda c: c[0])
    clusters = tuple(tuple(c) for c in comps)
    cluster_of = {a: k for k, comp in enumerate(clusters) for a in comp}
    return ClusterDecomposition(clusters, cluster_of)


@dataclass(frozen=True)
class CondensationDag:
    """Cluster-level quotient graph; acyclic by construction.

    ``topo_order`` lists cluster indices so that every edge goes from an
    earlier to a later position (ties broken by ascending index).
    """

    num_clusters: int
    edges: frozenset[tuple[int, int]]
    topo_order: tuple[int, ...]

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.num_clusters)]
        for a, b in self.edges:
            out[a].append(b)
        return tuple(tuple(sorted(s)) for s in out)

    @cached_property
    def predecessors(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.num_clusters)]
        for a, b in self.edges:
            inc[b].append(a)
        return tuple(tuple(sorted(p)) for p in inc)


def cluster_condensation(d: ClusterDecomposition, g: CoordinationGraph) -> CondensationDag:
    """Quotient of g by the clustering d.  Edge A -> B iff some graph
    edge runs from a member of A to a member of B, A != B."""
    cedges: set[tuple[int, int]] = set()
    cof = d.cluster_of
    for i, j in g.edges:
        a, b = cof[i], cof[j]
        if a != b:
            cedges.add((a, b))

    # Kahn with a heap for a deterministic topological order.
    n = d.num_clusters
    indeg = [0] * n
    succ: list[list[int]] = [[] for _ in range(n)]
    for a, b in cedges:
        indeg[b] += 1
        succ[a].append(b)
    ready = [k for k in range(n) if indeg[k] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        a = heapq.heappop(ready)
        order.append(a)
        for b in succ[a]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(ready, b)
    if len(order) != n:  # cannot happen for a true condensation
        raise ValueError("condensation contains a cycle; clustering is inconsistent")
    return CondensationDag(n, frozenset(cedges), tuple(order))


class ReachabilitySets:
    """Per-agent reachability, computed once at cluster level.

    Cluster reachability is stored as bitmasks over cluster indices;
    agent-level sets are expanded on demand and cached per cluster, so
    same-cluster agents share one frozenset.  This keeps graphs with
    ~10^4 agents tractable as long as callers do not materialize every
    agent's set of a densely-reachable graph.
    """

    def __init__(self, graph: CoordinationGraph, clusters: ClusterDecomposition,
                 condensation: CondensationDag):
        self.graph = graph
        self.clusters = clusters
        self.condensation = condensation
        n = clusters.num_clusters
        down = [0] * n
        for c in reversed(condensation.topo_order):
            m = 1 << c
            for s in condensation.successors[c]:
                m |= down[s]
            down[c] = m
        up = [0] * n
        for c in condensation.topo_order:
            m = 1 << c
            for p in condensation.predecessors[c]:
                m |= up[p]
            up[c] = m
        self._down = down
        self._up = up
        self._down_agents: dict[int, frozenset[int]] = {}
        self._up_agents: dict[int, frozenset[int]] = {}
        self._down_sorted: dict[int, tuple[int, ...]] = {}

    def _expand(self, mask: int) -> list[int]:
        members = self.clusters.clusters
        agents: list[int] = []
        while mask:
            lsb = mask & -mask
            agents.extend(members[lsb.bit_length() - 1])
            mask ^= lsb
        agents.sort()
        return agents

    def _down_set(self, c: int) -> frozenset[int]:
        s = self._down_agents.get(c)
        if s is None:
            s = frozenset(self._expand(self._down[c]))
            self._down_agents[c] = s
        return s

    def _up_set(self, c: int) -> frozenset[int]:
        s = self._up_agents.get(c)
        if s is None:
            s = frozenset(self._expand(self._up[c]))
            self._up_agents[c] = s
        return s

    def reach(self, i: int) -> frozenset[int]:
        """Agents j reachable from i by a directed path (contains i
        itself exactly when i is on a cycle)."""
        c = self.clusters.cluster_of[i]
        s = self._down_set(c)
        if self.clusters.on_cycle(i):
            return s
        return s - {i}

    def reach_closed(self, i: int) -> frozenset[int]:
        """reach(i) united with {i}; identical for all members of a
        cluster and shared as one frozenset."""
        return self._down_set(self.clusters.cluster_of[i])

    def reach_closed_sorted(self, i: int) -> tuple[int, ...]:
        """Ascending tuple of reach_closed(i), cached per cluster; the
        canonical summation order for assembled local values."""
        c = self.clusters.cluster_of[i]
        t = self._down_sorted.get(c)
        if t is None:
            t = tuple(self._expand(self._down[c]))
            self._down_sorted[c] = t
        return t

    def ancestors(self, i: int) -> frozenset[int]:
        """Agents j that can reach i (contains i itself exactly when i
        is on a cycle).  j in reach(i) iff i in ancestors(j)."""
        c = self.clusters.cluster_of[i]
        s = self._up_set(c)
        if self.clusters.on_cycle(i):
            return s
        return s - {i}

    def ancestors_closed(self, i: int) -> frozenset[int]:
        return self._up_set(self.clusters.cluster_of[i])

    def cluster_reach(self, c: int) -> tuple[int, ...]:
        """Cluster indices reachable from cluster c (including c),
        ascending."""
        mask = self._down[c]
        out = []
        while mask:
            lsb = mask & -mask
            out.append(lsb.bit_length() - 1)
            mask ^= lsb
        return tuple(out)


def reachability(g: CoordinationGraph) -> ReachabilitySets:
    d = strongly_connected_components(g)
    return ReachabilitySets(g, d, cluster_condensation(d, g))


@dataclass(frozen=True)
class LearningGraph:
    """Reward-routing graph: edge (j, i) means j sends its realized
    reward to i, required exactly when i reaches j in the coordination
    graph.  Self-pairs are omitted: an agent is trivially its own
    reward source and never messages itself, even when it lies on a
    cycle.

    ``in_neighbors[i]`` lists i's reward senders ascending (i's
    reachable set minus i itself).
    """

    num_agents: int
    edges: frozenset[tuple[int, int]]
    in_neighbors: Mapping[int, tuple[int, ...]]


def derive_learning_graph(g: CoordinationGraph, r: ReachabilitySets) -> LearningGraph:
    in_nb: dict[int, tuple[int, ...]] = {}
    edges: set[tuple[int, int]] = set()
    for i in g.agents:
        senders = tuple(j for j in r.reach_closed_sorted(i) if j != i)
        in_nb[i] = senders
        for j in senders:
            edges.add((j, i))
    return LearningGraph(g.num_agents, frozenset(edges), in_nb)


def check_weak_connectivity(g: CoordinationGraph) -> tuple[tuple[int, ...], ...]:
    """Connected components of the undirected view, each ascending,
    ordered by smallest member.  A single component means the graph is
    weakly connected."""
    seen = bytearray(g.num_agents + 1)
    comps: list[tuple[int, ...]] = []
    for root in g.agents:
        if seen[root]:
            continue
        comp = []
        q = deque([root])
        seen[root] = 1
        while q:
            v = q.popleft()
            comp.append(v)
            for w in g._out[v] + g._in[v]:
                if not seen[w]:
                    seen[w] = 1
                    q.append(w)
        comp.sort()
        comps.append(tuple(comp))
    return tuple(comps)


@dataclass(frozen=True)
class GraphArtifacts:
    """Everything derived from one coordination graph, computed once."""

    graph: CoordinationGraph
    clusters: ClusterDecomposition
    condensation: CondensationDag
    reach: ReachabilitySets
    learning: LearningGraph


def build_artifacts(g: CoordinationGraph) -> GraphArtifacts:
    d = strongly_connected_components(g)
    c = cluster_condensation(d, g)
    r = ReachabilitySets(g, d, c)
    return GraphArtifacts(g, d, c, r, derive_learning_graph(g, r))
