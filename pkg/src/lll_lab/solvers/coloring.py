"""Greedy proper vertex coloring by monochromatic-edge repair.

Flaws are (edge, color) pairs: both endpoints share that color.  The
repair recolors each endpoint in a fixed order (lower vertex first),
uniformly among the q - maxdeg lowest-indexed colors absent from its
current neighborhood, so every transition has probability exactly
1/(q - maxdeg)^2 and the charge is that same value.  Repairs never
create new monochromatic edges, which caps the work at one repair per
vertex: at most 2n vertex-recoloring events counting initialization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from ..core import LllError, SearchProblem
from ..criteria import DependencyGraph
from .aec import GraphInstance


@dataclass(frozen=True)
class WeightSpec:
    """Local weighting: for each chosen vertex, a radius and a function of
    the colors inside its radius ball.  The radius-(d+1) balls of distinct
    chosen vertices must be disjoint."""

    vertices: tuple[int, ...]
    radii: Mapping[int, int]
    functions: Mapping[int, Callable[[Mapping[int, int]], float]]

    def validate(self, g: GraphInstance) -> None:
        balls = []
        for v in self.vertices:
            if v not in self.radii or v not in self.functions:
                raise LllError(f"weight spec incomplete for vertex {v}")
            balls.append(ball(g, v, self.radii[v] + 1))
        for a in range(len(balls)):
            for b in range(a + 1, len(balls)):
                if balls[a] & balls[b]:
                    raise LllError("weight-spec balls overlap")


def adjacency_lists(g: GraphInstance) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(g.num_vertices)]
    for (u, v) in g.edges:
        out[u].append(v)
        out[v].append(u)
    return out


def ball(g: GraphInstance, center: int, radius: int) -> frozenset[int]:
    adj = adjacency_lists(g)
    seen = {center}
    frontier = [center]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return frozenset(seen)


def line_graph_square_adjacent(g: GraphInstance, e1: int, e2: int) -> bool:
    """Edges within distance two of each other in the line graph."""
    s1, s2 = set(g.edges[e1]), set(g.edges[e2])
    if s1 & s2:
        return True
    for (a, b) in g.edges:
        if {a, b} & s1 and {a, b} & s2:
            return True
    return False


def vertex_coloring_greedy(
    g: GraphInstance, q: int, weights: WeightSpec | None = None
) -> SearchProblem:
    """Search problem over all q-colorings of the graph's vertices.

    Flaw (edge, color) ids are edge-major: flaw = edge_id * q + color.
    The causality graph joins (e, c) and (e', c') whenever e and e' are
    within distance two in the line graph, the relation under which the
    repair commutes.  When a weight spec is given, its edges' flaws get
    priority (install the returned problem's recommended strategy).
    """
    delta = g.max_degree()
    if q <= delta:
        raise LllError("q must exceed the maximum degree")
    n = g.num_vertices
    m_edges = len(g.edges)
    m = m_edges * q
    adj = adjacency_lists(g)
    if weights is not None:
        weights.validate(g)

    lsq = [[line_graph_square_adjacent(g, a, b) for b in range(m_edges)] for a in range(m_edges)]
    flaw_adj = []
    for i in range(m):
        e1 = i // q
        flaw_adj.append(frozenset(
            e2 * q + c2 for e2 in range(m_edges) if lsq[e1][e2] for c2 in range(q)
        ))
    graph = DependencyGraph(m, tuple(flaw_adj))

    def present(i, state):
        e, c = divmod(i, q)
        (u, v) = g.edges[e]
        return state[u] == c and state[v] == c

    def flaws_present(state):
        out = []
        for e, (u, v) in enumerate(g.edges):
            if state[u] == state[v]:
                out.append(e * q + state[u])
        return out

    def allowed_colors(state, v):
        used = {state[w] for w in adj[v]}
        avail = [c for c in range(q) if c not in used]
        return avail[: q - delta]

    def sample_action(i, state, rng):
        e, _ = divmod(i, q)
        (u, v) = g.edges[e]
        vals = list(state)
        for w in (u, v):  # fixed order: lower endpoint first
            opts = allowed_colors(vals, w)
            vals[w] = opts[rng.randint(len(opts))]
        return tuple(vals)

    def action_distribution(i, state):
        e, _ = divmod(i, q)
        (u, v) = g.edges[e]
        out: dict = {}
        first = allowed_colors(list(state), u)
        p1 = 1.0 / len(first)
        for cu in first:
            mid = list(state)
            mid[u] = cu
            second = allowed_colors(mid, v)
            p2 = 1.0 / len(second)
            for cv in second:
                nxt = list(mid)
                nxt[v] = cv
                key = tuple(nxt)
                out[key] = out.get(key, 0.0) + p1 * p2
        return out

    def sample_init(rng):
        return tuple(rng.randint(q) for _ in range(n))

    def enumerate_states():
        return itertools.product(range(q), repeat=n)

    priority = None
    if weights is not None:
        hot_edges = set()
        for v in weights.vertices:
            local = ball(g, v, weights.radii[v])
            for e, (a, b) in enumerate(g.edges):
                if a in local and b in local:
                    hot_edges.add(e)
        hot = [e * q + c for e in sorted(hot_edges) for c in range(q)]
        cold = [i for i in range(m) if i // q not in hot_edges]
        priority = hot + cold

    return SearchProblem(
        name="vertex_coloring_greedy",
        num_flaws=m,
        present=present,
        flaws_present=flaws_present,
        sample_action=sample_action,
        neighbors=lambda i: graph.adj[i],
        sample_init=sample_init,
        canon=lambda s: bytes(s),
        weight=lambda s: 1.0,
        action_distribution=action_distribution,
        enumerate_states=enumerate_states if q ** n <= 500000 else None,
        init_distribution=(lambda s: (1.0 / q) ** n),
        init_ratio=1.0,
        declared_charges=tuple(1.0 / (q - delta) ** 2 for _ in range(m)),
        flaw_labels=tuple(f"e{e}:c{c}" for e in range(m_edges) for c in range(q)),
        metadata={
            "graph": g,
            "q": q,
            "delta": delta,
            "weights": weights,
            "priority": priority,
            "strategy": "lowest_index" if priority is None else ("fixed_priority", priority),
            "dependency_graph": graph,
        },
    )


def coloring_is_proper_vertex(g: GraphInstance, state: Sequence[int]) -> bool:
    return all(state[u] != state[v] for (u, v) in g.edges)


def induced_subgraph(g: GraphInstance, vertices: frozenset[int]) -> GraphInstance:
    keep = sorted(vertices)
    relabel = {v: i for i, v in enumerate(keep)}
    edges = [(relabel[u], relabel[v]) for (u, v) in g.edges if u in vertices and v in vertices]
    return GraphInstance.from_edge_list(len(keep), edges)


def matchings_of(g: GraphInstance, cap: int = 10**6) -> list[frozenset[int]]:
    """All matchings (edge-id sets, empty included): the proper
    independent sets of the local line graph used by the weight bound."""
    out = [frozenset()]

    def rec(chosen: list[int], used: set[int], start: int):
        for e in range(start, len(g.edges)):
            (u, v) = g.edges[e]
            if u in used or v in used:
                continue
            chosen.append(e)
            used.update((u, v))
            out.append(frozenset(chosen))
            if len(out) > cap:
                raise LllError("matching enumeration cap exceeded")
            rec(chosen, used, e + 1)
            used.difference_update((u, v))
            chosen.pop()

    rec([], set(), 0)
    return out


def local_weight_bound(g: GraphInstance, q: int, spec: WeightSpec, center: int,
                       proper_colorings: list[tuple[int, ...]]) -> tuple[float, float, float]:
    """(r, a, expectation) for one weighted vertex: r is the proper
    fraction of colorings of its radius ball, a the matching-weighted
    series with per-edge weight q/(q - maxdeg)^2, and the expectation of
    the local function under uniform proper colorings of the whole graph.
    """
    delta = g.max_degree()
    local = ball(g, center, spec.radii[center])
    sub = induced_subgraph(g, local)
    total = q ** len(local)
    proper_local = 0
    for combo in itertools.product(range(q), repeat=len(local)):
        if coloring_is_proper_vertex(sub, combo):
            proper_local += 1
    r = proper_local / total
    w = q / (q - delta) ** 2
    a = sum(w ** len(s) for s in matchings_of(sub))
    fn = spec.functions[center]
    keep = sorted(local)
    acc = 0.0
    for coloring in proper_colorings:
        acc += fn({v: coloring[v] for v in keep})
    expectation = acc / len(proper_colorings) if proper_colorings else float("nan")
    return r, a, expectation
