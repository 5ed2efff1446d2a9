"""Acyclic edge coloring: a backtracking solver driven by color
availability, and a resampling solver certified through the clique local
lemma.

The backtracking solver works over partial proper colorings with no
bichromatic cycle.  A color is 4-available for an edge when using it
violates neither properness nor creates a bichromatic 4-cycle; in any
proper partial coloring at most 2(maxdeg - 1) colors are 4-forbidden, so
q > 2(maxdeg - 1) guarantees progress.  On creating a bichromatic cycle
of length 2L the solver uncolors the cycle except its last two edges, so
each step's charge is (number of compatible cycles) / Q with
Q = q - 2(maxdeg - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ..core import LllError, SearchProblem
from ..criteria import BacktrackChargeTable, CliqueLllConfig, DependencyGraph

UNCOLORED = -1
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class GraphInstance:
    """Simple undirected graph; edges stored sorted, ids by sort order."""

    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for (u, v) in self.edges:
            if u == v:
                raise LllError("self-loop in graph")
            if not (0 <= u < v < self.num_vertices):
                raise LllError("edge endpoints out of range or unsorted")
            if (u, v) in seen:
                raise LllError("duplicate edge")
            seen.add((u, v))
        if list(self.edges) != sorted(self.edges):
            raise LllError("edges must be sorted")

    @staticmethod
    def from_edge_list(n: int, edges: Iterable[tuple[int, int]]) -> "GraphInstance":
        norm = sorted((min(u, v), max(u, v)) for u, v in edges)
        return GraphInstance(n, tuple(norm))

    def max_degree(self) -> int:
        deg = [0] * self.num_vertices
        for (u, v) in self.edges:
            deg[u] += 1
            deg[v] += 1
        return max(deg) if deg else 0

    def incident(self) -> list[list[int]]:
        """edge ids incident to each vertex"""
        out: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for ei, (u, v) in enumerate(self.edges):
            out[u].append(ei)
            out[v].append(ei)
        return out

    @staticmethod
    def complete(n: int) -> "GraphInstance":
        return GraphInstance.from_edge_list(
            n, [(u, v) for u in range(n) for v in range(u + 1, n)]
        )


# ---------------------------------------------------------------------------
# validity checking


def coloring_is_proper(g: GraphInstance, coloring: Sequence[int]) -> bool:
    incident = g.incident()
    for ids in incident:
        used = [coloring[e] for e in ids if coloring[e] != UNCOLORED]
        if len(used) != len(set(used)):
            return False
    return True


def bichromatic_cycle_through(
    g: GraphInstance, coloring: Sequence[int], edge_id: int, other_color: int
) -> list[int] | None:
    """The alternating cycle through a colored edge using its color and
    ``other_color``, as an edge-id list in traversal order, else None.

    In a proper coloring the two-color subgraph has maximum degree two, so
    the walk from the edge's higher endpoint either closes the unique
    cycle or dies out.
    """
    c_edge = coloring[edge_id]
    if c_edge == UNCOLORED or other_color == c_edge:
        return None
    incident = g.incident()
    (u, v) = g.edges[edge_id]
    start, here = u, v
    path = [edge_id]
    want = other_color
    prev_edge = edge_id
    while True:
        nxt = None
        for ei in incident[here]:
            if ei != prev_edge and coloring[ei] == want:
                nxt = ei
                break
        if nxt is None:
            return None
        path.append(nxt)
        (a, b) = g.edges[nxt]
        here = b if a == here else a
        prev_edge = nxt
        want = c_edge if want == other_color else other_color
        if here == start:
            return path if len(path) % 2 == 0 and len(path) >= 4 else None


def coloring_is_acyclic(g: GraphInstance, coloring: Sequence[int]) -> bool:
    """Proper and no bichromatic cycle, by per-color-pair inspection."""
    if not coloring_is_proper(g, coloring):
        return False
    for ei in range(len(g.edges)):
        if coloring[ei] == UNCOLORED:
            continue
        used_nearby = set()
        (u, v) = g.edges[ei]
        for ids in (g.incident()[u], g.incident()[v]):
            for e2 in ids:
                if coloring[e2] != UNCOLORED:
                    used_nearby.add(coloring[e2])
        for c2 in used_nearby:
            if c2 != coloring[ei] and bichromatic_cycle_through(g, coloring, ei, c2):
                return False
    return True


# ---------------------------------------------------------------------------
# backtracking solver


def four_available(g: GraphInstance, coloring: Sequence[int], edge_id: int, q: int,
                   incident: list[list[int]] | None = None) -> list[int]:
    """Colors usable on the edge without breaking properness or closing a
    bichromatic 4-cycle."""
    if incident is None:
        incident = g.incident()
    (u, v) = g.edges[edge_id]
    forbidden = set()
    for ei in incident[u]:
        if coloring[ei] != UNCOLORED:
            forbidden.add(coloring[ei])
    for ei in incident[v]:
        if coloring[ei] != UNCOLORED:
            forbidden.add(coloring[ei])
    avail = [c for c in range(q) if c not in forbidden]
    out = []
    for c in avail:
        test = list(coloring)
        test[edge_id] = c
        bad = False
        for ei in incident[u]:
            c2 = coloring[ei]
            if ei != edge_id and c2 != UNCOLORED:
                cyc = bichromatic_cycle_through(g, test, edge_id, c2)
                if cyc is not None and len(cyc) == 4:
                    bad = True
                    break
        if not bad:
            out.append(c)
    return out


def aec_backtrack(g: GraphInstance, q: int,
                  cycle_bound: Callable[[int], float] | None = None) -> SearchProblem:
    """Backtracking acyclic-edge-coloring search.

    States are proper, bichromatic-cycle-free partial colorings; each
    uncolored edge is a flaw.  Addressing colors the edge uniformly among
    its 4-available colors; if that closes bichromatic cycles, the
    lowest one (by sorted edge-id tuple) is uncolored except its two
    final edges in traversal order from the edge's lower endpoint.
    """
    delta = g.max_degree()
    if q <= 2 * (delta - 1):
        raise LllError("q too small: no guaranteed available color")
    m = len(g.edges)
    incident = g.incident()

    def present(i, state):
        return state[i] == UNCOLORED

    def flaws_present(state):
        return [i for i in range(m) if state[i] == UNCOLORED]

    def _outcome(state, edge_id, color):
        test = list(state)
        test[edge_id] = color
        cycles = []
        (u, v) = g.edges[edge_id]
        nearby_colors = set()
        for ei in incident[u]:
            if ei != edge_id and test[ei] != UNCOLORED:
                nearby_colors.add(test[ei])
        for c2 in nearby_colors:
            cyc = bichromatic_cycle_through(g, test, edge_id, c2)
            if cyc is not None and len(cyc) >= 6:
                cycles.append(cyc)
        if cycles:
            cyc = min(cycles, key=lambda path: tuple(sorted(path)))
            for ei in cyc[:-2]:
                test[ei] = UNCOLORED
        return tuple(test)

    def sample_action(i, state, rng):
        avail = four_available(g, state, i, q, incident)
        if not avail:
            raise LllError("no 4-available color: state violates the availability bound")
        color = avail[rng.randint(len(avail))]
        return _outcome(state, i, color)

    def action_distribution(i, state):
        avail = four_available(g, state, i, q, incident)
        if not avail:
            raise LllError("no 4-available color: state violates the availability bound")
        p = 1.0 / len(avail)
        out: dict = {}
        for c in avail:
            nxt = _outcome(state, i, c)
            out[nxt] = out.get(nxt, 0.0) + p
        return out

    blank = tuple([UNCOLORED] * m)
    all_flaws = frozenset(range(m))

    def neighbors(i):
        # a backtracking step can uncolor any edge on a cycle through i
        return all_flaws

    def enumerate_states():
        def rec(prefix):
            if len(prefix) == m:
                yield tuple(prefix)
                return
            prefix.append(UNCOLORED)
            yield from rec(prefix)
            prefix.pop()
            for c in range(q):
                cand = prefix + [c] + [UNCOLORED] * (m - len(prefix) - 1)
                if coloring_is_acyclic(g, cand):
                    prefix.append(c)
                    yield from rec(prefix)
                    prefix.pop()

        return rec([])

    return SearchProblem(
        name="aec_backtrack",
        num_flaws=m,
        present=present,
        flaws_present=flaws_present,
        sample_action=sample_action,
        neighbors=neighbors,
        sample_init=lambda rng: blank,
        canon=lambda s: bytes((c + 1) & 0xFF for c in s),
        weight=lambda s: 1.0,
        action_distribution=action_distribution,
        enumerate_states=enumerate_states if m <= 6 and q <= 10 else None,
        init_distribution=(lambda s: 1.0 if s == blank else 0.0),
        unassigned=lambda s: frozenset(f"e{i}" for i in range(m) if s[i] == UNCOLORED),
        flaw_labels=tuple(f"e{i}" for i in range(m)),
        metadata={
            "graph": g,
            "q": q,
            "Q": q - 2 * (delta - 1),
            "strategy": "lowest_index",
            "cycle_bound": cycle_bound,
        },
    )


def default_cycle_bound(delta: int) -> Callable[[int], float]:
    """At most (maxdeg - 1)^(2L - 2) cycles of length 2L through an edge."""
    return lambda length: float((delta - 1) ** (length - 2))


def aec_backtracking_criterion(
    g: GraphInstance, q: int,
    psi: float | None = None,
    cycle_bound: Callable[[int], float] | None = None,
    max_length: int = 400,
) -> dict:
    """Closed-form evaluation of the backtracking condition:
    zeta = 1/(psi Q) + (1/Q) sum over cycle lengths 2L >= 6 of
    bound(2L) psi^(2L-3).  The default weight 1/(g* (maxdeg-1)) with
    g* = (1+sqrt 5)/2 minimizes the golden-ratio series and gives
    zeta <= 2 (maxdeg-1)/Q, below one whenever q > 4(maxdeg-1).
    """
    delta = g.max_degree()
    Q = q - 2 * (delta - 1)
    if Q <= 0:
        raise LllError("q too small: no guaranteed available color")
    if psi is None:
        psi = 1.0 / (GOLDEN * (delta - 1)) if delta > 1 else 1.0
    bound = cycle_bound if cycle_bound is not None else default_cycle_bound(delta)
    zeta = 1.0 / (psi * Q)
    series = 0.0
    length = 6
    prev_ratio = None
    while length <= max_length:
        term = bound(length) * psi ** (length - 3)
        series += term
        if term < 1e-15 * max(series, 1.0):
            break
        nxt = bound(length + 2) * psi ** (length - 1)
        ratio = nxt / term if term > 0 else 0.0
        # once the term ratio stabilizes below one (it is constant for the
        # default and power-law bounds), close the geometric tail exactly
        if prev_ratio is not None and abs(ratio - prev_ratio) < 1e-12 and ratio < 1.0:
            series += nxt / (1.0 - ratio)
            break
        prev_ratio = ratio
        length += 2
    else:
        raise LllError("cycle-count series did not converge; weight too large")
    zeta += series / Q
    return {
        "criterion": "aec_backtracking",
        "pass": zeta < 1.0,
        "zeta": zeta,
        "psi": psi,
        "Q": Q,
        "delta": 1.0 - zeta,
    }


def golden_section_minimum(fn: Callable[[float], float], lo: float, hi: float,
                           tol: float = 1e-9) -> tuple[float, float]:
    """Golden-section search for a unimodal scalar function."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fn(d)
    x = (a + b) / 2.0
    return x, fn(x)


def enumerate_even_cycles(g: GraphInstance, max_count: int = 200000,
                          max_length: int | None = None) -> list[tuple[int, ...]]:
    """All simple even cycles as sorted edge-id tuples (each cycle once)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(g.num_vertices)]
    for ei, (u, v) in enumerate(g.edges):
        adj[u].append((v, ei))
        adj[v].append((u, ei))
    cycles: set[tuple[int, ...]] = set()

    def dfs(start: int, here: int, visited: set[int], edge_path: list[int]):
        for (nxt, ei) in adj[here]:
            if ei in edge_path_set:
                continue
            if nxt == start and len(edge_path) >= 2:
                cyc = tuple(sorted(edge_path + [ei]))
                if len(cyc) % 2 == 0 and (max_length is None or len(cyc) <= max_length):
                    cycles.add(cyc)
                    if len(cycles) > max_count:
                        raise LllError("even-cycle enumeration cap exceeded")
                continue
            if nxt in visited or nxt < start:
                continue
            visited.add(nxt)
            edge_path.append(ei)
            edge_path_set.add(ei)
            dfs(start, nxt, visited, edge_path)
            edge_path_set.discard(ei)
            edge_path.pop()
            visited.discard(nxt)

    for s in range(g.num_vertices):
        edge_path_set: set[int] = set()
        dfs(s, s, {s}, [])
    return sorted(cycles)


def aec_charge_table(g: GraphInstance, q: int, max_count: int = 200000) -> BacktrackChargeTable:
    """Exact sparse charge table for the backtracking solver on a desk
    instance: gamma_empty = 1/Q per edge, and for each cycle of length 2L
    through an edge, 1/Q on the introduced set of 2L-2 edge labels.

    The introduced set of a cycle is the cycle minus its two final edges
    in traversal order from the addressed edge's lower endpoint, matching
    the solver's uncoloring rule.
    """
    delta = g.max_degree()
    Q = q - 2 * (delta - 1)
    if Q <= 0:
        raise LllError("q too small: no guaranteed available color")
    m = len(g.edges)
    variables = tuple(f"e{i}" for i in range(m))
    entries: dict = {v: {frozenset(): 1.0 / Q} for v in variables}
    for cyc in enumerate_even_cycles(g, max_count=max_count):
        if len(cyc) < 6:
            continue  # 4-cycles never close under 4-available choice
        for ei in cyc:
            ordered = _cycle_order_from(g, cyc, ei)
            intro = frozenset(f"e{e}" for e in ordered[:-2])
            tab = entries[f"e{ei}"]
            tab[intro] = tab.get(intro, 0.0) + 1.0 / Q
    return BacktrackChargeTable(variables, entries, span=frozenset(variables))


def _cycle_order_from(g: GraphInstance, cycle_edges: tuple[int, ...], start_edge: int) -> list[int]:
    """Cycle's edges in traversal order starting at start_edge, walking
    away from its lower endpoint (the solver's deterministic orientation)."""
    used = {start_edge}
    (u, v) = g.edges[start_edge]
    order = [start_edge]
    here = v
    while here != u:
        for ei in sorted(cycle_edges):
            if ei in used:
                continue
            (a, b) = g.edges[ei]
            if here == a or here == b:
                order.append(ei)
                used.add(ei)
                here = b if a == here else a
                break
        else:
            raise LllError("cycle order reconstruction failed")
    return order


# ---------------------------------------------------------------------------
# resampling solver via the clique local lemma


def clique_constant_optimum(tol: float = 1e-10) -> tuple[float, float, float]:
    """Minimize max((2/c)(1+e)e/(e-c), ((1+e)/sqrt(c))(e/(e-c))^1.5) over
    0 < c < e; returns (optimum, e, c).

    This is the colors-per-degree constant of the clique-local-lemma
    analysis; the value 8.59 sometimes quoted for it is not what direct
    minimization yields (the optimum is about 9.6962), so callers should
    rely on this computed value.
    """

    def val(e: float, c: float) -> float:
        if not (0.0 < c < e):
            return float("inf")
        a = (2.0 / c) * (1.0 + e) * e / (e - c)
        b = ((1.0 + e) / math.sqrt(c)) * (e / (e - c)) ** 1.5
        return max(a, b)

    def best_c(e: float) -> tuple[float, float]:
        c, v = golden_section_minimum(lambda cc: val(e, cc), 1e-6, e - 1e-9, tol)
        return c, v

    e_opt, _ = golden_section_minimum(lambda e: best_c(e)[1], 0.5, 30.0, tol)
    c_opt, v_opt = best_c(e_opt)
    return v_opt, e_opt, c_opt


def enumerate_two_paths(g: GraphInstance) -> list[tuple[int, int]]:
    """Unordered pairs of adjacent edges, as sorted edge-id pairs."""
    out = []
    incident = g.incident()
    for ids in incident:
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                out.append((min(ids[a], ids[b]), max(ids[a], ids[b])))
    return sorted(set(out))


def aec_clique_mt(g: GraphInstance, q: int, eps: float | None = None, c: float | None = None,
                  cycle_cap: int = 200000, warn: Callable[[str], None] | None = None
                  ) -> tuple[SearchProblem, CliqueLllConfig]:
    """Resampling search over all edge colorings with path and cycle flaws.

    Flaws: monochromatic two-edge paths (charge 1/q) and bichromatic even
    cycles (charge q(q-1)/q^|C|).  Resampling redraws the flaw's edges
    uniformly.  The returned clique config covers the dependency graph
    with one clique per edge and the standard x weights for (eps, c),
    defaulting to the computed optimum constants.

    Flaw ids order paths before cycles; run with the paths-first priority
    (the default lowest-index strategy does exactly that), so cycle flaws
    are only addressed on proper colorings where per-color-pair search
    finds them quickly.
    """
    delta = g.max_degree()
    if eps is None or c is None:
        _, eps_opt, c_opt = clique_constant_optimum()
        eps = eps_opt if eps is None else eps
        c = c_opt if c is None else c
    m_edges = len(g.edges)
    paths = enumerate_two_paths(g)
    cycles = list(enumerate_even_cycles(g, max_count=cycle_cap))
    ordered_cycles = [_cycle_order_from(g, cy, cy[0]) for cy in cycles]
    flaw_edges: list[tuple[int, ...]] = [tuple(p) for p in paths] + [tuple(cy) for cy in cycles]
    num_paths = len(paths)
    m = len(flaw_edges)

    adj = []
    for i in range(m):
        si = set(flaw_edges[i])
        adj.append(frozenset(j for j in range(m) if si & set(flaw_edges[j])))
    graph = DependencyGraph(m, tuple(adj))

    def _is_bichromatic(state, ordered):
        c0 = state[ordered[0]]
        c1 = state[ordered[1]]
        if c0 == c1:
            return False
        for pos, ei in enumerate(ordered):
            if state[ei] != (c0 if pos % 2 == 0 else c1):
                return False
        return True

    def present(i, state):
        es = flaw_edges[i]
        if i < num_paths:
            return state[es[0]] == state[es[1]]
        return _is_bichromatic(state, ordered_cycles[i - num_paths])

    def flaws_present(state):
        found = [i for i in range(num_paths) if state[flaw_edges[i][0]] == state[flaw_edges[i][1]]]
        if found:
            return found
        # proper coloring: bichromatic cycles located per color pair
        out = []
        for j in range(num_paths, m):
            if present(j, state):
                out.append(j)
        return out

    def sample_action(i, state, rng):
        vals = list(state)
        for ei in flaw_edges[i]:
            vals[ei] = rng.randint(q)
        return tuple(vals)

    def action_distribution(i, state):
        import itertools as _it

        es = flaw_edges[i]
        p = (1.0 / q) ** len(es)
        out = {}
        for combo in _it.product(range(q), repeat=len(es)):
            vals = list(state)
            for ei, col in zip(es, combo):
                vals[ei] = col
            key = tuple(vals)
            out[key] = out.get(key, 0.0) + p
        return out

    def sample_init(rng):
        return tuple(rng.randint(q) for _ in range(m_edges))

    charges = [1.0 / q] * num_paths + [
        q * (q - 1) / float(q) ** len(cy) for cy in cycles
    ]

    cliques = []
    x: dict = {}
    for ei in range(m_edges):
        members = frozenset(i for i in range(m) if ei in flaw_edges[i])
        cliques.append(members)
        for i in members:
            if i < num_paths:
                x[(i, ei)] = (c / (1.0 + eps)) / (2.0 * delta - 2.0)
            else:
                ln = len(flaw_edges[i])
                x[(i, ei)] = (c / (1.0 + eps) ** (ln / 2.0)) / float(delta - 1) ** (ln - 2)
    cfg = CliqueLllConfig(graph, tuple(cliques), x)
    opt, _, _ = clique_constant_optimum()
    if q < opt * (delta - 1) and warn is not None:
        warn(f"q={q} below the checker threshold {opt * (delta - 1):.3f}; running anyway")

    return (
        SearchProblem(
            name="aec_clique_mt",
            num_flaws=m,
            present=present,
            flaws_present=flaws_present,
            sample_action=sample_action,
            neighbors=lambda i: graph.adj[i],
            sample_init=sample_init,
            canon=lambda s: bytes(v & 0xFF for v in s),
            weight=lambda s: 1.0,
            action_distribution=action_distribution,
            enumerate_states=(lambda: _all_colorings(m_edges, q)) if q ** m_edges <= 400000 else None,
            init_distribution=(lambda s: (1.0 / q) ** m_edges),
            init_ratio=1.0,
            declared_charges=tuple(charges),
            flaw_labels=tuple(
                [f"path{p}" for p in paths] + [f"cycle{tuple(cy)}" for cy in cycles]
            ),
            metadata={"graph": g, "q": q, "num_paths": num_paths, "strategy": "lowest_index",
                      "clique_config": cfg, "eps": eps, "c": c},
        ),
        cfg,
    )


def _all_colorings(m_edges: int, q: int):
    import itertools as _it

    return _it.product(range(q), repeat=m_edges)


def random_bounded_degree_graph(n: int, max_degree: int, rng, target_edges: int | None = None) -> GraphInstance:
    """Random simple graph with all degrees at most max_degree."""
    if n == 0:
        return GraphInstance(0, ())
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng.shuffle(pairs)
    deg = [0] * n
    chosen = []
    cap = target_edges if target_edges is not None else (n * max_degree) // 2
    for (u, v) in pairs:
        if len(chosen) >= cap:
            break
        if deg[u] < max_degree and deg[v] < max_degree:
            chosen.append((u, v))
            deg[u] += 1
            deg[v] += 1
    return GraphInstance.from_edge_list(n, chosen)
