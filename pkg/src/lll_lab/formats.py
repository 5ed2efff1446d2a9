"""Instance file formats and generators.

Formats round-trip: parse(serialize(parse(text))) equals parse(text).
 - CNF: DIMACS ("p cnf <vars> <clauses>", clauses end with 0)
 - graph: "<n> <m>" header then one "u v" line per edge, 0-indexed
 - edge-colored clique: one "u v color" line per edge of the clique
 - criteria: JSON {m, adjacency, gamma, psi, mode, ...}
"""

from __future__ import annotations

import json

from .core import LllError
from .criteria import BacktrackChargeTable, DependencyGraph
from .rng import RandomSource
from .solvers.aec import GraphInstance, random_bounded_degree_graph
from .solvers.ksat import CnfInstance, random_bounded_degree_cnf
from .solvers.matchings import EdgeColoredClique


# ---------------------------------------------------------------------------
# DIMACS


def parse_dimacs(text: str) -> CnfInstance:
    num_vars = None
    declared_clauses = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise LllError(f"line {lineno}: bad DIMACS header")
            num_vars, declared_clauses = int(parts[2]), int(parts[3])
            continue
        if num_vars is None:
            raise LllError(f"line {lineno}: clause before DIMACS header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise LllError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                if not current:
                    raise LllError(f"line {lineno}: empty clause")
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if current:
        raise LllError("unterminated clause at end of file")
    if num_vars is None:
        raise LllError("missing DIMACS header")
    if declared_clauses is not None and declared_clauses != len(clauses):
        raise LllError(
            f"header declares {declared_clauses} clauses, found {len(clauses)}"
        )
    return CnfInstance(num_vars, tuple(clauses))


def serialize_dimacs(cnf: CnfInstance) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    for clause in cnf.clauses:
        lines.append(" ".join(str(l) for l in clause) + " 0")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# graphs


def parse_graph(text: str) -> GraphInstance:
    lines = [l.strip() for l in text.splitlines() if l.strip() and not l.strip().startswith("#")]
    if not lines:
        raise LllError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise LllError("graph header must be 'n m'")
    n, m = int(head[0]), int(head[1])
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise LllError(f"line {lineno}: edge line must be 'u v'")
        u, v = int(parts[0]), int(parts[1])
        edges.append((u, v))
    if len(edges) != m:
        raise LllError(f"header declares {m} edges, found {len(edges)}")
    return GraphInstance.from_edge_list(n, edges)


def serialize_graph(g: GraphInstance) -> str:
    lines = [f"{g.num_vertices} {len(g.edges)}"]
    for (u, v) in g.edges:
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# edge-colored cliques


def parse_colored_clique(text: str) -> EdgeColoredClique:
    colors: dict = {}
    max_v = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise LllError(f"line {lineno}: expected 'u v color'")
        u, v, c = int(parts[0]), int(parts[1]), int(parts[2])
        if u == v:
            raise LllError(f"line {lineno}: self-loop")
        key = (min(u, v), max(u, v))
        if key in colors:
            raise LllError(f"line {lineno}: duplicate edge {key}")
        colors[key] = c
        max_v = max(max_v, u, v)
    return EdgeColoredClique(max_v + 1, colors)


def serialize_colored_clique(k: EdgeColoredClique) -> str:
    lines = [f"{u} {v} {k.colors[(u, v)]}" for (u, v) in k.edges()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# criteria JSON


def parse_criteria_json(text: str) -> dict:
    data = json.loads(text)
    if "m" not in data:
        raise LllError("criteria JSON needs 'm'")
    m = int(data["m"])
    adjacency = data.get("adjacency", [[] for _ in range(m)])
    if len(adjacency) != m:
        raise LllError("adjacency must list neighbors for each flaw")
    graph = DependencyGraph.from_neighbor_lists(adjacency)
    out = {
        "m": m,
        "graph": graph,
        "gamma": [float(x) for x in data.get("gamma", [])],
        "psi": [float(x) for x in data.get("psi", [])],
        "mode": data.get("mode", "general"),
    }
    if "cliques" in data:
        out["cliques"] = [sorted(int(i) for i in cl) for cl in data["cliques"]]
        out["x"] = {tuple(map(int, k.split(","))): float(v) for k, v in data.get("x", {}).items()}
    if "backtrack" in data:
        bt = data["backtrack"]
        variables = tuple(bt["variables"])
        entries = {
            v: {frozenset(s): float(gv) for (s, gv) in ((tuple(e[0]), e[1]) for e in rows)}
            for v, rows in bt["charges"].items()
        }
        span = frozenset(bt.get("span", variables))
        out["backtrack_table"] = BacktrackChargeTable(variables, entries, span)
        out["backtrack_psi"] = {k: float(v) for k, v in bt["psi"].items()}
        out["lambda_init"] = bt.get("lambda_init")
    return out


def serialize_criteria_json(parsed: dict) -> str:
    data = {
        "m": parsed["m"],
        "adjacency": parsed["graph"].neighbor_lists(),
        "gamma": parsed["gamma"],
        "psi": parsed["psi"],
        "mode": parsed["mode"],
    }
    if "cliques" in parsed:
        data["cliques"] = parsed["cliques"]
        data["x"] = {f"{i},{v}": x for (i, v), x in parsed["x"].items()}
    if "backtrack_table" in parsed:
        table = parsed["backtrack_table"]
        data["backtrack"] = {
            "variables": list(table.variables),
            "charges": {
                str(v): [[sorted(s), gv] for s, gv in sorted(rows.items(), key=lambda kv: sorted(kv[0]))]
                for v, rows in table.entries.items()
            },
            "span": sorted(table.span) if table.span is not None else None,
            "psi": parsed["backtrack_psi"],
            "lambda_init": parsed.get("lambda_init"),
        }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# generators


def generate_ksat(n: int, k: int, degree: int, rng: RandomSource) -> CnfInstance:
    return random_bounded_degree_cnf(n, k, degree, rng)


def generate_graph(n: int, max_degree: int, rng: RandomSource,
                   edges: int | None = None) -> GraphInstance:
    return random_bounded_degree_graph(n, max_degree, rng, edges)


def generate_colored_clique(n: int, multiplicity: int, rng: RandomSource) -> EdgeColoredClique:
    """K_{2n} with each color on at most ``multiplicity`` edges: shuffle
    the edges and color them in blocks."""
    n2 = 2 * n
    if multiplicity < 1 and n > 0:
        raise LllError("multiplicity must be at least 1")
    edges = [(u, v) for u in range(n2) for v in range(u + 1, n2)]
    rng.shuffle(edges)
    colors = {}
    for idx, e in enumerate(edges):
        colors[e] = idx // multiplicity
    return EdgeColoredClique(n2, colors)
