"""Satisfiability solvers: clause resampling and backtracking assignment.

``ksat_mt`` resamples violated clauses under the uniform product measure
(flaws are clauses, charge 2^-k each).  ``ksat_backtrack`` works over
partial assignments with no violated clause: it assigns the lowest unset
variable at random and unassigns a whole clause on violation; its charge
table has gamma_empty = 1/2 per variable and gamma_clause = 1/2 per
(variable, clause) pair under the uniform measure over partial satisfying
assignments.  ``ksat_backtrack_biased`` replaces the coin by per-variable
distributions and is paired with the asymmetric per-variable criterion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..core import LllError, SearchProblem
from ..criteria import BacktrackChargeTable, DependencyGraph

UNSET = -1


@dataclass(frozen=True)
class CnfInstance:
    """CNF formula; literals are nonzero ints (+v / -v for 1-based v)."""

    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for c in self.clauses:
            if not c:
                raise LllError("empty clause")
            for lit in c:
                v = abs(lit)
                if lit == 0 or not (1 <= v <= self.num_vars):
                    raise LllError(f"literal {lit} out of range")
            if len({abs(l) for l in c}) != len(c):
                raise LllError("clause repeats a variable")

    @property
    def uniform_k(self) -> int | None:
        sizes = {len(c) for c in self.clauses}
        return sizes.pop() if len(sizes) == 1 else None

    def clause_vars(self, ci: int) -> frozenset[int]:
        return frozenset(abs(l) for l in self.clauses[ci])

    def degree(self) -> int:
        """max number of clauses any variable appears in"""
        per_var = [0] * (self.num_vars + 1)
        for c in self.clauses:
            for lit in c:
                per_var[abs(lit)] += 1
        return max(per_var) if self.clauses else 0

    def violated(self, assignment: Sequence[int], ci: int) -> bool:
        """all literals false; unset variables leave a clause unviolated"""
        for lit in self.clauses[ci]:
            val = assignment[abs(lit) - 1]
            if val == UNSET:
                return False
            if (val == 1) == (lit > 0):
                return False
        return True

    def satisfied(self, assignment: Sequence[int]) -> bool:
        for ci in range(len(self.clauses)):
            sat = False
            for lit in self.clauses[ci]:
                val = assignment[abs(lit) - 1]
                if val != UNSET and (val == 1) == (lit > 0):
                    sat = True
                    break
            if not sat:
                return False
        return True

    def sharing_graph(self) -> DependencyGraph:
        m = len(self.clauses)
        adj = [set() for _ in range(m)]
        var_sets = [self.clause_vars(i) for i in range(m)]
        for i in range(m):
            for j in range(i, m):
                if var_sets[i] & var_sets[j]:
                    adj[i].add(j)
                    adj[j].add(i)
        return DependencyGraph(m, tuple(frozenset(a) for a in adj))


def _falsifying_value(lit: int) -> int:
    return 0 if lit > 0 else 1


# ---------------------------------------------------------------------------
# clause-resampling solver


def ksat_mt(cnf: CnfInstance) -> SearchProblem:
    """Resample-a-violated-clause search over full assignments.

    Flaws are clauses; actions redraw the clause's variables uniformly, so
    the actions form a perfect resampler and the charge is exactly 2^-k.
    Enumeration is exposed for instances small enough to table.
    """
    if not cnf.clauses:
        raise LllError("formula needs at least one clause")
    m = len(cnf.clauses)
    n = cnf.num_vars
    graph = cnf.sharing_graph()
    clause_var_lists = [sorted(cnf.clause_vars(i)) for i in range(m)]

    def present(i, state):
        return cnf.violated(state, i)

    def sample_action(i, state, rng):
        vals = list(state)
        for v in clause_var_lists[i]:
            vals[v - 1] = 1 if rng.coin() else 0
        return tuple(vals)

    def action_distribution(i, state):
        out = {}
        kvars = clause_var_lists[i]
        p = 0.5 ** len(kvars)
        for combo in itertools.product((0, 1), repeat=len(kvars)):
            vals = list(state)
            for v, b in zip(kvars, combo):
                vals[v - 1] = b
            out[tuple(vals)] = out.get(tuple(vals), 0.0) + p
        return out

    def sample_init(rng):
        return tuple(1 if rng.coin() else 0 for _ in range(n))

    def enumerate_states():
        return itertools.product((0, 1), repeat=n)

    k = cnf.uniform_k
    return SearchProblem(
        name="ksat_mt",
        num_flaws=m,
        present=present,
        sample_action=sample_action,
        neighbors=lambda i: graph.adj[i],
        sample_init=sample_init,
        canon=lambda s: bytes(s),
        weight=lambda s: 1.0,
        action_distribution=action_distribution,
        enumerate_states=enumerate_states if n <= 22 else None,
        init_distribution=(lambda s: 0.5 ** n),
        init_ratio=1.0,
        declared_charges=tuple(0.5 ** len(c) for c in cnf.clauses),
        flaw_labels=tuple(f"c{i}" for i in range(m)),
        metadata={"cnf": cnf, "k": k, "graph": graph},
    )


# ---------------------------------------------------------------------------
# backtracking solver


def _backtracking_problem(cnf: CnfInstance, value_probs, name: str,
                          product_measure: bool) -> SearchProblem:
    n = cnf.num_vars
    clause_vars = [sorted(cnf.clause_vars(ci)) for ci in range(len(cnf.clauses))]
    clauses_of = [[] for _ in range(n + 1)]
    for ci, vs in enumerate(clause_vars):
        for v in vs:
            clauses_of[v].append(ci)
    var_neighbors = [set() for _ in range(n + 1)]
    for vs in clause_vars:
        for a in vs:
            var_neighbors[a].update(vs)
    adj = tuple(frozenset(u - 1 for u in var_neighbors[v] | {v}) for v in range(1, n + 1))

    def assign_outcome(state, v, val):
        """State after assigning v <- val, backtracking on violation."""
        vals = list(state)
        vals[v - 1] = val
        violated = [ci for ci in clauses_of[v] if cnf.violated(vals, ci)]
        if violated:
            for u in clause_vars[min(violated)]:
                vals[u - 1] = UNSET
        return tuple(vals)

    def present(i, state):
        return state[i] == UNSET

    def flaws_present(state):
        return [i for i in range(n) if state[i] == UNSET]

    def sample_action(i, state, rng):
        p0 = value_probs[i][0]
        val = 0 if rng.u01() < p0 else 1
        return assign_outcome(state, i + 1, val)

    def action_distribution(i, state):
        out: dict = {}
        for val in (0, 1):
            p = value_probs[i][val]
            if p > 0.0:
                nxt = assign_outcome(state, i + 1, val)
                out[nxt] = out.get(nxt, 0.0) + p
        return out

    def product_weight(state):
        w = 1.0
        for v in range(n):
            val = state[v]
            if val != UNSET:
                w *= value_probs[v][val]
        return w

    # the uniform-coin analysis uses the uniform measure over partial
    # satisfying assignments; the biased analysis weights by the product
    # of assigned values' probabilities
    weight = product_weight if product_measure else (lambda s: 1.0)
    empty = tuple([UNSET] * n)

    def enumerate_states():
        # partial assignments with no violated clause
        def rec(prefix):
            if len(prefix) == n:
                yield tuple(prefix)
                return
            v = len(prefix) + 1
            for val in (UNSET, 0, 1):
                prefix.append(val)
                if val == UNSET or not any(
                    cnf.violated(prefix + [UNSET] * (n - len(prefix)), ci)
                    for ci in clauses_of[v]
                ):
                    yield from rec(prefix)
                prefix.pop()

        return rec([])

    return SearchProblem(
        name=name,
        num_flaws=n,
        present=present,
        flaws_present=flaws_present,
        sample_action=sample_action,
        neighbors=lambda i: adj[i],
        sample_init=lambda rng: empty,
        canon=lambda s: bytes(b & 0xFF for b in s),
        weight=weight,
        action_distribution=action_distribution,
        enumerate_states=enumerate_states if n <= 12 else None,
        init_distribution=(lambda s: 1.0 if s == empty else 0.0),
        unassigned=lambda s: frozenset(f"x{v}" for v in range(1, n + 1) if s[v - 1] == UNSET),
        flaw_labels=tuple(f"x{v}" for v in range(1, n + 1)),
        metadata={"cnf": cnf, "strategy": "lowest_index", "value_probs": value_probs},
    )


def ksat_backtrack(cnf: CnfInstance) -> SearchProblem:
    """Backtracking assignment search with uniform coins.

    States are partial assignments violating nothing; each flaw is an
    unassigned variable.  Run it with the lowest-index strategy (the one
    the tail bound is proved for); the charge table is available from
    ``ksat_backtrack_table``.
    """
    uniform = tuple((0.5, 0.5) for _ in range(cnf.num_vars))
    return _backtracking_problem(cnf, uniform, "ksat_backtrack", product_measure=False)


def ksat_backtrack_biased(cnf: CnfInstance, distributions: Sequence[Mapping[int, float]]) -> SearchProblem:
    """Backtracking search sampling each variable from its own distribution
    over {0, 1}; the analysis measure weights a partial assignment by the
    product of its assigned values' probabilities."""
    if len(distributions) != cnf.num_vars:
        raise LllError("need one distribution per variable")
    probs = []
    for d in distributions:
        p0, p1 = float(d.get(0, 0.0)), float(d.get(1, 0.0))
        if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-9 or (p0 == 0.0 and p1 == 0.0):
            raise LllError("zero-probability value: each variable needs a distribution over {0,1}")
        probs.append((p0, p1))
    return _backtracking_problem(cnf, tuple(probs), "ksat_backtrack_biased", product_measure=True)


def ksat_backtrack_table(cnf: CnfInstance) -> BacktrackChargeTable:
    """Charge table of the uniform backtracking solver: 1/2 for the empty
    set and 1/2 for each clause through the variable."""
    variables = tuple(f"x{v}" for v in range(1, cnf.num_vars + 1))
    entries: dict = {}
    for v in range(1, cnf.num_vars + 1):
        name = f"x{v}"
        table: dict = {frozenset(): 0.5}
        for ci in range(len(cnf.clauses)):
            vs = cnf.clause_vars(ci)
            if v in vs:
                table[frozenset(f"x{u}" for u in vs)] = 0.5
        entries[name] = table
    return BacktrackChargeTable(variables, entries, span=frozenset(variables))


def ksat_biased_table(cnf: CnfInstance, distributions: Sequence[Mapping[int, float]]) -> BacktrackChargeTable:
    """Charge table of the biased solver: gamma_empty = 1 and, per clause,
    the product-measure probability that the clause is violated."""
    variables = tuple(f"x{v}" for v in range(1, cnf.num_vars + 1))
    entries: dict = {}
    for v in range(1, cnf.num_vars + 1):
        name = f"x{v}"
        table: dict = {frozenset(): 1.0}
        for ci, clause in enumerate(cnf.clauses):
            vs = cnf.clause_vars(ci)
            if v not in vs:
                continue
            p = 1.0
            for lit in clause:
                p *= distributions[abs(lit) - 1].get(_falsifying_value(lit), 0.0)
            table[frozenset(f"x{u}" for u in vs)] = table.get(frozenset(f"x{u}" for u in vs), 0.0) + p
        entries[name] = table
    return BacktrackChargeTable(variables, entries, span=frozenset(variables))


def clause_violation_probs(cnf: CnfInstance, distributions: Sequence[Mapping[int, float]]) -> list[float]:
    out = []
    for clause in cnf.clauses:
        p = 1.0
        for lit in clause:
            p *= distributions[abs(lit) - 1].get(_falsifying_value(lit), 0.0)
        out.append(p)
    return out


def backtracking_threshold(k: int) -> float:
    """Largest clause degree the uniform backtracking criterion tolerates:
    (2^k / k) (1 - 1/k)^(k-1), attained at weight k / (2(k-1))."""
    return (2.0 ** k / k) * (1.0 - 1.0 / k) ** (k - 1)


def optimal_backtracking_weight(k: int) -> float:
    return k / (2.0 * (k - 1))


def count_partial_satisfying(cnf: CnfInstance) -> int:
    """Number of partial assignments violating no clause, by
    inclusion-exclusion over sets of simultaneously violated clauses.

    A clause is violated only by one forced sub-assignment, so a clause
    set contributes 3^(free vars) when the forced values are consistent.
    """
    m = len(cnf.clauses)
    if m > 24:
        raise LllError("inclusion-exclusion capped at 24 clauses")
    forced = []
    for clause in cnf.clauses:
        forced.append({abs(l): _falsifying_value(l) for l in clause})
    total = 0
    for mask in range(1 << m):
        assign: dict = {}
        ok = True
        bits = 0
        mm = mask
        ci = 0
        while mm:
            if mm & 1:
                bits += 1
                for v, val in forced[ci].items():
                    if assign.get(v, val) != val:
                        ok = False
                        break
                    assign[v] = val
                if not ok:
                    break
            mm >>= 1
            ci += 1
        if not ok:
            continue
        total += (-1) ** bits * 3 ** (cnf.num_vars - len(assign))
    return total


def backtrack_lambda_init(cnf: CnfInstance) -> float:
    """theta is the point mass on the empty assignment and mu is uniform
    over partial satisfying assignments, so lambda_init = |Omega|."""
    return float(count_partial_satisfying(cnf))


def random_bounded_degree_cnf(n: int, k: int, degree: int, rng, max_tries: int = 10**5) -> CnfInstance:
    """Random k-CNF with every variable in at most ``degree`` clauses;
    packs clauses greedily until no variable has spare capacity."""
    if n == 0:
        return CnfInstance(0, ())
    if k > n:
        raise LllError("clause size exceeds variable count")
    budget = [degree] * (n + 1)
    clauses: list[tuple[int, ...]] = []
    tries = 0
    while tries < max_tries:
        tries += 1
        avail = [v for v in range(1, n + 1) if budget[v] > 0]
        if len(avail) < k:
            break
        pool = list(avail)
        rng.shuffle(pool)
        chosen = pool[:k]
        lits = tuple(sorted((v if rng.coin() else -v for v in chosen), key=abs))
        clauses.append(lits)
        for v in chosen:
            budget[v] -= 1
    return CnfInstance(n, tuple(clauses))
