"""Witness trees, witness forests, stable sequences, and the exhaustive
commutativity checker.

Witness trees are unordered rooted trees labelled by flaw indices; tree
equality is label-preserving unordered-tree isomorphism, implemented by a
canonical encoding (sorted child encodings).  The backward construction
attaches each earlier flaw to the deepest eligible node, breaking depth
ties by lowest node id, which makes the build deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .core import LllError, SearchProblem, Trajectory, state_list
from .criteria import DependencyGraph

PRODUCT_REL_TOL = 1e-9
ENUM_TREE_NODE_CAP = 8


@dataclass
class WitnessTree:
    """Rooted unordered tree; node 0 is the root, parents[k] < k."""

    labels: list[int]
    parents: list[int]  # parents[0] == -1
    _canon: bytes | None = field(default=None, repr=False, compare=False)

    @property
    def root_label(self) -> int:
        return self.labels[0]

    def __len__(self) -> int:
        return len(self.labels)

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in self.labels]
        for k, p in enumerate(self.parents):
            if p >= 0:
                ch[p].append(k)
        return ch

    def depths(self) -> list[int]:
        d = [0] * len(self.labels)
        for k, p in enumerate(self.parents):
            if p >= 0:
                d[k] = d[p] + 1
        return d

    def level_labels(self) -> list[list[int]]:
        depths = self.depths()
        out: list[list[int]] = [[] for _ in range(max(depths) + 1)]
        for k, d in enumerate(depths):
            out[d].append(self.labels[k])
        return out

    def canonical(self) -> bytes:
        """Canonical encoding: label plus the sorted encodings of subtrees."""
        if self._canon is None:
            ch = self.children()

            def enc(k: int) -> bytes:
                parts = sorted(enc(c) for c in ch[k])
                return b"(" + str(self.labels[k]).encode() + b":" + b"".join(parts) + b")"

            self._canon = enc(0)
        return self._canon

    def same_tree(self, other: "WitnessTree") -> bool:
        return self.canonical() == other.canonical()

    def to_json_dict(self) -> dict:
        return {"labels": list(self.labels), "parents": list(self.parents)}

    @staticmethod
    def from_json_dict(d: dict) -> "WitnessTree":
        return WitnessTree(list(d["labels"]), list(d["parents"]))


def build_witness_tree(sequence: Sequence[int], k: int, graph: DependencyGraph) -> WitnessTree:
    """Backward witness-tree construction for step k of a flaw sequence.

    Starting from a single node labelled sequence[k-1], walk j = k-1 .. 1
    and attach sequence[j-1] to the deepest node whose label neighbors it
    (lowest node id on depth ties); drop it if no node is eligible.
    """
    if not (1 <= k <= len(sequence)):
        raise LllError("witness-tree index out of range")
    labels = [sequence[k - 1]]
    parents = [-1]
    depths = [0]
    for j in range(k - 2, -1, -1):
        w = sequence[j]
        best = -1
        best_depth = -1
        for node, lab in enumerate(labels):
            if graph.are_adjacent(lab, w) and depths[node] > best_depth:
                best = node
                best_depth = depths[node]
        if best >= 0:
            labels.append(w)
            parents.append(best)
            depths.append(best_depth + 1)
    return WitnessTree(labels, parents)


def trees_of_sequence(sequence: Sequence[int], graph: DependencyGraph,
                      max_nodes: int | None = None) -> Iterator[tuple[int, WitnessTree]]:
    """All (k, tree) pairs of a sequence, optionally capped by node count."""
    for k in range(1, len(sequence) + 1):
        t = build_witness_tree(sequence, k, graph)
        if max_nodes is None or len(t) <= max_nodes:
            yield k, t


def occurs(tree: WitnessTree, trajectory: Trajectory, graph: DependencyGraph) -> int | None:
    """Step index k at which the tree occurs in the trajectory, else None.
    Distinct steps yield distinct trees, so the witnessing k is unique."""
    seq = trajectory.witness_sequence
    target = tree.canonical()
    for k in range(1, len(seq) + 1):
        if seq[k - 1] != tree.root_label:
            continue
        built = build_witness_tree(seq, k, graph)
        if len(built) == len(tree) and built.canonical() == target:
            return k
    return None


# ---------------------------------------------------------------------------
# witness forests (backtracking runs)


@dataclass
class WitnessForest:
    """Variable-labelled forest recording a backtracking run: one root per
    initially unassigned variable, one child set per step.  A run of t
    steps has t addressed nodes; whatever the t-step frontier replay
    leaves over is the terminal unassigned set."""

    labels: list
    parents: list[int]  # -1 for roots
    order: Sequence  # ordering of variable labels (pi)
    num_steps: int

    def roots(self) -> list[int]:
        return [k for k, p in enumerate(self.parents) if p < 0]

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in self.labels]
        for k, p in enumerate(self.parents):
            if p >= 0:
                ch[p].append(k)
        return ch

    def _replay_frontier(self):
        rank = {v: r for r, v in enumerate(self.order)}
        ch = self.children()
        frontier = {k: self.labels[k] for k in self.roots()}
        addressed = []
        introduced: list[tuple[object, frozenset]] = []
        for _ in range(self.num_steps):
            if not frontier:
                raise LllError("inconsistent forest: frontier exhausted early")
            k = min(frontier, key=lambda n: rank[frontier[n]])
            kids = ch[k]
            addressed.append(self.labels[k])
            introduced.append((self.labels[k], frozenset(self.labels[c] for c in kids)))
            del frontier[k]
            for c in kids:
                frontier[c] = self.labels[c]
        return addressed, introduced, frontier

    def replay(self) -> tuple[list, list[tuple[object, frozenset]]]:
        """Reconstruct (addressed variables w_i, introduced sets S_i) by
        expanding the lowest-labelled frontier node for num_steps steps."""
        addressed, introduced, _ = self._replay_frontier()
        return addressed, introduced

    def terminal_unassigned(self) -> frozenset:
        _, _, frontier = self._replay_frontier()
        return frozenset(frontier.values())

    def to_json_dict(self) -> dict:
        return {
            "labels": [str(v) for v in self.labels],
            "parents": list(self.parents),
            "order": [str(v) for v in self.order],
            "num_steps": self.num_steps,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "WitnessForest":
        return WitnessForest(list(d["labels"]), list(d["parents"]),
                             tuple(d["order"]), int(d["num_steps"]))


def introduced_sets(trajectory: Trajectory, problem: SearchProblem) -> tuple[frozenset, list[tuple[object, frozenset]]]:
    """Per-step (variable, introduced set) records of a backtracking run:
    S_i = U(sigma_{i+1}) minus (U(sigma_i) minus {w_i})."""
    if problem.unassigned is None:
        raise LllError("problem does not expose unassigned variables")
    states = trajectory.states()
    s0 = problem.unassigned(states[0])
    rec = []
    labels = problem.flaw_labels
    for t, (w, _, _) in enumerate(trajectory.steps):
        before = problem.unassigned(states[t])
        after = problem.unassigned(states[t + 1])
        var = labels[w] if labels is not None else w
        if var not in before:
            raise LllError("inconsistent backtracking record")
        rec.append((var, frozenset(after - (before - {var}))))
    return frozenset(s0), rec


def build_witness_forest(s0: frozenset, records: Sequence[tuple[object, frozenset]],
                         order: Sequence) -> WitnessForest:
    """Forest construction: lay one root per element of S_0, then give the
    lowest-labelled frontier node its step's introduced set as children."""
    rank = {v: r for r, v in enumerate(order)}
    labels = sorted(s0, key=lambda v: rank[v])
    parents = [-1] * len(labels)
    frontier = {k: labels[k] for k in range(len(labels))}
    for step, (var, intro) in enumerate(records):
        if not frontier:
            raise LllError("inconsistent backtracking record: empty frontier")
        k = min(frontier, key=lambda n: rank[frontier[n]])
        if frontier[k] != var:
            raise LllError(
                f"inconsistent backtracking record at step {step}: "
                f"expected {frontier[k]!r}, got {var!r}"
            )
        del frontier[k]
        for u in sorted(intro, key=lambda v: rank[v]):
            labels.append(u)
            parents.append(k)
            frontier[len(labels) - 1] = u
    return WitnessForest(labels, parents, tuple(order), len(records))


def forest_from_trajectory(trajectory: Trajectory, problem: SearchProblem) -> WitnessForest:
    s0, rec = introduced_sets(trajectory, problem)
    order = problem.flaw_labels if problem.flaw_labels is not None else list(range(problem.num_flaws))
    return build_witness_forest(s0, rec, order)


# ---------------------------------------------------------------------------
# stable sequences


def stable_partition(reversed_sequence: Sequence[int], graph: DependencyGraph) -> list[frozenset[int]]:
    """The unique greedy partition of a reversed stable sequence: open a
    new segment exactly when the next index conflicts with the current one.

    Raises when the input is not the flattening of a stable sequence
    (repeated index inside a segment, or a segment escaping the previous
    segment's neighborhood).
    """
    if not reversed_sequence:
        raise LllError("empty sequence has no stable partition")
    segments: list[list[int]] = [[reversed_sequence[0]]]
    for w in reversed_sequence[1:]:
        last = segments[-1]
        if any(graph.are_adjacent(u, w) for u in last):
            segments.append([w])
        elif w in last:
            raise LllError("not a stable sequence: repeated index within a segment")
        else:
            last.append(w)
    out = [frozenset(seg) for seg in segments]
    for r in range(len(out) - 1):
        reachable = set()
        for u in out[r]:
            reachable |= set(graph.adj[u])
        if not out[r + 1] <= reachable:
            raise LllError("not a stable sequence: segment escapes neighborhood")
    return out


def tree_to_stable_sequence(tree: WitnessTree, order: Sequence[int]) -> tuple[int, ...]:
    """Witness sequence whose reversal is the pi-stable flattening of the
    tree's level label sets; the inverse of the tree construction."""
    rank = {v: r for r, v in enumerate(order)}
    levels = tree.level_labels()
    flat: list[int] = []
    for level in levels:
        if len(set(level)) != len(level):
            raise LllError("tree levels must carry distinct labels")
        flat.extend(sorted(level, key=lambda v: rank[v]))
    return tuple(reversed(flat))


def stable_sequence_to_tree(sequence: Sequence[int], graph: DependencyGraph) -> WitnessTree:
    """Build the witness tree of the final step; for sequences whose
    reversal is stable with a singleton first segment this inverts
    ``tree_to_stable_sequence`` exactly."""
    return build_witness_tree(sequence, len(sequence), graph)


# ---------------------------------------------------------------------------
# exhaustive commutativity check


@dataclass(frozen=True)
class CommutativityReport:
    commutative: bool
    checked_pairs: int
    violations: tuple[dict, ...]

    def to_json_dict(self) -> dict:
        return {
            "commutative": self.commutative,
            "checked_pairs": self.checked_pairs,
            "violations": [
                {k: (str(v) if not isinstance(v, (int, float)) else v) for k, v in viol.items()}
                for viol in self.violations
            ],
        }


def check_commutativity(problem: SearchProblem, state_cap: int = 2 * 10**5,
                        max_violations: int = 3) -> CommutativityReport:
    """Exhaustively certify the swap property on an enumerable instance.

    For every non-neighboring ordered flaw pair (i, j) and endpoints
    (s1, s3), an injective probability-preserving swap of the two-step
    trajectories exists iff the i-then-j and j-then-i paths have equal
    counts at every product value (Hall's condition on the bipartite
    equal-product graph, applied per endpoint class).
    """
    if problem.action_distribution is None or problem.enumerate_states is None:
        raise LllError("commutativity check requires oracle mode")
    states = state_list(problem)
    if len(states) > state_cap:
        raise LllError("state space too large for exhaustive commutativity check")
    m = problem.num_flaws
    present_map = {s: problem.present_flaws(s) for s in states}
    violations: list[dict] = []
    checked = 0

    def two_step_products(i: int, j: int) -> dict[tuple, dict[float, int]]:
        """(s1, s3) -> multiset of rho products over i-then-j paths."""
        out: dict[tuple, dict[float, int]] = {}
        for s1 in states:
            if i not in present_map[s1]:
                continue
            for s2, p12 in problem.action_distribution(i, s1).items():
                if p12 <= 0 or j not in present_map[s2]:
                    continue
                for s3, p23 in problem.action_distribution(j, s2).items():
                    if p23 <= 0:
                        continue
                    bucket = out.setdefault((s1, s3), {})
                    prod = p12 * p23
                    key_p = prod
                    for q in bucket:
                        if abs(q - prod) <= PRODUCT_REL_TOL * max(q, prod):
                            key_p = q
                            break
                    bucket[key_p] = bucket.get(key_p, 0) + 1
        return out

    # i-then-i pairs need no check: without a self-loop, addressing i
    # removes it (causality cover), so no valid i-then-i trajectory exists
    for i in range(m):
        for j in range(i + 1, m):
            if j in problem.neighbors(i):
                continue
            checked += 1
            fwd = two_step_products(i, j)
            bwd = two_step_products(j, i)
            keys = set(fwd) | set(bwd)
            for key in keys:
                f = fwd.get(key, {})
                b = bwd.get(key, {})
                products = set(f) | set(b)
                for p in products:
                    cf = _matched_count(f, p)
                    cb = _matched_count(b, p)
                    if cf != cb:
                        violations.append({
                            "flaws": (i, j),
                            "endpoints": (problem.canon(key[0]).hex(), problem.canon(key[1]).hex()),
                            "product": p,
                            "count_forward": cf,
                            "count_backward": cb,
                        })
                        if len(violations) >= max_violations:
                            return CommutativityReport(False, checked, tuple(violations))
                        break
    return CommutativityReport(not violations, checked, tuple(violations))


def _matched_count(bucket: dict[float, int], p: float) -> int:
    for q, c in bucket.items():
        if abs(q - p) <= PRODUCT_REL_TOL * max(q, p):
            return c
    return 0


# ---------------------------------------------------------------------------
# enumeration of witness trees


def enumerate_stable_set_sequences(
    root: int, graph: DependencyGraph, max_total: int
) -> Iterator[tuple[frozenset[int], ...]]:
    """Stable set sequences (I_1 = {root}, I_2, ...): nonempty independent
    sets, each contained in the previous set's neighborhood, with at most
    ``max_total`` elements overall."""

    def independent_subsets(pool: list[int], limit: int) -> Iterator[frozenset[int]]:
        for size in range(1, limit + 1):
            for combo in itertools.combinations(pool, size):
                if all(
                    not graph.are_adjacent(a, b)
                    for a, b in itertools.combinations(combo, 2)
                ):
                    yield frozenset(combo)

    def rec(levels: tuple[frozenset[int], ...], used: int):
        yield levels
        budget = max_total - used
        if budget <= 0:
            return
        pool = sorted(set().union(*(graph.adj[j] for j in levels[-1])))
        for nxt in independent_subsets(pool, budget):
            yield from rec(levels + (nxt,), used + len(nxt))

    yield from rec((frozenset({root}),), 1)


def tree_from_level_sets(levels: Sequence[frozenset[int]], graph: DependencyGraph) -> WitnessTree:
    """The witness tree whose level label sets are the given stable set
    sequence: order segments naturally, reverse, and run the backward
    construction on the result."""
    flat: list[int] = []
    for level in levels:
        flat.extend(sorted(level))
    seq = list(reversed(flat))
    return build_witness_tree(seq, len(seq), graph)


def enumerate_witness_trees(
    root: int,
    graph: DependencyGraph,
    gamma: Sequence[float],
    max_nodes: int,
) -> Iterator[tuple[WitnessTree, float]]:
    """Stream every witness tree rooted at ``root`` that some execution
    can produce, up to ``max_nodes`` nodes, paired with its charge
    product.

    Occurring trees are exactly the images of stable set sequences under
    the level-set bijection, so the stream enumerates those sequences and
    builds each tree once.
    """
    if max_nodes > ENUM_TREE_NODE_CAP:
        raise LllError(f"witness-tree enumeration capped at {ENUM_TREE_NODE_CAP} nodes")
    if max_nodes < 1:
        return
    for levels in enumerate_stable_set_sequences(root, graph, max_nodes):
        tree = tree_from_level_sets(levels, graph)
        weight = 1.0
        for level in levels:
            for j in level:
                weight *= gamma[j]
        yield tree, weight
