"""Flaws/actions search framework.

A search problem is a state space with a list of flaws (bad subsets),
per-flaw action distributions used to *address* a flaw at a state, a
symmetric causality neighborhood over flaw indices, a measure over states
used in the analysis, and an initial-state sampler.  ``run`` walks the
induced multi-digraph until a flawless state is reached; ``charge``
computes the compatibility charge of a flaw exactly on enumerable
instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

from .rng import RandomSource, source_for_run

PROB_TOL = 1e-12
DEFAULT_MAX_STEPS = 10**6


class LllError(Exception):
    """Engine-level contract violation (bad input, cap exceeded, ...)."""


State = Any


@dataclass(frozen=True)
class SearchProblem:
    """Immutable description of a flaws/actions search problem.

    States are opaque hashable handles; ``canon`` gives the canonical byte
    serialization used for hashing across reports and distribution
    estimation.  ``weight`` is the unnormalized analysis measure; oracle
    machinery normalizes it once over ``enumerate_states`` when available.

    ``sample_action`` is the fast path used by runs; the optional
    ``action_distribution`` returns the exact distribution {state: prob}
    and enables oracle mode (charges, chain solves, support checks).
    """

    name: str
    num_flaws: int
    present: Callable[[int, State], bool]
    sample_action: Callable[[int, State, RandomSource], State]
    neighbors: Callable[[int], frozenset[int]]
    sample_init: Callable[[RandomSource], State]
    canon: Callable[[State], bytes]
    weight: Callable[[State], float] = lambda s: 1.0
    action_distribution: Callable[[int, State], dict[State, float]] | None = None
    enumerate_states: Callable[[], Iterable[State]] | None = None
    flaws_present: Callable[[State], list[int]] | None = None
    init_distribution: Callable[[State], float] | None = None
    init_ratio: float | None = None  # max over states of theta / normalized mu
    declared_charges: Sequence[float] | None = None
    default_weights: Sequence[float] | None = None  # prewired psi vector
    unassigned: Callable[[State], frozenset] | None = None  # backtracking only
    flaw_labels: Sequence[str] | None = None
    metadata: dict = field(default_factory=dict)

    def present_flaws(self, state: State) -> list[int]:
        if self.flaws_present is not None:
            return self.flaws_present(state)
        return [i for i in range(self.num_flaws) if self.present(i, state)]

    def label(self, i: int) -> str:
        if self.flaw_labels is not None:
            return self.flaw_labels[i]
        return str(i)

    def with_metadata(self, **kw) -> "SearchProblem":
        md = dict(self.metadata)
        md.update(kw)
        return replace(self, metadata=md)


@dataclass(frozen=True)
class Trajectory:
    """Execution record: initial state plus (flaw, resulting state, rho) steps."""

    initial_state: State
    steps: tuple[tuple[int, State, float | None], ...]

    @property
    def witness_sequence(self) -> tuple[int, ...]:
        return tuple(w for (w, _, _) in self.steps)

    def states(self) -> list[State]:
        return [self.initial_state] + [s for (_, s, _) in self.steps]


@dataclass(frozen=True)
class RunReport:
    terminated: bool
    steps: int
    resample_counts: tuple[int, ...]
    final_state: State
    seed: int
    trajectory: Trajectory | None = None

    def check_invariants(self, problem: SearchProblem) -> None:
        assert sum(self.resample_counts) == self.steps
        if self.terminated:
            assert not problem.present_flaws(self.final_state)


class FlawChoiceStrategy:
    """Picks which present flaw to address; may depend on the full history.

    The commutative-setting theorems are strategy-agnostic; the
    backtracking tail bound and the greedy-coloring weight bound require
    the specific priority orders their solvers install (see each solver's
    docs).
    """

    name = "abstract"

    def reset(self) -> None:
        pass

    def choose(self, present: list[int], state: State, history: list[int]) -> int:
        raise NotImplementedError


class LowestIndexStrategy(FlawChoiceStrategy):
    """Lowest flaw index first; flaw list order is declaration order."""

    name = "lowest_index"

    def choose(self, present, state, history):
        return min(present)


class FixedPriorityStrategy(FlawChoiceStrategy):
    """Addresses the present flaw that comes first in a fixed permutation."""

    name = "fixed_priority"

    def __init__(self, permutation: Sequence[int]):
        self.rank = {flaw: pos for pos, flaw in enumerate(permutation)}
        if len(self.rank) != len(permutation):
            raise LllError("fixed_priority permutation has repeated entries")

    def choose(self, present, state, history):
        return min(present, key=lambda i: self.rank[i])


class RecencyStrategy(FlawChoiceStrategy):
    """Most recently addressed present flaw first; never-addressed flaws
    rank last and tie-break by lowest index."""

    name = "recency"

    def __init__(self):
        self.last_addressed: dict[int, int] = {}

    def reset(self):
        self.last_addressed = {}

    def choose(self, present, state, history):
        return max(present, key=lambda i: (self.last_addressed.get(i, -1), -i))


class CustomStrategy(FlawChoiceStrategy):
    """Arbitrary callback on (present, state, history of addressed flaws)."""

    name = "custom"

    def __init__(self, fn: Callable[[list[int], State, list[int]], int]):
        self.fn = fn

    def choose(self, present, state, history):
        return self.fn(present, state, history)


def make_strategy(spec: str | FlawChoiceStrategy | None) -> FlawChoiceStrategy:
    if spec is None:
        return LowestIndexStrategy()
    if isinstance(spec, FlawChoiceStrategy):
        return spec
    if spec == "lowest_index":
        return LowestIndexStrategy()
    if spec == "recency":
        return RecencyStrategy()
    if isinstance(spec, tuple) and len(spec) == 2 and spec[0] == "fixed_priority":
        return FixedPriorityStrategy(spec[1])
    raise LllError(f"unknown strategy {spec!r}")


def recommended_strategy(problem: SearchProblem) -> FlawChoiceStrategy:
    """The strategy a solver's analysis assumes, from problem metadata."""
    return make_strategy(problem.metadata.get("strategy"))


def run(
    problem: SearchProblem,
    strategy: FlawChoiceStrategy | str | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
    run_index: int = 0,
    record_trajectory: bool = False,
    check_support: bool = False,
) -> RunReport:
    """Walk the search digraph from a fresh initial sample.

    Deterministic in (problem, strategy, seed, run_index, max_steps).
    Stops at the first flawless state or after ``max_steps`` steps; the
    censored case returns ``terminated=False`` rather than raising.
    """
    if max_steps < 0:
        raise LllError("max_steps must be nonnegative")
    strategy = make_strategy(strategy)
    strategy.reset()
    rng = source_for_run(seed, run_index)
    state = problem.sample_init(rng)
    counts = [0] * problem.num_flaws
    history: list[int] = []
    steps_rec: list[tuple[int, State, float | None]] = []
    initial = state

    steps = 0
    while True:
        present = problem.present_flaws(state)
        if not present:
            terminated = True
            break
        if steps >= max_steps:
            terminated = False
            break
        i = strategy.choose(present, state, history)
        if i not in present:
            raise LllError("invalid strategy")
        nxt = problem.sample_action(i, state, rng)
        rho = None
        if check_support or record_trajectory:
            if problem.action_distribution is not None:
                dist = problem.action_distribution(i, state)
                rho = dist.get(nxt)
                if check_support and (rho is None or rho <= 0):
                    raise LllError("inconsistent actions")
        counts[i] += 1
        if isinstance(strategy, RecencyStrategy):
            strategy.last_addressed[i] = steps
        history.append(i)
        if record_trajectory:
            steps_rec.append((i, nxt, rho))
        state = nxt
        steps += 1

    traj = Trajectory(initial, tuple(steps_rec)) if record_trajectory else None
    return RunReport(terminated, steps, tuple(counts), state, seed, traj)


# ---------------------------------------------------------------------------
# oracle-mode helpers


def state_list(problem: SearchProblem) -> list[State]:
    if problem.enumerate_states is None:
        raise LllError("charge requires oracle mode")
    return list(problem.enumerate_states())


def normalized_measure(problem: SearchProblem, states: list[State] | None = None) -> dict[State, float]:
    """Normalize the declared weights over the enumerated state space."""
    if states is None:
        states = state_list(problem)
    weights = {s: float(problem.weight(s)) for s in states}
    total = sum(weights.values())
    if total <= 0:
        raise LllError("measure has no mass")
    return {s: w / total for s, w in weights.items()}


def _charge_of_distributions(
    mu: dict[State, float],
    members: list[State],
    dist_of: Callable[[State], dict[State, float]],
) -> float:
    """max over target states of (sum over flaw members of mu * rho) / mu."""
    incoming: dict[State, float] = {}
    for s in members:
        for t, p in dist_of(s).items():
            if p == 0.0:
                continue
            incoming[t] = incoming.get(t, 0.0) + mu[s] * p
    worst = 0.0
    for t, mass in incoming.items():
        mu_t = mu.get(t, 0.0)
        if mu_t <= 0.0:
            if mass > PROB_TOL:
                raise LllError("measure support violation")
            continue
        worst = max(worst, mass / mu_t)
    return worst


def charge(problem: SearchProblem, i: int, states: list[State] | None = None,
           mu: dict[State, float] | None = None) -> float:
    """Exact charge of flaw i: the worst-case density of "sample the flaw
    under mu, then address it" against mu.  Always >= mu(f_i); equals
    mu(f_i) exactly when the actions resample perfectly.
    """
    if problem.action_distribution is None:
        raise LllError("charge requires oracle mode")
    if states is None:
        states = state_list(problem)
    if mu is None:
        mu = normalized_measure(problem, states)
    members = [s for s in states if problem.present(i, s)]
    if not members:
        return 0.0
    return _charge_of_distributions(mu, members, lambda s: problem.action_distribution(i, s))


def event_charge(
    problem: SearchProblem,
    event: Callable[[State], bool],
    event_actions: Callable[[State], dict[State, float]],
    states: list[State] | None = None,
) -> float:
    """Charge of an extra flaw defined by an arbitrary event with its own
    resampling distributions, under the same enumerable measure."""
    if problem.enumerate_states is None:
        raise LllError("charge requires oracle mode")
    if states is None:
        states = state_list(problem)
    mu = normalized_measure(problem, states)
    members = [s for s in states if event(s)]
    if not members:
        return 0.0
    return _charge_of_distributions(mu, members, event_actions)


def all_charges(problem: SearchProblem) -> list[float]:
    states = state_list(problem)
    mu = normalized_measure(problem, states)
    return [charge(problem, i, states, mu) for i in range(problem.num_flaws)]


def measure_of_flaws(problem: SearchProblem) -> list[float]:
    states = state_list(problem)
    mu = normalized_measure(problem, states)
    out = []
    for i in range(problem.num_flaws):
        out.append(sum(mu[s] for s in states if problem.present(i, s)))
    return out


def computed_init_ratio(problem: SearchProblem) -> float:
    """lambda_init = max over states of theta(state)/mu(state), oracle mode."""
    if problem.init_ratio is not None:
        return problem.init_ratio
    if problem.init_distribution is None or problem.enumerate_states is None:
        raise LllError("init ratio unknown; supply init_distribution or init_ratio")
    states = state_list(problem)
    mu = normalized_measure(problem, states)
    worst = 0.0
    for s in states:
        th = problem.init_distribution(s)
        if th == 0.0:
            continue
        if mu[s] <= 0.0:
            raise LllError("measure support violation")
        worst = max(worst, th / mu[s])
    return worst


# ---------------------------------------------------------------------------
# invariant validation


def validate_problem(problem: SearchProblem, check_causality: bool = True) -> None:
    """Exhaustive invariant check for enumerable instances.

    Verifies action distributions sum to one on every (flaw, member state),
    the neighborhood relation is symmetric, and the causality cover holds:
    every arc that leaves a flaw present-but-new (or re-present) lands the
    causing flaw in the target flaw's neighborhood.
    """
    for i in range(problem.num_flaws):
        for j in problem.neighbors(i):
            if i not in problem.neighbors(j):
                raise LllError(f"neighborhood not symmetric at ({i},{j})")
    if problem.action_distribution is None or problem.enumerate_states is None:
        return
    states = state_list(problem)
    for s in states:
        for i in problem.present_flaws(s):
            dist = problem.action_distribution(i, s)
            if not dist:
                raise LllError(f"flaw {i} has empty action set")
            total = sum(dist.values())
            if abs(total - 1.0) > PROB_TOL:
                raise LllError(f"action probabilities for flaw {i} sum to {total}")
            if check_causality:
                gamma_i = problem.neighbors(i)
                for t, p in dist.items():
                    if p <= 0:
                        continue
                    for j in problem.present_flaws(t):
                        if (j == i or not problem.present(j, s)) and j not in gamma_i:
                            raise LllError(
                                f"causality cover violated: flaw {i} introduces {j}"
                            )
