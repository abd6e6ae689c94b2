"""Adaptive discount allocation.

An adaptive policy probes one seed-discount offer at a time against a
fixed but hidden realization. An accepted offer commits its rate,
triggers the seed's cascade, and reveals the out-edges of every node
the cascade reaches; a rejected offer costs nothing but rules out that
node at that rate and below. Policies here: benefit-per-cost greedy, a
two-branch variant that can spend everything on the single best node,
and an iterated version of that branch rule. A backward-induction
oracle computes the optimal policy value on tiny instances.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cascade import (
    DiffusionRealization,
    PartialObservation,
    Realization,
    SeedingRealization,
    _relevant_subgraph,
    hoeffding_radius,
    reveal_cascade,
    spread_exact,
    spread_mc,
)
from .errors import PolicyContractError, TooLargeError, ValidationError
from .graph import Instance, SeedDiscountPair, SocialGraph
from .nonadaptive import BudgetSpec
from .rng import as_stream, child, generator

_EVAL_CHUNK = 64
DEFAULT_MAX_OUTCOMES = 200_000


@dataclass
class PolicyState:
    """Mutable per-trajectory view: budget, open offers, observation."""

    budget_left: Fraction
    available: set[SeedDiscountPair]
    obs: PartialObservation
    committed: list[SeedDiscountPair] = field(default_factory=list)

    def copy(self) -> "PolicyState":
        return PolicyState(
            budget_left=self.budget_left,
            available=set(self.available),
            obs=self.obs.copy(),
            committed=list(self.committed),
        )


@dataclass(frozen=True)
class ProbeRecord:
    pair: SeedDiscountPair
    accepted: bool
    newly_influenced: tuple[int, ...]
    revealed: tuple[tuple[int, bool], ...]


@dataclass(frozen=True)
class TrajectoryRecord:
    """Everything one policy run did and saw."""

    probes: tuple[ProbeRecord, ...]
    delivered_cost: float
    influenced: frozenset[int]
    cascade_size: int

    def log_lines(self, graph: SocialGraph) -> list[str]:
        lines = []
        for rec in self.probes:
            parts = [
                "probe",
                graph.labels[rec.pair.node],
                _fmt_rate(rec.pair.rate),
                "accept" if rec.accepted else "reject",
            ]
            for eidx, live in rec.revealed:
                e = graph.edges[eidx]
                parts.append(
                    f"{graph.labels[e.src]}->{graph.labels[e.dst]}:{'live' if live else 'blocked'}"
                )
            lines.append(" ".join(parts))
        return lines


def _fmt_rate(rate: float) -> str:
    return str(int(rate)) if rate == int(rate) else repr(rate)


def initial_state(instance: Instance, spec: BudgetSpec) -> PolicyState:
    return PolicyState(
        budget_left=spec.exact_budget,
        available=set(instance.all_pairs()),
        obs=PartialObservation(),
    )


def _apply_probe(instance: Instance, state: PolicyState, pair: SeedDiscountPair, realization: Realization) -> ProbeRecord:
    menu = instance.menu
    if pair not in state.available:
        raise PolicyContractError(f"probe {pair} is not available")
    rate_exact = menu.exact[pair.rate]
    if rate_exact > state.budget_left:
        raise PolicyContractError(f"probe {pair} exceeds the remaining budget {float(state.budget_left)}")
    accepted = realization.seeding.accepts(pair.node, menu.index_of(pair.rate))
    if accepted:
        state.budget_left -= rate_exact
        state.committed.append(pair)
        newly, revealed = reveal_cascade(instance.graph, realization.diffusion, state.obs, pair.node)
        # Influenced nodes are spent: offering them anything buys nothing.
        state.available = {p for p in state.available if p.node not in state.obs.influenced}
    else:
        newly, revealed = (), ()
        state.available = {
            p for p in state.available if p.node != pair.node or p.rate > pair.rate
        }
    state.obs.probed.append((pair, accepted))
    return ProbeRecord(pair=pair, accepted=accepted, newly_influenced=newly, revealed=revealed)


def _execute(policy, instance: Instance, spec: BudgetSpec, state: PolicyState, realization: Realization) -> TrajectoryRecord:
    policy.begin(state)
    probes: list[ProbeRecord] = []
    while True:
        pair = policy.next_probe(state)
        if pair is None:
            break
        probes.append(_apply_probe(instance, state, pair, realization))
    delivered = spec.exact_budget - state.budget_left
    return TrajectoryRecord(
        probes=tuple(probes),
        delivered_cost=float(delivered),
        influenced=frozenset(state.obs.influenced),
        cascade_size=len(state.obs.influenced),
    )


def run_policy(policy, instance: Instance, spec: BudgetSpec, realization: Realization) -> TrajectoryRecord:
    """Execute one trajectory of `policy` against a fixed realization."""
    return _execute(policy, instance, spec, initial_state(instance, spec), realization)


class SpreadEstimator:
    """Expected residual cascade of a single node, cached per influenced set.

    The residual spread depends only on the influenced set, not on which
    edges were revealed, because every revealed edge leaves an influenced
    source behind.
    """

    def __init__(self, graph: SocialGraph, *, mode: str = "exact", samples: int = 1000,
                 stream=None, max_uncertain_edges: int = 25):
        if mode not in ("exact", "mc"):
            raise ValidationError(f"spread mode must be 'exact' or 'mc', got {mode!r}")
        if mode == "mc" and stream is None:
            raise ValidationError("mc spread estimation needs a seed stream")
        self.graph = graph
        self.mode = mode
        self.samples = samples
        self.stream = as_stream(stream) if stream is not None else None
        self.max_uncertain_edges = max_uncertain_edges
        self._cache: dict[tuple[frozenset[int], int], float] = {}

    def residual_spread(self, influenced: set[int], v: int) -> float:
        key = (frozenset(influenced), v)
        if key not in self._cache:
            restrict = set(range(self.graph.node_count)) - set(influenced)
            if self.mode == "exact":
                val = spread_exact(
                    self.graph, [v], restrict=restrict, max_uncertain_edges=self.max_uncertain_edges
                )
            else:
                dommask = 0
                for u in influenced:
                    dommask |= 1 << u
                val = spread_mc(
                    self.graph, [v], self.samples, child(self.stream, v, dommask), restrict=restrict
                )
            self._cache[key] = val
        return self._cache[key]


class GreedyPolicy:
    """Probe the affordable offer with the best residual spread per rate."""

    def __init__(self, instance: Instance, estimator: SpreadEstimator):
        self.instance = instance
        self.estimator = estimator

    def begin(self, state: PolicyState) -> None:
        pass

    def next_probe(self, state: PolicyState) -> SeedDiscountPair | None:
        exact = self.instance.menu.exact
        affordable = [p for p in state.available if exact[p.rate] <= state.budget_left]
        if not affordable:
            return None
        best_pair = None
        best_ratio = -1.0
        for pair in sorted(affordable):  # ties keep the lowest node, then lowest rate
            delta = self.estimator.residual_spread(state.obs.influenced, pair.node)
            ratio = delta / pair.rate
            if ratio > best_ratio:
                best_ratio, best_pair = ratio, pair
        return best_pair


def _rejection_floors(instance: Instance, obs: PartialObservation) -> dict[int, int]:
    """Highest rejected rate index per node observed so far."""
    menu = instance.menu
    floors: dict[int, int] = {}
    for pair, accepted in obs.probed:
        if not accepted:
            ridx = menu.index_of(pair.rate)
            if ridx > floors.get(pair.node, -1):
                floors[pair.node] = ridx
    return floors


def _threshold_options(row: tuple[float, ...], floor_idx: int) -> list[tuple[int, float]]:
    """Posterior over the cheapest acceptable rate index, given rejections.

    A rejection at floor_idx pins the threshold above row[floor_idx];
    the remaining probability splits across the higher menu intervals,
    with len(row) standing for "never accepts".
    """
    m = len(row)
    low = row[floor_idx] if floor_idx >= 0 else 0.0
    denom = 1.0 - low
    if denom <= 0.0:
        return [(m, 1.0)]
    options: list[tuple[int, float]] = []
    prev = low
    for i in range(floor_idx + 1, m):
        p = row[i]
        if p > prev:
            options.append((i, (p - prev) / denom))
            prev = p
    if prev < 1.0:
        options.append((m, (1.0 - prev) / denom))
    return options


def _undetermined_edges(graph: SocialGraph, obs: PartialObservation) -> list[int]:
    return [
        i for i, e in enumerate(graph.edges)
        if i not in obs.revealed and 0.0 < e.prob < 1.0
    ]


def _resolved_live(graph: SocialGraph, obs: PartialObservation) -> list[bool]:
    """Edge states fixed by observation or by a 0/1 probability."""
    return [
        obs.revealed[i] if i in obs.revealed else graph.edges[i].prob >= 1.0
        for i in range(len(graph.edges))
    ]


def conditional_outcome_count(instance: Instance, obs: PartialObservation) -> int:
    """Number of joint realizations an exhaustive pass would enumerate."""
    floors = _rejection_floors(instance, obs)
    count = 1
    for v in range(instance.graph.node_count):
        if v in obs.influenced:
            continue
        count *= max(1, len(_threshold_options(instance.model.probs[v], floors.get(v, -1))))
    return count << len(_undetermined_edges(instance.graph, obs))


def enumerate_conditional_realizations(instance: Instance, obs: PartialObservation,
                                       max_outcomes: int = DEFAULT_MAX_OUTCOMES):
    """Yield (weight, realization) consistent with `obs`, weights summing to 1.

    Thresholds are enumerated at menu-interval resolution, which is all
    a policy can ever distinguish. Influenced nodes get the "never
    accepts" sentinel; nothing may probe them again.
    """
    count = conditional_outcome_count(instance, obs)
    if count > max_outcomes:
        raise TooLargeError(f"exhaustive evaluation needs {count} realizations, cap is {max_outcomes}")
    graph, model = instance.graph, instance.model
    n, m = graph.node_count, len(instance.menu)
    floors = _rejection_floors(instance, obs)
    varying_nodes: list[tuple[int, list[tuple[int, float]]]] = []
    base_idx = [m] * n
    for v in range(n):
        if v in obs.influenced:
            continue
        options = _threshold_options(model.probs[v], floors.get(v, -1))
        if len(options) == 1:
            base_idx[v] = options[0][0]
        else:
            varying_nodes.append((v, options))
    varying_edges = _undetermined_edges(graph, obs)
    base_live = _resolved_live(graph, obs)
    for combo in itertools.product(*(opts for _, opts in varying_nodes)):
        idx = list(base_idx)
        w_nodes = 1.0
        for (v, _), (i, p) in zip(varying_nodes, combo):
            idx[v] = i
            w_nodes *= p
        for mask in range(1 << len(varying_edges)):
            live = list(base_live)
            w = w_nodes
            for j, eidx in enumerate(varying_edges):
                p = graph.edges[eidx].prob
                if (mask >> j) & 1:
                    live[eidx] = True
                    w *= p
                else:
                    live[eidx] = False
                    w *= 1.0 - p
            yield w, Realization(
                seeding=SeedingRealization(min_rate_idx=tuple(idx)),
                diffusion=DiffusionRealization(live=tuple(live)),
            )


def sample_conditional_realization(instance: Instance, obs: PartialObservation, gen: np.random.Generator) -> Realization:
    """Draw a realization consistent with `obs` (nodes first, then edges)."""
    graph, model = instance.graph, instance.model
    n, m = graph.node_count, len(instance.menu)
    floors = _rejection_floors(instance, obs)
    idx = [m] * n
    for v in range(n):
        if v in obs.influenced:
            continue
        options = _threshold_options(model.probs[v], floors.get(v, -1))
        if len(options) == 1:
            idx[v] = options[0][0]
            continue
        u = gen.random()
        chosen = options[-1][0]
        for i, p in options:
            u -= p
            if u < 0:
                chosen = i
                break
        idx[v] = chosen
    live = _resolved_live(graph, obs)
    for eidx in _undetermined_edges(graph, obs):
        live[eidx] = bool(gen.random() < graph.edges[eidx].prob)
    return Realization(
        seeding=SeedingRealization(min_rate_idx=tuple(idx)),
        diffusion=DiffusionRealization(live=tuple(live)),
    )


@dataclass(frozen=True)
class BranchConfig:
    """How two-branch policies estimate the greedy fallback's value."""

    mode: str = "exhaustive"  # or "rollouts"
    rollouts: int = 1000
    max_outcomes: int = DEFAULT_MAX_OUTCOMES

    def __post_init__(self):
        if self.mode not in ("exhaustive", "rollouts"):
            raise ValidationError(f"branch mode must be 'exhaustive' or 'rollouts', got {self.mode!r}")
        if self.rollouts < 1:
            raise ValidationError("rollouts must be at least 1")


class BranchEstimator:
    """Expected additional influence of running greedy from a given state.

    Estimates are memoized by (influenced set, rejection floors, budget),
    the whole of what the greedy continuation can depend on. Rollout
    draws are keyed the same way, so estimates never depend on when or
    how often they are requested.
    """

    def __init__(self, instance: Instance, spec: BudgetSpec, estimator: SpreadEstimator,
                 config: BranchConfig, stream=None):
        if config.mode == "rollouts" and stream is None:
            raise ValidationError("rollout branch estimation needs a seed stream")
        self.instance = instance
        self.spec = spec
        self.config = config
        self.stream = as_stream(stream) if stream is not None else None
        self._greedy = GreedyPolicy(instance, estimator)
        self._memo: dict[tuple, float] = {}

    def _state_key(self, state: PolicyState) -> tuple[int, int, Fraction]:
        dommask = 0
        for u in state.obs.influenced:
            dommask |= 1 << u
        floors = _rejection_floors(self.instance, state.obs)
        m = len(self.instance.menu)
        floors_code = 0
        for v, fl in floors.items():
            floors_code += (fl + 1) * (m + 1) ** v
        return (dommask, floors_code, state.budget_left)

    def greedy_value_from(self, state: PolicyState) -> float:
        key = self._state_key(state)
        if key in self._memo:
            return self._memo[key]
        base = len(state.obs.influenced)
        if self.config.mode == "exhaustive":
            total = 0.0
            for w, realization in enumerate_conditional_realizations(
                self.instance, state.obs, self.config.max_outcomes
            ):
                record = _execute(self._greedy, self.instance, self.spec, state.copy(), realization)
                total += w * (record.cascade_size - base)
            val = total
        else:
            root = child(self.stream, key[0], key[1], key[2].numerator, key[2].denominator)
            total = 0
            for r in range(self.config.rollouts):
                realization = sample_conditional_realization(self.instance, state.obs, generator(root, r))
                record = _execute(self._greedy, self.instance, self.spec, state.copy(), realization)
                total += record.cascade_size - base
            val = total / self.config.rollouts
        self._memo[key] = val
        return val


class EnhancedGreedyPolicy:
    """Either spend the full top rate on the highest-spread node, or run greedy.

    The one-shot branch is taken when its expected value, acceptance
    chance times spread, beats the estimated value of the greedy
    policy. With a budget below the top rate the branch is off the
    table and this is plain greedy.
    """

    def __init__(self, instance: Instance, spec: BudgetSpec, estimator: SpreadEstimator,
                 branch: BranchEstimator):
        self.instance = instance
        self.spec = spec
        self.estimator = estimator
        self.branch = branch
        self._greedy = GreedyPolicy(instance, estimator)
        self._delegate = False
        self._plan: SeedDiscountPair | None = None

    def begin(self, state: PolicyState) -> None:
        self._delegate = False
        self._plan = None
        menu = self.instance.menu
        d_max = menu.d_max
        if menu.exact[d_max] > state.budget_left:
            self._delegate = True
            self._greedy.begin(state)
            return
        v_star, delta = self._best_node(state)
        if v_star is None:
            self._delegate = True
            return
        p = self.instance.model.prob_at_rate(v_star, d_max)
        if p * delta > self.branch.greedy_value_from(state):
            self._plan = SeedDiscountPair(v_star, d_max)
        else:
            self._delegate = True
            self._greedy.begin(state)

    def _best_node(self, state: PolicyState):
        best_v, best_delta = None, -1.0
        for v in range(self.instance.graph.node_count):
            if v in state.obs.influenced:
                continue
            delta = self.estimator.residual_spread(state.obs.influenced, v)
            if delta > best_delta:
                best_v, best_delta = v, delta
        return best_v, best_delta

    def next_probe(self, state: PolicyState) -> SeedDiscountPair | None:
        if self._delegate:
            return self._greedy.next_probe(state)
        plan, self._plan = self._plan, None
        return plan


class IteratedHeuristicPolicy:
    """Repeat the one-shot branch on the residual graph until it stops paying.

    Each round offers the top rate to the unspent node with the best
    residual spread if that beats the greedy continuation; acceptance
    shrinks the graph, rejection retires the node. Otherwise the run
    finishes under plain greedy.
    """

    def __init__(self, instance: Instance, spec: BudgetSpec, estimator: SpreadEstimator,
                 branch: BranchEstimator):
        self.instance = instance
        self.spec = spec
        self.estimator = estimator
        self.branch = branch
        self._greedy = GreedyPolicy(instance, estimator)
        self._delegate = False

    def begin(self, state: PolicyState) -> None:
        self._delegate = False

    def next_probe(self, state: PolicyState) -> SeedDiscountPair | None:
        if self._delegate:
            return self._greedy.next_probe(state)
        candidates = sorted({p.node for p in state.available})
        menu = self.instance.menu
        d_max = menu.d_max
        if candidates and menu.exact[d_max] <= state.budget_left:
            best_v, best_delta = None, -1.0
            for v in candidates:
                delta = self.estimator.residual_spread(state.obs.influenced, v)
                if delta > best_delta:
                    best_v, best_delta = v, delta
            pair = SeedDiscountPair(best_v, d_max)
            if pair in state.available:
                p = self.instance.model.prob_at_rate(best_v, d_max)
                if p * best_delta > self.branch.greedy_value_from(state):
                    return pair
        self._delegate = True
        return self._greedy.next_probe(state)


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = "exact"
    samples: int = 1000
    max_uncertain_edges: int = 25

    def build(self, graph: SocialGraph, stream) -> SpreadEstimator:
        return SpreadEstimator(
            graph, mode=self.mode, samples=self.samples, stream=stream,
            max_uncertain_edges=self.max_uncertain_edges,
        )


@dataclass(frozen=True)
class GreedyFactory:
    instance: Instance
    spec: BudgetSpec
    estimator: EstimatorConfig = EstimatorConfig()

    def __call__(self, stream) -> GreedyPolicy:
        return GreedyPolicy(self.instance, self.estimator.build(self.instance.graph, child(as_stream(stream), 10)))


@dataclass(frozen=True)
class EnhancedFactory:
    instance: Instance
    spec: BudgetSpec
    estimator: EstimatorConfig = EstimatorConfig()
    branch: BranchConfig = BranchConfig()

    def __call__(self, stream) -> EnhancedGreedyPolicy:
        root = as_stream(stream)
        est = self.estimator.build(self.instance.graph, child(root, 10))
        br = BranchEstimator(self.instance, self.spec, est, self.branch, stream=child(root, 11))
        return EnhancedGreedyPolicy(self.instance, self.spec, est, br)


@dataclass(frozen=True)
class IteratedFactory:
    instance: Instance
    spec: BudgetSpec
    estimator: EstimatorConfig = EstimatorConfig()
    branch: BranchConfig = BranchConfig()

    def __call__(self, stream) -> IteratedHeuristicPolicy:
        root = as_stream(stream)
        est = self.estimator.build(self.instance.graph, child(root, 10))
        br = BranchEstimator(self.instance, self.spec, est, self.branch, stream=child(root, 11))
        return IteratedHeuristicPolicy(self.instance, self.spec, est, br)


def _mc_chunk(args):
    factory, instance, spec, entropy, spawn_key, lo, hi = args
    root = np.random.SeedSequence(entropy=entropy, spawn_key=tuple(spawn_key))
    policy = factory(child(root, 1))
    sizes = []
    for t in range(lo, hi):
        realization = sample_conditional_realization(instance, PartialObservation(), generator(root, 2, t))
        record = run_policy(policy, instance, spec, realization)
        sizes.append(record.cascade_size)
    return sizes


def evaluate_policy(policy_factory, instance: Instance, spec: BudgetSpec, trials,
                    stream=None, *, workers: int = 1, max_outcomes: int = DEFAULT_MAX_OUTCOMES,
                    delta: float = 0.05) -> tuple[float, float]:
    """Expected cascade size of a policy, with a confidence radius.

    trials="exhaustive" enumerates every realization (radius 0.0);
    an integer samples that many realizations and reports a Hoeffding
    radius at confidence 1 - delta. Sampled trials use per-trial
    substreams and integer totals, so the result is identical for any
    worker count.
    """
    if trials == "exhaustive":
        policy = policy_factory(child(as_stream(stream), 0))
        total = 0.0
        for w, realization in enumerate_conditional_realizations(instance, PartialObservation(), max_outcomes):
            record = run_policy(policy, instance, spec, realization)
            total += w * record.cascade_size
        return total, 0.0
    if not isinstance(trials, int) or trials < 1:
        raise ValidationError(f"trials must be a positive int or 'exhaustive', got {trials!r}")
    root = as_stream(stream)
    chunks = [
        (policy_factory, instance, spec, root.entropy, tuple(root.spawn_key), lo, min(lo + _EVAL_CHUNK, trials))
        for lo in range(0, trials, _EVAL_CHUNK)
    ]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_chunk, chunks))
    else:
        results = [_mc_chunk(c) for c in chunks]
    total = sum(size for chunk in results for size in chunk)
    mean = total / trials
    return mean, hoeffding_radius(instance.graph.node_count, trials, delta)


def optimal_policy_oracle(instance: Instance, spec: BudgetSpec, *,
                          max_nodes: int = 5, max_edges: int = 6, max_rates: int = 2) -> float:
    """Optimal adaptive policy value by backward induction over belief states.

    A state is (influenced set, per-node highest rejected rate, budget);
    that is sufficient because edges out of uninfluenced nodes stay
    independent of everything revealed so far. Only probes with a
    positive conditional acceptance chance are considered; anything else
    changes no beliefs and wastes nothing but time.
    """
    graph, model, menu = instance.graph, instance.model, instance.menu
    n, m = graph.node_count, len(menu)
    if n > max_nodes:
        raise TooLargeError(f"optimal oracle handles at most {max_nodes} nodes, got {n}")
    if len(graph.edges) > max_edges:
        raise TooLargeError(f"optimal oracle handles at most {max_edges} edges, got {len(graph.edges)}")
    if m > max_rates:
        raise TooLargeError(f"optimal oracle handles menus up to {max_rates} rates, got {m}")
    rows = model.probs
    exact_rates = [menu.exact[r] for r in menu.rates]

    cascade_memo: dict[tuple[int, int], list[tuple[int, float]]] = {}

    def cascade_dist(dommask: int, v: int) -> list[tuple[int, float]]:
        key = (dommask, v)
        if key in cascade_memo:
            return cascade_memo[key]
        allowed = {u for u in range(n) if not (dommask >> u) & 1}
        adj, _closure, uncertain = _relevant_subgraph(graph, [v], allowed)
        probs = [graph.edges[e].prob for e in uncertain]
        dist: dict[int, float] = {}
        for mask in range(1 << len(uncertain)):
            w = 1.0
            for i, p in enumerate(probs):
                w *= p if (mask >> i) & 1 else 1.0 - p
            if w == 0.0:
                continue
            seen = {v}
            stack = [v]
            while stack:
                u = stack.pop()
                for wnode, slot in adj.get(u, ()):
                    if wnode in seen:
                        continue
                    if slot >= 0 and not (mask >> slot) & 1:
                        continue
                    seen.add(wnode)
                    stack.append(wnode)
            addmask = 0
            for u in seen:
                addmask |= 1 << u
            dist[addmask] = dist.get(addmask, 0.0) + w
        out = sorted(dist.items())
        cascade_memo[key] = out
        return out

    value_memo: dict[tuple[int, tuple[int, ...], Fraction], float] = {}

    def value(dommask: int, floors: tuple[int, ...], budget: Fraction) -> float:
        key = (dommask, floors, budget)
        if key in value_memo:
            return value_memo[key]
        best = 0.0
        for v in range(n):
            if (dommask >> v) & 1:
                continue
            p_prev = rows[v][floors[v]] if floors[v] >= 0 else 0.0
            for i in range(m):
                if exact_rates[i] > budget:
                    continue
                p = rows[v][i]
                if p <= p_prev:
                    continue
                q = (p - p_prev) / (1.0 - p_prev)
                acc = 0.0
                for addmask, w in cascade_dist(dommask, v):
                    nf = tuple(
                        -1 if (addmask >> u) & 1 else floors[u] for u in range(n)
                    )
                    acc += w * (addmask.bit_count() + value(dommask | addmask, nf, budget - exact_rates[i]))
                if q >= 1.0:
                    cand = acc
                else:
                    rejected = tuple(i if u == v else floors[u] for u in range(n))
                    cand = q * acc + (1.0 - q) * value(dommask, rejected, budget)
                if cand > best:
                    best = cand
        value_memo[key] = best
        return best

    return value(0, (-1,) * n, spec.exact_budget)
