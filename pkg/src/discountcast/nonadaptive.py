"""Non-adaptive discount allocation.

A configuration fixes one discount offer per node up front. Nodes
accept independently, so the objective is an expectation of cascade
sizes over every acceptance pattern. Includes exact and Monte Carlo
evaluators, the two-candidate hill climbing heuristic, and a brute
force oracle for small instances.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .cascade import (
    _MC_GROUP_LIMIT,
    _reach_size,
    _relevant_subgraph,
    _UniformBuffer,
    hoeffding_radius,
    spread_exact,
    spread_mc,
)
from .errors import TooLargeError, ValidationError
from .graph import AdoptionModel, Instance, SeedDiscountPair
from .rng import as_stream, child, generator

GAIN_EPS = 1e-12
MAX_SUPPORT_NODES = 15
_MC_CHUNK = 65536


@dataclass(frozen=True)
class BudgetSpec:
    """Total budget plus the accounting mode.

    hard: a configuration pays every offered rate in full.
    soft: a configuration pays each rate times its acceptance chance.
    """

    budget: float
    mode: str = "hard"

    def __post_init__(self):
        if self.budget <= 0:
            raise ValidationError(f"budget must be positive, got {self.budget}")
        if self.mode not in ("hard", "soft"):
            raise ValidationError(f"budget mode must be 'hard' or 'soft', got {self.mode!r}")

    @cached_property
    def exact_budget(self) -> Fraction:
        return Fraction(self.budget)


@dataclass(frozen=True)
class Configuration:
    """A set of seed-discount offers; per node only the largest rate binds."""

    pairs: frozenset[SeedDiscountPair]

    @classmethod
    def empty(cls) -> "Configuration":
        return cls(frozenset())

    @classmethod
    def of(cls, *pairs) -> "Configuration":
        return cls(frozenset(SeedDiscountPair(*p) for p in pairs))

    @classmethod
    def from_assignment(cls, assignment: dict[int, float]) -> "Configuration":
        return cls(frozenset(SeedDiscountPair(v, r) for v, r in assignment.items()))

    @cached_property
    def effective_map(self) -> dict[int, float]:
        eff: dict[int, float] = {}
        for p in self.pairs:
            if p.rate > eff.get(p.node, 0.0):
                eff[p.node] = p.rate
        return eff

    def effective_rate(self, v: int) -> float:
        return self.effective_map.get(v, 0.0)

    def add(self, pair: SeedDiscountPair) -> "Configuration":
        return Configuration(self.pairs | {pair})

    def normalized(self) -> "Configuration":
        return Configuration.from_assignment(self.effective_map)

    def sorted_pairs(self) -> list[SeedDiscountPair]:
        return sorted(self.pairs)


def effective_discount(config: Configuration, v: int) -> float:
    """Largest rate offered to v, or 0.0 when v gets no offer."""
    return config.effective_rate(v)


def config_cost(config: Configuration, model: AdoptionModel, spec: BudgetSpec) -> float:
    return float(_exact_cost(config, model, spec))


def _exact_cost(config: Configuration, model: AdoptionModel, spec: BudgetSpec) -> Fraction:
    exact = model.menu.exact
    total = Fraction(0)
    for v, rate in config.effective_map.items():
        if spec.mode == "hard":
            total += exact[rate]
        else:
            total += exact[rate] * Fraction(model.prob_at_rate(v, rate))
    return total


def seedset_probability(config: Configuration, model: AdoptionModel, seed_set) -> float:
    """Chance that exactly `seed_set` accepts under `config`.

    Unselected nodes accept with probability zero, so any seed set
    containing one has probability zero.
    """
    eff = config.effective_map
    seeds = set(seed_set)
    for v in seeds:
        if not 0 <= v < model.node_count:
            raise ValidationError(f"seed set references unknown node {v}")
    product = 1.0
    for v in range(model.node_count):
        p = model.prob_at_rate(v, eff[v]) if v in eff else 0.0
        product *= p if v in seeds else 1.0 - p
        if product == 0.0:
            return 0.0
    return product


def f_exact(
    config: Configuration,
    instance: Instance,
    *,
    max_support: int = MAX_SUPPORT_NODES,
    max_uncertain_edges: int = 25,
    spread_cache: dict | None = None,
) -> float:
    """Exact objective: sum over acceptance patterns of the exact spread.

    Enumerates the subsets of nodes with a positive acceptance chance;
    the cap guards that enumeration. Pass a shared `spread_cache` dict
    when evaluating many configurations on one instance.
    """
    graph, model = instance.graph, instance.model
    eff = config.effective_map
    support = sorted(v for v, r in eff.items() if model.prob_at_rate(v, r) > 0.0)
    if len(support) > max_support:
        raise TooLargeError(
            f"exact objective needs {len(support)} accepting nodes enumerated, cap is {max_support}"
        )
    probs = [model.prob_at_rate(v, eff[v]) for v in support]
    cache = spread_cache if spread_cache is not None else {}
    total = 0.0
    for mask in range(1 << len(support)):
        weight = 1.0
        for i, p in enumerate(probs):
            weight *= p if (mask >> i) & 1 else 1.0 - p
        if weight == 0.0:
            continue
        seeds = frozenset(support[i] for i in range(len(support)) if (mask >> i) & 1)
        if seeds not in cache:
            cache[seeds] = spread_exact(graph, seeds, max_uncertain_edges=max_uncertain_edges)
        total += weight * cache[seeds]
    return total


def f_mc(config: Configuration, instance: Instance, samples: int, stream) -> float:
    """Monte Carlo objective estimate.

    Each replicate draws the acceptance of every offered node (in node
    order) and then a cascade. Bit-deterministic for a fixed stream;
    the mean is an integer total divided by the sample count.
    """
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    graph, model = instance.graph, instance.model
    eff = config.effective_map
    support = sorted(
        (v, model.prob_at_rate(v, eff[v])) for v in eff if model.prob_at_rate(v, eff[v]) > 0.0
    )
    if not support:
        return 0.0
    certain = [v for v, p in support if p >= 1.0]
    uncertain_nodes = [(v, p) for v, p in support if p < 1.0]
    kn = len(uncertain_nodes)
    adj = None
    uncertain_edges: list[int] = []
    if kn <= _MC_GROUP_LIMIT:
        adj, _closure, uncertain_edges = _relevant_subgraph(
            graph, [v for v, _ in support], None, stop_after=_MC_GROUP_LIMIT - kn
        )
    gen = generator(as_stream(stream))
    if adj is not None:
        ke = len(uncertain_edges)
        if kn + ke == 0:
            return float(_reach_size(adj, certain, 0))
        cols = np.array([p for _, p in uncertain_nodes] + [graph.edges[e].prob for e in uncertain_edges])
        weights = 1 << np.arange(kn + ke, dtype=np.int64)
        counts = np.zeros(1 << (kn + ke), dtype=np.int64)
        left = samples
        while left > 0:
            block = min(left, _MC_CHUNK)
            states = (gen.random((block, kn + ke)) < cols) @ weights
            counts += np.bincount(states, minlength=1 << (kn + ke))
            left -= block
        sizes: dict[int, int] = {}
        total = 0
        for state in np.flatnonzero(counts):
            state = int(state)
            if state not in sizes:
                seeds = certain + [uncertain_nodes[i][0] for i in range(kn) if (state >> i) & 1]
                sizes[state] = _reach_size(adj, seeds, state >> kn)
            total += int(counts[state]) * sizes[state]
        return total / samples
    # Too much to tabulate: per replicate, draw which offers land (in
    # node order), then walk the cascade lazily over the raw out-edges.
    edges = graph.edges
    out_edges = graph.out_edges
    local_adj: dict[int, list[tuple[int, float]]] = {}
    buf = _UniformBuffer(gen)
    total = 0
    for _ in range(samples):
        seeds = list(certain)
        for v, p in uncertain_nodes:
            if buf.next() < p:
                seeds.append(v)
        seen = set(seeds)
        stack = seeds
        while stack:
            u = stack.pop()
            lst = local_adj.get(u)
            if lst is None:
                lst = [
                    (edges[i].dst, edges[i].prob)
                    for i in out_edges[u]
                    if edges[i].prob > 0.0
                ]
                local_adj[u] = lst
            for w, p in lst:
                if w in seen:
                    continue
                if p < 1.0 and buf.next() >= p:
                    continue
                seen.add(w)
                stack.append(w)
        total += len(seen)
    return total / samples


class ExactEvaluator:
    """Caching exact-objective provider for repeated configuration queries."""

    def __init__(self, instance: Instance, *, max_support: int = MAX_SUPPORT_NODES, max_uncertain_edges: int = 25):
        self.instance = instance
        self.max_support = max_support
        self.max_uncertain_edges = max_uncertain_edges
        self._spreads: dict[frozenset, float] = {}
        self._values: dict[tuple, float] = {}

    def value(self, config: Configuration) -> float:
        key = tuple(sorted(config.effective_map.items()))
        if key not in self._values:
            self._values[key] = f_exact(
                config,
                self.instance,
                max_support=self.max_support,
                max_uncertain_edges=self.max_uncertain_edges,
                spread_cache=self._spreads,
            )
        return self._values[key]

    def radius(self) -> float:
        return 0.0


class MCEvaluator:
    """Monte Carlo objective provider with order-independent substreams.

    Draws for a configuration depend only on its contents (and on the
    root stream), never on when the evaluation happens, so lazy greedy
    search gives the same answers as an eager scan. Single-offer
    configurations reuse one cached spread estimate per node, since
    there the objective factors into acceptance times spread.
    """

    def __init__(self, instance: Instance, samples: int, stream):
        if samples < 1:
            raise ValidationError("samples must be at least 1")
        self.instance = instance
        self.samples = samples
        self.stream = as_stream(stream)
        self._node_spread: dict[int, float] = {}
        self._values: dict[tuple, float] = {}

    def _spread(self, v: int) -> float:
        if v not in self._node_spread:
            self._node_spread[v] = spread_mc(
                self.instance.graph, [v], self.samples, child(self.stream, 0, v)
            )
        return self._node_spread[v]

    def value(self, config: Configuration) -> float:
        eff = config.effective_map
        key = tuple(sorted(eff.items()))
        if key in self._values:
            return self._values[key]
        if not eff:
            val = 0.0
        elif len(eff) == 1:
            (v, rate), = eff.items()
            val = self.instance.model.prob_at_rate(v, rate) * self._spread(v)
        else:
            menu = self.instance.menu
            flat = [x for v, rate in key for x in (v, menu.index_of(rate))]
            val = f_mc(config, self.instance, self.samples, child(self.stream, 1, *flat))
        self._values[key] = val
        return val

    def radius(self, delta: float = 0.05) -> float:
        return hoeffding_radius(self.instance.graph.node_count, self.samples, delta)


def _incremental_cost(model: AdoptionModel, spec: BudgetSpec, v: int, rate: float, current: float) -> Fraction:
    """Exact extra cost of raising v's offer from `current` (0.0 = none) to `rate`."""
    exact = model.menu.exact
    new = exact[rate]
    old = exact[current] if current else Fraction(0)
    if spec.mode == "hard":
        return new - old
    new *= Fraction(model.prob_at_rate(v, rate))
    if current:
        old *= Fraction(model.prob_at_rate(v, current))
    return new - old


def hill_climbing(
    instance: Instance,
    spec: BudgetSpec,
    evaluator,
    *,
    gain_rule: str = "marginal",
) -> Configuration:
    """Better of (a) the best affordable single offer and (b) a greedy build-up.

    The greedy candidate grows by the offer maximizing marginal gain per
    unit of incremental cost, skipping offers the budget cannot absorb,
    and stops once the best remaining gain drops to numerical zero.
    gain_rule="total" instead ranks offers by total value over their raw
    rate, which is only useful for comparison runs; it re-scans every
    step because total value grows as the configuration does.
    """
    if gain_rule not in ("marginal", "total"):
        raise ValidationError(f"gain_rule must be 'marginal' or 'total', got {gain_rule!r}")
    graph, model, menu = instance.graph, instance.model, instance.menu
    budget = spec.exact_budget

    best_single: Configuration | None = None
    best_single_val = 0.0
    for v in range(graph.node_count):
        for rate in menu.rates:
            if _incremental_cost(model, spec, v, rate, 0.0) > budget:
                continue
            candidate = Configuration.of(SeedDiscountPair(v, rate))
            val = evaluator.value(candidate)
            if best_single is None or val > best_single_val:
                best_single, best_single_val = candidate, val

    if gain_rule == "marginal":
        greedy, greedy_val = _greedy_marginal(instance, spec, evaluator)
    else:
        greedy, greedy_val = _greedy_total(instance, spec, evaluator)

    if best_single is not None and best_single_val >= greedy_val:
        return best_single
    return greedy


def _greedy_marginal(instance: Instance, spec: BudgetSpec, evaluator) -> tuple[Configuration, float]:
    graph, model, menu = instance.graph, instance.model, instance.menu
    budget = spec.exact_budget
    assignment: dict[int, float] = {}
    spent = Fraction(0)
    current_val = 0.0
    version = 0
    # Lazy queue of (negated ratio, node, rate index, version stamp, gain, value).
    # Submodularity makes stale ratios upper bounds, so recheck-on-pop suffices.
    heap: list[tuple[float, int, int, int, float, float]] = []
    for v in range(graph.node_count):
        for ridx, rate in enumerate(menu.rates):
            inc = _incremental_cost(model, spec, v, rate, 0.0)
            if inc <= 0 or inc > budget:
                continue
            val = evaluator.value(Configuration.of(SeedDiscountPair(v, rate)))
            gain = val
            if gain <= GAIN_EPS:
                continue
            heapq.heappush(heap, (-gain / float(inc), v, ridx, version, gain, val))
    while heap:
        _, v, ridx, stamp, gain, val = heapq.heappop(heap)
        rate = menu.rates[ridx]
        current = assignment.get(v, 0.0)
        if rate <= current:
            continue  # dominated by an offer already in place
        inc = _incremental_cost(model, spec, v, rate, current)
        if inc <= 0:
            continue
        if spent + inc > budget:
            continue  # cost only grows with the configuration, so drop for good
        if stamp == version:
            if gain <= GAIN_EPS:
                break
            assignment[v] = rate
            spent += inc
            current_val = val
            version += 1
            continue
        val = evaluator.value(Configuration.from_assignment(assignment | {v: rate}))
        gain = val - current_val
        if gain <= GAIN_EPS:
            continue  # gains only shrink as the configuration grows
        heapq.heappush(heap, (-gain / float(inc), v, ridx, version, gain, val))
    return Configuration.from_assignment(assignment), current_val


def _greedy_total(instance: Instance, spec: BudgetSpec, evaluator) -> tuple[Configuration, float]:
    graph, model, menu = instance.graph, instance.model, instance.menu
    budget = spec.exact_budget
    assignment: dict[int, float] = {}
    spent = Fraction(0)
    current_val = 0.0
    while True:
        best = None  # (ratio, v, ridx, inc, val)
        for v in range(graph.node_count):
            current = assignment.get(v, 0.0)
            for ridx, rate in enumerate(menu.rates):
                if rate <= current:
                    continue
                inc = _incremental_cost(model, spec, v, rate, current)
                if inc <= 0 or spent + inc > budget:
                    continue
                val = evaluator.value(Configuration.from_assignment(assignment | {v: rate}))
                ratio = val / rate
                if best is None or ratio > best[0]:
                    best = (ratio, v, ridx, inc, val)
        if best is None:
            break
        ratio, v, ridx, inc, val = best
        if val - current_val <= GAIN_EPS:
            break
        assignment[v] = menu.rates[ridx]
        spent += inc
        current_val = val
    return Configuration.from_assignment(assignment), current_val


def brute_force_config(
    instance: Instance,
    spec: BudgetSpec,
    *,
    max_assignments: int = 1_000_000,
    max_support: int = MAX_SUPPORT_NODES,
    max_uncertain_edges: int = 25,
) -> tuple[Configuration, float]:
    """Exact optimum over every feasible configuration, by enumeration.

    Ties keep the first maximizer in lexicographic assignment order
    (node 0's offer varies slowest; no offer sorts before any rate).
    """
    graph, model, menu = instance.graph, instance.model, instance.menu
    n, m = graph.node_count, len(menu)
    total = (m + 1) ** n
    if total > max_assignments:
        raise TooLargeError(
            f"brute force would enumerate {total} configurations, cap is {max_assignments}"
        )
    evaluator = ExactEvaluator(instance, max_support=max_support, max_uncertain_edges=max_uncertain_edges)
    budget = spec.exact_budget
    best_config = Configuration.empty()
    best_val = 0.0
    for choice in itertools.product(range(m + 1), repeat=n):
        assignment = {v: menu.rates[c - 1] for v, c in enumerate(choice) if c}
        config = Configuration.from_assignment(assignment)
        if _exact_cost(config, model, spec) > budget:
            continue
        val = evaluator.value(config)
        if val > best_val:
            best_config, best_val = config, val
    return best_config, best_val
