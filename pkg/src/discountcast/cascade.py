"""Cascade machinery: sampled realizations, spread computation, observations.

The process has two stages. In the seeding stage every node draws a
uniform threshold g and accepts the cheapest menu rate whose adoption
probability reaches g (ties accept). In the diffusion stage every edge
independently comes up live with its propagation probability, and
influence travels from accepted seeds along live edges. Fixing both
draws up front gives a deterministic realization that adaptive policies
can probe incrementally.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, TooLargeError, ValidationError
from .graph import Instance, SeedDiscountPair, SocialGraph
from .rng import as_stream, child, generator

MAX_UNCERTAIN_EDGES = 25
_MC_GROUP_LIMIT = 12  # tabulate spreads by edge state when at most this many uncertain edges
_MC_CHUNK = 65536


@dataclass(frozen=True)
class SeedingRealization:
    """Per-node cheapest acceptable rate index; len(menu) means never accepts."""

    min_rate_idx: tuple[int, ...]
    thresholds: tuple[float, ...] | None = None

    def accepts(self, v: int, rate_idx: int) -> bool:
        return self.min_rate_idx[v] <= rate_idx


@dataclass(frozen=True)
class DiffusionRealization:
    """Live/blocked state for every edge, aligned with the graph edge list."""

    live: tuple[bool, ...]


@dataclass(frozen=True)
class Realization:
    seeding: SeedingRealization
    diffusion: DiffusionRealization


def sample_seeding(instance: Instance, stream) -> SeedingRealization:
    model = instance.model
    gen = generator(as_stream(stream))
    g = gen.random(instance.graph.node_count)
    m = len(model.menu)
    idx = tuple(
        (lambda i: m if i is None else i)(model.min_rate_index(v, g[v]))
        for v in range(instance.graph.node_count)
    )
    return SeedingRealization(min_rate_idx=idx, thresholds=tuple(float(x) for x in g))


def sample_diffusion(graph: SocialGraph, stream) -> DiffusionRealization:
    gen = generator(as_stream(stream))
    u = gen.random(len(graph.edges))
    live = tuple(bool(u[i] < e.prob) for i, e in enumerate(graph.edges))
    return DiffusionRealization(live=live)


def sample_diffusion_batch(graph: SocialGraph, count: int, stream) -> np.ndarray:
    """(count, |E|) boolean matrix of independent edge states."""
    gen = generator(as_stream(stream))
    probs = np.array([e.prob for e in graph.edges])
    return gen.random((count, len(graph.edges))) < probs


def sample_realization(instance: Instance, stream) -> Realization:
    root = as_stream(stream)
    return Realization(
        seeding=sample_seeding(instance, child(root, 0)),
        diffusion=sample_diffusion(instance.graph, child(root, 1)),
    )


def reachable(graph: SocialGraph, diffusion: DiffusionRealization, seeds, restrict=None) -> frozenset[int]:
    """Nodes reachable from `seeds` along live edges (seeds included).

    With `restrict`, traversal stays inside that node set; seeds outside
    it are ignored.
    """
    allowed = None if restrict is None else set(restrict)
    seen: set[int] = set()
    queue: deque[int] = deque()
    for s in seeds:
        if (allowed is None or s in allowed) and s not in seen:
            seen.add(s)
            queue.append(s)
    while queue:
        u = queue.popleft()
        for eidx in graph.out_edges[u]:
            if not diffusion.live[eidx]:
                continue
            w = graph.edges[eidx].dst
            if w in seen or (allowed is not None and w not in allowed):
                continue
            seen.add(w)
            queue.append(w)
    return frozenset(seen)


def _relevant_subgraph(graph: SocialGraph, seeds, allowed, *, stop_after: int | None = None):
    """Forward closure of `seeds` over positive-probability edges.

    Returns (adjacency, closure, uncertain) where adjacency maps a node
    to (dst, slot) pairs: slot -1 marks an always-live edge, other slots
    index into `uncertain` (edge indices with 0 < p < 1). With
    `stop_after` set, the traversal gives up once more than that many
    uncertain edges turn up and returns (None, closure, uncertain), so
    callers can bail out without paying for a huge closure.
    """
    adj: dict[int, list[tuple[int, int]]] = {}
    uncertain: list[int] = []
    closure: set[int] = set()
    queue: deque[int] = deque()
    for s in seeds:
        if (allowed is None or s in allowed) and s not in closure:
            closure.add(s)
            queue.append(s)
    while queue:
        u = queue.popleft()
        entries = adj.setdefault(u, [])
        for eidx in graph.out_edges[u]:
            e = graph.edges[eidx]
            if e.prob <= 0.0:
                continue
            if allowed is not None and e.dst not in allowed:
                continue
            if e.prob >= 1.0:
                slot = -1
            else:
                slot = len(uncertain)
                uncertain.append(eidx)
            entries.append((e.dst, slot))
            if e.dst not in closure:
                closure.add(e.dst)
                queue.append(e.dst)
        if stop_after is not None and len(uncertain) > stop_after:
            return None, closure, uncertain
    return adj, closure, uncertain


def _reach_size(adj, seeds, mask: int) -> int:
    """|reachable| when uncertain slot i is live iff bit i of mask is set."""
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        u = stack.pop()
        for w, slot in adj.get(u, ()):
            if w in seen:
                continue
            if slot >= 0 and not (mask >> slot) & 1:
                continue
            seen.add(w)
            stack.append(w)
    return len(seen)


def spread_exact(graph: SocialGraph, seeds, *, restrict=None, max_uncertain_edges: int = MAX_UNCERTAIN_EDGES) -> float:
    """Expected cascade size from `seeds`, by enumerating live-edge states.

    Only edges with probability strictly between 0 and 1 branch; the
    enumeration cap applies to those. Deterministic edges and edges that
    no cascade from `seeds` can ever cross cost nothing.
    """
    allowed = None if restrict is None else set(restrict)
    seed_list = sorted({s for s in seeds if allowed is None or s in allowed})
    if not seed_list:
        return 0.0
    adj, _closure, uncertain = _relevant_subgraph(
        graph, seed_list, allowed, stop_after=max_uncertain_edges
    )
    if adj is None:
        raise TooLargeError(
            f"exact spread needs more than {max_uncertain_edges} uncertain edges enumerated"
        )
    k = len(uncertain)
    probs = [graph.edges[eidx].prob for eidx in uncertain]
    total = 0.0
    for mask in range(1 << k):
        w = 1.0
        for i, p in enumerate(probs):
            w *= p if (mask >> i) & 1 else 1.0 - p
        total += w * _reach_size(adj, seed_list, mask)
    return total


def spread_mc(graph: SocialGraph, seeds, samples: int, stream, *, restrict=None) -> float:
    """Monte Carlo estimate of the expected cascade size from `seeds`.

    Bit-deterministic for a fixed stream. The mean is accumulated in
    integers, so it does not depend on summation order.
    """
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    allowed = None if restrict is None else set(restrict)
    seed_list = sorted({s for s in seeds if allowed is None or s in allowed})
    if not seed_list:
        return 0.0
    adj, _closure, uncertain = _relevant_subgraph(
        graph, seed_list, allowed, stop_after=_MC_GROUP_LIMIT
    )
    gen = generator(as_stream(stream))
    if adj is not None:
        k = len(uncertain)
        if k == 0:
            return float(_reach_size(adj, seed_list, 0))
        probs = np.array([graph.edges[eidx].prob for eidx in uncertain])
        weights = 1 << np.arange(k, dtype=np.int64)
        counts = np.zeros(1 << k, dtype=np.int64)
        left = samples
        while left > 0:
            block = min(left, _MC_CHUNK)
            states = (gen.random((block, k)) < probs) @ weights
            counts += np.bincount(states, minlength=1 << k)
            left -= block
        total = 0
        for state in np.flatnonzero(counts):
            total += int(counts[state]) * _reach_size(adj, seed_list, int(state))
        return total / samples
    # Too many uncertain edges to tabulate: walk each replicate over the
    # raw out-edges, flipping an edge lazily the first time the cascade
    # examines it. Per-node edge lists are cached as they come up, so the
    # cost tracks the cascades actually walked, not the reachable set.
    edges = graph.edges
    out_edges = graph.out_edges
    local_adj: dict[int, list[tuple[int, float]]] = {}
    buf = _UniformBuffer(gen)
    total = 0
    for _ in range(samples):
        seen = set(seed_list)
        stack = list(seed_list)
        while stack:
            u = stack.pop()
            lst = local_adj.get(u)
            if lst is None:
                lst = [
                    (edges[i].dst, edges[i].prob)
                    for i in out_edges[u]
                    if edges[i].prob > 0.0
                    and (allowed is None or edges[i].dst in allowed)
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


class _UniformBuffer:
    """Uniform draws handed out one at a time from vectorized blocks."""

    __slots__ = ("gen", "block", "buf", "pos")

    def __init__(self, gen: np.random.Generator, block: int = 8192):
        self.gen = gen
        self.block = block
        self.buf: list[float] = []
        self.pos = 0

    def next(self) -> float:
        if self.pos == len(self.buf):
            self.buf = self.gen.random(self.block).tolist()
            self.pos = 0
        v = self.buf[self.pos]
        self.pos += 1
        return v


def hoeffding_radius(node_count: int, samples: int, delta: float = 0.05) -> float:
    """Two-sided Hoeffding radius for a mean of values in [0, node_count]."""
    return node_count * math.sqrt(math.log(2.0 / delta) / (2.0 * samples))


@dataclass
class PartialObservation:
    """What an adaptive policy has seen so far.

    `influenced` is exactly the set reachable from accepted seeds via
    revealed live edges, and every out-edge of an influenced node is
    revealed; `reveal_cascade` maintains both invariants.
    """

    revealed: dict[int, bool] = field(default_factory=dict)
    influenced: set[int] = field(default_factory=set)
    probed: list[tuple[SeedDiscountPair, bool]] = field(default_factory=list)

    def copy(self) -> "PartialObservation":
        return PartialObservation(
            revealed=dict(self.revealed),
            influenced=set(self.influenced),
            probed=list(self.probed),
        )


def reveal_cascade(graph: SocialGraph, diffusion: DiffusionRealization, obs: PartialObservation, seed: int):
    """Absorb the cascade of a freshly accepted seed into the observation.

    Influence spreads along live edges to nodes not yet influenced, and
    the state of every out-edge of every newly influenced node becomes
    visible. Returns (newly_influenced, revealed_now) in traversal order.
    """
    if seed in obs.influenced:
        raise ValidationError(f"node {seed} is already influenced")
    newly: list[int] = [seed]
    revealed_now: list[tuple[int, bool]] = []
    obs.influenced.add(seed)
    queue: deque[int] = deque([seed])
    while queue:
        u = queue.popleft()
        for eidx in graph.out_edges[u]:
            state = diffusion.live[eidx]
            if eidx not in obs.revealed:
                obs.revealed[eidx] = state
                revealed_now.append((eidx, state))
            w = graph.edges[eidx].dst
            if state and w not in obs.influenced:
                obs.influenced.add(w)
                newly.append(w)
                queue.append(w)
    return tuple(newly), tuple(revealed_now)


def conditional_spread(
    graph: SocialGraph,
    obs: PartialObservation,
    v: int,
    *,
    mode: str = "exact",
    samples: int = 1000,
    stream=None,
    max_uncertain_edges: int = MAX_UNCERTAIN_EDGES,
) -> float:
    """Expected cascade of seeding v alone in the graph minus influenced nodes.

    Already influenced nodes soak up no new influence and cannot relay
    any they have not already relayed, so the residual induced subgraph
    carries the whole answer.
    """
    if v in obs.influenced:
        raise ValidationError(f"node {v} is already influenced")
    restrict = set(range(graph.node_count)) - obs.influenced
    if mode == "exact":
        return spread_exact(graph, [v], restrict=restrict, max_uncertain_edges=max_uncertain_edges)
    if mode == "mc":
        return spread_mc(graph, [v], samples, stream, restrict=restrict)
    raise ValidationError(f"unknown spread mode {mode!r}")


def write_realization(path, instance: Instance, realization: Realization) -> None:
    """Serialize a realization: threshold lines first, then edge states."""
    seeding = realization.seeding
    if seeding.thresholds is None:
        raise ValidationError("realization has no thresholds to serialize")
    graph = instance.graph
    lines = [
        f"threshold {graph.labels[v]} {seeding.thresholds[v]!r}"
        for v in range(graph.node_count)
    ]
    lines += [
        f"edge {graph.labels[e.src]} {graph.labels[e.dst]} "
        f"{'live' if realization.diffusion.live[i] else 'blocked'}"
        for i, e in enumerate(graph.edges)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_realization(path, instance: Instance) -> Realization:
    """Parse the text form written by `write_realization`.

    Every node needs exactly one threshold and every edge exactly one
    state; anything else is an error.
    """
    graph, model = instance.graph, instance.model
    thresholds: dict[int, float] = {}
    states: dict[int, bool] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "threshold":
            if len(parts) != 3:
                raise ParseError(path, lineno, "expected 'threshold <node> <g>'")
            try:
                g = float(parts[2])
            except ValueError:
                raise ParseError(path, lineno, f"threshold {parts[2]!r} is not a number")
            if not 0.0 <= g <= 1.0:
                raise ValidationError(f"{path}:{lineno}: threshold {g} outside [0, 1]")
            v = graph.index(parts[1])
            if v in thresholds:
                raise ValidationError(f"{path}:{lineno}: duplicate threshold for node {parts[1]}")
            thresholds[v] = g
        elif parts[0] == "edge":
            if len(parts) != 4 or parts[3] not in ("live", "blocked"):
                raise ParseError(path, lineno, "expected 'edge <src> <dst> <live|blocked>'")
            key = (graph.index(parts[1]), graph.index(parts[2]))
            if key not in graph.edge_index:
                raise ValidationError(f"{path}:{lineno}: edge {parts[1]} -> {parts[2]} is not in the graph")
            eidx = graph.edge_index[key]
            if eidx in states:
                raise ValidationError(f"{path}:{lineno}: duplicate state for edge {parts[1]} -> {parts[2]}")
            states[eidx] = parts[3] == "live"
        else:
            raise ParseError(path, lineno, f"unknown record {parts[0]!r}")
    missing_t = [graph.labels[v] for v in range(graph.node_count) if v not in thresholds]
    if missing_t:
        raise ValidationError(f"{path}: missing thresholds for nodes {missing_t}")
    missing_e = [i for i in range(len(graph.edges)) if i not in states]
    if missing_e:
        e = graph.edges[missing_e[0]]
        raise ValidationError(f"{path}: missing state for edge {graph.labels[e.src]} -> {graph.labels[e.dst]}")
    m = len(model.menu)
    idx = []
    g_tuple = []
    for v in range(graph.node_count):
        g = thresholds[v]
        g_tuple.append(g)
        i = model.min_rate_index(v, g)
        idx.append(m if i is None else i)
    live = tuple(states[i] for i in range(len(graph.edges)))
    return Realization(
        seeding=SeedingRealization(min_rate_idx=tuple(idx), thresholds=tuple(g_tuple)),
        diffusion=DiffusionRealization(live=live),
    )
