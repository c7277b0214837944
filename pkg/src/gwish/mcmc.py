"""Metropolis-Hastings over decomposable graphs.

Proposals flip one edge.  The ``uniform`` kernel deletes a uniformly chosen
existing edge or adds a uniformly chosen absent one (coin between the two),
redrawing until the result is decomposable; its Hastings ratio is computed
from the uniform kernel as written, without a decomposability correction.
The ``exact`` kernel draws uniformly from the decomposable single-edge
neighbourhood and corrects by the neighbourhood sizes, giving an exactly
invariant chain at the cost of enumerating neighbourhoods.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import NoValidMove, NotDecomposable
from .graph import (
    UndirectedGraph,
    decomposable_neighbors,
    enumerate_decomposable_graphs,
    is_decomposable,
    move_is_decomposable,
)
from .model import Dataset, GraphScore, GraphScorer, Hyperparameters
from .numerics import make_rng

KERNELS = ("uniform", "exact")


@dataclass(frozen=True)
class ChainConfig:
    """Chain schedule and sampling options.

    ``init`` is "empty", "threshold" (highest-scoring thresholded candidate,
    see the search module) or an explicit decomposable graph.  When
    ``sample_precision`` is set, one posterior precision draw is taken every
    ``thin`` kept iterations and averaged.  ``track_graphs`` additionally
    counts visits per graph after burn-in (small graph spaces only).
    """

    iterations: int = 3000
    burn_in: int = 3000
    seed: int = 0
    stream: int = 0
    kernel: str = "uniform"
    init: UndirectedGraph | str = "empty"
    sample_precision: bool = False
    thin: int = 1
    track_graphs: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 0 or self.burn_in < 0:
            raise ValueError("iterations and burn_in must be nonnegative")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.thin < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin}")
        if isinstance(self.init, str) and self.init not in ("empty", "threshold"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class ChainState:
    """Current graph with its cached score; ``neighbors`` memoises the
    decomposable neighbourhood for the exact kernel."""

    graph: UndirectedGraph
    score: GraphScore
    neighbors: list | None = None


@dataclass
class ChainResult:
    """Post-burn-in summaries plus full traces of one chain."""

    p: int
    burn_in: int
    iterations: int
    kernel: str
    seed: int
    stream: int
    inclusion: np.ndarray
    log_posterior_trace: np.ndarray
    size_trace: np.ndarray
    accepted_trace: np.ndarray
    best_graph: UndirectedGraph
    best_score: GraphScore
    precision_mean: np.ndarray | None = None
    precision_draws: int = 0
    graph_counts: Counter = field(default_factory=Counter)

    @property
    def acceptance_rate(self) -> float:
        if len(self.accepted_trace) == 0:
            return 0.0
        return float(np.mean(self.accepted_trace))


def _uniform_absent_pair(
    g: UndirectedGraph, rng: np.random.Generator
) -> tuple[int, int]:
    while True:
        i = int(rng.integers(g.p))
        j = int(rng.integers(g.p - 1))
        if j >= i:
            j += 1
        e = (i, j) if i < j else (j, i)
        if e not in g.edges:
            return e


def propose(
    g: UndirectedGraph, kernel: str, rng: np.random.Generator
) -> tuple[UndirectedGraph, float]:
    """One proposal and its log Hastings ratio log q(G|G') - log q(G'|G)."""
    if kernel == "uniform":
        return _propose_uniform(g, rng)
    if kernel == "exact":
        g_new, lqr, _ = _propose_exact(g, rng, None)
        return g_new, lqr
    raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")


def _propose_uniform(
    g: UndirectedGraph, rng: np.random.Generator
) -> tuple[UndirectedGraph, float]:
    m = g.max_edges
    if m == 0:
        raise NoValidMove("a single-vertex graph has no edge moves")
    k = g.size
    while True:
        if k == 0:
            kind = "add"  # the delete coin would be redrawn forever
        elif k == m:
            kind = "delete"
        else:
            kind = "delete" if rng.random() < 0.5 else "add"
        if kind == "delete":
            e = g.sorted_edges[int(rng.integers(k))]
            if move_is_decomposable(g, e, "delete"):
                return g.without_edge(*e), math.log(k) - math.log(m - k + 1)
        else:
            e = _uniform_absent_pair(g, rng)
            if move_is_decomposable(g, e, "add"):
                return g.with_edge(*e), math.log(m - k) - math.log(k + 1)


def _propose_exact(
    g: UndirectedGraph,
    rng: np.random.Generator,
    neighbors: list | None,
) -> tuple[UndirectedGraph, float, list]:
    if neighbors is None:
        neighbors = decomposable_neighbors(g)
    if not neighbors:
        raise NoValidMove("graph has no decomposable neighbours")
    e, kind = neighbors[int(rng.integers(len(neighbors)))]
    g_new = g.with_edge(*e) if kind == "add" else g.without_edge(*e)
    neighbors_new = decomposable_neighbors(g_new)
    lqr = math.log(len(neighbors)) - math.log(len(neighbors_new))
    return g_new, lqr, neighbors_new


def mh_step(
    state: ChainState,
    scorer: GraphScorer,
    kernel: str,
    rng: np.random.Generator,
) -> tuple[ChainState, bool]:
    """Advance one Metropolis-Hastings step; returns (state, accepted).

    Exactly one new score evaluation happens per step; the current state's
    score is reused from the cache carried in ``state``.
    """
    if kernel == "exact":
        if state.neighbors is None:
            # memoised so a rejected step does not recompute it next time
            state.neighbors = decomposable_neighbors(state.graph)
        g_new, lqr, nbrs_new = _propose_exact(state.graph, rng, state.neighbors)
    else:
        g_new, lqr = _propose_uniform(state.graph, rng)
        nbrs_new = None
    new_score = scorer.score(g_new)
    log_alpha = new_score.log_posterior - state.score.log_posterior + lqr
    u = rng.random()
    if math.log(u) < log_alpha:
        return ChainState(g_new, new_score, nbrs_new), True
    return state, False


def _resolve_init(
    config: ChainConfig, data: Dataset, hyper: Hyperparameters
) -> UndirectedGraph:
    if isinstance(config.init, UndirectedGraph):
        if not is_decomposable(config.init):
            raise NotDecomposable("initial graph must be decomposable")
        return config.init
    if config.init == "empty":
        return UndirectedGraph.empty(data.p)
    from .search import threshold_init

    return threshold_init(data, hyper)


def run_chain(
    config: ChainConfig, data: Dataset, hyper: Hyperparameters
) -> ChainResult:
    """Run burn_in + iterations MH steps and accumulate summaries.

    Edge inclusion frequencies, optional precision averaging and graph visit
    counts use post-burn-in states only; traces cover every step.  All
    randomness comes from the (seed, stream) generator, so reruns with the
    same config are bit-identical.
    """
    rng = make_rng(config.seed, config.stream)
    scorer = GraphScorer(data, hyper)
    g0 = _resolve_init(config, data, hyper)
    state = ChainState(g0, scorer.score(g0))
    p = data.p

    total = config.burn_in + config.iterations
    log_post = np.empty(total)
    sizes = np.empty(total, dtype=np.int64)
    accepts = np.zeros(total, dtype=bool)
    inclusion = np.zeros((p, p))
    best_graph, best_score = state.graph, state.score
    prec_sum = np.zeros((p, p)) if config.sample_precision else None
    prec_draws = 0
    counts: Counter = Counter()

    for it in range(total):
        state, accepted = mh_step(state, scorer, config.kernel, rng)
        log_post[it] = state.score.log_posterior
        sizes[it] = state.graph.size
        accepts[it] = accepted
        if state.score.log_posterior > best_score.log_posterior:
            best_graph, best_score = state.graph, state.score
        if it < config.burn_in:
            continue
        for i, j in state.graph.edges:
            inclusion[i, j] += 1.0
        if config.track_graphs:
            counts[state.graph] += 1
        if prec_sum is not None and (it - config.burn_in) % config.thin == 0:
            from .model import sample_precision_given_graph

            prec_sum += sample_precision_given_graph(data, state.graph, hyper, rng)
            prec_draws += 1

    if config.iterations > 0:
        inclusion /= config.iterations
    inclusion = inclusion + inclusion.T

    precision_mean = None
    if prec_sum is not None and prec_draws > 0:
        precision_mean = prec_sum / prec_draws

    return ChainResult(
        p=p,
        burn_in=config.burn_in,
        iterations=config.iterations,
        kernel=config.kernel,
        seed=config.seed,
        stream=config.stream,
        inclusion=inclusion,
        log_posterior_trace=log_post,
        size_trace=sizes,
        accepted_trace=accepts,
        best_graph=best_graph,
        best_score=best_score,
        precision_mean=precision_mean,
        precision_draws=prec_draws,
        graph_counts=counts,
    )


def median_probability_graph(
    result: ChainResult, threshold: float = 0.5
) -> UndirectedGraph:
    """Edges whose inclusion frequency strictly exceeds the threshold.

    The result is reported as-is; it need not be decomposable.
    """
    p = result.p
    edges = [
        (i, j)
        for i in range(p)
        for j in range(i + 1, p)
        if result.inclusion[i, j] > threshold
    ]
    return UndirectedGraph.from_edges(p, edges)


def exact_posterior(
    data: Dataset, hyper: Hyperparameters
) -> dict[UndirectedGraph, float]:
    """Exact graph posterior by enumeration (tiny p only).

    Scores every decomposable graph on data.p vertices and normalises with
    a log-sum-exp; graphs outside the prior support are dropped.
    """
    scorer = GraphScorer(data, hyper)
    scored: list[tuple[UndirectedGraph, float]] = []
    for g in enumerate_decomposable_graphs(data.p):
        lp = scorer.score(g).log_posterior
        if lp > -math.inf:
            scored.append((g, lp))
    top = max(lp for _, lp in scored)
    weights = [(g, math.exp(lp - top)) for g, lp in scored]
    z = sum(w for _, w in weights)
    return {g: w / z for g, w in weights}


def visit_frequencies(result: ChainResult) -> dict[UndirectedGraph, float]:
    """Post-burn-in visit frequencies (requires track_graphs)."""
    total = sum(result.graph_counts.values())
    if total == 0:
        raise ValueError("no tracked visits; run with track_graphs=True")
    return {g: c / total for g, c in result.graph_counts.items()}


def tv_distance(
    freq: dict[UndirectedGraph, float], exact: dict[UndirectedGraph, float]
) -> float:
    """Total variation distance between two graph distributions."""
    keys: set[UndirectedGraph] = set(freq) | set(exact)
    return 0.5 * sum(abs(freq.get(k, 0.0) - exact.get(k, 0.0)) for k in keys)
