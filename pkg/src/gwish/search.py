"""Mode hunting: thresholded candidates, greedy repair and shotgun refinement."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve

from .graph import UndirectedGraph, decomposable_neighbors, move_is_decomposable
from .model import (
    Dataset,
    GraphScore,
    GraphScorer,
    Hyperparameters,
    posterior_mean_precision,
    sample_precision_given_graph,
)
from .numerics import cholesky_logdet, symmetrize
from .errors import NoValidMove


@dataclass(frozen=True)
class CandidateConfig:
    """Grids for the thresholded-candidate generator.

    Each ridge value gives a regularised precision surrogate
    inv(Gram/n + lam I); each threshold keeps the entries above it in
    magnitude.  Defaults yield 5000 (ridge, threshold) pairs before
    deduplication.
    """

    ridge_grid: tuple[float, ...] = tuple(np.logspace(-2.0, 1.0, 10))
    threshold_grid: tuple[float, ...] = tuple(np.linspace(0.0, 0.5, 500))
    max_candidates: int = 5000

    def __post_init__(self) -> None:
        if any(lam <= 0 for lam in self.ridge_grid):
            raise ValueError("ridge values must be positive")
        if any(t < 0 for t in self.threshold_grid):
            raise ValueError("thresholds must be nonnegative")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be positive")


@dataclass(frozen=True)
class ModeSearchResult:
    """Best graph found, its score, work counter and best-so-far trace."""

    mode_graph: UndirectedGraph
    mode_score: GraphScore
    visited: int
    score_trace: tuple[float, ...]


def repair_decomposable(
    edges: Sequence[tuple[int, int]], p: int
) -> UndirectedGraph:
    """Greedy decomposable subgraph of an edge list taken in the given order.

    Walks the edges once, keeping each one whose addition preserves
    decomposability and skipping the rest.  Callers order edges by weight
    (descending) with lexicographic tie-breaks.  Applying the function to
    its own output (same order) changes nothing.
    """
    g = UndirectedGraph.empty(p)
    for e in edges:
        i, j = (e[0], e[1]) if e[0] < e[1] else (e[1], e[0])
        if (i, j) in g.edges:
            continue
        if move_is_decomposable(g, (i, j), "add"):
            g = g.with_edge(i, j)
    return g


def _ridge_edge_order(
    data: Dataset, lam: float
) -> list[tuple[float, int, int]]:
    p = data.p
    lower, _ = cholesky_logdet(data.gram / data.n + lam * np.eye(p))
    w = symmetrize(cho_solve((lower, True), np.eye(p)))
    entries = [
        (abs(float(w[i, j])), i, j) for i in range(p) for j in range(i + 1, p)
    ]
    entries.sort(key=lambda t: (-t[0], t[1], t[2]))
    return entries


def candidate_graphs(
    data: Dataset, config: CandidateConfig | None = None
) -> list[UndirectedGraph]:
    """Decomposable candidates from ridge-inverse thresholding plus repair.

    For each ridge value, each threshold keeps a prefix of the edges sorted
    by weight, and the greedy repair of that prefix is a candidate.  Since a
    longer prefix only appends edges, one greedy pass per ridge value yields
    all prefixes.  Duplicates are dropped, order is deterministic, and at
    most ``max_candidates`` graphs are returned.
    """
    config = config or CandidateConfig()
    out: list[UndirectedGraph] = []
    seen: set[frozenset] = set()
    for lam in config.ridge_grid:
        entries = _ridge_edge_order(data, lam)
        weights = np.array([t[0] for t in entries])
        # prefix length for each threshold: edges with weight > tau
        lengths = sorted(
            {int(np.searchsorted(-weights, -tau, side="left"))
             for tau in config.threshold_grid}
        )
        g = UndirectedGraph.empty(data.p)
        consumed = 0
        for length in lengths:
            while consumed < length:
                _, i, j = entries[consumed]
                consumed += 1
                if move_is_decomposable(g, (i, j), "add"):
                    g = g.with_edge(i, j)
            if g.edges not in seen:
                seen.add(g.edges)
                out.append(g)
                if len(out) >= config.max_candidates:
                    return out
    return out


def _score_many(
    scorer: GraphScorer, graphs: Sequence[UndirectedGraph], threads: int
) -> list[float]:
    if threads <= 1 or len(graphs) < 2:
        return [scorer.score(g).log_posterior for g in graphs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda g: scorer.score(g).log_posterior, graphs))


def threshold_init(
    data: Dataset,
    hyper: Hyperparameters,
    config: CandidateConfig | None = None,
    threads: int = 1,
) -> UndirectedGraph:
    """Highest-scoring thresholded candidate; ties go to the earliest."""
    cands = candidate_graphs(data, config)
    scorer = GraphScorer(data, hyper)
    scores = _score_many(scorer, cands, threads)
    return cands[int(np.argmax(scores))]


def shotgun_search(
    init: UndirectedGraph,
    data: Dataset,
    hyper: Hyperparameters,
    max_iters: int = 30,
    rng: np.random.Generator | None = None,
    restart_jitter: int = 2,
) -> ModeSearchResult:
    """Greedy best-neighbour ascent with random restarts.

    Each step scores every decomposable single-edge neighbour and moves to
    the best when it improves the current score; at a local optimum the
    search restarts from the incumbent best perturbed by ``restart_jitter``
    random decomposability-preserving moves (skipped when no rng is given,
    in which case the search stops there).  The score trace records the
    incumbent after each step and never decreases.
    """
    scorer = GraphScorer(data, hyper)
    current = init
    cur_lp = scorer.score(current).log_posterior
    best_g, best_lp = current, cur_lp
    visited = 1
    trace: list[float] = []
    for _ in range(max_iters):
        moved = False
        nbr_best: UndirectedGraph | None = None
        nbr_lp = -math.inf
        for e, kind in decomposable_neighbors(current):
            g2 = current.with_edge(*e) if kind == "add" else current.without_edge(*e)
            lp = scorer.score(g2).log_posterior
            visited += 1
            if lp > nbr_lp:
                nbr_best, nbr_lp = g2, lp
        if nbr_best is not None and nbr_lp > cur_lp:
            current, cur_lp = nbr_best, nbr_lp
            moved = True
            if cur_lp > best_lp:
                best_g, best_lp = current, cur_lp
        trace.append(best_lp)
        if not moved:
            if rng is None:
                break
            current = best_g
            for _ in range(restart_jitter):
                kind = "add" if rng.random() < 0.5 else "delete"
                try:
                    current = _jittered(current, kind, rng)
                except NoValidMove:
                    pass
            cur_lp = scorer.score(current).log_posterior
            visited += 1
    return ModeSearchResult(
        mode_graph=best_g,
        mode_score=scorer.score(best_g),
        visited=visited,
        score_trace=tuple(trace),
    )


def _jittered(
    g: UndirectedGraph, kind: str, rng: np.random.Generator
) -> UndirectedGraph:
    from .graph import random_decomposable_move

    if kind == "delete" and g.size == 0:
        kind = "add"
    if kind == "add" and g.size == g.max_edges:
        kind = "delete"
    return random_decomposable_move(g, kind, rng)


def hybrid_mode(
    data: Dataset,
    hyper: Hyperparameters,
    config: CandidateConfig | None = None,
    search_iters: int = 30,
    rng: np.random.Generator | None = None,
    threads: int = 1,
) -> ModeSearchResult:
    """Score all candidates, then refine the best by shotgun search."""
    cands = candidate_graphs(data, config)
    scorer = GraphScorer(data, hyper)
    scores = _score_many(scorer, cands, threads)
    start = cands[int(np.argmax(scores))]
    refined = shotgun_search(start, data, hyper, max_iters=search_iters, rng=rng)
    return ModeSearchResult(
        mode_graph=refined.mode_graph,
        mode_score=refined.mode_score,
        visited=refined.visited + len(cands),
        score_trace=refined.score_trace,
    )


def bayes_estimator_l2(
    data: Dataset, graph: UndirectedGraph, hyper: Hyperparameters
) -> np.ndarray:
    """Posterior mean precision given the graph (optimal under squared loss)."""
    return posterior_mean_precision(data, graph, hyper)


def bayes_estimator_l1_stein(
    data: Dataset,
    graph: UndirectedGraph,
    hyper: Hyperparameters,
    rng: np.random.Generator,
    mc_draws: int = 500,
) -> np.ndarray:
    """Inverse of the Monte Carlo posterior mean covariance given the graph.

    Estimates E[inv(Omega) | G, X] from ``mc_draws`` posterior draws and
    inverts it; the estimator associated with Stein-type covariance loss.
    """
    if mc_draws < 1:
        raise ValueError("mc_draws must be positive")
    p = data.p
    acc = np.zeros((p, p))
    for _ in range(mc_draws):
        omega = sample_precision_given_graph(data, graph, hyper, rng)
        lower, _ = cholesky_logdet(omega)
        acc += cho_solve((lower, True), np.eye(p))
    sigma_bar = symmetrize(acc / mc_draws)
    lower, _ = cholesky_logdet(sigma_bar)
    return symmetrize(cho_solve((lower, True), np.eye(p)))
