"""Hierarchical Wishart model for decomposable Gaussian graphical models.

The precision matrix Omega of a zero-mean Gaussian sample is restricted to
the cone of matrices that are positive definite with support in a
decomposable graph G.  Its prior is the graph Wishart W_G(nu, A) whose
normalising constant factorises over any perfect sequence of cliques and
separators::

    I_G(nu, A) = prod_cliques I_C(nu, A_C) / prod_seps I_S(nu, A_S)

with the complete-graph constant

    I_q(nu, A) = 2^((nu+q-1)q/2) * Gamma_q((nu+q-1)/2) * det(A)^(-(nu+q-1)/2).

The prior scale is tied to the data as A = g * X'X, so the marginal
likelihood of a graph reduces to clique and separator terms built from Gram
submatrices scaled by g and 1 + g; the p x p matrix A is never formed.
Graphs carry a size-penalised prior over decomposable graphs.  Conjugacy
gives Omega | G, X ~ W_G(n + nu, X'X + A), which is sampled clique by
clique along a perfect sequence and assembled with the clique-minus-
separator completion.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import CliqueTooLarge, DimensionMismatch, NotDecomposable
from .graph import PerfectSequence, UndirectedGraph, is_decomposable, perfect_sequence
from .numerics import (
    LOG_2,
    LOG_2PI,
    cholesky_logdet,
    log_multigamma,
    submatrix,
    symmetrize,
)

# Named hyperparameter presets: g as a power law in the dimension.  The
# "ratio" preset uses g = 0.1 / delta * p^(-2.5 - delta) with delta = 0.01;
# the "selection" preset uses g = 1 / (0.1 * delta) * p^(-2.5 - delta) with
# delta = 0.001, which is markedly weaker shrinkage at moderate p.
PRESETS: dict[str, Callable[[int], float]] = {
    "ratio": lambda p: 10.0 * float(p) ** (-2.51),
    "selection": lambda p: 1.0e4 * float(p) ** (-2.501),
}


@dataclass(frozen=True)
class Hyperparameters:
    """Model hyperparameters: Wishart df nu, scale multiplier g, prior slope
    c_tau and optional edge-count cap r_max (None leaves the cap inactive)."""

    nu: float = 3.0
    g: float = 0.1
    c_tau: float = 0.5
    r_max: int | None = None

    def __post_init__(self) -> None:
        if not self.nu > 2.0:
            raise ValueError(f"nu must exceed 2, got {self.nu}")
        if not self.g > 0.0:
            raise ValueError(f"g must be positive, got {self.g}")
        if self.c_tau < 0.0:
            raise ValueError(f"c_tau must be nonnegative, got {self.c_tau}")
        if self.r_max is not None and self.r_max < 0:
            raise ValueError(f"r_max must be nonnegative, got {self.r_max}")

    @classmethod
    def preset(cls, name: str, p: int, **overrides) -> "Hyperparameters":
        """Hyperparameters with g resolved from a named preset at dimension p."""
        try:
            g = PRESETS[name](p)
        except KeyError:
            raise ValueError(
                f"unknown preset {name!r}; available: {sorted(PRESETS)}"
            ) from None
        return replace(cls(g=g), **overrides)


def theory_r_max(n: int, p: int, c_r: float = 1.0, xi: float = 0.5) -> int:
    """Edge cap scaled as c_r * (n / log(max(n, p)))^(xi / 2), at least 1."""
    if not 0.0 < xi < 1.0:
        raise ValueError(f"xi must lie in (0, 1), got {xi}")
    return max(1, math.floor(c_r * (n / math.log(max(n, p))) ** (xi / 2.0)))


@dataclass(frozen=True)
class GroundTruth:
    """A known generating model: precision, covariance and support graph."""

    omega: np.ndarray
    sigma: np.ndarray
    graph: UndirectedGraph


@dataclass(frozen=True)
class Dataset:
    """An n x p data matrix with its Gram matrix X'X cached.

    ``truth`` optionally carries the generating model for simulations.
    """

    x: np.ndarray
    gram: np.ndarray
    truth: GroundTruth | None = None

    @classmethod
    def from_matrix(cls, x: np.ndarray, truth: GroundTruth | None = None) -> "Dataset":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch(f"data must be 2-d, got shape {x.shape}")
        return cls(x=x, gram=symmetrize(x.T @ x), truth=truth)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class GraphScore:
    """Log marginal likelihood, log prior and their sum for one graph."""

    log_marginal: float
    log_prior: float

    @property
    def log_posterior(self) -> float:
        return self.log_marginal + self.log_prior


def log_norm_const_complete(nu: float, scale: np.ndarray) -> float:
    """Log normalising constant of W_q(nu, scale) on the complete graph.

    ``scale`` is the q x q positive definite scale block; q = 0 returns 0
    under the empty-product convention.  Requires nu > 2.
    """
    if not nu > 2.0:
        raise ValueError(f"nu must exceed 2, got {nu}")
    scale = np.asarray(scale, dtype=float)
    q = scale.shape[0]
    if q == 0:
        return 0.0
    _, logdet = cholesky_logdet(scale)
    a = (nu + q - 1) / 2.0
    return a * q * LOG_2 + log_multigamma(a, q) - a * logdet


def log_norm_const(
    g: UndirectedGraph,
    nu: float,
    a: np.ndarray,
    seq: PerfectSequence | None = None,
) -> float:
    """Log normalising constant of W_G(nu, A) for decomposable G.

    Clique terms minus separator terms over a perfect sequence; the value
    does not depend on which perfect sequence is used.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (g.p, g.p):
        raise DimensionMismatch(f"scale shape {a.shape} does not match p={g.p}")
    if seq is None:
        seq = perfect_sequence(g)
    total = 0.0
    for c in seq.cliques:
        total += log_norm_const_complete(nu, submatrix(a, c))
    for s in seq.separators:
        total -= log_norm_const_complete(nu, submatrix(a, s))
    return total


def _log_binomial(m: int, k: int) -> float:
    return math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1)


def log_graph_prior(g: UndirectedGraph, hyper: Hyperparameters) -> float:
    """Log prior of a graph, up to the common normalising constant.

    pi(G) is proportional to ``1 / binom(m, |G|) * exp(-|G| c_tau log p)``
    over decomposable graphs with at most r_max edges (m = p(p-1)/2);
    anything outside that support gets -inf.
    """
    m = g.max_edges
    k = g.size
    r = hyper.r_max if hyper.r_max is not None else m
    if k > r or not is_decomposable(g):
        return -math.inf
    return -_log_binomial(m, k) - k * hyper.c_tau * math.log(g.p)


class GraphScorer:
    """Scores graphs against one dataset and hyperparameter setting.

    Clique and separator contributions depend on the vertex subset only, so
    their Gram log determinants are cached across calls; the cache is lock
    protected and deterministic, making scores safe to reuse across chains.
    """

    def __init__(self, data: Dataset, hyper: Hyperparameters):
        self.data = data
        self.hyper = hyper
        self._logdet: dict[tuple[int, ...], float] = {}
        self._scalar: dict[int, float] = {}
        self._lock = threading.Lock()

    def _gram_logdet(self, subset: tuple[int, ...]) -> float:
        with self._lock:
            cached = self._logdet.get(subset)
        if cached is not None:
            return cached
        _, val = cholesky_logdet(submatrix(self.data.gram, subset))
        with self._lock:
            self._logdet[subset] = val
        return val

    def _scalar_term(self, q: int) -> float:
        # size-only part of a clique contribution
        with self._lock:
            cached = self._scalar.get(q)
        if cached is not None:
            return cached
        n, nu, g = self.data.n, self.hyper.nu, self.hyper.g
        val = (
            n * q / 2.0 * LOG_2
            + log_multigamma((n + nu + q - 1) / 2.0, q)
            - log_multigamma((nu + q - 1) / 2.0, q)
            - q / 2.0 * ((n + nu + q - 1) * math.log1p(g) - (nu + q - 1) * math.log(g))
        )
        with self._lock:
            self._scalar[q] = val
        return val

    def clique_term(self, subset: frozenset[int]) -> float:
        """log I_C(n+nu, (1+g) Gram_C) - log I_C(nu, g Gram_C) for one subset."""
        q = len(subset)
        if q == 0:
            return 0.0
        if q > self.data.n:
            raise CliqueTooLarge(q, self.data.n)
        key = tuple(sorted(subset))
        return self._scalar_term(q) - self.data.n / 2.0 * self._gram_logdet(key)

    def log_marginal_core(
        self, g: UndirectedGraph, seq: PerfectSequence | None = None
    ) -> float:
        """Log marginal likelihood without the -np/2 log(2 pi) constant."""
        if g.p != self.data.p:
            raise DimensionMismatch(f"graph p={g.p} does not match data p={self.data.p}")
        if seq is None:
            seq = perfect_sequence(g)
        total = 0.0
        for c in seq.cliques:
            total += self.clique_term(c)
        for s in seq.separators:
            total -= self.clique_term(s)
        return total

    def log_marginal(self, g: UndirectedGraph, seq: PerfectSequence | None = None) -> float:
        n, p = self.data.n, self.data.p
        return self.log_marginal_core(g, seq) - n * p / 2.0 * LOG_2PI

    def score(self, g: UndirectedGraph, seq: PerfectSequence | None = None) -> GraphScore:
        m = g.max_edges
        r = self.hyper.r_max if self.hyper.r_max is not None else m
        if g.size > r:
            # outside the prior support; marginal never evaluated
            return GraphScore(log_marginal=-math.inf, log_prior=-math.inf)
        # perfect_sequence raises NotDecomposable, so the prior can skip its
        # own chordality test once a sequence is in hand
        if seq is None:
            seq = perfect_sequence(g)
        log_prior = -_log_binomial(m, g.size) - g.size * self.hyper.c_tau * math.log(g.p)
        return GraphScore(log_marginal=self.log_marginal(g, seq), log_prior=log_prior)


def log_marginal_likelihood(
    data: Dataset, g: UndirectedGraph, hyper: Hyperparameters
) -> float:
    """Log of f(X | G), the Gaussian likelihood integrated over W_G(nu, gX'X).

    Evaluated clique-wise; requires every clique of G to have at most n
    vertices (CliqueTooLarge otherwise).
    """
    return GraphScorer(data, hyper).log_marginal(g)


def log_pairwise_bayes_factor(
    data: Dataset,
    g1: UndirectedGraph,
    g0: UndirectedGraph,
    hyper: Hyperparameters,
) -> float:
    """log f(X | G1) - log f(X | G0); the 2 pi constants cancel exactly."""
    scorer = GraphScorer(data, hyper)
    return scorer.log_marginal_core(g1) - scorer.log_marginal_core(g0)


def log_posterior_ratio(
    data: Dataset,
    g1: UndirectedGraph,
    g0: UndirectedGraph,
    hyper: Hyperparameters,
) -> float:
    """Log posterior odds of g1 over g0 (Bayes factor plus prior ratio)."""
    bf = log_pairwise_bayes_factor(data, g1, g0, hyper)
    return bf + log_graph_prior(g1, hyper) - log_graph_prior(g0, hyper)


def score_graph(
    data: Dataset, g: UndirectedGraph, hyper: Hyperparameters
) -> GraphScore:
    return GraphScorer(data, hyper).score(g)


def _idx(subset: frozenset[int]) -> list[int]:
    return sorted(subset)


def sample_precision_given_graph(
    data: Dataset,
    g: UndirectedGraph,
    hyper: Hyperparameters,
    rng: np.random.Generator,
    seq: PerfectSequence | None = None,
) -> np.ndarray:
    """One draw of Omega from its posterior W_G(n+nu, (1+g) X'X) given G.

    The covariance clique marginals are generated sequentially: the first
    clique block comes from inverting a complete-graph Wishart draw, and
    each later clique is filled conditional on its separator block using
    the standard Wishart block decomposition (the residual block is an
    independent smaller Wishart and the regression coefficients are matrix
    normal).  Omega is then assembled as the sum of completed clique
    inverses minus separator inverses, which has support exactly on G.
    """
    from .numerics import sample_wishart_complete

    if seq is None:
        seq = perfect_sequence(g)
    n, p = data.n, data.p
    if g.p != p:
        raise DimensionMismatch(f"graph p={g.p} does not match data p={p}")
    for c in seq.cliques:
        if len(c) > n:
            raise CliqueTooLarge(len(c), n)
    nu_post = n + hyper.nu
    b_full = (1.0 + hyper.g) * data.gram

    sigma = np.zeros((p, p))
    first = _idx(seq.cliques[0])
    k = sample_wishart_complete(nu_post, b_full[np.ix_(first, first)], rng)
    lo, _ = cholesky_logdet(k)
    sigma[np.ix_(first, first)] = cho_solve((lo, True), np.eye(len(first)))

    for l in range(1, len(seq.cliques)):
        clique = seq.cliques[l]
        sep = seq.separators[l - 1]
        r_idx = _idx(clique - sep)
        s_idx = _idx(sep)
        nr, ns = len(r_idx), len(s_idx)
        if ns == 0:
            k = sample_wishart_complete(nu_post, b_full[np.ix_(r_idx, r_idx)], rng)
            lo, _ = cholesky_logdet(k)
            sigma[np.ix_(r_idx, r_idx)] = cho_solve((lo, True), np.eye(nr))
            continue
        b_rr = b_full[np.ix_(r_idx, r_idx)]
        b_rs = b_full[np.ix_(r_idx, s_idx)]
        b_ss = b_full[np.ix_(s_idx, s_idx)]
        lo_ss, _ = cholesky_logdet(b_ss)
        # B_RR - B_RS inv(B_SS) B_SR, the residual scale of the R block
        half = solve_triangular(lo_ss, b_rs.T, lower=True)
        b_res = symmetrize(b_rr - half.T @ half)
        k_rr = sample_wishart_complete(nu_post + ns, b_res, rng)
        lo_k, _ = cholesky_logdet(k_rr)
        gamma = cho_solve((lo_k, True), np.eye(nr))
        mean_u = cho_solve((lo_ss, True), b_rs.T).T
        lo_g, _ = cholesky_logdet(gamma)
        col_factor = solve_triangular(lo_ss, np.eye(ns), lower=True, trans="T")
        u = mean_u + lo_g @ rng.standard_normal((nr, ns)) @ col_factor.T
        sig_ss = sigma[np.ix_(s_idx, s_idx)]
        sig_rs = u @ sig_ss
        sigma[np.ix_(r_idx, s_idx)] = sig_rs
        sigma[np.ix_(s_idx, r_idx)] = sig_rs.T
        sigma[np.ix_(r_idx, r_idx)] = symmetrize(gamma + sig_rs @ u.T)

    omega = np.zeros((p, p))
    for c in seq.cliques:
        idx = _idx(c)
        lo, _ = cholesky_logdet(sigma[np.ix_(idx, idx)])
        omega[np.ix_(idx, idx)] += cho_solve((lo, True), np.eye(len(idx)))
    for s in seq.separators:
        if not s:
            continue
        idx = _idx(s)
        lo, _ = cholesky_logdet(sigma[np.ix_(idx, idx)])
        omega[np.ix_(idx, idx)] -= cho_solve((lo, True), np.eye(len(idx)))
    return symmetrize(omega)


def posterior_mean_precision(
    data: Dataset,
    g: UndirectedGraph,
    hyper: Hyperparameters,
    seq: PerfectSequence | None = None,
) -> np.ndarray:
    """Closed-form posterior mean of Omega given the graph.

    Sum over cliques of (n + nu + |C| - 1) / (1 + g) * inv(Gram_C), padded
    with zeros, minus the matching separator terms.
    """
    if seq is None:
        seq = perfect_sequence(g)
    n, p = data.n, data.p
    for c in seq.cliques:
        if len(c) > n:
            raise CliqueTooLarge(len(c), n)
    nu_post = n + hyper.nu
    shrink = 1.0 / (1.0 + hyper.g)
    mean = np.zeros((p, p))
    for c in seq.cliques:
        idx = _idx(c)
        lo, _ = cholesky_logdet(data.gram[np.ix_(idx, idx)])
        inv = cho_solve((lo, True), np.eye(len(idx)))
        mean[np.ix_(idx, idx)] += (nu_post + len(idx) - 1) * shrink * inv
    for s in seq.separators:
        if not s:
            continue
        idx = _idx(s)
        lo, _ = cholesky_logdet(data.gram[np.ix_(idx, idx)])
        inv = cho_solve((lo, True), np.eye(len(idx)))
        mean[np.ix_(idx, idx)] -= (nu_post + len(idx) - 1) * shrink * inv
    return symmetrize(mean)
