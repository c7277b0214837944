"""Dense symmetric linear algebra, special functions and random draws.

Wishart convention
------------------
Throughout the package ``W_q(df, scale)`` denotes the distribution with
density proportional to ``det(B)^((df-2)/2) * exp(-tr(B @ scale) / 2)`` on
positive definite q x q matrices.  In the textbook parameterisation this is
a Wishart with ``df + q - 1`` degrees of freedom and scale ``inv(scale)``,
so its mean is ``(df + q - 1) * inv(scale)``.  The density is normalisable
for ``df > 2`` independently of q, which is what makes the parameterisation
convenient for graph-indexed models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite

LOG_2 = float(np.log(2.0))
LOG_PI = float(np.log(np.pi))
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class RngState:
    """Counter-based random stream identified by (seed, stream).

    Distinct streams from the same seed are statistically independent, and a
    given (seed, stream) pair reproduces the identical draw sequence across
    runs, which is what makes parallel chains reproducible.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return make_rng(self.seed, self.stream)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def cholesky_logdet(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor and log determinant of a positive definite matrix.

    Raises NotPositiveDefinite when the factorisation fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return lower, logdet


def submatrix(m: np.ndarray, subset: Sequence[int]) -> np.ndarray:
    """Principal submatrix on ``sorted(subset)``; a 0x0 array for the empty set."""
    m = np.asarray(m)
    idx = sorted(int(i) for i in subset)
    if len(set(idx)) != len(idx):
        raise IndexOutOfRange(f"duplicate indices in {subset}")
    if idx and (idx[0] < 0 or idx[-1] >= m.shape[0]):
        raise IndexOutOfRange(f"indices {idx} out of range for shape {m.shape}")
    return m[np.ix_(idx, idx)]


def log_multigamma(a: float, q: int) -> float:
    """log of the multivariate gamma function Gamma_q(a).

    Equals ``q(q-1)/4 * log(pi) + sum_{i=0}^{q-1} lgamma(a - i/2)`` with the
    empty product convention Gamma_0(a) = 1.  Requires a > (q-1)/2.
    """
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    if q == 0:
        return 0.0
    if a <= (q - 1) / 2.0:
        raise ValueError(f"log_multigamma needs a > (q-1)/2, got a={a}, q={q}")
    i = np.arange(q, dtype=float)
    return q * (q - 1) / 4.0 * LOG_PI + float(np.sum(gammaln(a - i / 2.0)))


def sample_wishart_complete(
    df: float, scale: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One draw from W_q(df, scale) in the convention of this package.

    Bartlett construction: with F any square root of inv(scale) and T lower
    triangular with chi and normal entries, F T (F T)' has the target law.
    Requires df > 2.
    """
    if df <= 2.0:
        raise ValueError(f"df must exceed 2, got {df}")
    scale = np.asarray(scale, dtype=float)
    q = scale.shape[0]
    if q == 0:
        return np.zeros((0, 0))
    lower, _ = cholesky_logdet(scale)
    # F = inv(lower).T satisfies F @ F.T = inv(scale)
    f = solve_triangular(lower, np.eye(q), lower=True, trans="T")
    df_std = df + q - 1
    t = np.zeros((q, q))
    for i in range(q):
        t[i, i] = np.sqrt(rng.chisquare(df_std - i))
        for j in range(i):
            t[i, j] = rng.standard_normal()
    ft = f @ t
    return symmetrize(ft @ ft.T)


def sample_mvn(
    n: int, sigma: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """n independent rows from N(0, sigma); shape (n, p), valid for n = 0."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    sigma = np.asarray(sigma, dtype=float)
    lower, _ = cholesky_logdet(sigma)
    z = rng.standard_normal((n, sigma.shape[0]))
    return z @ lower.T
