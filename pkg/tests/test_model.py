import math

import numpy as np
import pytest
from scipy.integrate import quad

from gwish.errors import CliqueTooLarge, NotDecomposable
from gwish.graph import (
    UndirectedGraph,
    enumerate_decomposable_graphs,
    perfect_sequence,
)
from gwish.model import (
    PRESETS,
    Dataset,
    GraphScorer,
    Hyperparameters,
    log_graph_prior,
    log_marginal_likelihood,
    log_norm_const,
    log_norm_const_complete,
    log_pairwise_bayes_factor,
    log_posterior_ratio,
    posterior_mean_precision,
    sample_precision_given_graph,
    score_graph,
    theory_r_max,
)
from gwish.numerics import make_rng


def random_dataset(n, p, seed=0, truth=None):
    rng = np.random.default_rng(seed)
    return Dataset.from_matrix(rng.standard_normal((n, p)), truth)


class TestNormConstComplete:
    def test_frozen_scalar_value(self):
        # q=1, nu=3, A=[[2]]: the 2^a and det(A)^-a factors cancel exactly,
        # leaving log Gamma(3/2)
        val = log_norm_const_complete(3.0, np.array([[2.0]]))
        assert val == pytest.approx(-0.12078223763524543, abs=1e-12)

    def test_frozen_bivariate_value(self):
        val = log_norm_const_complete(3.0, np.eye(2))
        assert val == pytest.approx(3.224171427529236, abs=1e-12)

    def test_empty_block(self):
        assert log_norm_const_complete(3.0, np.zeros((0, 0))) == 0.0

    def test_scaling_law(self):
        # I_q(nu, cA) = c^{-q(nu+q-1)/2} I_q(nu, A)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((10, 3))
        a = x.T @ x
        nu, c = 4.5, 3.7
        lhs = log_norm_const_complete(nu, c * a)
        rhs = log_norm_const_complete(nu, a) - 3 * (nu + 2) / 2 * math.log(c)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_rejects_small_nu(self):
        with pytest.raises(ValueError):
            log_norm_const_complete(2.0, np.eye(2))


class TestNormConstGraph:
    def test_empty_graph_p2(self):
        g = UndirectedGraph.empty(2)
        val = log_norm_const(g, 3.0, np.eye(2))
        assert val == pytest.approx(math.log(2 * math.pi), abs=1e-12)

    def test_complete_graph_matches_direct_formula(self):
        rng = np.random.default_rng(2)
        for p in (1, 2, 4):
            x = rng.standard_normal((p + 6, p))
            a = x.T @ x
            g = UndirectedGraph.complete(p)
            assert log_norm_const(g, 3.0, a) == pytest.approx(
                log_norm_const_complete(3.0, a), rel=1e-12
            )

    def test_invariant_to_perfect_sequence(self):
        rng = np.random.default_rng(3)
        p = 5
        x = rng.standard_normal((12, p))
        a = x.T @ x
        for g in enumerate_decomposable_graphs(p):
            base = None
            for _ in range(4):
                seq = perfect_sequence(g, priority=rng.permutation(p).tolist())
                val = log_norm_const(g, 3.0, a, seq)
                if base is None:
                    base = val
                else:
                    assert val == pytest.approx(base, rel=1e-10)

    def test_disconnected_graph_factorises(self):
        # two isolated edges: constant is the product of the edge constants
        a = np.diag([1.0, 2.0, 3.0, 4.0]) + 0.1
        g = UndirectedGraph.from_edges(4, [(0, 1), (2, 3)])
        lhs = log_norm_const(g, 3.0, a)
        rhs = log_norm_const_complete(3.0, a[:2, :2]) + log_norm_const_complete(
            3.0, a[2:, 2:]
        )
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestMarginalLikelihood:
    def test_dual_route_identity(self):
        # clique-cached route vs materialised ratio of normalising constants
        data = random_dataset(20, 5, seed=4)
        hyper = Hyperparameters(nu=3.0, g=0.2)
        scorer = GraphScorer(data, hyper)
        a_prior = hyper.g * data.gram
        a_post = (1.0 + hyper.g) * data.gram
        rng = np.random.default_rng(5)
        graphs = list(enumerate_decomposable_graphs(5))
        rng.shuffle(graphs)
        for g in graphs[:60]:
            direct = scorer.log_marginal(g)
            via_constants = (
                -data.n * data.p / 2.0 * math.log(2 * math.pi)
                + log_norm_const(g, data.n + hyper.nu, a_post)
                - log_norm_const(g, hyper.nu, a_prior)
            )
            assert direct == pytest.approx(via_constants, rel=1e-10)

    def test_univariate_quadrature_oracle(self):
        # p=1: marginal = int N(x | 0, 1/w) W(w; nu, g s) dw, both the
        # posterior integral and the prior constant done numerically
        rng = np.random.default_rng(6)
        x = rng.standard_normal((8, 1)) * 1.3
        data = Dataset.from_matrix(x)
        s = float(data.gram[0, 0])
        n = data.n
        for nu, gg in ((3.0, 0.1), (4.5, 1.7)):
            hyper = Hyperparameters(nu=nu, g=gg)
            post, _ = quad(
                lambda w: w ** ((n + nu - 2) / 2.0) * math.exp(-w * (1 + gg) * s / 2.0),
                0.0,
                np.inf,
            )
            prior, _ = quad(
                lambda w: w ** ((nu - 2) / 2.0) * math.exp(-w * gg * s / 2.0),
                0.0,
                np.inf,
            )
            expected = -n / 2.0 * math.log(2 * math.pi) + math.log(post) - math.log(prior)
            got = log_marginal_likelihood(data, UndirectedGraph.empty(1), hyper)
            assert got == pytest.approx(expected, rel=1e-8)

    def test_column_permutation_invariance(self):
        data = random_dataset(15, 4, seed=7)
        hyper = Hyperparameters(g=0.3)
        g = UndirectedGraph.from_edges(4, [(0, 1), (1, 2)])
        perm = [2, 0, 3, 1]
        data_perm = Dataset.from_matrix(data.x[:, perm])
        # new column j carries old column perm[j]; old vertex v moves to inv[v]
        inv = [0] * 4
        for new_pos, old in enumerate(perm):
            inv[old] = new_pos
        relabelled = g.relabel(inv)
        assert log_marginal_likelihood(data_perm, relabelled, hyper) == pytest.approx(
            log_marginal_likelihood(data, g, hyper), rel=1e-10
        )

    def test_clique_too_large(self):
        data = random_dataset(3, 5, seed=8)
        with pytest.raises(CliqueTooLarge):
            log_marginal_likelihood(data, UndirectedGraph.complete(5), Hyperparameters())

    def test_bayes_factor_antisymmetry(self):
        data = random_dataset(18, 4, seed=9)
        hyper = Hyperparameters(g=0.15)
        g1 = UndirectedGraph.from_edges(4, [(0, 1), (2, 3)])
        g0 = UndirectedGraph.from_edges(4, [(0, 2)])
        ab = log_pairwise_bayes_factor(data, g1, g0, hyper)
        ba = log_pairwise_bayes_factor(data, g0, g1, hyper)
        assert ab == pytest.approx(-ba, rel=1e-12)
        assert log_pairwise_bayes_factor(data, g1, g1, hyper) == 0.0


class TestGraphPrior:
    def test_frozen_difference(self):
        hyper = Hyperparameters(c_tau=0.5)
        g6 = UndirectedGraph.from_edges(
            10, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6)]
        )
        g5 = UndirectedGraph.from_edges(10, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
        diff = log_graph_prior(g6, hyper) - log_graph_prior(g5, hyper)
        assert diff == pytest.approx(-3.0484125313829042, abs=1e-10)

    def test_non_decomposable_is_excluded(self):
        c4 = UndirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        assert log_graph_prior(c4, Hyperparameters()) == -math.inf

    def test_edge_cap(self):
        hyper = Hyperparameters(r_max=1)
        g2 = UndirectedGraph.from_edges(4, [(0, 1), (1, 2)])
        assert log_graph_prior(g2, hyper) == -math.inf
        g1 = UndirectedGraph.from_edges(4, [(0, 1)])
        assert math.isfinite(log_graph_prior(g1, hyper))

    def test_empty_graph_prior_is_zero(self):
        # binom(m, 0) = 1 and the size penalty vanishes
        assert log_graph_prior(UndirectedGraph.empty(6), Hyperparameters()) == 0.0


class TestScorer:
    def test_score_composes_prior_and_marginal(self):
        data = random_dataset(12, 4, seed=10)
        hyper = Hyperparameters(g=0.4)
        g = UndirectedGraph.from_edges(4, [(0, 1)])
        sc = score_graph(data, g, hyper)
        assert sc.log_marginal == pytest.approx(
            log_marginal_likelihood(data, g, hyper), rel=1e-12
        )
        assert sc.log_prior == pytest.approx(log_graph_prior(g, hyper), rel=1e-12)
        assert sc.log_posterior == sc.log_marginal + sc.log_prior

    def test_score_beyond_cap_is_minus_inf(self):
        data = random_dataset(12, 4, seed=10)
        sc = score_graph(
            data, UndirectedGraph.complete(3).relabel([0, 1, 2]), Hyperparameters(r_max=2)
        )
        # complete(3) relabelled is still 3 edges > cap 2
        assert sc.log_posterior == -math.inf

    def test_score_raises_on_non_decomposable(self):
        data = random_dataset(12, 4, seed=10)
        c4 = UndirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        with pytest.raises(NotDecomposable):
            score_graph(data, c4, Hyperparameters())

    def test_posterior_ratio_matches_scores(self):
        data = random_dataset(14, 4, seed=11)
        hyper = Hyperparameters(g=0.25)
        g1 = UndirectedGraph.from_edges(4, [(0, 1), (1, 3)])
        g0 = UndirectedGraph.empty(4)
        ratio = log_posterior_ratio(data, g1, g0, hyper)
        s1, s0 = score_graph(data, g1, hyper), score_graph(data, g0, hyper)
        assert ratio == pytest.approx(s1.log_posterior - s0.log_posterior, rel=1e-10)

    def test_cache_reuse_is_exact(self):
        data = random_dataset(16, 5, seed=12)
        scorer = GraphScorer(data, Hyperparameters(g=0.2))
        g = UndirectedGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        first = scorer.log_marginal(g)
        again = scorer.log_marginal(g)
        fresh = GraphScorer(data, Hyperparameters(g=0.2)).log_marginal(g)
        assert first == again == fresh


class TestHyperparameters:
    def test_validation(self):
        with pytest.raises(ValueError):
            Hyperparameters(nu=2.0)
        with pytest.raises(ValueError):
            Hyperparameters(g=0.0)
        with pytest.raises(ValueError):
            Hyperparameters(c_tau=-1.0)
        with pytest.raises(ValueError):
            Hyperparameters(r_max=-1)

    def test_preset_values(self):
        assert PRESETS["ratio"](30) == pytest.approx(0.0019607654721305423, rel=1e-12)
        assert PRESETS["selection"](30) == pytest.approx(2.021714109091191, rel=1e-12)
        h = Hyperparameters.preset("ratio", 30, nu=4.0)
        assert h.g == pytest.approx(PRESETS["ratio"](30))
        assert h.nu == 4.0
        with pytest.raises(ValueError):
            Hyperparameters.preset("nonsense", 30)

    def test_theory_r_max(self):
        assert theory_r_max(100, 50) == 2
        assert theory_r_max(2, 2) >= 1
        with pytest.raises(ValueError):
            theory_r_max(100, 50, xi=1.5)


class TestPosteriorSampling:
    def test_support_and_positive_definiteness(self):
        data = random_dataset(25, 6, seed=13)
        hyper = Hyperparameters(g=0.3)
        g = UndirectedGraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4)])
        rng = make_rng(77)
        adj = g.adjacency
        for _ in range(10):
            omega = sample_precision_given_graph(data, g, hyper, rng)
            assert np.all(np.linalg.eigvalsh(omega) > 0)
            off = ~adj & ~np.eye(6, dtype=bool)
            assert np.all(omega[off] == 0.0)
            assert np.all(omega[adj] != 0.0)

    def test_deterministic_given_rng(self):
        data = random_dataset(20, 4, seed=14)
        hyper = Hyperparameters(g=0.2)
        g = UndirectedGraph.from_edges(4, [(0, 1), (1, 2)])
        a = sample_precision_given_graph(data, g, hyper, make_rng(5, 3))
        b = sample_precision_given_graph(data, g, hyper, make_rng(5, 3))
        assert np.array_equal(a, b)

    def test_clique_too_large(self):
        data = random_dataset(2, 4, seed=15)
        with pytest.raises(CliqueTooLarge):
            sample_precision_given_graph(
                data, UndirectedGraph.complete(4), Hyperparameters(), make_rng(0)
            )

    def test_mc_mean_matches_closed_form_complete(self):
        # complete graph: the mean must be (n + nu + p - 1)/(1 + g) inv(Gram)
        data = random_dataset(30, 2, seed=16)
        hyper = Hyperparameters(nu=3.0, g=0.5)
        g = UndirectedGraph.complete(2)
        expected = posterior_mean_precision(data, g, hyper)
        manual = (
            (data.n + hyper.nu + 2 - 1)
            / (1 + hyper.g)
            * np.linalg.inv(data.gram)
        )
        assert np.allclose(expected, manual, rtol=1e-12)
        rng = make_rng(99)
        draws = np.array(
            [sample_precision_given_graph(data, g, hyper, rng) for _ in range(4000)]
        )
        mc = draws.mean(axis=0)
        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(mc - expected) < 4 * se)

    def test_mc_mean_matches_closed_form_path(self):
        # path graph p=3 exercises the separator subtraction in both the
        # sampler assembly and the closed-form mean
        data = random_dataset(40, 3, seed=17)
        hyper = Hyperparameters(nu=3.0, g=0.2)
        g = UndirectedGraph.from_edges(3, [(0, 1), (1, 2)])
        expected = posterior_mean_precision(data, g, hyper)
        rng = make_rng(101)
        draws = np.array(
            [sample_precision_given_graph(data, g, hyper, rng) for _ in range(4000)]
        )
        mc = draws.mean(axis=0)
        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        mask = g.adjacency | np.eye(3, dtype=bool)
        assert np.all(np.abs(mc - expected)[mask] < 4 * se[mask])
        assert np.all(mc[~mask] == 0.0) and np.all(expected[~mask] == 0.0)

    def test_posterior_mean_support(self):
        data = random_dataset(30, 5, seed=18)
        g = UndirectedGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
        mean = posterior_mean_precision(data, g, Hyperparameters(g=0.3))
        off = ~g.adjacency & ~np.eye(5, dtype=bool)
        assert np.all(mean[off] == 0.0)
        assert np.all(np.diag(mean) > 0.0)
