"""
Unit tests for Laplace evidence, hyperparameter search and ABIC ranking.
"""

import math

import numpy as np
import pytest
from scipy import integrate


def make_fit(label="1a", log_marginal=-10.0, delta=None, knots=(0.0, 1.0, 2.0), changepoint=None):
    """A hand-built BayesFit with a flat MAP model."""
    from nsetas.etas.bayes import abic_value, hyperparameter_count
    from nsetas.models.anomaly import AnomalyModel, BayesFit, Hyperparams, parse_label
    from nsetas.models.etas import EtasParams

    restriction, domain, _ = parse_label(label)
    count = hyperparameter_count(restriction)
    return BayesFit(
        map=AnomalyModel.flat(
            knots, restriction, domain,
            EtasParams(mu=1.0, k0=0.1, c=0.01, alpha=1.0, p=1.1),
            changepoint=changepoint,
        ),
        hyper=Hyperparams(w_mu=1.0, w_k=1.0),
        log_marginal=log_marginal,
        abic=abic_value(log_marginal, count),
        delta_abic=delta,
        hyperparameter_count=count,
        penalized_loglik=log_marginal,
        loglik=log_marginal,
        hessian_log_det=0.0,
    )


class TestLaplace:
    """Laplace evidence on surfaces where it is exact."""

    def test_one_dimensional_gaussian(self):
        from nsetas.etas.bayes import log_marginal_from_surface
        from nsetas.etas.nonstationary import QuadraticPenalty

        a, m, r = 2.0, 0.7, 0.5

        class Gaussian:
            def value(self, z):
                return float(-0.5 * a * (z[0] - m) ** 2)

            def gradient(self, z):
                return np.array([-a * (z[0] - m)])

            def hessian(self, z):
                return np.array([[-a]])

        penalty = QuadraticPenalty(np.array([[r]]), np.zeros(1), 0.0)
        value = log_marginal_from_surface(Gaussian(), penalty, np.zeros(1), nonnegative=False)

        joint, _ = integrate.quad(lambda z: math.exp(-0.5 * a * (z - m) ** 2 - r * z * z), -np.inf, np.inf)
        prior, _ = integrate.quad(lambda z: math.exp(-r * z * z), -np.inf, np.inf)
        assert value == pytest.approx(math.log(joint / prior), rel=1e-9)

    def test_not_positive_definite(self):
        from nsetas.core.exceptions import LaplaceError
        from nsetas.etas.bayes import laplace_evidence
        from nsetas.etas.nonstationary import QuadraticPenalty

        class Convex:
            def value(self, z):
                return float(z @ z)

            def gradient(self, z):
                return 2 * z

            def hessian(self, z):
                return 2 * np.eye(z.size)

        with pytest.raises(LaplaceError):
            laplace_evidence(Convex(), QuadraticPenalty(0.1 * np.eye(2), np.zeros(2), 0.0), np.zeros(2))


class TestPointwiseErrors:
    def test_identity_covariance(self):
        from nsetas.etas.bayes import pointwise_errors

        eps_mu, eps_k = pointwise_errors(
            (0.0, 1.0, 2.0), np.eye(2), [(0, 0), (0, 1)], [0.0, 0.5, 1.0, 1.5, 2.0]
        )
        assert np.allclose(eps_mu, [1.0, math.sqrt(0.5), 1.0, 0.5, 0.0])
        assert np.all(eps_k == 0.0)

    def test_tied(self):
        from nsetas.etas.bayes import pointwise_errors

        eps_mu, eps_k = pointwise_errors(
            (0.0, 1.0, 2.0), 4.0 * np.eye(2), [(0, 0), (0, 1)], [0.0, 1.0], tied=True
        )
        assert list(eps_mu) == [2.0, 2.0]
        assert list(eps_k) == list(eps_mu)

    def test_free_blocks(self):
        from nsetas.etas.bayes import pointwise_errors

        covariance = np.diag([1.0, 1.0, 9.0, 9.0])
        eps_mu, eps_k = pointwise_errors(
            (0.0, 1.0, 2.0), covariance, [(0, 0), (0, 1), (1, 0), (1, 1)], [1.0]
        )
        assert eps_mu[0] == pytest.approx(1.0)
        assert eps_k[0] == pytest.approx(3.0)


class TestCounts:
    @pytest.mark.parametrize(
        "restriction, active, every",
        [("fix_qk", 2, 4), ("tied", 2, 4), ("free", 4, 8)],
    )
    def test_hyperparameter_count(self, restriction, active, every):
        from nsetas.etas.bayes import hyperparameter_count
        from nsetas.models.anomaly import Restriction

        assert hyperparameter_count(Restriction(restriction)) == active
        assert hyperparameter_count(Restriction(restriction), count_all_weights=True) == every

    def test_abic_value(self):
        from nsetas.etas.bayes import abic_value

        assert abic_value(-10.0, 2) == pytest.approx(24.0)

    def test_abic_of(self):
        from nsetas.etas.bayes import abic_of

        assert abic_of(make_fit(log_marginal=-10.0)) == pytest.approx(24.0)


class TestPriorPenalty:
    def test_quadratic_form_is_roughness(self, small_catalog, reference_params):
        """q.Sigma.q reproduces the roughness and Sigma is positive semidefinite."""
        from nsetas.etas.bayes import prior_penalty_matrix
        from nsetas.etas.nonstationary import build_basis, roughness
        from nsetas.models.anomaly import SmoothingDomain

        basis = build_basis(small_catalog, SmoothingDomain.ORDINARY, reference_params)
        sigma = prior_penalty_matrix(basis)
        q = np.random.default_rng(3).uniform(0.5, 2.0, basis.size)

        assert np.allclose(sigma, sigma.T)
        assert np.linalg.eigvalsh(sigma).min() > -1e-10
        assert q @ sigma @ q == pytest.approx(roughness(q, basis), rel=1e-10)
        assert np.ones(basis.size) @ sigma @ np.ones(basis.size) == pytest.approx(0.0, abs=1e-12)


class TestDeltaAbic:
    def test_difference(self):
        from nsetas.etas.bayes import delta_abic

        fit = make_fit(log_marginal=-8.0)
        baseline = make_fit(log_marginal=-10.0)
        assert delta_abic(fit, baseline) == pytest.approx(-4.0)

    @pytest.mark.parametrize(
        "other",
        [
            {"label": "2a"},
            {"label": "1b"},
            {"label": "1a′", "changepoint": 1.5},
            {"knots": (0.0, 0.5, 2.0)},
        ],
    )
    def test_mismatch(self, other):
        from nsetas.core.exceptions import ModelSelectionError
        from nsetas.etas.bayes import delta_abic

        with pytest.raises(ModelSelectionError):
            delta_abic(make_fit(), make_fit(**other))


class TestScoreboard:
    """Ranking by ΔABIC."""

    def test_ranking(self):
        from nsetas.etas.bayes import scoreboard

        fits = [make_fit("1a", delta=-2.0), make_fit("2a", delta=-5.0), make_fit("3a", delta=0.0)]
        board = scoreboard(fits)

        assert board["winner"] == "2a"
        rows = {row["label"]: row for row in board["rows"]}
        assert rows["2a"]["relative_probability"] == 1.0
        assert rows["1a"]["relative_probability"] == pytest.approx(math.exp(-1.5))
        assert rows["3a"]["relative_probability"] == pytest.approx(math.exp(-2.5))
        assert [row["winner"] for row in board["rows"]] == [False, True, False]

    def test_missing_delta(self):
        from nsetas.core.exceptions import ModelSelectionError
        from nsetas.etas.bayes import scoreboard

        with pytest.raises(ModelSelectionError):
            scoreboard([make_fit(delta=-1.0), make_fit("2a")])
        with pytest.raises(ModelSelectionError):
            scoreboard([])


class TestLaplaceFit:
    """Laplace fits on a simulated catalog."""

    def test_fix_qk(self, simulated_catalog, reference_params):
        from nsetas.etas.bayes import error_bounds, laplace_fit, log_marginal
        from nsetas.models.anomaly import Hyperparams, Restriction, SmoothingDomain

        hyper = Hyperparams(w_mu=10.0, w_k=10.0)
        fit = laplace_fit(simulated_catalog, Restriction.FIX_QK, SmoothingDomain.ORDINARY, hyper, reference_params)
        n = len(fit.map.knots)

        assert fit.hyperparameter_count == 2
        assert fit.abic == pytest.approx(-2 * fit.log_marginal + 4)
        assert fit.covariance.shape == (n - 1, n - 1)
        assert len(fit.error_mu) == n and fit.error_mu[-1] == 0.0
        assert set(fit.error_k) == {0.0}
        assert fit.hessian_log_det_k is None
        assert np.allclose(error_bounds(fit, fit.map.knots)[0], fit.error_mu)
        assert fit.log_marginal == pytest.approx(
            log_marginal(simulated_catalog, Restriction.FIX_QK, SmoothingDomain.ORDINARY, hyper, reference_params)
        )

    def test_search_never_worse_than_start(self, simulated_catalog, reference_params):
        """The start point is a simplex vertex, so the search can only improve on it."""
        from nsetas.etas.bayes import laplace_fit, optimize_hyperparams
        from nsetas.models.anomaly import Hyperparams, Restriction, SmoothingDomain

        init = Hyperparams(w_mu=1.0, w_k=1.0)
        start = laplace_fit(simulated_catalog, Restriction.FIX_QK, SmoothingDomain.ORDINARY, init, reference_params)
        fit = optimize_hyperparams(
            simulated_catalog, Restriction.FIX_QK, SmoothingDomain.ORDINARY, reference_params, init=init
        )

        assert fit.abic <= start.abic + 1e-6
        assert fit.evaluations > 1
        assert fit.hyper.w_k == fit.hyper.w_mu

    def test_heavy_baseline_fixes_weights(self, simulated_catalog, reference_params, monkeypatch):
        from nsetas.config.settings import reset_settings
        from nsetas.etas.bayes import heavy_baseline
        from nsetas.models.anomaly import Restriction, SmoothingDomain

        monkeypatch.setenv("NSETAS_HEAVY_WEIGHT", "1e4")
        reset_settings()
        baseline = heavy_baseline(simulated_catalog, Restriction.FIX_QK, SmoothingDomain.ORDINARY, reference_params)

        assert baseline.hyper.w_mu == baseline.hyper.w_k == 1e4

    def test_error_bounds_need_covariance(self):
        from nsetas.core.exceptions import LaplaceError
        from nsetas.etas.bayes import error_bounds

        fit = make_fit()
        with pytest.raises(LaplaceError):
            error_bounds(fit, [0.5])

    def test_fit_configuration(self, simulated_catalog, reference_params):
        """The optimized fit never trails its heavy-weight baseline."""
        from nsetas.etas.bayes import fit_configuration

        fit, baseline = fit_configuration(simulated_catalog, "1a", reference_params)

        assert fit.label == baseline.label == "1a"
        assert baseline.baseline
        assert baseline.delta_abic == 0.0
        assert baseline.hyper.w_mu == 1e6
        assert fit.delta_abic <= 0.0
        assert fit.delta_abic == pytest.approx(fit.abic - baseline.abic)
        assert fit.evaluations > 0

    def test_primed_label_needs_changepoint(self, small_catalog, reference_params):
        from nsetas.core.exceptions import ValidationError
        from nsetas.etas.bayes import fit_configuration

        with pytest.raises(ValidationError):
            fit_configuration(small_catalog, "3b′", reference_params)
