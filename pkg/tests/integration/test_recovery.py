"""
Monte Carlo checks: simulated catalogs are refitted and the estimates are
compared with the parameters that generated them.
"""

import numpy as np
import pytest


@pytest.mark.slow
@pytest.mark.integration
class TestStationaryRecovery:
    def test_mle_intervals_cover_truth(self, reference_params):
        """About 95% of 2-sigma intervals for mu should cover the true value."""
        from nsetas.etas.mle import fit_mle
        from nsetas.etas.simulation import simulate_thinning
        from nsetas.models.simulation import SimConfig

        covered = []
        for seed in range(20):
            config = SimConfig(params=reference_params, window_end=1000.0, seed=100 + seed)
            catalog = simulate_thinning(config).catalog
            fit = fit_mle(catalog, reference_params, ("c",))
            se = fit.std_errors["mu"]
            if se is not None:
                covered.append(abs(fit.params.mu - reference_params.mu) <= 2 * se)
        assert len(covered) >= 15
        assert np.mean(covered) >= 0.75

    def test_stationary_catalog_has_no_anomaly(self, simulated_catalog, reference_params):
        """On stationary data the optimized fit barely improves on the flat baseline."""
        from nsetas.etas.bayes import fit_configuration

        fit, _ = fit_configuration(simulated_catalog, "1a", reference_params)
        assert -10.0 < fit.delta_abic <= 0.0


@pytest.mark.slow
@pytest.mark.integration
class TestNonstationaryRecovery:
    def test_roundtrip_coverage(self):
        """The doubled background is recovered inside the error bands."""
        from nsetas.cli.init import demo_config
        from nsetas.etas.simulation import roundtrip_recover

        report = roundtrip_recover(demo_config(), label="1a′")

        assert report.knots_checked > 50
        assert report.coverage_mu >= 0.6
        assert report.delta_abic < 0

    @pytest.mark.parametrize("anchoring", ["positional", "temporal"])
    def test_anchoring(self, anchoring):
        from nsetas.cli.init import DEMO_CHANGEPOINT, demo_config
        from nsetas.etas.simulation import roundtrip_recover

        report = roundtrip_recover(demo_config(), label="1a′", anchoring=anchoring)

        assert report.anchoring == anchoring
        assert abs(report.changepoint - DEMO_CHANGEPOINT) < 10.0
        if anchoring == "temporal":
            assert report.changepoint == DEMO_CHANGEPOINT


@pytest.mark.slow
@pytest.mark.integration
class TestChangePointRecovery:
    def test_planted_jump_located(self):
        """A fourfold background jump at the midpoint is found within five events."""
        from nsetas.etas.changepoint import search_changepoint
        from nsetas.etas.simulation import simulate_thinning
        from nsetas.models.anomaly import AnomalyModel, Restriction, SmoothingDomain
        from nsetas.models.etas import EtasParams
        from nsetas.models.simulation import SimConfig

        reference = EtasParams(mu=0.3, k0=0.01, c=0.01, alpha=0.8, p=1.1)
        jump = AnomalyModel(
            knots=(0.0, 99.5, 100.5, 200.0),
            q_mu=(1.0, 1.0, 4.0, 4.0),
            q_k=(1.0, 1.0, 1.0, 1.0),
            restriction=Restriction.FIX_QK,
            smoothing_domain=SmoothingDomain.ORDINARY,
            changepoint=100.0,
            reference=reference,
        )

        offsets = []
        for seed in range(30):
            config = SimConfig(anomaly=jump, window_end=200.0, b_value=1.0, m_c=2.5, seed=500 + seed)
            catalog = simulate_thinning(config).catalog
            result = search_changepoint(catalog, reference=reference)
            times = catalog.target_times
            offsets.append(abs(int(np.sum(times < result.t0)) - int(np.sum(times < 100.0))))

        assert np.mean(np.array(offsets) <= 5) >= 0.8
