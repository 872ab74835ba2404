"""
Unit tests for two-stage fitting and change-point selection.
"""

import pytest

REFERENCE_ONLY = {"c", "alpha", "p"}


class TestCombineAic:
    """AIC assembly arithmetic."""

    @pytest.mark.parametrize(
        "aic0, aic1, aic2, expected",
        [
            (442.8, -118.3, 422.9, -138.2),
            (465.5, -95.4, 434.7, -126.2),
        ],
    )
    def test_worked_examples(self, aic0, aic1, aic2, expected):
        from nsetas.etas.changepoint import combine_aic

        aic12, delta = combine_aic(aic0, aic1, aic2)
        assert aic12 == pytest.approx(aic1 + aic2)
        assert delta == pytest.approx(expected, abs=1e-9)

    def test_penalty_enters_once(self):
        from nsetas.etas.changepoint import combine_aic

        _, plain = combine_aic(100.0, 40.0, 50.0)
        _, penalized = combine_aic(100.0, 40.0, 50.0, q_penalty=1.5)
        assert penalized - plain == pytest.approx(3.0)

    def test_negative_penalty(self):
        from nsetas.core.exceptions import ValidationError
        from nsetas.etas.changepoint import combine_aic

        with pytest.raises(ValidationError):
            combine_aic(1.0, 1.0, 1.0, q_penalty=-1.0)


class TestSplitCatalog:
    def test_periods(self, small_catalog):
        from nsetas.etas.changepoint import split_catalog

        before, after = split_catalog(small_catalog, 3.7)

        assert before.window == (1.0, 3.7)
        assert before.n_events == 3
        assert after.window == (3.7, 11.0)
        assert after.n_events == 5
        assert after.n_history == 4

    def test_reset_history(self, small_catalog):
        from nsetas.etas.changepoint import split_catalog

        _, after = split_catalog(small_catalog, 4.0, reset_history=True)
        assert after.n_history == 0
        assert after.n_events == 3

    @pytest.mark.parametrize("t0", [1.0, 11.0, 0.2, 12.0])
    def test_outside_window(self, small_catalog, t0):
        from nsetas.core.exceptions import ValidationError
        from nsetas.etas.changepoint import split_catalog

        with pytest.raises(ValidationError) as exc_info:
            split_catalog(small_catalog, t0)
        assert exc_info.value.field == "t0"


class TestTwoStageFit:
    """Tests for a predetermined change point."""

    def test_assembly(self, small_catalog, reference_params):
        from nsetas.etas.changepoint import two_stage_fit

        result = two_stage_fit(small_catalog, 4.0, reference=reference_params)

        assert result.t0 == 4.0
        assert result.fit_before.k == result.fit_after.k == result.fit_whole.k == 2
        assert set(result.fit_before.fixed) == REFERENCE_ONLY
        assert result.aic12 == pytest.approx(result.fit_before.aic + result.fit_after.aic)
        assert result.delta_aic == pytest.approx(result.aic12 - result.fit_whole.aic)
        assert result.significant == (result.delta_aic < 0)

    def test_penalty(self, small_catalog, reference_params):
        from nsetas.etas.changepoint import two_stage_fit

        plain = two_stage_fit(small_catalog, 4.0, reference=reference_params)
        penalized = two_stage_fit(small_catalog, 4.0, 1.0, reference=reference_params)
        assert penalized.delta_aic - plain.delta_aic == pytest.approx(2.0, abs=1e-6)

    def test_split_loglik_dominates_whole(self, simulated_catalog, reference_params):
        """Period likelihoods add up to the whole-window one, so their maxima cannot fall below it."""
        from nsetas.etas.changepoint import split_catalog, two_stage_fit
        from nsetas.etas.intensity import log_likelihood

        before, after = split_catalog(simulated_catalog, 150.0)
        whole = log_likelihood(reference_params, simulated_catalog)
        parts = log_likelihood(reference_params, before) + log_likelihood(reference_params, after)
        assert parts == pytest.approx(whole, rel=1e-10)

        result = two_stage_fit(simulated_catalog, 150.0, reference=reference_params)
        assert result.fit_before.loglik + result.fit_after.loglik >= result.fit_whole.loglik - 1e-6

    def test_empty_period(self, small_catalog, reference_params):
        from nsetas.core.exceptions import EmptyPeriodError
        from nsetas.etas.changepoint import two_stage_fit

        with pytest.raises(EmptyPeriodError) as exc_info:
            two_stage_fit(small_catalog, 10.6, reference=reference_params)
        assert exc_info.value.period == (10.6, 11.0)


class TestSearch:
    """Tests for search_changepoint."""

    def test_selects_minimum(self, small_catalog, reference_params):
        from nsetas.etas.changepoint import search_changepoint, two_stage_fit

        grid = [3.0, 4.0, 6.0]
        result = search_changepoint(small_catalog, grid, reference=reference_params)
        sums = {
            t0: (lambda r: r.fit_before.aic + r.fit_after.aic)(
                two_stage_fit(small_catalog, t0, reference=reference_params)
            )
            for t0 in grid
        }

        assert result.t0 == min(sums, key=sums.get)
        assert result.candidates_evaluated == 3
        assert result.aic12 == pytest.approx(sums[result.t0])

    def test_more_candidates_never_worse(self, small_catalog, reference_params):
        """Enlarging the candidate set cannot raise the minimized AIC1 + AIC2."""
        from nsetas.etas.changepoint import default_candidates, search_changepoint

        grid = [2.5, 3.0, 4.0, 5.0, 6.0]
        coarse = search_changepoint(small_catalog, [3.0, 6.0], reference=reference_params)
        fine = search_changepoint(small_catalog, grid, reference=reference_params)
        every = search_changepoint(
            small_catalog, grid + default_candidates(small_catalog), reference=reference_params
        )

        assert fine.aic12 <= coarse.aic12
        assert every.aic12 <= fine.aic12

    def test_skips_unfittable_candidates(self, small_catalog, reference_params):
        from nsetas.etas.changepoint import search_changepoint

        result = search_changepoint(small_catalog, [4.0, 10.6], reference=reference_params)
        assert result.t0 == 4.0
        assert result.candidates_evaluated == 2

    def test_empty_grid(self, small_catalog):
        from nsetas.core.exceptions import ModelSelectionError
        from nsetas.etas.changepoint import search_changepoint

        with pytest.raises(ModelSelectionError):
            search_changepoint(small_catalog, [])

    def test_no_candidate_fits(self, small_catalog, reference_params):
        from nsetas.core.exceptions import ModelSelectionError
        from nsetas.etas.changepoint import search_changepoint

        with pytest.raises(ModelSelectionError):
            search_changepoint(small_catalog, [10.6], reference=reference_params)

    def test_candidate_outside(self, small_catalog):
        from nsetas.core.exceptions import ValidationError
        from nsetas.etas.changepoint import search_changepoint

        with pytest.raises(ValidationError):
            search_changepoint(small_catalog, [4.0, 11.0])

    def test_default_candidates(self, small_catalog):
        from nsetas.etas.changepoint import default_candidates

        assert default_candidates(small_catalog) == [1.2, 1.25, 2.0, 3.7, 3.75, 5.5, 8.1, 10.4]


class TestExtrapolation:
    def test_matches_cumulative_before_change(self, small_catalog, reference_params):
        from nsetas.etas.changepoint import extrapolate_curve, two_stage_fit
        from nsetas.etas.intensity import cumulative_intensity

        result = two_stage_fit(small_catalog, 4.0, reference=reference_params)
        curve = extrapolate_curve(result.fit_before, small_catalog, [3.0, 9.0])
        assert curve[0] == pytest.approx(cumulative_intensity(result.fit_before.params, small_catalog, 3.0))
        assert curve[1] > curve[0]
