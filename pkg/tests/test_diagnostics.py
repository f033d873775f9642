import numpy as np
import pytest

from biaslab.corpus import fig1_model
from biaslab.dataset import Dataset
from biaslab.diagnostics import (
    CAVEATS,
    Advice,
    Verdict,
    covariate_screen,
    iv_sensitivity_test,
    zy_dependence,
)
from biaslab.errors import InsufficientDataError, InvalidQueryError, UnknownColumnError
from biaslab.montecarlo import SimConfig, replication_rng, sample, select_band


@pytest.fixture
def confounded(fig1):
    return sample(fig1, SimConfig(n=20_000, seed=21))


@pytest.fixture
def unconfounded():
    return sample(fig1_model(0.3, 0.0, 0.4, 0.6), SimConfig(n=20_000, seed=22))


class TestIVSensitivity(object):

    def test_confounding_is_detected(self, confounded):
        verdict = iv_sensitivity_test(confounded, "X", "Y", "Z", resamples=200, seed=1)
        assert verdict.verdict == Verdict.CONFOUNDING_SUSPECTED
        assert verdict.delta == pytest.approx(0.1125, abs=0.03)
        assert verdict.p_value < 1e-6

    def test_no_confounding(self, unconfounded):
        verdict = iv_sensitivity_test(unconfounded, "X", "Y", "Z", resamples=200, seed=1)
        assert verdict.verdict == Verdict.NO_EVIDENCE
        assert abs(verdict.delta) <= verdict.k * verdict.delta_se

    def test_selection_bias_goes_unnoticed(self, fig3):
        data = select_band(sample(fig3, SimConfig(n=200_000, seed=23)), "S", 0.0, 0.05)
        verdict = iv_sensitivity_test(data, "X", "Y", "Z", resamples=200, seed=1)
        assert verdict.verdict == Verdict.NO_EVIDENCE
        assert verdict.slope_without_iv == pytest.approx(0.3, abs=0.05)

    def test_report_fields(self, confounded):
        verdict = iv_sensitivity_test(confounded, "X", "Y", "Z", k=3.0, resamples=150, seed=4)
        assert verdict.delta == verdict.slope_with_iv - verdict.slope_without_iv
        assert verdict.caveats == CAVEATS
        assert len(verdict.caveats) == 4
        assert (verdict.n, verdict.k, verdict.resamples, verdict.seed) == (20_000, 3.0, 150, 4)
        record = verdict.to_dict()
        assert record["verdict"] == "ConfoundingSuspected"
        assert 0.0 <= record["p_value"] <= 1.0

    def test_seeded_bootstrap(self, confounded):
        first = iv_sensitivity_test(confounded, "X", "Y", "Z", resamples=120, seed=7)
        again = iv_sensitivity_test(confounded, "X", "Y", "Z", resamples=120, seed=7)
        other = iv_sensitivity_test(confounded, "X", "Y", "Z", resamples=120, seed=8)
        assert first.delta_se == again.delta_se
        assert first.delta_se != other.delta_se
        assert first.delta == other.delta

    def test_extra_conditioning(self, confounded):
        verdict = iv_sensitivity_test(confounded, "X", "Y", "Z", extra_conditioning=["U"], resamples=100, seed=2)
        # Conditioning on the confounder closes the path the instrument would amplify.
        assert verdict.verdict == Verdict.NO_EVIDENCE

    def test_too_few_rows(self, confounded):
        small = confounded.take(np.arange(29))
        with pytest.raises(InsufficientDataError):
            iv_sensitivity_test(small, "X", "Y", "Z")

    def test_invalid_roles(self, confounded):
        with pytest.raises(InvalidQueryError):
            iv_sensitivity_test(confounded, "X", "Y", "X")
        with pytest.raises(UnknownColumnError):
            iv_sensitivity_test(confounded, "X", "Y", "W")
        with pytest.raises(InvalidQueryError):
            iv_sensitivity_test(confounded, "X", "Y", "Z", resamples=1)


class TestZYDependence(object):

    def test_collider_opens_dependence(self, confounded):
        result = zy_dependence(confounded, "X", "Y", "Z")
        assert result.partial_correlation < 0
        assert abs(result.t_statistic) > 10
        assert result.n == confounded.n

    def test_independent_without_confounding(self, unconfounded):
        assert abs(zy_dependence(unconfounded, "X", "Y", "Z").t_statistic) < 4


class TestCovariateScreen(object):

    @pytest.fixture
    def data(self, confounded):
        noise = replication_rng(99, 0).standard_normal(confounded.n)
        return Dataset({**{name: confounded[name] for name in confounded.names}, "W": noise})

    def test_instrument_confounder_and_noise(self, data):
        advice = {a.covariate: a for a in covariate_screen(data, "X", "Y", ["Z", "U", "W"], t_negligible=4)}
        assert advice["Z"].advice == Advice.DISCARD
        assert advice["U"].advice == Advice.RETAIN
        assert advice["W"].advice == Advice.INDETERMINATE
        assert advice["Z"].treatment_association == pytest.approx(0.6, abs=0.03)
        assert abs(advice["Z"].outcome_t) < 4

    def test_order_follows_candidates(self, data):
        names = [a.covariate for a in covariate_screen(data, "X", "Y", ["W", "U", "Z"], t_negligible=4)]
        assert names == ["W", "U", "Z"]

    def test_to_dict(self, data):
        record = covariate_screen(data, "X", "Y", ["U"])[0].to_dict()
        assert record["advice"] == "Retain"
        assert set(record) == {
            "covariate", "treatment_association", "treatment_t", "outcome_association", "outcome_t", "advice",
        }

    def test_invalid_candidates(self, data):
        with pytest.raises(InvalidQueryError):
            covariate_screen(data, "X", "Y", [])
        with pytest.raises(InvalidQueryError):
            covariate_screen(data, "X", "Y", ["X"])
        with pytest.raises(UnknownColumnError):
            covariate_screen(data, "X", "Y", ["Q"])


@pytest.mark.slow
class TestVerdictRates(object):

    RUNS = 200

    def verdicts(self, model):
        for seed in range(self.RUNS):
            data = sample(model, SimConfig(n=20_000, seed=seed))
            yield iv_sensitivity_test(data, "X", "Y", "Z", resamples=100, seed=10_000 + seed).verdict

    def test_false_alarms_are_rare(self):
        alarms = sum(v == Verdict.CONFOUNDING_SUSPECTED for v in self.verdicts(fig1_model(0.3, 0.0, 0.4, 0.6)))
        assert alarms <= self.RUNS // 100

    def test_confounding_is_caught(self, fig1):
        detections = sum(v == Verdict.CONFOUNDING_SUSPECTED for v in self.verdicts(fig1))
        assert detections >= self.RUNS * 99 // 100
