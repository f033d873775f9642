import itertools

import numpy as np
import pytest

from biaslab.analytic import (
    BiasReport,
    Classification,
    NonlinearOutcomeModel,
    analyze_linear,
    attenuation_factor,
    imperfect_instrument_report,
    linear_bias_pair,
    linear_slopes,
    nonlinear_bias_pair,
    nonlinear_conditional_means,
    reducer_threshold,
    selection_bias,
    selection_report,
    simpson_reversal,
    u_projection,
)
from biaslab.corpus import fig1_model, fig2_model, fig3_model, load_corpus_model
from biaslab.errors import (
    DegenerateInstrumentError,
    DegenerateSelectionError,
    DomainError,
    InfeasibleStandardizationError,
    InvariantViolationError,
    NonpositiveVarianceError,
)
from biaslab.functions import Constant, Polynomial
from biaslab.scm import partial_regression_slope


class TestLinearInstrument(object):

    @pytest.mark.parametrize("c1, c3, beta, alpha", [(0.5, 0.0, 0.5, 0.0), (0.5, 0.6, 0.78125, -0.46875)])
    def test_u_projection(self, c1, c3, beta, alpha):
        projection = u_projection(c1, c3)
        assert projection.beta == pytest.approx(beta)
        assert projection.alpha == pytest.approx(alpha)
        # Recovers Cov(U, X) = c1 and Cov(U, Z) = 0.
        assert projection.beta + projection.alpha * c3 == pytest.approx(c1)
        assert projection.beta * c3 + projection.alpha == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("c3", [1.0, -1.0, 1.2])
    def test_degenerate_instrument(self, c3):
        with pytest.raises(DegenerateInstrumentError):
            u_projection(0.5, c3)

    def test_reference_point(self):
        report = linear_bias_pair(0.3, 0.5, 0.4, 0.6)
        assert (report.a1, report.a2, report.a3) == pytest.approx((0.3, 0.5, 0.6125))
        assert report.b0 == pytest.approx(0.2)
        assert report.bz == pytest.approx(0.3125)
        assert report.amplification == pytest.approx(1.5625)
        assert report.classification == Classification.AMPLIFIER

    def test_amplification_identity_over_grid(self):
        values = (-0.5, -0.2, 0.0, 0.2, 0.5)
        for c1, c2, c3 in itertools.product(values, values, (0.0, 0.3, 0.6, 0.8)):
            report = linear_bias_pair(0.3, c1, c2, c3)
            assert report.bz * (1 - c3 ** 2) == pytest.approx(report.b0, abs=1e-12)
            assert report.bz == pytest.approx(report.b0 * report.amplification, abs=1e-12)
            if c1 * c2 == 0 or c3 == 0:
                assert report.classification == Classification.NEUTRAL
            else:
                assert report.classification == Classification.AMPLIFIER

    @pytest.mark.parametrize("c1, c2", [(0.5, 0.4), (-0.3, 0.6), (0.4, -0.5)])
    def test_bias_grows_with_instrument_strength(self, c1, c2):
        strengths = np.linspace(0.0, 0.85, 18)
        for sign in (1.0, -1.0):
            biases = [abs(linear_bias_pair(0.3, c1, c2, sign * float(c3)).bz) for c3 in strengths]
            assert all(later >= earlier for earlier, later in zip(biases, biases[1:]))
            assert biases[-1] > biases[0]

    def test_matches_generic_analysis(self):
        closed = linear_bias_pair(0.3, 0.5, 0.4, 0.6)
        generic = analyze_linear(fig1_model(0.3, 0.5, 0.4, 0.6), "X", "Y", ["Z"])
        for name in ("a1", "a2", "a3", "b0", "bz", "amplification"):
            assert getattr(generic, name) == pytest.approx(getattr(closed, name), abs=1e-12)

    def test_infeasible_point(self):
        with pytest.raises(InfeasibleStandardizationError):
            linear_bias_pair(0.3, 0.9, 0.4, 0.6)

    def test_linear_slopes(self):
        assert linear_slopes(0.3, 0.5, 0.4, 0.6) == pytest.approx((0.3, 0.5, 0.6125))

    def test_simpson_reversal(self):
        assert simpson_reversal(0.3, 0.5, -0.5, 0.6)
        assert not simpson_reversal(0.3, 0.5, 0.4, 0.6)
        report = linear_bias_pair(0.3, 0.5, -0.5, 0.6)
        assert report.a2 > 0 > report.a3


class TestImperfectInstrument(object):

    def test_threshold(self):
        assert reducer_threshold(0.5, 0.4, 0.6) == pytest.approx(0.1875)

    @pytest.mark.parametrize("c4, expected", [
        (0.0, Classification.AMPLIFIER),
        (0.1, Classification.AMPLIFIER),
        (0.15, Classification.AMPLIFIER),
        (0.1875, Classification.NEUTRAL),
        (0.25, Classification.REDUCER),
        (0.3, Classification.REDUCER),
    ])
    def test_classification_flips_at_threshold(self, c4, expected):
        report = imperfect_instrument_report(0.3, 0.5, 0.4, 0.6, c4)
        assert report.b0 == pytest.approx(0.2 + 0.6 * c4)
        assert report.bz == pytest.approx(0.3125)
        assert report.classification == expected
        generic = analyze_linear(fig2_model(0.3, 0.5, 0.4, 0.6, c4), "X", "Y", ["Z"])
        assert generic.b0 == pytest.approx(report.b0, abs=1e-12)
        assert generic.bz == pytest.approx(report.bz, abs=1e-12)

    def test_signed_verdict(self):
        assert imperfect_instrument_report(0.3, 0.5, 0.4, 0.6, 0.3).details["signed_reducer"] is True
        assert imperfect_instrument_report(0.3, 0.5, 0.4, 0.6, 0.1).details["signed_reducer"] is False
        assert imperfect_instrument_report(0.3, 0.5, 0.4, 0.0, 0.1).details["signed_reducer"] is None

    def test_infeasible(self):
        with pytest.raises(InfeasibleStandardizationError):
            imperfect_instrument_report(0.3, 0.5, 0.4, 0.6, 0.9)


class TestNonlinear(object):

    def test_reciprocal_new_bias(self):
        model = NonlinearOutcomeModel.reciprocal()
        report = nonlinear_bias_pair(model, 1.0, 1.0)
        assert report.b0 == pytest.approx(0.0, abs=1e-15)
        assert report.bz == pytest.approx(0.46875)
        assert report.a1 == pytest.approx(1.0)
        assert report.amplification is None
        assert report.classification == Classification.NEW_BIAS

    def test_z_zero_reduces_to_linear_amplification(self):
        model = NonlinearOutcomeModel(c3=0.6, c1=0.5, f=Polynomial((0.0, 1.0)), g=Polynomial((1.0, 0.5, 0.2)))
        for x in np.linspace(0.5, 2.5, 21):
            report = nonlinear_bias_pair(model, float(x), 0.0)
            assert report.bz * (1 - 0.36) == pytest.approx(report.b0, rel=1e-12)

    def test_constant_g_matches_linear_model(self):
        model = NonlinearOutcomeModel(c3=0.6, c1=0.5, f=Polynomial((0.0, 0.3)), g=Constant(0.4))
        linear = linear_bias_pair(0.3, 0.5, 0.4, 0.6)
        for x, z in [(0.5, -1.0), (1.0, 1.0), (2.0, 0.3)]:
            report = nonlinear_bias_pair(model, x, z)
            assert (report.a1, report.a2, report.a3) == pytest.approx((linear.a1, linear.a2, linear.a3))

    def test_conditional_means(self):
        model = NonlinearOutcomeModel.reciprocal()
        assert nonlinear_conditional_means(model, 1.0, 1.0) == pytest.approx((1.5, 1.3125))

    def test_reciprocal_undefined_at_zero(self):
        with pytest.raises(DomainError):
            nonlinear_bias_pair(NonlinearOutcomeModel.reciprocal(), 0.0, 1.0)

    def test_infeasible_treatment_equation(self):
        with pytest.raises(InfeasibleStandardizationError):
            NonlinearOutcomeModel(c3=0.8, c1=0.7, f=Polynomial((0.0, 1.0)), g=Constant(1.0))

    def test_degenerate_instrument(self):
        with pytest.raises(DegenerateInstrumentError):
            NonlinearOutcomeModel(c3=1.0, c1=0.0, f=Polynomial((0.0, 1.0)), g=Constant(1.0))


class TestSelection(object):

    def test_reference_point(self):
        assert selection_bias(0.5, 0.3, 0.4) == pytest.approx(-0.2)
        assert selection_bias(0.5, 0.3, 0.0) == pytest.approx(0.0)

    @pytest.mark.parametrize("c0, beta1, beta2", [
        (0.5, -0.2, 0.4),
        (-0.4, 0.12, 0.3),
        (1.0, 0.2, 0.3),
        (-1.0, 0.4, 0.1),
        (0.3, 0.25, 0.0),
    ])
    def test_vanishing_set(self, c0, beta1, beta2):
        assert selection_bias(c0, beta1, beta2) == pytest.approx(0.0, abs=1e-15)

    def test_nonzero_off_the_vanishing_set(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            c0 = rng.uniform(-0.9, 0.9)
            beta1, beta2 = rng.uniform(-0.5, 0.5, size=2)
            if abs(beta2) < 0.05 or abs(beta1 + c0 * beta2) < 0.05:
                continue
            assert abs(selection_bias(c0, beta1, beta2)) > 1e-4

    def test_matches_conditional_regression(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            c0 = rng.uniform(-0.6, 0.6)
            beta1, beta2 = rng.uniform(-0.5, 0.5, size=2)
            model = fig3_model(c0, beta1, beta2)
            slope = partial_regression_slope(model, "Y", "X", ["S"])
            assert slope - c0 == pytest.approx(selection_bias(c0, beta1, beta2), abs=1e-10)

    def test_instrument_does_not_move_selection_bias(self, fig3):
        report = analyze_linear(fig3, "X", "Y", ["Z"], ["S"])
        assert report.bz == pytest.approx(report.b0, abs=1e-12)
        assert report.classification == Classification.NEUTRAL

    def test_report(self):
        report = selection_report(0.5, 0.3, 0.4)
        assert report.a3 == report.a2
        assert report.b0 == pytest.approx(-0.2)
        assert report.classification == Classification.NEUTRAL

    def test_degenerate(self):
        with pytest.raises(DegenerateSelectionError):
            selection_bias(1.0, 0.5, 0.5)


class TestAttenuation(object):

    def test_half_of_the_difference(self):
        assert attenuation_factor(1.0 / 12.0, 1.0, 1.0 / 12.0) == pytest.approx(0.5)
        assert attenuation_factor(1.0, 0.0, 1.0) == pytest.approx(1.0)

    def test_nonpositive_variance(self):
        with pytest.raises(NonpositiveVarianceError):
            attenuation_factor(0.0, 1.0, 1.0)


class TestBiasReport(object):

    def test_field_contract(self):
        report = linear_bias_pair(0.3, 0.5, 0.4, 0.6)
        assert set(report.to_dict()) == {"a1", "a2", "a3", "b0", "bz", "amplification", "classification"}
        assert report.to_dict()["classification"] == "Amplifier"

    def test_inconsistent_report(self):
        with pytest.raises(InvariantViolationError):
            BiasReport(0.3, 0.5, 0.6, 0.1, 0.3, 3.0, Classification.AMPLIFIER)

    def test_exogenous_model(self):
        report = analyze_linear(load_corpus_model("empty-edges"), "X", "Y")
        assert report.to_dict() == {
            "a1": 0.0, "a2": 0.0, "a3": 0.0, "b0": 0.0, "bz": 0.0,
            "amplification": None, "classification": "Neutral",
        }
