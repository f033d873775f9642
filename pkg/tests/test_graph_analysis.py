import itertools

import numpy as np
import pytest

from config import config
from biaslab.corpus import fig2_model, load_corpus_model
from biaslab.errors import InvalidInstrumentError, InvalidQueryError, UnknownNodeError
from biaslab.graph_analysis import (
    IVEffect,
    PathLabel,
    SeparationQuery,
    bias_taxonomy,
    d_separated,
    d_separated_by_paths,
    iv_effect_prediction,
    open_paths,
    outcome_disturbance_name,
    render_path,
)
from biaslab.modelspec import ModelSpec
from biaslab.scm import Node, NodeKind, build_model, partial_correlation, partial_regression_slope, total_effect

CORPUS = ["fig1", "fig2", "fig3", "fig4", "empty-edges"]


def all_queries(graph, max_given=2):
    for a, b in itertools.combinations(graph.nodes, 2):
        rest = [n for n in graph.nodes if n not in (a, b)]
        for size in range(max_given + 1):
            for given in itertools.combinations(rest, size):
                yield SeparationQuery(a, b, given)


class TestDSeparation(object):

    @pytest.mark.parametrize("a, b, given, expected", [
        ("Z", "U", (), True),
        ("Z", "U", ("X",), False),
        ("Z", "U", ("Y",), False),
        ("Z", "Y", (), False),
        ("Z", "Y", ("X",), False),
        ("Z", "Y", ("X", "U"), True),
        ("X", "Y", ("U",), False),
    ])
    def test_instrument_model(self, fig1, a, b, given, expected):
        assert d_separated(fig1.graph, SeparationQuery(a, b, given)) is expected

    @pytest.mark.parametrize("given, expected", [((), False), (("X",), True), (("X", "S"), True), (("S",), False)])
    def test_selection_model(self, fig3, given, expected):
        assert d_separated(fig3.graph, SeparationQuery("Y", "Z", given)) is expected

    def test_symmetric(self, fig4):
        for query in all_queries(fig4.graph, max_given=1):
            flipped = SeparationQuery(query.b, query.a, query.given)
            assert d_separated(fig4.graph, query) == d_separated(fig4.graph, flipped)

    @pytest.mark.parametrize("name", CORPUS)
    def test_agrees_with_path_enumeration(self, name):
        graph = load_corpus_model(name).graph
        for query in all_queries(graph):
            assert d_separated(graph, query) == d_separated_by_paths(graph, query), str(query)

    @staticmethod
    def generic_draws(graph, seed, draws=5):
        rng = np.random.default_rng(seed)
        variables = {n: graph.kind(n).value for n in graph.nodes}
        for _ in range(draws):
            coefficients = {e: float(rng.uniform(0.3, 0.9) * rng.choice([-1, 1])) for e in graph.edges}
            noise = {n: float(rng.uniform(0.5, 2.0)) for n in graph.nodes}
            yield build_model(ModelSpec.from_edges(variables, coefficients, standardized=False, noise_variances=noise))

    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3", "fig4"])
    def test_separation_matches_vanishing_partial_correlation(self, name):
        graph = load_corpus_model(name).graph
        for model in self.generic_draws(graph, seed=11):
            for query in all_queries(model.graph):
                rho = partial_correlation(model.covariance, query.a, query.b, sorted(query.given))
                if d_separated(model.graph, query):
                    assert rho == pytest.approx(0.0, abs=1e-9), str(query)
                else:
                    assert abs(rho) > 1e-6, str(query)

    def test_open_paths_are_sorted(self, fig1):
        paths, truncated = open_paths(fig1.graph, "X", "Y", ["Z"])
        assert paths == [("X", "Y"), ("X", "U", "Y")]
        assert not truncated
        assert render_path(fig1.graph, paths[1]) == "X <- U -> Y"


class TestQueries(object):

    def test_same_node(self):
        with pytest.raises(InvalidQueryError):
            SeparationQuery("X", "X")

    def test_conditioning_on_endpoint(self):
        with pytest.raises(InvalidQueryError):
            SeparationQuery("X", "Y", {"X"})

    def test_unknown_node(self, fig1):
        with pytest.raises(UnknownNodeError):
            d_separated(fig1.graph, SeparationQuery("X", "Q"))

    def test_str(self):
        assert str(SeparationQuery("A", "B", {"D", "C"})) == "A _||_ B | C,D"
        assert str(SeparationQuery("A", "B")) == "A _||_ B"


class TestTaxonomy(object):

    def labels(self, report):
        return [(p.rendered, p.label, p.virtual) for p in report.paths]

    def test_confounding_and_selection_through_s1(self, fig4):
        report = bias_taxonomy(fig4.graph, "X", "Y", ["S1"])
        assert self.labels(report) == [
            ("X <- U1 -> S1 <- Y", PathLabel.CONFOUNDING, False),
            ("X -> Y <- U_Y", PathLabel.SELECTION, True),
        ]
        assert report.has_confounding_component
        assert report.has_selection_component

    def test_conditioning_on_u1_leaves_selection(self, fig4):
        report = bias_taxonomy(fig4.graph, "X", "Y", ["S1", "U1"])
        assert self.labels(report) == [("X -> Y <- U_Y", PathLabel.SELECTION, True)]
        assert not report.has_confounding_component

    def test_selection_only_through_s2(self, fig4):
        report = bias_taxonomy(fig4.graph, "X", "Y", ["S2"])
        assert self.labels(report) == [("X -> S2 <- U2 -> Y", PathLabel.SELECTION, False)]
        assert bias_taxonomy(fig4.graph, "X", "Y", ["S2", "U2"]).paths == ()

    def test_confounding_only_through_s3(self, fig4):
        report = bias_taxonomy(fig4.graph, "X", "Y", ["S3"])
        assert self.labels(report) == [("X <- U1 -> S3 <- U2 -> Y", PathLabel.CONFOUNDING, False)]
        assert not report.has_selection_component

    @pytest.mark.parametrize("latent", ["U1", "U2"])
    def test_either_latent_closes_s3(self, fig4, latent):
        assert bias_taxonomy(fig4.graph, "X", "Y", ["S3", latent]).paths == ()
        causal = total_effect(fig4, "X", "Y")
        assert partial_regression_slope(fig4, "Y", "X", ["S3"]) != pytest.approx(causal, abs=1e-6)
        assert partial_regression_slope(fig4, "Y", "X", ["S3", latent]) == pytest.approx(causal, abs=1e-12)

    def test_causal_paths_are_not_listed(self, fig4):
        report = bias_taxonomy(fig4.graph, "X", "Y")
        assert report.paths == ()
        assert report.to_dict()["has_confounding_component"] is False

    def test_selection_model(self, fig3):
        report = bias_taxonomy(fig3.graph, "X", "Y", ["S"])
        assert {p.label for p in report.paths} == {PathLabel.SELECTION}
        assert [p.rendered for p in report.paths] == ["X -> S <- Y", "X -> Y <- U_Y"]

    @pytest.mark.parametrize("conditioned", [(), ("S1",), ("S2",), ("S3",), ("S1", "U1"), ("S1", "S2", "S3")])
    def test_confounding_is_what_randomization_removes(self, fig4, conditioned):
        for path in bias_taxonomy(fig4.graph, "X", "Y", conditioned).paths:
            assert (path.label == PathLabel.CONFOUNDING) == path.severed_by_randomization

    def test_ancestor_behind_a_collider_is_selection(self, fig4):
        report = bias_taxonomy(fig4.graph, "X", "Y", ["S1", "S2", "S3"])
        labels = {p.rendered: p.label for p in report.paths}
        assert labels["X -> S2 <- U2 -> S3 <- U1 -> S1 <- Y"] == PathLabel.SELECTION
        assert labels["X <- U1 -> S3 <- U2 -> Y"] == PathLabel.CONFOUNDING

    def test_fresh_disturbance_name(self):
        graph = build_model(
            ModelSpec.from_edges({"U_Y": "latent", "X": "observed", "Y": "observed"}, {("U_Y", "X"): 0.5, ("X", "Y"): 0.5})
        ).graph
        assert outcome_disturbance_name(graph, "Y") == "U_Y_"

    def test_truncation(self, fig4, monkeypatch):
        monkeypatch.setattr(config, "TAXONOMY_NODE_LIMIT", 2)
        monkeypatch.setattr(config, "PATH_LIMIT", 1)
        assert bias_taxonomy(fig4.graph, "X", "Y", ["S1"]).truncated

    def test_invalid_queries(self, fig4):
        with pytest.raises(InvalidQueryError):
            bias_taxonomy(fig4.graph, "X", "X")
        with pytest.raises(InvalidQueryError):
            bias_taxonomy(fig4.graph, "X", "Y", ["Y"])
        with pytest.raises(UnknownNodeError):
            bias_taxonomy(fig4.graph, "X", "Y", ["S9"])


class TestIVEffectPrediction(object):

    def test_instrument_moves_confounded_association(self, fig1):
        assert iv_effect_prediction(fig1.graph, "X", "Y", "Z") == IVEffect.SENSITIVE

    def test_instrument_leaves_selection_bias(self, fig3):
        assert iv_effect_prediction(fig3.graph, "X", "Y", "Z", ["S"]) == IVEffect.INSENSITIVE

    @pytest.mark.parametrize("conditioned, expected", [
        (("S1",), IVEffect.SENSITIVE),
        (("S3",), IVEffect.SENSITIVE),
        (("S2",), IVEffect.INSENSITIVE),
        (("S1", "U1"), IVEffect.INSENSITIVE),
    ])
    def test_mixed_graph(self, fig4, conditioned, expected):
        assert iv_effect_prediction(fig4.graph, "X", "Y", "Z", conditioned) == expected

    def test_sensitivity_follows_confounding_component(self, fig4):
        for conditioned in [("S1",), ("S2",), ("S3",), ("S1", "U1"), ("S2", "U2")]:
            report = bias_taxonomy(fig4.graph, "X", "Y", conditioned)
            effect = iv_effect_prediction(fig4.graph, "X", "Y", "Z", conditioned)
            assert (effect == IVEffect.SENSITIVE) == report.has_confounding_component

    def test_direct_effect_is_not_an_instrument(self):
        graph = fig2_model(0.3, 0.5, 0.4, 0.6, 0.3).graph
        with pytest.raises(InvalidInstrumentError):
            iv_effect_prediction(graph, "X", "Y", "Z")

    def test_confounder_is_not_an_instrument(self, fig1):
        with pytest.raises(InvalidInstrumentError):
            iv_effect_prediction(fig1.graph, "X", "Y", "U")

    def test_unrelated_node_is_not_an_instrument(self):
        graph = build_model(
            ModelSpec.from_edges({"W": "observed", "X": "observed", "Y": "observed"}, {("X", "Y"): 0.5})
        ).graph
        with pytest.raises(InvalidInstrumentError):
            iv_effect_prediction(graph, "X", "Y", "W")

    def test_instrument_in_conditioning_set(self, fig1):
        with pytest.raises(InvalidQueryError):
            iv_effect_prediction(fig1.graph, "X", "Y", "Z", ["Z"])
