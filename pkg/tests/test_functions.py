import numpy as np
import pytest

from biaslab.errors import DomainError, ModelSpecError
from biaslab.functions import Constant, Polynomial, Reciprocal, parse_function


class TestFunctions(object):

    def test_polynomial(self):
        p = Polynomial((1.0, 2.0, 3.0))
        assert p(2.0) == pytest.approx(17.0)
        assert p.derivative(2.0) == pytest.approx(14.0)
        assert Polynomial((5.0,)).derivative(3.0) == 0.0

    def test_reciprocal(self):
        r = Reciprocal(2.0)
        assert r(4.0) == pytest.approx(0.5)
        assert r.derivative(2.0) == pytest.approx(-0.5)
        np.testing.assert_allclose(r(np.array([1.0, 2.0])), [2.0, 1.0])

    def test_reciprocal_domain(self):
        with pytest.raises(DomainError):
            Reciprocal(1.0)(0.0)
        with pytest.raises(DomainError):
            Reciprocal(1.0).derivative(np.array([1.0, 1e-9]))

    def test_constant(self):
        c = Constant(0.4)
        np.testing.assert_allclose(c(np.array([1.0, -3.0])), [0.4, 0.4])
        assert c.derivative(2.0) == 0.0

    @pytest.mark.parametrize("text, expected", [
        ("poly:0,1", Polynomial((0.0, 1.0))),
        ("reciprocal:1", Reciprocal(1.0)),
        ("constant: 0.4", Constant(0.4)),
        ("POLY:1, 0.5, 0.2", Polynomial((1.0, 0.5, 0.2))),
    ])
    def test_parse(self, text, expected):
        assert parse_function(text) == expected

    @pytest.mark.parametrize("text", ["sin:1", "poly:a,b", "reciprocal:1,2", "constant"])
    def test_parse_errors(self, text):
        with pytest.raises(ModelSpecError):
            parse_function(text, line=7)

    def test_str_round_trips(self):
        for f in (Polynomial((0.0, 1.0)), Reciprocal(1.0), Constant(0.5)):
            assert parse_function(str(f)) == f
