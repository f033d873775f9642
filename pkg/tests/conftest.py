# tests/conftest.py
import pytest

from biaslab.corpus import MODELS_DIR, fig1_model, fig3_model, fig4_model


@pytest.fixture
def models_dir():
    return MODELS_DIR


@pytest.fixture
def fig1():
    return fig1_model(0.3, 0.5, 0.4, 0.6)


@pytest.fixture
def fig3():
    return fig3_model(0.5, 0.3, 0.4)


@pytest.fixture
def fig4():
    return fig4_model()
