# biaslab/corpus.py
# Builders for the reference models: the IV model, the imperfect-instrument
# model, the selection model and the mixed confounding/selection graph.
# The same structures ship as text files under models/.

from pathlib import Path

from biaslab.modelspec import ModelSpec, load_model_spec
from biaslab.scm import LinearSCM, build_model

MODELS_DIR = Path(__file__).resolve().parent.parent / "models"

IV_VARIABLES = {"Z": "observed", "U": "latent", "X": "observed", "Y": "observed"}


def fig1_spec(c0: float, c1: float, c2: float, c3: float) -> ModelSpec:
    # Z -> X <- U -> Y, X -> Y
    edges = {("Z", "X"): c3, ("U", "X"): c1, ("X", "Y"): c0, ("U", "Y"): c2}
    return ModelSpec.from_edges(IV_VARIABLES, edges, source="fig1")


def fig1_model(c0: float, c1: float, c2: float, c3: float) -> LinearSCM:
    return build_model(fig1_spec(c0, c1, c2, c3))


def fig2_model(c0: float, c1: float, c2: float, c3: float, c4: float) -> LinearSCM:
    # The IV model plus a direct Z -> Y edge: Z is both instrument and confounder.
    edges = {("Z", "X"): c3, ("U", "X"): c1, ("X", "Y"): c0, ("U", "Y"): c2, ("Z", "Y"): c4}
    return build_model(ModelSpec.from_edges(IV_VARIABLES, edges, source="fig2"))


def fig3_model(c0: float, beta1: float, beta2: float, c3: float = 0.6) -> LinearSCM:
    # Z -> X -> Y, with selection S affected by both X and Y.
    variables = {"Z": "observed", "X": "observed", "Y": "observed", "S": "selection"}
    edges = {("Z", "X"): c3, ("X", "Y"): c0, ("X", "S"): beta1, ("Y", "S"): beta2}
    return build_model(ModelSpec.from_edges(variables, edges, source="fig3"))


FIG4_COEFFICIENTS = {
    ("Z", "X"): 0.5,
    ("U1", "X"): 0.5,
    ("X", "Y"): 0.3,
    ("U2", "Y"): 0.5,
    ("U1", "S1"): 0.4,
    ("Y", "S1"): 0.4,
    ("X", "S2"): 0.4,
    ("U2", "S2"): 0.4,
    ("U1", "S3"): 0.5,
    ("U2", "S3"): 0.5,
}


def fig4_model(coefficients=None) -> LinearSCM:
    """
    Mixed graph: S3 collides two confounding channels (U1 -> X, U2 -> Y),
    S2 collides X with U2, and S1 collides U1 with Y, so it carries both
    a confounding path and the outcome's own disturbance.
    """
    variables = {
        "Z": "observed",
        "U1": "latent",
        "U2": "latent",
        "X": "observed",
        "Y": "observed",
        "S1": "selection",
        "S2": "selection",
        "S3": "selection",
    }
    return build_model(ModelSpec.from_edges(variables, coefficients or FIG4_COEFFICIENTS, source="fig4"))


def unit_square_model(c: float = 1.0) -> LinearSCM:
    # X = U + cZ with U, Z of variance 1/12, the variance of Uniform(0, 1).
    variables = {"U": "latent", "Z": "observed", "X": "observed"}
    edges = {("U", "X"): 1.0, ("Z", "X"): c}
    noise = {"U": 1.0 / 12.0, "Z": 1.0 / 12.0, "X": 0.0}
    return build_model(ModelSpec.from_edges(variables, edges, standardized=False, noise_variances=noise, source="unit-square"))


def load_corpus_spec(name: str) -> ModelSpec:
    return load_model_spec(MODELS_DIR / f"{name}.scm")


def load_corpus_model(name: str) -> LinearSCM:
    return build_model(load_corpus_spec(name))
