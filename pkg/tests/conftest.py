import numpy as np
import pytest

from fairdrop.dataset import (
    CATEGORICAL,
    NUMERIC,
    Feature,
    FeatureSchema,
    TabularDataset,
)


class StubModel:
    """predict_proba driven by an arbitrary positive-class function."""

    def __init__(self, fn, feature_names=None):
        self.fn = fn
        self.feature_names = feature_names

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p1 = np.clip(np.asarray(self.fn(X), dtype=float), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class StubTextModel:
    """Text-side stub: positive-class probability from a token-list function."""

    def __init__(self, fn):
        self.fn = fn

    def predict_proba_docs(self, docs):
        p1 = np.clip([self.fn(list(d)) for d in docs], 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])


def numeric_dataset(X, y, sensitive=()):
    feats = tuple(
        Feature(f"f{j}", NUMERIC, f"f{j}" in sensitive) for j in range(X.shape[1])
    )
    schema = FeatureSchema(feats, "label", "1")
    return TabularDataset(schema, np.asarray(X, float), np.asarray(y, int))


def mixed_dataset(n=80, seed=0):
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(
        (
            Feature("x1", NUMERIC),
            Feature("x2", NUMERIC),
            Feature("color", CATEGORICAL),
        ),
        "label",
        "yes",
    )
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    color = rng.integers(0, 3, n)
    y = ((x1 + 0.5 * x2 + (color == 2) + rng.normal(0, 0.3, n)) > 0).astype(int)
    values = np.column_stack([x1, x2, color]).astype(float)
    return TabularDataset(
        schema, values, y, {"color": ("blue", "green", "red")}, "no"
    )


@pytest.fixture
def stub_model_factory():
    return StubModel


@pytest.fixture
def text_stub_factory():
    return StubTextModel
