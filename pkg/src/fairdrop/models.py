"""Probabilistic binary classifiers used as the audited models and as the
dropout-ensemble members: logistic regression, random forest, bagging and
AdaBoost, all scikit-learn backed with conventional defaults.

Tabular models encode internally (one-hot plus z-scoring for LR, raw integer
category codes for the tree ensembles) so callers always work in the
dataset's value space and explanations map back to original feature names.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from sklearn.compose import ColumnTransformer
from sklearn.ensemble import (
    AdaBoostClassifier,
    BaggingClassifier,
    RandomForestClassifier,
)
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import OneHotEncoder, StandardScaler

from .dataset import CATEGORICAL, TabularDataset
from .textcorpus import Corpus, TfidfModel, drop_words_corpus

KINDS = ("lr", "rf", "bag", "ada")

_FORMAT = "fairdrop.model"
_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    kind: str = "rf"
    seed: int = 0
    n_trees: int | None = None      # rf/bag members or ada rounds
    max_depth: int | None = None
    learning_rate: float = 1.0      # ada only
    l2: float = 1.0                 # lr regularisation strength
    max_iter: int = 1000            # lr iteration cap

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.n_trees is not None and self.n_trees <= 0:
            raise ValueError("n_trees must be positive")
        if self.learning_rate <= 0 or self.l2 <= 0:
            raise ValueError("rates must be positive")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def _estimator(config: TrainConfig):
    seed = int(config.seed) % (2 ** 32)
    if config.kind == "lr":
        return LogisticRegression(
            C=1.0 / config.l2, max_iter=config.max_iter, tol=1e-6
        )
    if config.kind == "rf":
        return RandomForestClassifier(
            n_estimators=config.n_trees or 100,
            max_depth=config.max_depth,
            max_features="sqrt",
            bootstrap=True,
            random_state=seed,
        )
    if config.kind == "bag":
        return BaggingClassifier(
            n_estimators=config.n_trees or 10, random_state=seed
        )
    return AdaBoostClassifier(
        n_estimators=config.n_trees or 50,
        learning_rate=config.learning_rate,
        random_state=seed,
    )


class TabularClassifier:
    """Binary classifier over a dataset's value space."""

    def __init__(self, config, schema, categories, pipeline):
        self.config = config
        self.kind = config.kind
        self.feature_names = list(schema.feature_names)
        self.feature_kinds = [f.kind for f in schema.features]
        self.categories = dict(categories)
        self._pipeline = pipeline

    @property
    def feature_arity(self):
        return len(self.feature_names)

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.feature_arity:
            raise ValueError(
                f"expected {self.feature_arity} features, got {X.shape[1]}"
            )
        return self._pipeline.predict_proba(X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class MatrixClassifier:
    """Binary classifier over a fixed-width design matrix (dense or sparse)."""

    def __init__(self, config, n_columns, estimator):
        self.config = config
        self.kind = config.kind
        self.feature_arity = n_columns
        self._estimator = estimator

    def predict_proba(self, X):
        if not sparse.issparse(X):
            X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.feature_arity:
            raise ValueError(
                f"expected {self.feature_arity} columns, got {X.shape[1]}"
            )
        return self._estimator.predict_proba(X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class TextClassifier:
    """TF-IDF vectoriser plus classifier over token streams."""

    def __init__(self, config, tfidf: TfidfModel, inner: MatrixClassifier,
                 dropped_words=frozenset()):
        self.config = config
        self.kind = config.kind
        self.tfidf = tfidf
        self.inner = inner
        self.dropped_words = frozenset(dropped_words)

    @property
    def vocabulary(self):
        return self.tfidf.vocabulary

    def predict_proba_docs(self, docs):
        if self.dropped_words:
            docs = [
                [t for t in (d.tokens if hasattr(d, "tokens") else d)
                 if t not in self.dropped_words]
                for d in docs
            ]
        X = self.tfidf.matrix(docs)
        return self.inner.predict_proba(X)

    def predict_docs(self, docs):
        return np.argmax(self.predict_proba_docs(docs), axis=1)


def _check_trainable(y):
    y = np.asarray(y)
    if y.size < 2:
        raise ValueError("need at least 2 training instances")
    if len(np.unique(y)) < 2:
        raise ValueError("training set contains a single class")


def train(config: TrainConfig, ds: TabularDataset) -> TabularClassifier:
    """Fit the configured classifier on a tabular dataset (deterministic
    given the config seed and the data)."""
    _check_trainable(ds.labels)
    cat_idx = ds.categorical_indices()
    num_idx = ds.numeric_indices()
    est = _estimator(config)
    if config.kind == "lr":
        cats = [
            np.arange(len(ds.categories[ds.feature_names[j]]), dtype=float)
            for j in cat_idx
        ]
        pre = ColumnTransformer(
            [
                ("num", StandardScaler(), num_idx),
                ("cat", OneHotEncoder(categories=cats, handle_unknown="ignore"),
                 cat_idx),
            ]
        )
        pipeline = Pipeline([("pre", pre), ("clf", est)])
    else:
        pipeline = Pipeline([("clf", est)])
    pipeline.fit(ds.values, ds.labels)
    return TabularClassifier(config, ds.schema, ds.categories, pipeline)


def train_matrix(config: TrainConfig, X, y) -> MatrixClassifier:
    """Fit on an explicit design matrix, e.g. tf-idf rows."""
    _check_trainable(y)
    est = _estimator(config)
    est.fit(X, np.asarray(y, dtype=int))
    n_cols = X.shape[1]
    return MatrixClassifier(config, n_cols, est)


def train_text(config: TrainConfig, corpus: Corpus,
               dropped_words=frozenset()) -> TextClassifier:
    """Fit the TF-IDF + classifier pipeline, optionally ignoring words.

    Dropped words are removed from the training corpus before the vocabulary
    is built, so the resulting model cannot see them at all.
    """
    if dropped_words:
        corpus = drop_words_corpus(corpus, dropped_words)
    tfidf = TfidfModel.fit(corpus)
    X = tfidf.matrix(corpus.documents)
    inner = train_matrix(config, X, corpus.labels())
    return TextClassifier(config, tfidf, inner, dropped_words)


def accuracy(model, ds: TabularDataset) -> float:
    """Argmax-class accuracy on a dataset."""
    if ds.n_instances == 0:
        raise ValueError("cannot score an empty dataset")
    pred = model.predict(ds.values)
    return float(np.mean(pred == ds.labels))


def accuracy_docs(model, corpus: Corpus) -> float:
    if corpus.n_documents == 0:
        raise ValueError("cannot score an empty corpus")
    pred = model.predict_docs(corpus.documents)
    return float(np.mean(pred == corpus.labels()))


def save_model(model, path):
    """Persist any trained model (versioned pickle envelope)."""
    env = {"format": _FORMAT, "version": _VERSION, "payload": model}
    with open(path, "wb") as fh:
        pickle.dump(env, fh)


def load_model(path):
    with open(path, "rb") as fh:
        env = pickle.load(fh)
    if not isinstance(env, dict) or env.get("format") != _FORMAT:
        raise ValueError(f"{path}: not a fairdrop model file")
    if env.get("version") != _VERSION:
        raise ValueError(f"{path}: unsupported model version {env.get('version')}")
    return env["payload"]
