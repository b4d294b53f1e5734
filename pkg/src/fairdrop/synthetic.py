"""Bundled synthetic datasets with injected sensitive-unit signal.

Real corpora are not shipped; these generators produce desk-scale stand-ins
shaped like the credit-scoring and offensive-language tasks, with sensitive
units wired strongly enough into the label process that a fresh model is
deemed unfair.
"""

from __future__ import annotations

import numpy as np

from .dataset import CATEGORICAL, NUMERIC, Feature, FeatureSchema, TabularDataset
from .textcorpus import Corpus, Document, WordGroup

CREDIT_SENSITIVE = ("gender", "phone")

_CREDIT_FEATURES = (
    Feature("duration", NUMERIC),
    Feature("amount", NUMERIC),
    Feature("age", NUMERIC),
    Feature("rate", NUMERIC),
    Feature("history", CATEGORICAL),
    Feature("purpose", CATEGORICAL),
    Feature("housing", CATEGORICAL),
    Feature("job", CATEGORICAL),
    Feature("gender", CATEGORICAL, sensitive=True),
    Feature("phone", CATEGORICAL, sensitive=True),
)

_CREDIT_CATEGORIES = {
    "history": ("critical", "delayed", "existing", "paid"),
    "purpose": ("business", "car", "education", "furniture"),
    "housing": ("free", "own", "rent"),
    "job": ("management", "skilled", "unskilled"),
    "gender": ("female", "male"),
    "phone": ("none", "registered"),
}


def make_credit_dataset(n=600, seed=0) -> TabularDataset:
    """Credit-risk style table whose label leans on the sensitive columns.

    `gender` and `phone` carry the largest main effects plus interaction
    terms with features they are correlated with (history and housing).
    The interactions give the sensitive columns contribution means that do
    not cancel across instances, and the correlated proxies let dropout
    members recover part of the signal, as in real unfair datasets.
    """
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(_CREDIT_FEATURES, "risk", "good")

    duration = rng.normal(24, 10, n)
    amount = rng.normal(3200, 1500, n)
    age = rng.normal(36, 11, n)
    rate = rng.normal(3, 1.2, n)
    purpose = rng.integers(0, 4, n)
    job = rng.integers(0, 3, n)
    gender = rng.integers(0, 2, n)
    phone = rng.integers(0, 2, n)
    # history skews bad for gender=1, housing skews owned for phone=1, so
    # dropout members can partly recover the signal through the proxies
    history = np.where(
        gender == 1,
        rng.choice(4, size=n, p=[0.60, 0.22, 0.11, 0.07]),
        rng.choice(4, size=n, p=[0.07, 0.11, 0.22, 0.60]),
    )
    housing = np.where(
        phone == 1,
        rng.choice(3, size=n, p=[0.08, 0.70, 0.22]),
        rng.choice(3, size=n, p=[0.42, 0.18, 0.40]),
    )

    z = lambda v: (v - v.mean()) / v.std()
    history_effect = np.array([-1.1, -0.4, 0.4, 1.1])
    purpose_effect = np.array([-0.7, 0.0, 0.3, 0.7])
    housing_effect = np.array([-0.6, 0.6, 0.0])
    job_effect = np.array([0.5, 0.0, -0.5])

    logit = (
        1.75 * (gender - 0.5)
        + 1.5 * (phone - 0.5)
        + 1.4 * (gender == 1) * np.isin(history, (0, 1))
        + 1.1 * (phone == 1) * (housing == 1)
        - 1.05 * z(duration)
        - 0.90 * z(amount)
        + 0.75 * z(age)
        - 0.35 * z(rate)
        + history_effect[history]
        + purpose_effect[purpose]
        + housing_effect[housing]
        + job_effect[job]
        + rng.normal(0, 0.45, n)
    )
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)

    values = np.column_stack(
        [duration, amount, age, rate, history, purpose, housing, job, gender, phone]
    ).astype(float)
    return TabularDataset(schema, values, labels, dict(_CREDIT_CATEGORIES), "bad")


SENSITIVE_WORDS = ("zorp", "zorpa", "grunk", "grunka", "vex", "blarg", "skree")

WORD_GROUPS = (
    WordGroup("zorp-family", frozenset({"zorp", "zorpa", "vex"})),
    WordGroup("grunk-family", frozenset({"grunk", "grunka", "blarg", "skree"})),
)

_CONSONANTS = "bcdfgklmnprtvz"


def _pseudo_words(prefix, count):
    out = []
    for a in _CONSONANTS:
        for b in _CONSONANTS:
            out.append(prefix + a + b)
            if len(out) == count:
                return out
    raise ValueError("too many words requested")


_OFFENSIVE = _pseudo_words("jab", 40)
_CALM = _pseudo_words("calm", 40)
_NEUTRAL = _pseudo_words("murm", 120)


def make_offense_corpus(n_docs=2000, seed=0) -> Corpus:
    """Balanced binary corpus with seven planted offensive pseudo-words.

    Class-1 documents mix neutral filler with moderately predictive tokens
    and, half the time, one or two of the planted sensitive words; class-0
    documents occasionally contain one too, so no word separates perfectly.
    All tokens are already Porter-fixed points, so the pipeline treats them
    like pre-stemmed text.
    """
    rng = np.random.default_rng(seed)
    docs = []
    half = n_docs // 2
    for i in range(n_docs):
        label = 1 if i < half else 0
        tokens = list(rng.choice(_NEUTRAL, size=rng.integers(6, 14)))
        if label == 1:
            tokens += list(rng.choice(_OFFENSIVE, size=rng.integers(2, 5)))
            if rng.random() < 0.55:
                tokens += list(
                    rng.choice(SENSITIVE_WORDS, size=rng.integers(1, 3),
                               replace=False)
                )
        else:
            tokens += list(rng.choice(_CALM, size=rng.integers(1, 4)))
            if rng.random() < 0.05:
                tokens += [str(rng.choice(SENSITIVE_WORDS))]
        rng.shuffle(tokens)
        tokens = [str(t) for t in tokens]
        docs.append(Document(i, " ".join(tokens), tuple(tokens), label))
    return Corpus(docs)
