"""Text pipeline for the offensive-language task: tokenisation with Porter
stemming, corpus loading with label merging, downsample balancing, word and
word-group dropout, and TF-IDF vectorisation."""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import porter

_URL_RE = re.compile(r"http[s]?://\S+")
_MENTION_RE = re.compile(r"@[\w\-]+")
_TOKEN_RE = re.compile(r"[a-z]{2,}")


def tokenize_and_stem(text: str) -> list:
    """Lowercase, strip URLs/mentions, keep alphabetic runs of length >= 2,
    drop the bare retweet marker, Porter-stem each token."""
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    return [porter.stem(t) for t in tokens if t != "rt"]


def stem_words(words) -> set:
    """Stem a collection of raw words with the corpus stemmer."""
    return {porter.stem(w.lower()) for w in words}


@dataclass(frozen=True)
class Document:
    id: int
    raw_text: str
    tokens: tuple
    label: int


@dataclass(frozen=True)
class WordGroup:
    name: str
    words: frozenset

    def __post_init__(self):
        if not self.words:
            raise ValueError(f"word group {self.name!r} is empty")

    @staticmethod
    def from_raw(name, raw_words):
        return WordGroup(name, frozenset(stem_words(raw_words)))


@dataclass
class Corpus:
    documents: list
    vocabulary: list = field(default_factory=list)
    doc_frequencies: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.vocabulary:
            df = Counter()
            for doc in self.documents:
                df.update(set(doc.tokens))
            self.vocabulary = sorted(df)
            self.doc_frequencies = dict(df)

    @property
    def n_documents(self):
        return len(self.documents)

    def class_counts(self):
        labels = [d.label for d in self.documents]
        return (labels.count(0), labels.count(1))

    def labels(self):
        return np.array([d.label for d in self.documents], dtype=int)


# hate-speech CSV label codes
_LABEL_MAP = {"0": 1, "1": 1, "2": 0}  # hate speech / offensive -> 1, neither -> 0


def load_hatespeech(path, text_column="tweet", label_column="class") -> Corpus:
    """Load the 3-way labelled corpus and merge to binary: offensive plus
    hate speech become class 1, neither becomes class 0."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or text_column not in reader.fieldnames \
                or label_column not in reader.fieldnames:
            raise ValueError(
                f"{path}: expected columns {text_column!r} and {label_column!r}"
            )
        docs = []
        for i, row in enumerate(reader):
            raw_label = row[label_column].strip()
            if raw_label not in _LABEL_MAP:
                raise ValueError(
                    f"{path}: row {i + 2}: unknown label {raw_label!r} "
                    "(expected 0, 1 or 2)"
                )
            text = row[text_column]
            docs.append(
                Document(i, text, tuple(tokenize_and_stem(text)), _LABEL_MAP[raw_label])
            )
    return Corpus(docs)


def balance_binary(corpus: Corpus, seed=0) -> Corpus:
    """Downsample the majority class (without replacement) to the minority
    count; document order is preserved."""
    n0, n1 = corpus.class_counts()
    if n0 == n1:
        return corpus
    majority = 0 if n0 > n1 else 1
    target = min(n0, n1)
    maj_ids = [d.id for d in corpus.documents if d.label == majority]
    rng = np.random.default_rng(seed)
    keep_maj = set(rng.choice(maj_ids, size=target, replace=False).tolist())
    docs = [
        d for d in corpus.documents if d.label != majority or d.id in keep_maj
    ]
    return Corpus(docs)


def drop_words(doc: Document, words) -> Document:
    """Remove every occurrence of the listed (stemmed) tokens."""
    words = set(words)
    if not words:
        return doc
    return Document(
        doc.id, doc.raw_text, tuple(t for t in doc.tokens if t not in words),
        doc.label,
    )


def drop_words_corpus(corpus: Corpus, words) -> Corpus:
    words = set(words)
    if not words:
        return corpus
    return Corpus([drop_words(d, words) for d in corpus.documents])


@dataclass
class TfidfVector:
    entries: dict  # vocabulary index -> weight


@dataclass
class TfidfModel:
    """Frozen vocabulary and idf weights of a training corpus.

    Weight of term t in document d is tf(t, d) * (ln((1 + N) / (1 + df(t))) + 1)
    with the vector L2-normalised (smooth-idf convention).
    """

    vocabulary: list
    idf: np.ndarray
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.vocabulary)}

    @staticmethod
    def fit(corpus: Corpus) -> "TfidfModel":
        if corpus.n_documents == 0:
            raise ValueError("cannot fit tf-idf on an empty corpus")
        vocab = list(corpus.vocabulary)
        n = corpus.n_documents
        df = np.array([corpus.doc_frequencies[t] for t in vocab], dtype=float)
        idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        return TfidfModel(vocab, idf)

    def transform_tokens(self, tokens) -> TfidfVector:
        counts = Counter(t for t in tokens if t in self.index)
        if not counts:
            return TfidfVector({})
        idxs = np.array([self.index[t] for t in counts], dtype=int)
        w = np.array([c for c in counts.values()], dtype=float) * self.idf[idxs]
        w = w / np.linalg.norm(w)
        return TfidfVector(dict(zip(idxs.tolist(), w.tolist())))

    def matrix(self, docs) -> sparse.csr_matrix:
        """CSR design matrix for a list of documents or token lists."""
        data, indices, indptr = [], [], [0]
        for doc in docs:
            tokens = doc.tokens if isinstance(doc, Document) else doc
            vec = self.transform_tokens(tokens)
            for j, w in sorted(vec.entries.items()):
                indices.append(j)
                data.append(w)
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (data, indices, indptr), shape=(len(indptr) - 1, len(self.vocabulary))
        )


def build_tfidf(corpus: Corpus):
    """Vectorise a whole corpus; returns (vocabulary, list of TfidfVector)."""
    model = TfidfModel.fit(corpus)
    return model.vocabulary, [model.transform_tokens(d.tokens) for d in corpus.documents]
