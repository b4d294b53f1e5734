import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.feature_extraction.text import TfidfVectorizer

from fairdrop.textcorpus import (
    Corpus,
    Document,
    TfidfModel,
    WordGroup,
    balance_binary,
    build_tfidf,
    drop_words,
    drop_words_corpus,
    load_hatespeech,
    tokenize_and_stem,
)


def make_corpus(token_lists, labels=None):
    labels = labels or [0] * len(token_lists)
    docs = [
        Document(i, " ".join(toks), tuple(toks), lab)
        for i, (toks, lab) in enumerate(zip(token_lists, labels))
    ]
    return Corpus(docs)


class TestTokenize:
    def test_stemming_example(self):
        assert tokenize_and_stem("vehicles") == ["vehicl"]

    def test_empty(self):
        assert tokenize_and_stem("") == []

    def test_case_insensitive(self):
        assert tokenize_and_stem("Vehicle VEHICLES vehicle") == ["vehicl"] * 3

    def test_strips_urls_mentions_rt(self):
        text = "RT @user123: check https://t.co/abc this #hashtag now"
        toks = tokenize_and_stem(text)
        assert "rt" not in toks
        assert not any("user" in t or "http" in t for t in toks)
        assert "hashtag" in toks
        assert "now" in toks

    def test_short_runs_dropped(self):
        assert tokenize_and_stem("a I at 7 go") == ["at", "go"]

    def test_idempotent_on_stemmed_stream(self):
        toks = tokenize_and_stem("the runners were running vehicles")
        again = tokenize_and_stem(" ".join(toks))
        assert again == toks


class TestLoadHatespeech:
    def _write(self, path, rows):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["tweet", "class"])
            w.writeheader()
            w.writerows(rows)

    def test_label_merge(self, tmp_path):
        path = tmp_path / "hs.csv"
        self._write(path, [
            {"tweet": "bad words here", "class": "0"},   # hate speech
            {"tweet": "rude words here", "class": "1"},  # offensive
            {"tweet": "nice words here", "class": "2"},  # neither
        ])
        corpus = load_hatespeech(path)
        assert [d.label for d in corpus.documents] == [1, 1, 0]
        assert set(d.label for d in corpus.documents) == {0, 1}

    def test_unknown_label(self, tmp_path):
        path = tmp_path / "hs.csv"
        self._write(path, [{"tweet": "x y", "class": "7"}])
        with pytest.raises(ValueError, match="unknown label"):
            load_hatespeech(path)

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "hs.csv"
        with open(path, "w", newline="") as fh:
            fh.write("text,label\nfoo,0\n")
        with pytest.raises(ValueError):
            load_hatespeech(path)


class TestBalance:
    def test_downsamples_majority(self):
        corpus = make_corpus([["w"]] * 24, [1] * 20 + [0] * 4)
        out = balance_binary(corpus, seed=0)
        assert out.class_counts() == (4, 4)

    def test_identity_when_balanced(self):
        corpus = make_corpus([["a"], ["b"], ["c"], ["d"]], [0, 1, 0, 1])
        out = balance_binary(corpus, seed=0)
        assert [d.id for d in out.documents] == [0, 1, 2, 3]

    def test_deterministic(self):
        corpus = make_corpus([["w"]] * 7, [1] * 5 + [0] * 2)
        a = balance_binary(corpus, seed=3)
        b = balance_binary(corpus, seed=3)
        assert [d.id for d in a.documents] == [d.id for d in b.documents]


class TestDropWords:
    def test_identity(self):
        doc = Document(0, "a b", ("a", "b"), 0)
        assert drop_words(doc, set()).tokens == ("a", "b")

    def test_removes_all_occurrences(self):
        doc = Document(0, "", ("a", "b", "a", "c"), 0)
        assert drop_words(doc, {"a"}).tokens == ("b", "c")

    @given(st.sets(st.sampled_from(["a", "b", "c", "d"])),
           st.sets(st.sampled_from(["a", "b", "c", "d"])))
    @settings(max_examples=30, deadline=None)
    def test_composition(self, g1, g2):
        doc = Document(0, "", ("a", "b", "c", "d", "a", "b"), 0)
        joint = drop_words(doc, g1 | g2)
        stepwise = drop_words(drop_words(doc, g1), g2)
        assert joint.tokens == stepwise.tokens

    def test_corpus_vocabulary_shrinks(self):
        corpus = make_corpus([["a", "b"], ["b", "c"]])
        out = drop_words_corpus(corpus, {"b"})
        assert set(out.vocabulary) <= set(corpus.vocabulary)
        assert "b" not in out.vocabulary


class TestWordGroup:
    def test_raw_words_are_stemmed(self):
        g = WordGroup.from_raw("g", ["Vehicles", "running"])
        assert g.words == frozenset({"vehicl", "run"})

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            WordGroup("g", frozenset())


class TestTfidf:
    def test_absent_token_absent_entry(self):
        corpus = make_corpus([["a", "b"], ["a"]])
        vocab, vecs = build_tfidf(corpus)
        j_b = vocab.index("b")
        assert j_b not in vecs[1].entries

    def test_single_document_direction(self):
        corpus = make_corpus([["a", "a", "b"]])
        vocab, vecs = build_tfidf(corpus)
        wa = vecs[0].entries[vocab.index("a")]
        wb = vecs[0].entries[vocab.index("b")]
        # equal idf, so weights proportional to term counts
        assert abs(wa / wb - 2.0) < 1e-12

    def test_two_doc_hand_case(self):
        # docs {a b} and {a}: rarer b outweighs a inside doc 1
        corpus = make_corpus([["a", "b"], ["a"]])
        vocab, vecs = build_tfidf(corpus)
        wa = vecs[0].entries[vocab.index("a")]
        wb = vecs[0].entries[vocab.index("b")]
        assert wb > wa

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        words = ["w%d" % i for i in range(30)]
        lists = [
            list(rng.choice(words, size=rng.integers(2, 12)))
            for _ in range(25)
        ]
        corpus = make_corpus(lists)
        _, vecs = build_tfidf(corpus)
        for v in vecs:
            norm = np.sqrt(sum(w * w for w in v.entries.values()))
            assert abs(norm - 1.0) < 1e-9

    def test_matches_sklearn(self):
        # independent oracle: sklearn's smooth-idf l2-normalised vectoriser
        rng = np.random.default_rng(1)
        words = ["tok%d" % i for i in range(15)]
        lists = [
            list(rng.choice(words, size=rng.integers(1, 9)))
            for _ in range(20)
        ]
        corpus = make_corpus(lists)
        model = TfidfModel.fit(corpus)
        mine = model.matrix(corpus.documents).toarray()

        ref = TfidfVectorizer(
            analyzer=lambda doc: doc, norm="l2", smooth_idf=True
        )
        theirs = ref.fit_transform(lists).toarray()
        their_vocab = ref.get_feature_names_out().tolist()
        reorder = [their_vocab.index(t) for t in model.vocabulary]
        np.testing.assert_allclose(mine, theirs[:, reorder], atol=1e-12)

    def test_out_of_vocabulary_ignored(self):
        corpus = make_corpus([["a", "b"], ["a"]])
        model = TfidfModel.fit(corpus)
        vec = model.transform_tokens(["a", "zzz"])
        assert set(vec.entries) == {model.index["a"]}
