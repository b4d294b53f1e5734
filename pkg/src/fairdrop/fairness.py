"""Process-fairness assessment and repair.

A model is deemed unfair when any user-designated sensitive unit (feature,
word or word group) appears among the top-k entries of its global
explanation. The cutoff k is either given or chosen by the kurtosis walk
Find-K. Unfair models are repaired by a dropout ensemble: one retrained
member per flagged unit plus one member trained without all of them, with
predictions combined by simple (optionally weighted) averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import TabularDataset, drop_features
from .explain import KernelConfig
from .globalexp import GlobalExplanation, build_global_explanation
from .models import TrainConfig, train, train_text
from .textcorpus import Corpus, WordGroup, stem_words


def kurtosis(values) -> float:
    """Fourth standardised moment with population variance (normal -> 3)."""
    v = np.asarray(list(values), dtype=float)
    if v.size < 2:
        raise ValueError("kurtosis needs at least 2 values")
    sigma = v.std()
    if sigma == 0:
        raise ValueError("kurtosis undefined for a zero-variance list")
    return float(np.mean(((v - v.mean()) / sigma) ** 4))


def _kurtosis_or_none(values):
    try:
        return kurtosis(values)
    except ValueError:
        return None


@dataclass(frozen=True)
class FindKConfig:
    alpha: float = 0.5

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def find_k(contributions, alpha, restore_trigger=False) -> list:
    """Trim a descending contribution list by watching kurtosis jumps.

    Walks from the least to the most important entry, removing one at a
    time; stops after the first removal where the kurtosis differs from the
    original list's by more than alpha. The triggering removal stays removed
    unless restore_trigger is set. Degenerate lists (fewer than 2 entries or
    zero variance) are returned unchanged; degenerate intermediate steps
    never trigger.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    vals = [float(v) for v in contributions]
    if len(vals) < 2:
        return vals
    g0 = _kurtosis_or_none(vals)
    if g0 is None:
        return vals
    cur = list(vals)
    for _ in range(len(vals), 1, -1):
        removed = cur.pop()
        g = _kurtosis_or_none(cur)
        if g is not None and abs(g0 - g) > alpha:
            if restore_trigger:
                cur.append(removed)
            return cur
    return cur


@dataclass
class FairnessVerdict:
    unfair: bool
    top_k: list                  # GlobalEntry list, the truncated L
    flagged_sensitive: list      # S', ordered by rank
    k_used: int
    k_source: str                # "manual" | "find-k"
    k_clamped: bool = False


def assess_fairness(global_exp: GlobalExplanation, sensitive, k=None,
                    alpha=None) -> FairnessVerdict:
    """Unfair iff a sensitive unit appears in the top-k list.

    Exactly one of k (manual cutoff, clamped to the feature count) and alpha
    (Find-K on the absolute mean contributions) must be given.
    """
    if (k is None) == (alpha is None):
        raise ValueError("give exactly one of k and alpha")
    entries = global_exp.entries
    clamped = False
    if k is not None:
        if k < 1:
            raise ValueError("k must be at least 1")
        if k > len(entries):
            k, clamped = len(entries), True
        source = "manual"
    else:
        kept = find_k([abs(e.mean_contribution) for e in entries], alpha)
        k = len(kept)
        source = "find-k"
    top = entries[:k]
    sensitive = set(sensitive)
    flagged = [e.feature for e in top if e.feature in sensitive]
    return FairnessVerdict(bool(flagged), top, flagged, k, source, clamped)


def _member_seed(base_seed, index):
    return int(np.random.SeedSequence([int(base_seed), int(index)])
               .generate_state(1)[0])


@dataclass
class EnsembleMember:
    dropped: tuple           # unit names (features, or words/group names)
    dropped_words: frozenset # stemmed words actually removed (text only)
    model: object


class FixOutEnsemble:
    """Pool of dropout-trained classifiers combined by averaging.

    Member t drops the t-th flagged unit; the final member drops the whole
    union. Weights default to uniform (the simple average); custom fixed
    weights are accepted and normalised.
    """

    def __init__(self, members, weights=None, feature_names=None):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = list(members)
        if weights is None:
            w = np.full(len(members), 1.0 / len(members))
        else:
            w = np.asarray(weights, dtype=float)
            if len(w) != len(members) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("member weights must be non-negative, same length")
            w = w / w.sum()
        self.weights = w
        self.feature_names = feature_names  # tabular: full value-space order

    @property
    def n_members(self):
        return len(self.members)

    def member_probabilities(self, X):
        raise NotImplementedError

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class TabularFixOutEnsemble(FixOutEnsemble):
    def __init__(self, members, full_feature_names, weights=None):
        super().__init__(members, weights, list(full_feature_names))
        self._projections = []
        index = {n: j for j, n in enumerate(full_feature_names)}
        for m in self.members:
            self._projections.append(
                [index[n] for n in m.model.feature_names]
            )

    def member_probabilities(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack(
            [
                m.model.predict_proba(X[:, cols])
                for m, cols in zip(self.members, self._projections)
            ]
        )

    def predict_proba(self, X):
        return aggregate_probabilities(self.member_probabilities(X), self.weights)


class TextFixOutEnsemble(FixOutEnsemble):
    def member_probabilities(self, docs):
        # each member's classifier strips its own dropped words
        return np.stack([m.model.predict_proba_docs(docs) for m in self.members])

    def predict_proba_docs(self, docs):
        return aggregate_probabilities(self.member_probabilities(docs), self.weights)

    def predict_docs(self, docs):
        return np.argmax(self.predict_proba_docs(docs), axis=1)


def aggregate_probabilities(member_probs, weights=None):
    """Average class-probability vectors across members (simple average by
    default; fixed weights otherwise)."""
    P = np.asarray(member_probs, dtype=float)
    if weights is None:
        return P.mean(axis=0)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return np.tensordot(w, P, axes=(0, 0))


def ensemble_predict(ensemble, x):
    """Probability pair for one instance or document."""
    if isinstance(ensemble, TextFixOutEnsemble):
        return ensemble.predict_proba_docs([x])[0]
    return ensemble.predict_proba(np.atleast_2d(x))[0]


def build_fixout_ensemble(config: TrainConfig, data, units, groups=None,
                          weights=None) -> FixOutEnsemble:
    """Train the |units|+1 dropout members.

    Tabular data: units are feature names. Text data: units are raw words
    (stemmed internally), or WordGroups when groups is given, in which case
    one member is trained per group instead of per word.
    """
    if isinstance(data, TabularDataset):
        units = list(units)
        if not units:
            raise ValueError("need at least one unit to drop")
        if len(set(units)) >= data.n_features:
            raise ValueError("dropping every feature leaves nothing to train on")
        members = []
        for t, unit in enumerate(units):
            cfg = config.with_seed(_member_seed(config.seed, t))
            members.append(
                EnsembleMember((unit,), frozenset(),
                               train(cfg, drop_features(data, {unit})))
            )
        cfg = config.with_seed(_member_seed(config.seed, len(units)))
        members.append(
            EnsembleMember(tuple(units), frozenset(),
                           train(cfg, drop_features(data, set(units))))
        )
        return TabularFixOutEnsemble(members, data.feature_names, weights)

    if not isinstance(data, Corpus):
        raise TypeError(f"unsupported data type {type(data).__name__}")

    if groups:
        unit_list = [(g.name, frozenset(g.words)) for g in groups]
    else:
        unit_list = [(w, frozenset(stem_words([w]))) for w in units]
    if not unit_list:
        raise ValueError("need at least one unit to drop")
    union = frozenset().union(*(ws for _, ws in unit_list))
    if union >= set(data.vocabulary):
        raise ValueError("dropping every word leaves nothing to train on")
    members = []
    for t, (name, ws) in enumerate(unit_list):
        cfg = config.with_seed(_member_seed(config.seed, t))
        members.append(EnsembleMember((name,), ws, train_text(cfg, data, ws)))
    cfg = config.with_seed(_member_seed(config.seed, len(unit_list)))
    members.append(
        EnsembleMember(tuple(n for n, _ in unit_list), union,
                       train_text(cfg, data, union))
    )
    return TextFixOutEnsemble(members, weights)


@dataclass
class RankDiffEntry:
    unit: str
    rank_before: int | None      # 1-based; None = beyond the rank window
    contrib_before: float | None
    rank_after: int | None
    contrib_after: float | None
    diff: float

    def formatted_diff(self):
        return format_diff(self.diff)


def rank_diff(unit, before, after) -> RankDiffEntry:
    """Rank movement (rank_after - rank_before) / min of the two ranks.

    before and after are (1-based rank, contribution) pairs.
    """
    rb, cb = before
    ra, ca = after
    if rb < 1 or ra < 1:
        raise ValueError("ranks are 1-based")
    diff = (ra - rb) / min(rb, ra)
    return RankDiffEntry(unit, rb, cb, ra, ca, diff)


def format_diff(diff, decimals=2):
    """Table formatting of a rank diff: truncation toward zero."""
    scale = 10 ** decimals
    return math.trunc(diff * scale) / scale


def _window_rank(exp: GlobalExplanation, unit, window):
    """1-based rank and contribution, or (None, None) beyond the window."""
    entry = exp.entry_of(unit)
    if entry is None or entry.rank >= window:
        return None, None
    return entry.rank + 1, entry.mean_contribution


def rank_diff_report(before: GlobalExplanation, after: GlobalExplanation,
                     units, window=None) -> list:
    """Per-unit before/after rank comparison.

    Units ranked beyond the window are reported with rank None (printed as
    ">window") and their contribution marked not significant; the diff then
    uses the window as the rank stand-in.
    """
    if window is None:
        window = before.feature_count
    out = []
    for unit in units:
        rb, cb = _window_rank(before, unit, window)
        ra, ca = _window_rank(after, unit, window)
        eff_b = rb if rb is not None else window
        eff_a = ra if ra is not None else window
        diff = (eff_a - eff_b) / min(eff_b, eff_a)
        out.append(RankDiffEntry(unit, rb, cb, ra, ca, diff))
    return out


@dataclass
class FixOutResult:
    verdict: FairnessVerdict
    ensemble: FixOutEnsemble | None
    report: list                      # RankDiffEntry list
    explanation_before: GlobalExplanation
    explanation_after: GlobalExplanation | None


def fixout_workflow(model_or_config, data, sensitive, expl_config: KernelConfig,
                    strategy, sample_spec, seed, k=None, alpha=None,
                    train_config: TrainConfig | None = None, groups=None,
                    rank_window=None) -> FixOutResult:
    """Assess, and repair when unfair.

    model_or_config is a pre-trained model or a TrainConfig (the model is
    then trained here first). When the verdict is fair no ensemble is built
    and the report is empty. Otherwise the flagged units are dropped, the
    ensemble is re-explained with identical sampling settings and the
    before/after rank movement of every flagged unit is reported.
    """
    is_text = isinstance(data, Corpus)
    if isinstance(model_or_config, TrainConfig):
        train_config = model_or_config
        model = train_text(train_config, data) if is_text else train(train_config, data)
    else:
        model = model_or_config
        if train_config is None:
            train_config = getattr(model, "config", None)
            if train_config is None:
                raise ValueError("train_config required with a pre-trained model")

    if is_text:
        sensitive_units = list(sensitive)
        stemmed = {u: next(iter(stem_words([u]))) for u in sensitive_units}
        watch = list(stemmed.values())
    else:
        sensitive_units = list(sensitive)
        watch = sensitive_units

    before = build_global_explanation(model, data, expl_config, strategy,
                                      sample_spec, seed)
    verdict = assess_fairness(before, watch, k=k, alpha=alpha)
    if not verdict.unfair:
        return FixOutResult(verdict, None, [], before, None)

    if is_text and groups:
        ensemble = build_fixout_ensemble(train_config, data, [], groups=groups)
    elif is_text:
        flagged_raw = [u for u in sensitive_units
                       if stemmed[u] in verdict.flagged_sensitive]
        ensemble = build_fixout_ensemble(train_config, data, flagged_raw)
    else:
        ensemble = build_fixout_ensemble(train_config, data,
                                         verdict.flagged_sensitive)

    after = build_global_explanation(ensemble, data, expl_config, strategy,
                                     sample_spec, seed)
    if rank_window is None:
        rank_window = 500 if is_text else before.feature_count
    report = rank_diff_report(before, after, watch, rank_window)
    return FixOutResult(verdict, ensemble, report, before, after)
