"""Local-to-global explanation lifting: instance sampling (random or
submodular pick), explanation-matrix assembly and ranked aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TabularDataset
from .explain import (
    KernelConfig,
    TabularStats,
    lime_explain,
    lime_explain_text,
    shap_explain,
    shap_explain_text,
)
from .textcorpus import Corpus

RS = "rs"
SP = "sp"


@dataclass
class ExplanationMatrix:
    W: np.ndarray            # n_selected x d' local contributions
    instance_ids: list
    feature_names: list


@dataclass
class GlobalImportance:
    values: np.ndarray       # per-feature non-negative importance


@dataclass
class GlobalEntry:
    feature: str
    mean_contribution: float
    total_contribution: float
    rank: int                # 0-based, 0 = most important


@dataclass
class GlobalExplanation:
    entries: list            # ordered by rank
    sample_size: int
    strategy: str
    explainer: str

    @property
    def feature_count(self):
        return len(self.entries)

    def rank_of(self, feature):
        for e in self.entries:
            if e.feature == feature:
                return e.rank
        return None

    def entry_of(self, feature):
        for e in self.entries:
            if e.feature == feature:
                return e
        return None

    def top(self, k):
        return self.entries[:k]


def resolve_count(n_population, spec):
    """A float in (0, 1) is a fraction of the population, an int a count."""
    if isinstance(spec, float) and 0 < spec < 1:
        count = int(round(spec * n_population))
    else:
        count = int(spec)
    if count < 1 or count > n_population:
        raise ValueError(
            f"sample count {count} outside 1..{n_population} (spec {spec!r})"
        )
    return count


def sample_random(data, spec, seed):
    """Uniform instance ids without replacement, deterministic under seed."""
    n = data.n_instances if hasattr(data, "n_instances") else data.n_documents
    count = resolve_count(n, spec)
    rng = np.random.default_rng(seed)
    return sorted(rng.choice(n, size=count, replace=False).tolist())


def global_importance(W) -> GlobalImportance:
    """Per-feature importance sqrt(sum_i |W_ij|) (SP-LIME convention)."""
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise ValueError("empty explanation matrix")
    return GlobalImportance(np.sqrt(np.abs(W).sum(axis=0)))


def submodular_pick(W, importance, budget, positive_only=False):
    """Greedy maximisation of importance-weighted feature coverage.

    Covering counts features with a non-zero contribution (|W_ij| > 0);
    set positive_only for the strictly-positive variant. Ties break on the
    lowest row index; selection stops early when no gain remains.
    """
    W = np.asarray(W, dtype=float)
    I = importance.values if isinstance(importance, GlobalImportance) else np.asarray(importance)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    nonzero = (W > 0) if positive_only else (np.abs(W) > 0)
    n = W.shape[0]
    covered = np.zeros(W.shape[1], dtype=bool)
    chosen = []
    for _ in range(min(budget, n)):
        best_gain, best_i = 0.0, None
        for i in range(n):
            if i in chosen:
                continue
            gain = float(I[nonzero[i] & ~covered].sum())
            if gain > best_gain:
                best_gain, best_i = gain, i
        if best_i is None:
            break
        chosen.append(best_i)
        covered |= nonzero[best_i]
    return chosen


def coverage(W, importance, rows, positive_only=False):
    """Objective value of a row subset (used by tests and diagnostics)."""
    W = np.asarray(W, dtype=float)
    I = importance.values if isinstance(importance, GlobalImportance) else np.asarray(importance)
    nonzero = (W > 0) if positive_only else (np.abs(W) > 0)
    if not len(rows):
        return 0.0
    mask = nonzero[list(rows)].any(axis=0)
    return float(I[mask].sum())


def _instance_seed(base_seed, instance_id):
    return int(np.random.SeedSequence([int(base_seed), int(instance_id)])
               .generate_state(1)[0])


def _explain_one(model, data, idx, config, stats, background):
    if isinstance(data, Corpus):
        doc = data.documents[idx]
        cfg = config.with_seed(_instance_seed(config.seed, doc.id))
        if config.explainer == "lime":
            return lime_explain_text(model, list(doc.tokens), cfg)
        return shap_explain_text(model, list(doc.tokens), cfg)
    cfg = config.with_seed(_instance_seed(config.seed, idx))
    x = data.values[idx]
    if config.explainer == "lime":
        return lime_explain(model, x, cfg, stats)
    return shap_explain(model, x, cfg, stats, background=background)


def _scatter(exp, col_index, d):
    row = np.zeros(d)
    for name, wgt in zip(exp.feature_names, exp.weights):
        j = col_index.get(name)
        if j is not None:
            row[j] = wgt
    return row


def build_explanation_matrix(model, data, ids, config, stats=None,
                             background=None) -> ExplanationMatrix:
    """Explain the given instances and stack the results (one row each)."""
    if isinstance(data, Corpus):
        columns = list(data.vocabulary)
    else:
        columns = list(data.feature_names)
        if stats is None:
            stats = TabularStats.from_dataset(data)
    col_index = {n: j for j, n in enumerate(columns)}
    W = np.zeros((len(ids), len(columns)))
    for r, idx in enumerate(ids):
        exp = _explain_one(model, data, idx, config, stats, background)
        W[r] = _scatter(exp, col_index, len(columns))
    return ExplanationMatrix(W, list(ids), columns)


def aggregate(matrix: ExplanationMatrix, sample_size, strategy, explainer) -> GlobalExplanation:
    """Mean signed contribution per feature, ranked by absolute value
    (ties break on feature name)."""
    mean = matrix.W.mean(axis=0)
    total = matrix.W.sum(axis=0)
    order = sorted(
        range(len(matrix.feature_names)),
        key=lambda j: (-abs(mean[j]), matrix.feature_names[j]),
    )
    entries = [
        GlobalEntry(matrix.feature_names[j], float(mean[j]), float(total[j]), r)
        for r, j in enumerate(order)
    ]
    return GlobalExplanation(entries, sample_size, strategy, explainer)


def build_global_explanation(model, data, config: KernelConfig, strategy,
                             sample_spec, seed, stats=None, background=None,
                             pool_factor=10) -> GlobalExplanation:
    """Full local-to-global pipeline.

    Random sampling (rs) explains a uniform sample directly. Submodular pick
    (sp) explains a candidate pool of pool_factor times the target size, then
    keeps the greedy coverage maximisers.
    """
    if strategy not in (RS, SP):
        raise ValueError(f"unknown strategy {strategy!r}")
    config = config.with_seed(seed)
    n = data.n_documents if isinstance(data, Corpus) else data.n_instances
    count = resolve_count(n, sample_spec)
    if not isinstance(data, Corpus):
        if stats is None:
            stats = TabularStats.from_dataset(data)
        if config.explainer == "shap" and background is None:
            # background stream decoupled from instance sampling: sharing the
            # seed would make the background equal the explained sample, and
            # per-feature contributions summed over their own background
            # cancel exactly
            rng = np.random.default_rng([int(seed), 104729])
            background = stats.sample_background(config.background_size, rng)

    if strategy == RS:
        ids = sample_random(data, count, seed)
        matrix = build_explanation_matrix(model, data, ids, config, stats,
                                          background)
        return aggregate(matrix, count, RS, config.explainer)

    pool = sample_random(data, min(pool_factor * count, n), seed)
    pool_matrix = build_explanation_matrix(model, data, pool, config, stats,
                                           background)
    importance = global_importance(pool_matrix.W)
    picked_rows = submodular_pick(pool_matrix.W, importance, count)
    matrix = ExplanationMatrix(
        pool_matrix.W[picked_rows],
        [pool[i] for i in picked_rows],
        pool_matrix.feature_names,
    )
    return aggregate(matrix, count, SP, config.explainer)
