"""Local explainers reduced to weighted least-squares surrogates.

Both LIME and KernelSHAP perturb an instance in a binary interpretable space
(bit 1 = keep the feature, bit 0 = hide it), map perturbations back to the
model's input space, and fit a weighted linear surrogate to the model's
positive-class probability. They differ in the perturbation distribution,
the kernel weighting and the constraints on the fit:

  * LIME draws independent Bernoulli(1/2) masks, weights them with the RBF
    kernel exp(-d^2 / sigma^2) on binary Euclidean distance to the original
    instance, and optionally restricts the surrogate support to K features
    by forward selection.
  * KernelSHAP enumerates or samples feature coalitions with the Shapley
    kernel (M-1) / (C(M,s) s (M-s)), fixes the intercept at the background
    expectation and imposes the efficiency equality as a linear constraint,
    which makes the full-enumeration solution equal the exact Shapley values.

Hidden features are filled from the training marginal (LIME, per-feature
draws) or from background rows (SHAP); for text both explainers remove the
word's occurrences instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RIDGE_FALLBACK = 1e-6


@dataclass(frozen=True)
class KernelConfig:
    """Knobs shared by both explainers.

    kernel_width defaults to 0.75 * sqrt(d') at use; complexity_limit None
    means no sparsification (all d' features may get weight). n_samples is
    the LIME perturbation count or the SHAP coalition budget; SHAP switches
    to full enumeration whenever 2^d' <= n_samples.
    """

    explainer: str = "shap"
    n_samples: int = 5000
    kernel_width: float | None = None
    complexity_limit: int | None = None
    seed: int = 0
    background_size: int = 100
    distance: str = "binary-euclidean"

    def __post_init__(self):
        if self.explainer not in ("lime", "shap"):
            raise ValueError(f"unknown explainer {self.explainer!r}")
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise ValueError("kernel width must be positive")
        if self.complexity_limit is not None and self.complexity_limit < 1:
            raise ValueError("complexity limit must be at least 1")

    def with_seed(self, seed):
        return KernelConfig(
            self.explainer, self.n_samples, self.kernel_width,
            self.complexity_limit, int(seed), self.background_size,
            self.distance,
        )


@dataclass
class LocalExplanation:
    feature_names: list
    weights: np.ndarray
    intercept: float
    fidelity: float
    target_class: int = 1
    explainer: str = "shap"
    degraded: bool = False

    def as_dict(self):
        return dict(zip(self.feature_names, self.weights.tolist()))


@dataclass
class TabularStats:
    """Per-feature training marginals used to hide features.

    Numeric features also carry their quartile edges, which define the
    interpretable encoding (bit 1 = same quartile bin as the instance).
    """

    feature_names: list
    kinds: list
    columns: dict            # name -> sorted 1-d array of training values
    quartiles: dict          # numeric name -> 3 interior quantile edges
    training: np.ndarray     # full training matrix (background sampling)
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {n: i for i, n in enumerate(self.feature_names)}

    @staticmethod
    def from_dataset(ds) -> "TabularStats":
        cols, quarts = {}, {}
        for j, f in enumerate(ds.schema.features):
            col = np.sort(ds.values[:, j])
            cols[f.name] = col
            if f.kind == "numeric":
                quarts[f.name] = np.quantile(col, [0.25, 0.5, 0.75])
        return TabularStats(
            list(ds.feature_names),
            [f.kind for f in ds.schema.features],
            cols,
            quarts,
            ds.values.copy(),
        )

    def bin_of(self, name, value):
        return int(np.searchsorted(self.quartiles[name], value, side="right"))

    def sample_marginal(self, name, rng, size):
        """Draw observed values of a feature uniformly over training rows
        (equivalently: a quartile bin by frequency, then a value within)."""
        col = self.columns[name]
        return col[rng.integers(len(col), size=size)]

    def sample_background(self, size, rng):
        n = self.training.shape[0]
        take = min(size, n)
        idx = rng.choice(n, size=take, replace=False)
        return self.training[idx]


def lime_kernel(delta, sigma):
    """RBF proximity weight exp(-delta^2 / sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return np.exp(-np.square(delta) / sigma ** 2)


def shap_kernel(M, s):
    """Shapley coalition weight (M-1) / (C(M,s) * s * (M-s)).

    The empty and full coalitions have infinite weight; they are handled by
    the intercept and the efficiency constraint, so math.inf is returned.
    """
    if not 0 <= s <= M:
        raise ValueError(f"coalition size {s} outside 0..{M}")
    if s in (0, M):
        return math.inf
    return (M - 1) / (math.comb(M, s) * s * (M - s))


def map_to_feature_space(x, bits, stats: TabularStats, feature_names, rng):
    """Convert interpretable masks back to model-space rows.

    bits may be a single mask or a matrix of masks; bit 1 keeps the
    instance's value, bit 0 redraws that feature from the training marginal.
    """
    bits = np.atleast_2d(np.asarray(bits))
    x = np.asarray(x, dtype=float)
    rows = np.tile(x, (bits.shape[0], 1))
    for j, name in enumerate(feature_names):
        off = np.flatnonzero(bits[:, j] == 0)
        if off.size:
            rows[off, j] = stats.sample_marginal(name, rng, off.size)
    return rows


def _weighted_r2(y, yhat, w):
    sw = w.sum()
    if sw <= 0:
        return 0.0
    ybar = float(np.dot(w, y) / sw)
    tss = float(np.dot(w, (y - ybar) ** 2))
    rss = float(np.dot(w, (y - yhat) ** 2))
    if tss <= 1e-300:
        return 1.0
    return 1.0 - rss / tss


def _solve_wls(Z, y, w):
    """Weighted least squares with intercept; ridge fallback when singular."""
    n, d = Z.shape
    A = np.column_stack([np.ones(n), Z])
    AtW = A.T * w
    G = AtW @ A
    b = AtW @ y
    degraded = False
    try:
        sol = np.linalg.solve(G, b)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
        # reject solutions of numerically singular systems
        if np.linalg.cond(G) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        degraded = True
        sol = np.linalg.solve(G + RIDGE_FALLBACK * np.eye(d + 1), b)
    return sol[0], sol[1:], degraded


def fit_weighted_surrogate(design, targets, weights, complexity_limit=None) -> LocalExplanation:
    """Minimise the kernel-weighted squared loss over linear surrogates.

    With a complexity limit K, the support is chosen greedily: at each step
    the feature whose inclusion most reduces the weighted residual sum of
    squares is added, until K features are in.
    """
    Z = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, d = Z.shape
    if n < d + 1 and complexity_limit is None:
        raise ValueError(f"need at least {d + 1} rows, got {n}")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be non-negative and not all zero")

    if complexity_limit is not None and complexity_limit < d:
        support = _forward_select(Z, y, w, complexity_limit)
    else:
        support = list(range(d))

    intercept, coef_s, degraded = _solve_wls(Z[:, support], y, w)
    coef = np.zeros(d)
    coef[support] = coef_s
    yhat = intercept + Z @ coef
    fid = _weighted_r2(y, yhat, w)
    return LocalExplanation(
        feature_names=[str(j) for j in range(d)],
        weights=coef,
        intercept=float(intercept),
        fidelity=fid,
        explainer="lime",
        degraded=degraded,
    )


def _forward_select(Z, y, w, k):
    n, d = Z.shape
    support = []
    remaining = list(range(d))
    for _ in range(min(k, d)):
        best_j, best_rss = None, np.inf
        for j in remaining:
            cols = support + [j]
            intercept, coef, _ = _solve_wls(Z[:, cols], y, w)
            resid = y - intercept - Z[:, cols] @ coef
            rss = float(np.dot(w, resid ** 2))
            if rss < best_rss - 1e-15:
                best_rss, best_j = rss, j
        if best_j is None:
            break
        support.append(best_j)
        remaining.remove(best_j)
    return sorted(support)


def _solve_constrained(Z, y, w, total):
    """Minimise ||W^1/2 (Z c - y)||^2 subject to sum(c) = total (KKT)."""
    d = Z.shape[1]
    G = Z.T @ (Z * w[:, None])
    b = Z.T @ (w * y)
    K = np.zeros((d + 1, d + 1))
    K[:d, :d] = 2.0 * G
    K[:d, d] = 1.0
    K[d, :d] = 1.0
    rhs = np.concatenate([2.0 * b, [total]])
    degraded = False
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)) or np.linalg.cond(K) > 1e13:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        degraded = True
        K[:d, :d] += RIDGE_FALLBACK * np.eye(d)
        sol = np.linalg.solve(K, rhs)
    return sol[:d], degraded


def _model_feature_names(model, stats):
    names = getattr(model, "feature_names", None)
    return list(names) if names is not None else list(stats.feature_names)


def _project(x, names, stats):
    x = np.asarray(x, dtype=float)
    if len(x) == len(names):
        return x
    return np.array([x[stats.index[n]] for n in names])


def lime_explain(model, x, config: KernelConfig, stats: TabularStats) -> LocalExplanation:
    """LIME for one tabular instance; deterministic under config.seed."""
    names = _model_feature_names(model, stats)
    xm = _project(x, names, stats)
    d = len(names)
    rng = np.random.default_rng(config.seed)
    n = max(config.n_samples, d + 2)
    bits = (rng.random((n, d)) < 0.5).astype(float)
    rows = map_to_feature_space(xm, bits, stats, names, rng)
    preds = model.predict_proba(rows)[:, 1]
    delta = np.sqrt(np.maximum(d - bits.sum(axis=1), 0.0))
    sigma = config.kernel_width or 0.75 * math.sqrt(d)
    w = lime_kernel(delta, sigma)
    k = config.complexity_limit
    exp = fit_weighted_surrogate(bits, preds, w, complexity_limit=k)
    exp.feature_names = names
    exp.explainer = "lime"
    return exp


def lime_explain_text(model, tokens, config: KernelConfig) -> LocalExplanation:
    """LIME for one document; bits are word-presence indicators and bit 0
    removes every occurrence of the word."""
    words = _distinct_words(tokens)
    d = len(words)
    if d == 0:
        return LocalExplanation([], np.zeros(0), 0.0, 1.0, explainer="lime")
    rng = np.random.default_rng(config.seed)
    n = max(config.n_samples, d + 2)
    bits = (rng.random((n, d)) < 0.5).astype(float)
    docs = [_mask_tokens(tokens, words, row) for row in bits]
    preds = model.predict_proba_docs(docs)[:, 1]
    delta = np.sqrt(np.maximum(d - bits.sum(axis=1), 0.0))
    sigma = config.kernel_width or 0.75 * math.sqrt(d)
    w = lime_kernel(delta, sigma)
    exp = fit_weighted_surrogate(bits, preds, w, config.complexity_limit)
    exp.feature_names = words
    exp.explainer = "lime"
    return exp


def _distinct_words(tokens):
    seen, out = set(), []
    for t in tokens:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _mask_tokens(tokens, words, bits):
    hidden = {wd for wd, b in zip(words, bits) if b == 0}
    return [t for t in tokens if t not in hidden]


def _coalition_matrix(d, n_samples, rng):
    """All 2^d - 2 proper coalitions, or a kernel-weighted sample of them.

    Returns (bits, weights). Enumerated coalitions carry their Shapley
    kernel weight; sampled coalitions carry unit weight because the sampling
    distribution is already proportional to the kernel.
    """
    if d < 2:
        return np.zeros((0, d)), np.zeros(0)
    if 2 ** d <= n_samples:
        bits = np.array(
            [[(i >> j) & 1 for j in range(d)] for i in range(2 ** d)],
            dtype=float,
        )
        sizes = bits.sum(axis=1).astype(int)
        keep = (sizes > 0) & (sizes < d)
        bits = bits[keep]
        weights = np.array([shap_kernel(d, int(s)) for s in bits.sum(axis=1)])
        return bits, weights
    sizes = np.arange(1, d)
    p = (d - 1) / (sizes * (d - sizes))
    p = p / p.sum()
    drawn = rng.choice(sizes, size=n_samples, p=p)
    bits = np.zeros((n_samples, d))
    for i, s in enumerate(drawn):
        bits[i, rng.permutation(d)[:s]] = 1.0
    return bits, np.ones(n_samples)


def shap_explain(model, x, config: KernelConfig, stats: TabularStats,
                 background=None) -> LocalExplanation:
    """KernelSHAP for one tabular instance.

    Hidden features take background-row values; a coalition's target is the
    mean prediction over the background. The intercept is pinned to the
    all-hidden expectation and the weights are constrained to add up to
    f(x) minus that expectation.
    """
    names = _model_feature_names(model, stats)
    xm = _project(x, names, stats)
    d = len(names)
    rng = np.random.default_rng(config.seed)
    if background is None:
        background = stats.sample_background(config.background_size, rng)
    bg = np.asarray(background, dtype=float)
    if bg.shape[1] != d:
        bg = np.column_stack([bg[:, stats.index[n]] for n in names])

    def coalition_values(bits):
        # hybrid rows: coalition features from x, the rest from background
        n_b = bg.shape[0]
        out = np.empty(len(bits))
        chunk = max(1, 200_000 // max(n_b, 1))
        for start in range(0, len(bits), chunk):
            block = bits[start : start + chunk].astype(bool)
            rows = np.where(block[:, None, :], xm[None, None, :], bg[None, :, :])
            preds = model.predict_proba(rows.reshape(-1, d))[:, 1]
            out[start : start + chunk] = preds.reshape(len(block), n_b).mean(axis=1)
        return out

    v0 = float(model.predict_proba(bg)[:, 1].mean())
    v1 = float(model.predict_proba(xm[None, :])[:, 1][0])
    if d == 1:
        weights = np.array([v1 - v0])
        return LocalExplanation(names, weights, v0, 1.0, explainer="shap")

    bits, w = _coalition_matrix(d, config.n_samples, rng)
    y = coalition_values(bits) - v0
    coef, degraded = _solve_constrained(bits, y, w, v1 - v0)
    fid = _weighted_r2(y, bits @ coef, w)
    return LocalExplanation(
        names, coef, v0, fid, explainer="shap", degraded=degraded
    )


def shap_explain_text(model, tokens, config: KernelConfig) -> LocalExplanation:
    """KernelSHAP for one document; hiding a word removes its occurrences,
    the all-hidden reference is the empty document."""
    words = _distinct_words(tokens)
    d = len(words)
    if d == 0:
        return LocalExplanation([], np.zeros(0), 0.0, 1.0, explainer="shap")
    rng = np.random.default_rng(config.seed)
    v0 = float(model.predict_proba_docs([[]])[:, 1][0])
    v1 = float(model.predict_proba_docs([list(tokens)])[:, 1][0])
    if d == 1:
        return LocalExplanation(words, np.array([v1 - v0]), v0, 1.0,
                                explainer="shap")
    bits, w = _coalition_matrix(d, config.n_samples, rng)
    docs = [_mask_tokens(tokens, words, row) for row in bits]
    y = model.predict_proba_docs(docs)[:, 1] - v0
    coef, degraded = _solve_constrained(bits, y, w, v1 - v0)
    fid = _weighted_r2(y, bits @ coef, w)
    return LocalExplanation(
        words, coef, v0, fid, explainer="shap", degraded=degraded
    )


def exact_shapley(model, x, background):
    """Exact Shapley values by full coalition enumeration (test oracle).

    The coalition value is the mean model output over background rows with
    hidden features replaced by the background values. Limited to 15
    features.
    """
    x = np.asarray(x, dtype=float)
    bg = np.asarray(background, dtype=float)
    d = len(x)
    if d > 15:
        raise ValueError("exact enumeration limited to 15 features")

    values = {}
    for code in range(2 ** d):
        rows = bg.copy()
        for j in range(d):
            if (code >> j) & 1:
                rows[:, j] = x[j]
        values[code] = float(model.predict_proba(rows)[:, 1].mean())

    phis = np.zeros(d)
    fact = [math.factorial(i) for i in range(d + 1)]
    for j in range(d):
        bit = 1 << j
        for code in range(2 ** d):
            if code & bit:
                continue
            s = bin(code).count("1")
            w = fact[s] * fact[d - s - 1] / fact[d]
            phis[j] += w * (values[code | bit] - values[code])
    return phis
