"""Tabular datasets: CSV ingestion, schemas with sensitive markers, splits,
SMOTE balancing, feature dropout and Pearson correlation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class SchemaError(ValueError):
    """CSV header or feature set does not match the declared schema."""


class DataParseError(ValueError):
    """A cell could not be parsed according to its declared kind."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    sensitive: bool = False

    def __post_init__(self):
        if not self.name:
            raise SchemaError("feature name must be non-empty")
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown feature kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    label_name: str
    positive_label: str

    def __post_init__(self):
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.label_name in names:
            raise SchemaError("label column cannot also be a feature")

    @property
    def feature_names(self):
        return [f.name for f in self.features]

    @property
    def sensitive_names(self):
        return [f.name for f in self.features if f.sensitive]

    def feature(self, name):
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def index_of(self, name):
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)


def schema_from_dict(doc) -> FeatureSchema:
    feats = tuple(
        Feature(f["name"], f["kind"], bool(f.get("sensitive", False)))
        for f in doc["features"]
    )
    return FeatureSchema(feats, doc["label"], str(doc["positive_label"]))


def schema_from_json(path) -> FeatureSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


@dataclass
class TabularDataset:
    """Immutable labelled table.

    `values` holds floats; categorical cells store the index of the token in
    the feature's sorted category list. Labels are 0/1 with 1 the positive
    class of the schema.
    """

    schema: FeatureSchema
    values: np.ndarray
    labels: np.ndarray
    categories: dict = field(default_factory=dict)
    negative_label: str = "0"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema.features):
            raise ValueError("value matrix shape does not match schema")
        if self.values.shape[0] != self.labels.shape[0]:
            raise ValueError("labels length does not match rows")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be binary 0/1")

    @property
    def n_instances(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    @property
    def feature_names(self):
        return self.schema.feature_names

    def cell(self, row, name):
        """Decoded cell value: float for numeric, token for categorical."""
        j = self.schema.index_of(name)
        raw = self.values[row, j]
        if self.schema.features[j].kind == CATEGORICAL:
            return self.categories[name][int(raw)]
        return raw

    def class_counts(self):
        return (int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1)))

    def numeric_indices(self):
        return [i for i, f in enumerate(self.schema.features) if f.kind == NUMERIC]

    def categorical_indices(self):
        return [i for i, f in enumerate(self.schema.features) if f.kind == CATEGORICAL]


def load_csv(path, schema: FeatureSchema, delimiter=",") -> TabularDataset:
    """Parse a headed CSV into a dataset; header must match the schema
    (order-insensitive, label column included)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required")
        rows = list(reader)

    expected = set(schema.feature_names) | {schema.label_name}
    got = set(header)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise SchemaError(
            f"{path}: header mismatch (missing={missing}, unexpected={extra})"
        )

    col_of = {name: header.index(name) for name in header}
    feat_cols = [col_of[f.name] for f in schema.features]
    label_col = col_of[schema.label_name]

    # first pass: intern categories in sorted order, collect label tokens
    cat_sets = {f.name: set() for f in schema.features if f.kind == CATEGORICAL}
    label_tokens = set()
    for r in rows:
        for f, c in zip(schema.features, feat_cols):
            if f.kind == CATEGORICAL:
                cat_sets[f.name].add(r[c])
        label_tokens.add(r[label_col])

    if len(label_tokens) > 2:
        raise DataParseError(
            f"{path}: more than two label values {sorted(label_tokens)}"
        )
    negatives = sorted(label_tokens - {schema.positive_label})
    negative_label = negatives[0] if negatives else "0"

    categories = {name: tuple(sorted(vals)) for name, vals in cat_sets.items()}
    code = {
        name: {tok: i for i, tok in enumerate(toks)}
        for name, toks in categories.items()
    }

    values = np.empty((len(rows), len(schema.features)), dtype=float)
    labels = np.empty(len(rows), dtype=int)
    for i, r in enumerate(rows):
        for j, (f, c) in enumerate(zip(schema.features, feat_cols)):
            if f.kind == NUMERIC:
                try:
                    values[i, j] = float(r[c])
                except ValueError:
                    raise DataParseError(
                        f"{path}: row {i + 2}, column {f.name!r}: "
                        f"cannot parse {r[c]!r} as numeric"
                    )
            else:
                values[i, j] = code[f.name][r[c]]
        labels[i] = 1 if r[label_col] == schema.positive_label else 0

    return TabularDataset(schema, values, labels, categories, negative_label)


def write_csv(ds: TabularDataset, path, delimiter=","):
    """Inverse of load_csv (categorical cells decoded back to tokens)."""
    header = ds.schema.feature_names + [ds.schema.label_name]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(header)
        for i in range(ds.n_instances):
            row = []
            for j, f in enumerate(ds.schema.features):
                if f.kind == CATEGORICAL:
                    row.append(ds.categories[f.name][int(ds.values[i, j])])
                else:
                    row.append(repr(float(ds.values[i, j])))
            row.append(
                ds.schema.positive_label if ds.labels[i] == 1 else ds.negative_label
            )
            writer.writerow(row)


def subset(ds: TabularDataset, indices) -> TabularDataset:
    indices = np.asarray(indices, dtype=int)
    return TabularDataset(
        ds.schema, ds.values[indices], ds.labels[indices], ds.categories,
        ds.negative_label,
    )


def train_test_split(ds: TabularDataset, train_fraction, seed):
    """Seeded shuffle then disjoint split; train size = floor(fraction * n)."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n_instances)
    n_train = int(np.floor(train_fraction * ds.n_instances))
    return subset(ds, order[:n_train]), subset(ds, order[n_train:])


def smote_oversample(ds: TabularDataset, k_neighbors=5, seed=0) -> TabularDataset:
    """Balance classes by synthesising minority rows.

    Each synthetic row interpolates the numeric cells of a minority instance p
    and one of its k nearest minority neighbours q (Euclidean distance on
    z-scored numerics): p + u * (q - p), u ~ U[0, 1]. Categorical cells are
    copied from p.
    """
    n0, n1 = ds.class_counts()
    if n0 == n1:
        return ds
    minority = 0 if n0 < n1 else 1
    need = abs(n0 - n1)
    min_idx = np.flatnonzero(ds.labels == minority)
    if len(min_idx) < 2:
        raise ValueError(
            "minority class has a single instance; duplicate it manually "
            "before applying SMOTE"
        )

    num = ds.numeric_indices()
    X = ds.values[min_idx][:, num] if num else np.zeros((len(min_idx), 0))
    if num:
        mu = ds.values[:, num].mean(axis=0)
        sd = ds.values[:, num].std(axis=0)
        sd[sd == 0] = 1.0
        Xs = (X - mu) / sd
        d2 = ((Xs[:, None, :] - Xs[None, :, :]) ** 2).sum(axis=2)
    else:
        d2 = np.zeros((len(min_idx), len(min_idx)))
    np.fill_diagonal(d2, np.inf)
    k = min(k_neighbors, len(min_idx) - 1)
    neighbors = np.argsort(d2, axis=1)[:, :k]

    rng = np.random.default_rng(seed)
    new_rows = np.empty((need, ds.n_features))
    for t in range(need):
        pi = t % len(min_idx)
        q_local = neighbors[pi][rng.integers(k)]
        p_row = ds.values[min_idx[pi]]
        q_row = ds.values[min_idx[q_local]]
        u = rng.random()
        row = p_row.copy()
        for j in num:
            row[j] = p_row[j] + u * (q_row[j] - p_row[j])
        new_rows[t] = row

    values = np.vstack([ds.values, new_rows])
    labels = np.concatenate([ds.labels, np.full(need, minority, dtype=int)])
    return TabularDataset(ds.schema, values, labels, ds.categories, ds.negative_label)


def drop_features(ds: TabularDataset, names) -> TabularDataset:
    """New dataset without the named features; the input is unchanged."""
    names = set(names)
    unknown = names - set(ds.schema.feature_names)
    if unknown:
        raise KeyError(f"unknown feature(s): {sorted(unknown)}")
    keep = [i for i, f in enumerate(ds.schema.features) if f.name not in names]
    if not keep:
        raise ValueError("cannot drop every feature")
    new_schema = FeatureSchema(
        tuple(ds.schema.features[i] for i in keep),
        ds.schema.label_name,
        ds.schema.positive_label,
    )
    cats = {
        f.name: ds.categories[f.name]
        for f in new_schema.features
        if f.kind == CATEGORICAL
    }
    return TabularDataset(
        new_schema, ds.values[:, keep], ds.labels, cats, ds.negative_label
    )


@dataclass
class CorrelationMatrix:
    feature_names: list
    values: np.ndarray
    constant_features: tuple = ()
    encoding_note: str = (
        "categorical features encoded as integer codes in sorted category order"
    )

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + list(self.feature_names))
            for name, row in zip(self.feature_names, self.values):
                writer.writerow([name] + [f"{v:.6f}" for v in row])


def pearson_correlation(ds: TabularDataset) -> CorrelationMatrix:
    """Pairwise Pearson coefficients over all features.

    Categorical columns enter as their integer codes (flagged in the result's
    encoding note). Constant columns get 0 off-diagonal by convention.
    """
    X = ds.values
    sd = X.std(axis=0)
    constant = [ds.feature_names[j] for j in np.flatnonzero(sd == 0)]
    d = ds.n_features
    corr = np.eye(d)
    ok = np.flatnonzero(sd > 0)
    if len(ok) >= 2 and ds.n_instances >= 2:
        sub = np.corrcoef(X[:, ok], rowvar=False)
        corr[np.ix_(ok, ok)] = sub
    corr = np.clip(corr, -1.0, 1.0)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(list(ds.feature_names), corr, tuple(constant))
