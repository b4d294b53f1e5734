"""Process-fairness auditing and repair for binary classifiers.

The library assesses whether a model's decisions lean on user-designated
sensitive features (or words, for text) by aggregating local surrogate
explanations (LIME or KernelSHAP) into a global ranking, optionally picks
the ranking cutoff with a kurtosis walk, and repairs flagged models with a
feature-dropout ensemble averaged per the simple-mean rule.
"""

from .dataset import (
    CorrelationMatrix,
    DataParseError,
    Feature,
    FeatureSchema,
    SchemaError,
    TabularDataset,
    drop_features,
    load_csv,
    pearson_correlation,
    smote_oversample,
    train_test_split,
)
from .explain import (
    KernelConfig,
    LocalExplanation,
    TabularStats,
    exact_shapley,
    fit_weighted_surrogate,
    lime_explain,
    lime_explain_text,
    lime_kernel,
    shap_explain,
    shap_explain_text,
    shap_kernel,
)
from .fairness import (
    FairnessVerdict,
    FindKConfig,
    FixOutEnsemble,
    FixOutResult,
    RankDiffEntry,
    aggregate_probabilities,
    assess_fairness,
    build_fixout_ensemble,
    ensemble_predict,
    find_k,
    fixout_workflow,
    format_diff,
    kurtosis,
    rank_diff,
    rank_diff_report,
)
from .globalexp import (
    ExplanationMatrix,
    GlobalExplanation,
    GlobalImportance,
    build_global_explanation,
    global_importance,
    sample_random,
    submodular_pick,
)
from .models import (
    TrainConfig,
    accuracy,
    accuracy_docs,
    load_model,
    save_model,
    train,
    train_matrix,
    train_text,
)
from .textcorpus import (
    Corpus,
    Document,
    TfidfModel,
    WordGroup,
    balance_binary,
    build_tfidf,
    drop_words,
    load_hatespeech,
    tokenize_and_stem,
)

__version__ = "0.1.0"
