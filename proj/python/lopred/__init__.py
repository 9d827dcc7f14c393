"""Learner-outcome prediction from clickstream behavior and course text."""

from ._core import (
    accuracy,
    auc,
    cosine_similarity,
    engagement,
    generate_synth,
    lemmatize,
    number_to_words,
    preprocess,
    run_experiment,
    stratified_kfold,
    time_spent,
    view_count,
)

__all__ = [
    "accuracy",
    "auc",
    "cosine_similarity",
    "engagement",
    "generate_synth",
    "lemmatize",
    "number_to_words",
    "preprocess",
    "run_experiment",
    "stratified_kfold",
    "time_spent",
    "view_count",
]
