"""Accuracy, full-training evaluation and stratified cross-validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data_model import Dataset, FoldAssignment, stratified_folds
from .errors import EmptyInput, EmptyMaskError, InvalidFoldCount, LengthMismatch, MaskLengthError
from .genetic_search import Chromosome
from .knn_core import KnnConfig, column_fill, predict_arrays
from .preprocess import fit_columns, transform_columns

FULL_TRAINING = "full-training"
CROSS_VALIDATION = "cross-validation"


@dataclass(frozen=True)
class Protocol:
    kind: str
    folds: int | None = None

    def __str__(self):
        return self.kind if self.folds is None else f"cv{self.folds}"

    @classmethod
    def parse(cls, text: str) -> "Protocol":
        text = text.strip().lower()
        if text in (FULL_TRAINING, "full"):
            return cls(FULL_TRAINING)
        if text.startswith("cv") and text[2:].isdigit():
            return cls(CROSS_VALIDATION, int(text[2:]))
        raise ValueError(f"unknown protocol {text!r}")


@dataclass(frozen=True)
class Provenance:
    dataset: str
    knn: KnnConfig
    mask: str
    seed: int | None


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: tuple[tuple[int, ...], ...]
    protocol: Protocol
    provenance: Provenance
    fold_accuracies: tuple[float, ...] = ()
    fold_sizes: tuple[int, ...] = ()
    fold_masks: tuple[str, ...] = ()

    @property
    def n_evaluated(self) -> int:
        return sum(map(sum, self.confusion))

    @property
    def correct(self) -> int:
        return sum(self.confusion[i][i] for i in range(len(self.confusion)))


def accuracy(predictions: Sequence, truth: Sequence) -> float:
    """Fraction of positions where prediction equals truth."""
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truth)} labels")
    if len(truth) == 0:
        raise EmptyInput("accuracy of an empty prediction list")
    hits = sum(1 for p, t in zip(predictions, truth) if p == t)
    return hits / len(truth)


def mask_columns(d: Dataset, mask: Sequence[int]) -> np.ndarray:
    bits = [int(b) for b in mask]
    if len(bits) != d.n_features:
        raise MaskLengthError(f"mask has {len(bits)} bits, dataset has {d.n_features} features")
    if not any(bits):
        raise EmptyMaskError("mask selects no attributes")
    return np.flatnonzero(bits)


def predict_split(X: np.ndarray, nominal: np.ndarray, y: np.ndarray, n_classes: int,
                  train_idx: np.ndarray, test_idx: np.ndarray, cfg: KnnConfig) -> np.ndarray:
    """Fit normalization on ``train_idx`` rows only and label ``test_idx`` rows."""
    Xtr, Xte = X[train_idx], X[test_idx]
    a, b = fit_columns(Xtr, nominal, cfg.normalization)
    Ztr = transform_columns(Xtr, nominal, cfg.normalization, a, b)
    Zte = transform_columns(Xte, nominal, cfg.normalization, a, b)
    fill = column_fill(Ztr, nominal)
    pred, *_ = predict_arrays(Ztr, y[train_idx], Zte, nominal, fill, n_classes, cfg)
    return pred


def _confusion(truth: np.ndarray, pred: np.ndarray, n_classes: int) -> tuple[tuple[int, ...], ...]:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return tuple(tuple(int(v) for v in row) for row in cm)


def evaluate_full_training(d: Dataset, mask: Sequence[int], cfg: KnnConfig) -> EvalResult:
    """Classify every row against the whole dataset, the row itself included."""
    cols = mask_columns(d, mask)
    X = d.feature_matrix[:, cols]
    nominal = d.nominal_features[cols]
    idx = np.arange(len(d))
    pred = predict_split(X, nominal, d.labels, d.n_classes, idx, idx, cfg)
    cm = _confusion(d.labels, pred, d.n_classes)
    acc = sum(cm[i][i] for i in range(d.n_classes)) / len(d)
    mask_str = "".join(str(int(b)) for b in mask)
    return EvalResult(acc, cm, Protocol(FULL_TRAINING), Provenance(d.name, cfg, mask_str, None))


def cross_validate(d: Dataset, mask: Sequence[int], cfg: KnnConfig, folds: int = 5, seed: int = 1, *,
                   assignment: FoldAssignment | None = None,
                   select_mask: Callable[[Dataset, int], Sequence[int]] | None = None) -> EvalResult:
    """Stratified k-fold CV with pooled accuracy.

    ``select_mask(train_partition, fold)``, when given, chooses the
    attribute mask per fold from that fold's training rows only; ``mask``
    is then only recorded in the provenance.
    """
    if folds < 2:
        raise InvalidFoldCount(f"fold count must be >= 2, got {folds}")
    fa = assignment if assignment is not None else stratified_folds(d, folds, seed)
    if len(fa.assignment) != len(d):
        raise InvalidFoldCount("fold assignment does not cover the dataset")
    base_cols = mask_columns(d, mask)
    y = d.labels
    pred = np.empty(len(d), dtype=np.intp)
    fold_acc, fold_sizes, fold_masks = [], [], []
    for f in range(fa.k):
        test_idx = fa.test_indices(f)
        train_idx = fa.train_indices(f)
        if test_idx.size == 0:
            continue
        cols = base_cols
        if select_mask is not None:
            chosen = select_mask(d.subset(train_idx.tolist()), f)
            cols = mask_columns(d, chosen)
            fold_masks.append("".join(str(int(b)) for b in chosen))
        p = predict_split(d.feature_matrix[:, cols], d.nominal_features[cols], y, d.n_classes,
                          train_idx, test_idx, cfg)
        pred[test_idx] = p
        fold_acc.append(float(np.mean(p == y[test_idx])))
        fold_sizes.append(int(test_idx.size))
    cm = _confusion(y, pred, d.n_classes)
    acc = sum(cm[i][i] for i in range(d.n_classes)) / len(d)
    mask_str = "".join(str(int(b)) for b in mask)
    return EvalResult(acc, cm, Protocol(CROSS_VALIDATION, fa.k), Provenance(d.name, cfg, mask_str, seed),
                      tuple(fold_acc), tuple(fold_sizes), tuple(fold_masks))


def make_fitness(d: Dataset, cfg: KnnConfig, folds: int = 5, seed: int = 1) -> Callable[[Chromosome], float]:
    """Wrapper fitness: internal stratified CV accuracy of KNN on the masked attributes.

    The fold assignment is drawn once, so the function is deterministic in
    the mask. Fold count is capped at the dataset size.
    """
    fa = stratified_folds(d, min(folds, len(d)), seed)
    X, nominal, y = d.feature_matrix, d.nominal_features, d.labels
    splits = [(fa.train_indices(f), fa.test_indices(f)) for f in range(fa.k)]
    splits = [(tr, te) for tr, te in splits if te.size]

    def fitness(mask: Chromosome) -> float:
        cols = mask_columns(d, mask)
        Xm, nm = X[:, cols], nominal[cols]
        hits = 0
        for tr, te in splits:
            p = predict_split(Xm, nm, y, d.n_classes, tr, te, cfg)
            hits += int(np.count_nonzero(p == y[te]))
        return hits / len(d)

    return fitness
