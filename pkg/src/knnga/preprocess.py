"""Normalization of numeric attributes, fitted on training data only."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data_model import Dataset
from .errors import SchemaMismatch


class Normalization(str, Enum):
    NONE = "none"
    ZSCORE = "zscore"
    MINMAX = "minmax"


def fit_columns(X: np.ndarray, nominal: np.ndarray, method: Normalization) -> tuple[np.ndarray, np.ndarray]:
    """Per-column statistics ignoring NaN cells.

    Returns ``(mean, std)`` for z-score (sample std, divisor n-1) or
    ``(min, max)`` for min-max. Nominal columns and columns with no
    observed values get ``(0, 0)``, which ``transform_columns`` treats as
    degenerate.
    """
    n_cols = X.shape[1]
    a = np.zeros(n_cols)
    b = np.zeros(n_cols)
    if method is Normalization.NONE:
        return a, b
    for j in range(n_cols):
        if nominal[j]:
            continue
        col = X[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            continue
        if method is Normalization.ZSCORE:
            a[j] = col.mean()
            b[j] = col.std(ddof=1) if col.size > 1 else 0.0
        else:
            a[j] = col.min()
            b[j] = col.max()
    return a, b


def transform_columns(X: np.ndarray, nominal: np.ndarray, method: Normalization,
                      a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if method is Normalization.NONE:
        return np.array(X, dtype=float)
    out = np.array(X, dtype=float)
    numeric = ~np.asarray(nominal, dtype=bool)
    if method is Normalization.ZSCORE:
        scale = b
    else:
        scale = b - a
    degenerate = numeric & (scale <= 0)
    live = numeric & ~degenerate
    with np.errstate(invalid="ignore"):
        cols = (out[:, live] - a[live]) / scale[live]
        if method is Normalization.MINMAX:
            cols = np.clip(cols, 0.0, 1.0)
    out[:, live] = cols
    # missing cells stay NaN, everything else in a constant column maps to 0
    deg = out[:, degenerate]
    out[:, degenerate] = np.where(np.isnan(deg), np.nan, 0.0)
    return out


@dataclass(frozen=True)
class NormalizationModel:
    """Fitted statistics, keyed by schema position (``None`` for non-numeric)."""

    method: Normalization
    stats: tuple[tuple[float, float] | None, ...]
    fingerprint: str

    def feature_arrays(self, d: Dataset) -> tuple[np.ndarray, np.ndarray]:
        a = np.zeros(d.n_features)
        b = np.zeros(d.n_features)
        for j, col in enumerate(d.feature_indices):
            if self.stats[col] is not None:
                a[j], b[j] = self.stats[col]
        return a, b

    def check(self, d: Dataset) -> None:
        if d.fingerprint != self.fingerprint:
            raise SchemaMismatch("normalization model was fitted on a different schema")

    def transform(self, d: Dataset, X: np.ndarray) -> np.ndarray:
        """Normalize a feature matrix laid out like ``d.feature_matrix``."""
        self.check(d)
        a, b = self.feature_arrays(d)
        return transform_columns(X, d.nominal_features, self.method, a, b)

    def to_text(self) -> str:
        lines = [f"method = {self.method.value}", f"fingerprint = {self.fingerprint}"]
        for i, st in enumerate(self.stats):
            if st is not None:
                lines.append(f"stat.{i} = {st[0]!r} {st[1]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_attributes: int) -> "NormalizationModel":
        fields = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                fields[key.strip()] = value.strip()
        stats: list[tuple[float, float] | None] = [None] * n_attributes
        for key, value in fields.items():
            if key.startswith("stat."):
                x, y = value.split()
                stats[int(key[5:])] = (float(x), float(y))
        return cls(Normalization(fields["method"]), tuple(stats), fields["fingerprint"])


def fit(d: Dataset, method: Normalization | str = Normalization.MINMAX) -> NormalizationModel:
    method = Normalization(method)
    if len(d) == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    a, b = fit_columns(d.feature_matrix, d.nominal_features, method)
    stats: list[tuple[float, float] | None] = [None] * len(d.schema)
    if method is not Normalization.NONE:
        for j, col in enumerate(d.feature_indices):
            if not d.nominal_features[j]:
                stats[col] = (float(a[j]), float(b[j]))
    return NormalizationModel(method, tuple(stats), d.fingerprint)


def apply(m: NormalizationModel, d: Dataset) -> Dataset:
    m.check(d)
    if m.method is Normalization.NONE:
        return d
    Z = m.transform(d, d.feature_matrix)
    numeric_cols = [(j, col) for j, col in enumerate(d.feature_indices) if not d.nominal_features[j]]
    rows = []
    for i, row in enumerate(d.rows):
        cells = list(row)
        for j, col in numeric_cols:
            if cells[col] is not None:
                cells[col] = float(Z[i, j])
        rows.append(tuple(cells))
    return d.with_rows(rows)
