"""Mixed numeric/nominal distance and the k-nearest-neighbor classifier."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .data_model import Dataset, Role, Value
from .errors import EmptyTrainingSet, KTooLarge, SchemaMismatch
from .preprocess import Normalization, NormalizationModel

INV_DISTANCE_EPS = 1e-9
NOMINAL_MISSING_DELTA = 0.5


class Weighting(str, Enum):
    MAJORITY = "majority"
    INVERSE_DISTANCE = "inverse-distance"


class MissingPolicy(str, Enum):
    MEAN_IMPUTE = "mean-impute"
    MAX_PENALTY = "max-penalty"


_POLICY_CODE = {MissingPolicy.MEAN_IMPUTE: 0, MissingPolicy.MAX_PENALTY: 1}
_WEIGHTING_CODE = {Weighting.MAJORITY: 0, Weighting.INVERSE_DISTANCE: 1}


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    weighting: Weighting = Weighting.MAJORITY
    missing_policy: MissingPolicy = MissingPolicy.MEAN_IMPUTE
    normalization: Normalization = Normalization.MINMAX

    def __post_init__(self):
        object.__setattr__(self, "weighting", Weighting(self.weighting))
        object.__setattr__(self, "missing_policy", MissingPolicy(self.missing_policy))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class Neighbor:
    index: int
    distance: float
    label: int


@dataclass(frozen=True)
class Prediction:
    label: int
    weights: tuple[float, ...]
    neighbors: tuple[Neighbor, ...]


def distance(a: Sequence[Value], b: Sequence[Value], schema, policy: MissingPolicy = MissingPolicy.MEAN_IMPUTE,
             fill: Mapping[int, float] | None = None) -> float:
    """Euclidean distance over numeric attributes plus overlap over nominal ones.

    Rows are full schema rows; the class cell is skipped. Numeric values are
    expected to be normalized already. Under ``MEAN_IMPUTE`` a missing numeric
    cell takes ``fill[attribute index]`` and a missing nominal cell
    contributes 0.5; under ``MAX_PENALTY`` any missing cell contributes 1.
    """
    schema = tuple(schema)
    if len(a) != len(schema) or len(b) != len(schema):
        raise SchemaMismatch("rows do not conform to the schema")
    policy = MissingPolicy(policy)
    total = 0.0
    for i, spec in enumerate(schema):
        if spec.role is Role.CLASS:
            continue
        x, y = a[i], b[i]
        if spec.is_nominal:
            if x is None or y is None:
                d = NOMINAL_MISSING_DELTA if policy is MissingPolicy.MEAN_IMPUTE else 1.0
            else:
                d = 0.0 if x == y else 1.0
        elif x is None or y is None:
            if policy is MissingPolicy.MAX_PENALTY:
                d = 1.0
            else:
                if fill is None or i not in fill:
                    raise ValueError(f"mean imputation needs a fill value for attribute {spec.name!r}")
                x = fill[i] if x is None else x
                y = fill[i] if y is None else y
                d = x - y
        else:
            d = x - y
        total += d * d
    return math.sqrt(total)


@dataclass(frozen=True)
class _Prepared:
    Z: np.ndarray
    labels: np.ndarray
    nominal: np.ndarray
    fill: np.ndarray
    n_classes: int


def column_fill(Z: np.ndarray, nominal: np.ndarray) -> np.ndarray:
    """Mean of each numeric column over observed cells, 0 when none observed."""
    fill = np.zeros(Z.shape[1])
    for j in range(Z.shape[1]):
        if nominal[j]:
            continue
        col = Z[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            fill[j] = col.mean()
    return fill


def predict_arrays(Z_train: np.ndarray, y_train: np.ndarray, Z_query: np.ndarray, nominal: np.ndarray,
                   fill: np.ndarray, n_classes: int, cfg: KnnConfig):
    """Array-level classifier: returns ``(labels, vote_weights, neighbor_indices, sq_distances)``."""
    n = Z_train.shape[0]
    if n == 0:
        raise EmptyTrainingSet("training set is empty")
    if cfg.k > n:
        raise KTooLarge(f"k={cfg.k} exceeds training-set size {n}")
    sqd = kernels.sq_distances(np.ascontiguousarray(Z_query, dtype=np.float64),
                               np.ascontiguousarray(Z_train, dtype=np.float64),
                               np.ascontiguousarray(nominal, dtype=np.uint8),
                               np.ascontiguousarray(fill, dtype=np.float64),
                               _POLICY_CODE[cfg.missing_policy])
    pred, weights, nb = kernels.knn_vote(sqd, np.ascontiguousarray(y_train, dtype=np.intp), int(cfg.k),
                                         int(n_classes), _WEIGHTING_CODE[cfg.weighting])
    return pred, weights, nb, sqd


def _prepare(train: Dataset, model: NormalizationModel) -> _Prepared:
    if len(train) == 0:
        raise EmptyTrainingSet("training set is empty")
    Z = model.transform(train, train.feature_matrix)
    return _Prepared(Z, train.labels, train.nominal_features, column_fill(Z, train.nominal_features),
                     train.n_classes)


def _query_matrix(train: Dataset, model: NormalizationModel, queries: Sequence[Sequence[Value]]) -> np.ndarray:
    X = np.full((len(queries), train.n_features), np.nan)
    width = len(train.schema)
    for i, q in enumerate(queries):
        if len(q) != width:
            raise SchemaMismatch(f"query {i} has {len(q)} cells, schema has {width}")
        for j, col in enumerate(train.feature_indices):
            if q[col] is not None:
                X[i, j] = q[col]
    return model.transform(train, X)


def _predictions(prep: _Prepared, Zq: np.ndarray, cfg: KnnConfig) -> list[Prediction]:
    pred, weights, nb, sqd = predict_arrays(prep.Z, prep.labels, Zq, prep.nominal, prep.fill,
                                            prep.n_classes, cfg)
    out = []
    for i in range(len(pred)):
        neighbors = tuple(Neighbor(int(r), math.sqrt(sqd[i, r]), int(prep.labels[r])) for r in nb[i])
        out.append(Prediction(int(pred[i]), tuple(float(w) for w in weights[i]), neighbors))
    return out


def classify(train: Dataset, model: NormalizationModel, query: Sequence[Value], cfg: KnnConfig) -> Prediction:
    """Label one query row (a full schema row; its class cell is ignored).

    The ``k`` nearest training rows are taken with ties broken toward the
    lower row index, votes are counted (or weighted by ``1/(d + 1e-9)``),
    and the vote winner is returned, ties going to the lower class index.
    """
    return classify_batch(train, model, [query], cfg)[0]


def classify_batch(train: Dataset, model: NormalizationModel, queries, cfg: KnnConfig,
                   workers: int = 1) -> list[Prediction]:
    if isinstance(queries, Dataset):
        queries = queries.rows
    queries = list(queries)
    prep = _prepare(train, model)
    if cfg.k > len(train):
        raise KTooLarge(f"k={cfg.k} exceeds training-set size {len(train)}")
    if not queries:
        return []
    Zq = _query_matrix(train, model, queries)
    if workers <= 1 or len(queries) < 2 * workers:
        return _predictions(prep, Zq, cfg)
    chunks = np.array_split(np.arange(len(queries)), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda idx: _predictions(prep, Zq[idx], cfg), chunks)
    return [p for part in parts for p in part]
