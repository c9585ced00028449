"""Pure numpy kernels, used when the compiled extension is unavailable.

Accumulation order matches ``_kernels.pyx`` (column by column, then
neighbors in sorted order) so results agree bit for bit.
"""

import numpy as np

BACKEND = "python"

INV_EPS = 1e-9


def sq_distances(Q, T, nominal, fill, policy):
    Q = np.asarray(Q, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    out = np.zeros((Q.shape[0], T.shape[0]))
    for j in range(Q.shape[1]):
        a = Q[:, j][:, None]
        b = T[:, j][None, :]
        miss = np.isnan(a) | np.isnan(b)
        if nominal[j]:
            d = (a != b).astype(np.float64)
            d[miss] = 0.5 if policy == 0 else 1.0
        elif policy == 0:
            a = np.where(np.isnan(a), fill[j], a)
            b = np.where(np.isnan(b), fill[j], b)
            d = a - b
        else:
            d = np.where(miss, 1.0, a - b)
        out += d * d
    return out


def knn_vote(sqd, labels, k, n_classes, weighting):
    sqd = np.asarray(sqd, dtype=np.float64)
    nq = sqd.shape[0]
    nb = np.argsort(sqd, axis=1, kind="stable")[:, :k]
    topd = np.take_along_axis(sqd, nb, axis=1)
    weights = np.zeros((nq, n_classes))
    rows = np.arange(nq)
    for t in range(k):
        w = 1.0 if weighting == 0 else 1.0 / (np.sqrt(topd[:, t]) + INV_EPS)
        weights[rows, labels[nb[:, t]]] += w
    return np.argmax(weights, axis=1).astype(np.intp), weights, nb.astype(np.intp)
