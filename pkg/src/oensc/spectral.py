"""From coefficient vectors to cluster labels.

Samples are coded against a shared dictionary rather than against each
other, so sample-to-sample affinity is induced through atom usage: the
cosine similarity of absolute coefficient profiles. Labels then come from
normalized spectral clustering (symmetric Laplacian, row-normalized
embedding, k-means).
"""

import numpy as np
from scipy import linalg
from sklearn.cluster import KMeans

from .errors import ConfigError, DegenerateAffinityError, DimensionError


class CoefficientMatrix:
    """Converged coefficient vectors keyed by stream index.

    Every column remembers the dictionary version it was solved against so
    stale columns can be re-solved before affinities are built.
    """

    def __init__(self, m=None):
        self.m = m
        self._cols = {}
        self._versions = {}

    def add(self, index, x, version=0):
        x = np.asarray(x, dtype=float)
        if self.m is None:
            self.m = x.shape[0]
        elif x.shape != (self.m,):
            raise DimensionError(f"column {index}", (self.m,), x.shape)
        self._cols[index] = x
        self._versions[index] = version

    def __len__(self):
        return len(self._cols)

    def __contains__(self, index):
        return index in self._cols

    def indices(self):
        return sorted(self._cols)

    def version(self, index):
        return self._versions[index]

    def stale(self, version):
        """Stream indices whose column was solved against another dictionary version."""
        return [i for i in self.indices() if self._versions[i] != version]

    def to_array(self):
        """Columns stacked in stream order, shape ``(m, n)``."""
        idx = self.indices()
        if not idx:
            return np.zeros((self.m or 0, 0))
        return np.column_stack([self._cols[i] for i in idx])


def _as_matrix(X):
    if isinstance(X, CoefficientMatrix):
        versions = {X.version(i) for i in X.indices()}
        if len(versions) > 1:
            raise ConfigError(f"coefficient columns span dictionary versions {sorted(versions)}; "
                              "re-solve stale columns first")
        X = X.to_array()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X", "2-d matrix", X.shape)
    return X


def build_affinity(X):
    """Symmetric affinity from coefficient columns.

    ``W_ij`` is the cosine similarity of ``|x_i|`` and ``|x_j|``, symmetrized,
    with a zero diagonal. All-zero columns get no edges.
    """
    X = _as_matrix(X)
    if X.shape[1] == 0:
        raise ConfigError("cannot build an affinity from an empty coefficient set")
    A = np.abs(X)
    norms = np.linalg.norm(A, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    A = A / safe
    W = A.T @ A
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    np.maximum(W, 0.0, out=W)
    return W


def symmetric_affinity(C):
    """Classic self-expressive affinity ``(|C| + |C^T|) / 2`` for square ``C``."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionError("C", "square matrix", C.shape)
    W = 0.5 * (np.abs(C) + np.abs(C.T))
    np.fill_diagonal(W, 0.0)
    return W


def normalized_laplacian(W):
    """``I - D^{-1/2} W D^{-1/2}``; isolated vertices keep a unit diagonal."""
    deg = W.sum(axis=1)
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    L = -(inv[:, None] * W * inv[None, :])
    L[np.diag_indices_from(L)] += 1.0
    return 0.5 * (L + L.T)


def spectral_embedding(W, c):
    L = normalized_laplacian(W)
    vals, vecs = linalg.eigh(L, subset_by_index=[0, c - 1])
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    return vals, vecs / np.where(norms > 0, norms, 1.0)


def cluster(W, c, seed=0, n_init=20, max_iter=300):
    """Normalized spectral clustering of affinity ``W`` into ``c`` groups."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionError("W", "square matrix", W.shape)
    n = W.shape[0]
    if c < 2:
        raise ConfigError(f"need at least 2 clusters, got {c}")
    if c > n:
        raise ConfigError(f"cannot form {c} clusters from {n} samples")
    if not np.any(W > 0):
        raise DegenerateAffinityError("affinity matrix has no positive entries")
    _, emb = spectral_embedding(W, c)
    km = KMeans(n_clusters=c, init="k-means++", n_init=n_init, max_iter=max_iter, random_state=seed)
    return km.fit_predict(emb).astype(int)


def block_diagonal_ratio(X, labels):
    """Share of absolute coefficient mass linking samples of different classes.

    Only defined for square self-expressive matrices (dictionary = data).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError("X", "square matrix", X.shape)
    labels = np.asarray(labels).ravel()
    if labels.shape[0] != X.shape[0]:
        raise DimensionError("labels", X.shape[0], labels.shape)
    A = np.abs(X)
    total = A.sum()
    if total == 0:
        return 0.0
    off = labels[:, None] != labels[None, :]
    return float(A[off].sum() / total)
