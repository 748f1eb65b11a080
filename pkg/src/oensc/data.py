"""Matrix files, column normalization, synthetic union-of-subspaces data and
the salt-and-pepper / speckle corruptions.

File format: comma-delimited, one row per feature and one column per sample.
Labels live in a sidecar ``<path>.labels`` file with one integer per line.
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, ParseError

log = logging.getLogger(__name__)


@dataclass
class DatasetMatrix:
    Z: np.ndarray
    truth: np.ndarray = None
    name: str = ""
    bases: list = field(default=None, repr=False)

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        if self.Z.ndim != 2:
            raise DimensionError("Z", "2-d matrix", self.Z.shape)
        if not np.all(np.isfinite(self.Z)):
            raise ParseError("data matrix has non-finite entries")
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=int)
            if self.truth.shape != (self.Z.shape[1],):
                raise DimensionError("truth", (self.Z.shape[1],), self.truth.shape)

    @property
    def p(self):
        return self.Z.shape[0]

    @property
    def n(self):
        return self.Z.shape[1]

    @property
    def n_classes(self):
        return 0 if self.truth is None else int(np.unique(self.truth).size)


@dataclass(frozen=True)
class SyntheticSpec:
    """Union of random linear subspaces.

    ``subspaces`` is a sequence of ``(dim, n_points)`` pairs.
    """

    ambient_dim: int
    subspaces: tuple
    noise_sigma: float = 0.0
    seed: int = 0
    independent: bool = True
    shuffle: bool = True

    def __post_init__(self):
        object.__setattr__(self, "subspaces", tuple((int(d), int(k)) for d, k in self.subspaces))
        if not self.subspaces:
            raise ConfigError("need at least one subspace")
        for d, k in self.subspaces:
            if not 1 <= d < self.ambient_dim:
                raise ConfigError(f"subspace dimension {d} must lie in [1, {self.ambient_dim})")
            if k < 1:
                raise ConfigError("each subspace needs at least one point")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("salt_pepper", "speckle"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not 0 <= self.rate < 1:
            raise ConfigError(f"noise rate must lie in [0, 1), got {self.rate}")


def labels_path(path):
    return f"{path}.labels"


def load_matrix(path, has_labels=False, name=None):
    """Read a comma-delimited ``p x n`` matrix (samples in columns).

    With ``has_labels`` the sidecar ``<path>.labels`` must exist and hold
    exactly ``n`` integers.
    """
    path = os.fspath(path)
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read matrix file: {exc.strerror}", path) from exc
    rows = []
    width = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"non-numeric cell ({exc})", path, lineno) from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"ragged row: {len(row)} cells, expected {width}", path, lineno)
        rows.append(row)
    if not rows:
        raise ParseError("empty matrix file", path)
    Z = np.array(rows)
    if not np.all(np.isfinite(Z)):
        raise ParseError("matrix contains non-finite values", path)
    truth = None
    if has_labels:
        truth = load_labels(labels_path(path), Z.shape[1])
    return DatasetMatrix(Z, truth, name or os.path.splitext(os.path.basename(path))[0])


def load_labels(path, n=None):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read labels file: {exc.strerror}", path) from exc
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(int(line.strip()))
        except ValueError as exc:
            raise ParseError("label is not an integer", path, lineno) from exc
    if n is not None and len(out) != n:
        raise ParseError(f"expected {n} labels, found {len(out)}", path)
    return np.array(out, dtype=int)


def save_matrix(path, Z, truth=None):
    """Write ``Z`` (and optional sidecar labels) at full precision."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    np.savetxt(path, Z, delimiter=",", fmt="%.17g")
    if truth is not None:
        np.savetxt(labels_path(path), np.asarray(truth, dtype=int), fmt="%d")


def normalize_columns(Z):
    """Scale every nonzero column to unit Euclidean norm.

    Returns
    -------
    Zn : ndarray
    n_zero : int
        Number of all-zero columns, left untouched.
    """
    Z = np.asarray(Z, dtype=float)
    norms = np.linalg.norm(Z, axis=0)
    zero = norms == 0
    n_zero = int(zero.sum())
    if n_zero:
        log.warning("%d zero columns left unnormalized", n_zero)
    return Z / np.where(zero, 1.0, norms), n_zero


def random_bases(ambient_dim, dims, rng, independent=True):
    bases = []
    for d in dims:
        Q, _ = np.linalg.qr(rng.standard_normal((ambient_dim, d)))
        bases.append(Q)
    if independent:
        if sum(dims) > ambient_dim:
            raise ConfigError(f"independent subspaces need sum of dims <= {ambient_dim}, got {sum(dims)}")
        stacked = np.hstack(bases)
        if np.linalg.matrix_rank(stacked) < stacked.shape[1]:
            raise ConfigError("drawn subspaces are not independent")
    return bases


def sample_subspace(basis, n_points, noise_sigma, rng):
    pts = basis @ rng.standard_normal((basis.shape[1], n_points))
    if noise_sigma > 0:
        pts = pts + noise_sigma * rng.standard_normal(pts.shape)
    return pts


def generate_union_of_subspaces(spec):
    """Points on random subspaces with Gaussian coefficients and optional noise.

    Bases are orthonormal (QR of a Gaussian matrix). Columns are shuffled
    with the same seed when ``spec.shuffle`` is set.
    """
    rng = np.random.default_rng(spec.seed)
    dims = [d for d, _ in spec.subspaces]
    bases = random_bases(spec.ambient_dim, dims, rng, spec.independent)
    blocks, labels = [], []
    for k, (B, (_, npts)) in enumerate(zip(bases, spec.subspaces)):
        blocks.append(sample_subspace(B, npts, spec.noise_sigma, rng))
        labels.append(np.full(npts, k))
    Z = np.hstack(blocks)
    truth = np.concatenate(labels)
    if spec.shuffle:
        perm = rng.permutation(Z.shape[1])
        Z, truth = Z[:, perm], truth[perm]
    return DatasetMatrix(Z, truth, "synthetic", bases=bases)


def generate_shift_stream(ambient_dim, dims, n_before, n_after_old, new_dims, n_after_new,
                          noise_sigma=0.0, seed=0):
    """Stream whose distribution changes at sample ``sum(n_before)``.

    The first segment draws ``n_before[k]`` points from each original subspace.
    The second segment mixes ``n_after_old[k]`` further points from the same
    subspaces with ``n_after_new[j]`` points from subspaces of dims
    ``new_dims`` that never appeared before. Each segment is shuffled on its own.
    """
    rng = np.random.default_rng(seed)
    all_dims = list(dims) + list(new_dims)
    bases = random_bases(ambient_dim, all_dims, rng, independent=sum(all_dims) <= ambient_dim)
    c_old = len(dims)

    def segment(counts):
        blocks, labels = [], []
        for k, npts in counts:
            if npts:
                blocks.append(sample_subspace(bases[k], npts, noise_sigma, rng))
                labels.append(np.full(npts, k))
        Z = np.hstack(blocks)
        truth = np.concatenate(labels)
        perm = rng.permutation(Z.shape[1])
        return Z[:, perm], truth[perm]

    Z1, t1 = segment(list(enumerate(n_before)))
    Z2, t2 = segment(list(enumerate(n_after_old)) + [(c_old + j, k) for j, k in enumerate(n_after_new)])
    return DatasetMatrix(np.hstack([Z1, Z2]), np.concatenate([t1, t2]), "shift", bases=bases), Z1.shape[1]


def add_noise(Z, spec):
    """Corrupt ``Z`` with salt-and-pepper or speckle noise.

    salt_pepper: each entry, with probability ``rate``, is replaced by the
    global min or max of ``Z`` (fair coin). speckle: ``Z * (1 + rate * G)``
    with ``G`` standard normal per entry.
    """
    Z = np.asarray(Z, dtype=float)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "speckle":
        return Z * (1.0 + spec.rate * rng.standard_normal(Z.shape))
    lo, hi = Z.min(), Z.max()
    mask = rng.random(Z.shape) < spec.rate
    salt = rng.random(Z.shape) < 0.5
    out = Z.copy()
    out[mask & salt] = hi
    out[mask & ~salt] = lo
    return out
