"""Objective, gradient, proximal map and stationarity measures of the
l0 elastic net self-expressive model

    min_x  1/2 ||z - D x||^2 + lambda1 ||x||_0 + lambda2/2 ||x||^2

in its split form (auxiliary ``y`` with the constraint ``y = x``).

All functions are pure. Wherever a dictionary is expected either a raw
``p x m`` array or a :class:`~oensc.admm.DictionaryMatrix` may be passed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DomainError

#: slack used when comparing magnitudes against the hard-threshold gap
GAP_SLACK = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the per-sample ADMM solver.

    Parameters
    ----------
    lambda1 : float
        Weight of the l0 term.
    lambda2 : float
        Weight of the squared l2 (ridge) term.
    sigma : float
        Augmented Lagrangian penalty. The prox step used in stationarity
        checks is ``alpha = 1 / sigma``.
    tol : float
        Relative stopping tolerance.
    max_iter : int
        Iteration cap per sample.
    """

    lambda1: float = 1e-3
    lambda2: float = 0.1
    sigma: float = 1.0
    tol: float = 1e-3
    max_iter: int = 100

    def __post_init__(self):
        if not self.lambda1 >= 0:
            raise ConfigError(f"lambda1 must be >= 0, got {self.lambda1}")
        if not self.lambda2 >= 0:
            raise ConfigError(f"lambda2 must be >= 0, got {self.lambda2}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be a finite positive number, got {self.sigma}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not math.isfinite(self.threshold):
            raise ConfigError("hard-threshold level sqrt(2 lambda1 / sigma) is not finite")

    @property
    def alpha(self):
        return 1.0 / self.sigma

    @property
    def threshold(self):
        """Hard-threshold level ``sqrt(2 lambda1 / sigma)``."""
        return math.sqrt(2.0 * self.lambda1 / self.sigma)


@dataclass(frozen=True)
class Sample:
    """One observation of the stream."""

    z: np.ndarray
    id: int = 0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1:
            raise DimensionError("z", "1-d vector", z.shape)
        if not np.all(np.isfinite(z)):
            raise DomainError(f"sample {self.id} has non-finite entries")
        object.__setattr__(self, "z", z)


@dataclass
class PerSampleState:
    """ADMM triple ``(y, x, u)`` for one sample."""

    y: np.ndarray
    x: np.ndarray
    u: np.ndarray
    iters: int = 0
    converged: bool = False

    @classmethod
    def zeros(cls, m):
        return cls(np.zeros(m), np.zeros(m), np.zeros(m))

    def copy(self):
        return PerSampleState(self.y.copy(), self.x.copy(), self.u.copy(), self.iters, self.converged)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    fit: float
    l0: float
    ridge: float
    lagrangian: float
    coupling: float = field(default=0.0)


def as_atoms(D):
    """Return the ``p x m`` atom array of ``D``."""
    atoms = getattr(D, "atoms", D)
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2:
        raise DimensionError("D", "2-d matrix", atoms.shape)
    return atoms


def _check_vec(name, v, size):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != size:
        raise DimensionError(name, f"vector of length {size}", v.shape)
    return v


def _sample_vector(z):
    return np.asarray(getattr(z, "z", z), dtype=float)


def hard_threshold(v, t):
    """Proximal map of ``(t^2 / 2) ||.||_0``.

    Entries with ``|v_j| <= t`` become 0, larger ones pass through unchanged.
    The boundary ``|v_j| == t`` goes to zero.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("hard_threshold received non-finite input")
    if not t >= 0:
        raise DomainError(f"threshold must be >= 0, got {t}")
    return np.where(np.abs(v) > t, v, 0.0)


def smooth_gradient(x, D, z, lambda2):
    """Gradient ``(D^T D + lambda2 I) x - D^T z`` of the smooth part."""
    atoms = as_atoms(D)
    p, m = atoms.shape
    x = _check_vec("x", x, m)
    z = _check_vec("z", _sample_vector(z), p)
    return atoms.T @ (atoms @ x - z) + lambda2 * x


def objective(z, D, x, lambda1, lambda2):
    atoms = as_atoms(D)
    p, m = atoms.shape
    x = _check_vec("x", x, m)
    z = _check_vec("z", _sample_vector(z), p)
    r = z - atoms @ x
    return 0.5 * float(r @ r) + lambda1 * np.count_nonzero(x) + 0.5 * lambda2 * float(x @ x)


def augmented_lagrangian(w, z, D, cfg):
    """Per-sample augmented Lagrangian, split into its components."""
    atoms = as_atoms(D)
    p, m = atoms.shape
    y = _check_vec("y", w.y, m)
    x = _check_vec("x", w.x, m)
    u = _check_vec("u", w.u, m)
    z = _check_vec("z", _sample_vector(z), p)
    r = z - atoms @ x
    fit = 0.5 * float(r @ r)
    l0 = cfg.lambda1 * np.count_nonzero(y)
    ridge = 0.5 * cfg.lambda2 * float(x @ x)
    gap = x - y
    coupling = float(u @ gap) + 0.5 * cfg.sigma * float(gap @ gap)
    return ObjectiveBreakdown(fit=fit, l0=l0, ridge=ridge, lagrangian=fit + l0 + ridge + coupling, coupling=coupling)


def pstationarity_residuals(w, z, D, cfg):
    """Sup-norm residuals of the three P-stationarity conditions.

    Returns ``(r_prox, r_grad, r_feas)`` with ``alpha = 1 / sigma``.
    """
    atoms = as_atoms(D)
    m = atoms.shape[1]
    y = _check_vec("y", w.y, m)
    x = _check_vec("x", w.x, m)
    u = _check_vec("u", w.u, m)
    alpha = cfg.alpha
    t = math.sqrt(2.0 * alpha * cfg.lambda1)
    r_prox = _sup(y - hard_threshold(y + alpha * u, t))
    r_grad = _sup(smooth_gradient(x, atoms, z, cfg.lambda2) + u)
    r_feas = _sup(y - x)
    return r_prox, r_grad, r_feas


def magnitude_gap_check(y, cfg, slack=GAP_SLACK):
    """True iff every entry of ``y`` is exactly 0 or exceeds the threshold gap."""
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    return bool(np.all((y == 0) | (a > cfg.threshold - slack)))


def regularizer(X, lambda1, lambda2):
    """Matrix regularizer ``lambda1 ||X||_0 + lambda2/2 ||X||_F^2``."""
    X = np.asarray(X, dtype=float)
    return lambda1 * np.count_nonzero(X) + 0.5 * lambda2 * float(np.sum(X * X))


def _sup(v):
    return float(np.max(np.abs(v))) if v.size else 0.0
