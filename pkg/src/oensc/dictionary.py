"""Support-point dictionaries for the stream.

``static`` mode builds the dictionary once from an initial batch.
``updating`` mode additionally counts outliers (samples at distance at least
``delta`` from every atom), buffers them after the current atoms, and every
``mm`` outliers replaces the dictionary by the support points of the buffer.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .admm import DictionaryMatrix
from .errors import ConfigError, OenscError
from .model import _sample_vector, as_atoms
from .support_points import CCPConfig, compute_support_points, energy_distance

log = logging.getLogger(__name__)


def init_dictionary(initial_batch, m, ccp=None, lambda2=0.0, sigma=None):
    """Dictionary made of the ``m`` support points of ``initial_batch``.

    ``sigma`` defaults to twice the smoothness constant of the new atoms.

    Returns
    -------
    DictionaryMatrix
        With ``support`` attached (the :class:`SupportPointSet` it came from).
    """
    batch = np.asarray(initial_batch, dtype=float)
    if batch.ndim != 2:
        raise ConfigError("initial batch must be a p x n matrix")
    if batch.shape[1] < m:
        raise ConfigError(f"initial batch has {batch.shape[1]} samples but m={m}; use a smaller m")
    if ccp is None:
        ccp = CCPConfig(m=m)
    elif ccp.m != m:
        ccp = CCPConfig(m=m, max_iter=ccp.max_iter, rel_tol=ccp.rel_tol, eps_guard=ccp.eps_guard, seed=ccp.seed)
    sp = compute_support_points(batch, ccp)
    D = DictionaryMatrix.auto(sp.points, lambda2, sigma, version=0)
    D.support = sp
    return D


def min_distance_to_dictionary(z, D):
    """Euclidean distance from ``z`` to its nearest atom."""
    atoms = as_atoms(D)
    zv = _sample_vector(z)
    return float(np.sqrt(np.min(np.sum((atoms - zv[:, None]) ** 2, axis=0))))


def estimate_delta(initial_batch, D, quantile=0.95):
    """Outlier radius: the given quantile of batch-to-dictionary distances."""
    batch = np.asarray(initial_batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] == 0:
        raise ConfigError("initial batch must be a nonempty p x n matrix")
    if not 0 <= quantile <= 1:
        raise ConfigError(f"quantile must lie in [0, 1], got {quantile}")
    d = cdist(batch.T, as_atoms(D).T).min(axis=1)
    return float(np.quantile(d, quantile))


@dataclass
class RebuildEvent:
    index: int
    buffer_size: int
    energy_before: float
    energy_after: float
    version: int
    error: str = None


class DictionaryManager:
    """Owns the current dictionary snapshot and the outlier buffer.

    Parameters
    ----------
    dictionary : DictionaryMatrix
    mode : {"static", "updating"}
    delta : float
        Outlier radius.
    mm : int
        Rebuild period, in outliers.
    ccp : CCPConfig
        Used for rebuilds. The seed is offset by the new version so that
        replays are deterministic but rebuilds do not share a draw.
    sigma : float or None
        Fixed penalty for rebuilt dictionaries; ``None`` recomputes the
        default from the new atoms.
    """

    def __init__(self, dictionary, mode="static", delta=np.inf, mm=100, ccp=None, sigma=None):
        if mode not in ("static", "updating"):
            raise ConfigError(f"unknown dictionary mode {mode!r}")
        if mode == "updating" and mm < 1:
            raise ConfigError("rebuild period mm must be >= 1")
        if not delta >= 0:
            raise ConfigError("delta must be >= 0")
        self.dictionary = dictionary
        self.mode = mode
        self.delta = float(delta)
        self.mm = int(mm)
        self.ccp = ccp or CCPConfig(m=dictionary.m)
        self.sigma = sigma
        self.count = 0
        self.buffer = np.array(dictionary.atoms)
        self.events = []
        self.errors = []
        self.n_outliers = 0

    @property
    def dict_version(self):
        return self.dictionary.version

    def is_outlier(self, z):
        atoms = self.dictionary.atoms
        zv = _sample_vector(z)
        return float(np.min(np.sum((atoms - zv[:, None]) ** 2, axis=0))) >= self.delta ** 2

    def observe_sample(self, z, index=None):
        """Feed one sample; returns the new dictionary on rebuild, else ``None``."""
        if self.mode == "static":
            return None
        zv = _sample_vector(z)
        if not self.is_outlier(zv):
            return None
        self.count += 1
        self.n_outliers += 1
        self.buffer = np.column_stack([self.buffer, zv])
        if self.count < self.mm:
            return None
        return self._rebuild(getattr(z, "id", index))

    def _rebuild(self, index):
        old = self.dictionary
        version = old.version + 1
        c = self.ccp
        cfg = CCPConfig(m=old.m, max_iter=c.max_iter, rel_tol=c.rel_tol, eps_guard=c.eps_guard,
                        seed=c.seed + version)
        before = energy_distance(old.atoms, self.buffer)
        try:
            sp = compute_support_points(self.buffer, cfg)
            new = DictionaryMatrix.auto(sp.points, old.lambda2, self.sigma, version=version)
        except (OenscError, RuntimeError, np.linalg.LinAlgError) as exc:
            # keep buffer and count; the next outlier retries
            log.error("dictionary rebuild at sample %s failed: %s", index, exc)
            self.errors.append(f"rebuild at {index}: {exc}")
            self.events.append(RebuildEvent(index, self.buffer.shape[1], before, float("nan"),
                                            old.version, error=str(exc)))
            return None
        new.support = sp
        self.events.append(RebuildEvent(index, self.buffer.shape[1], before,
                                        energy_distance(sp.points, self.buffer), version))
        self.dictionary = new
        self.buffer = np.array(new.atoms)
        self.count = 0
        return new
