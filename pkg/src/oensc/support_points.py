"""Support points: ``m`` representatives minimizing the energy distance to a
data set, computed with the convex-concave procedure (CCP).

Each CCP step majorizes the distance-to-data terms by quadratics and
linearizes the (concave) repulsion terms. The resulting surrogate is
separable over points, so every point has a closed-form update that only
reads the previous iterate. All points are updated together (Jacobi sweep).

Matrices are column-major: data ``Z`` is ``p x n``, points are ``p x m``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DimensionError, DomainError

log = logging.getLogger(__name__)

#: energy increase tolerated between sweeps before the run is declared broken
DESCENT_SLACK = 1e-9


@dataclass(frozen=True)
class CCPConfig:
    m: int
    max_iter: int = 100
    rel_tol: float = 1e-6
    eps_guard: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"number of support points must be >= 1, got {self.m}")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be >= 0")
        if not self.eps_guard > 0:
            raise ConfigError("eps_guard must be > 0")


@dataclass
class SupportPointSet:
    points: np.ndarray
    energy: float
    iters: int
    degenerate: bool = False
    energy_history: list = field(default_factory=list)

    @property
    def m(self):
        return self.points.shape[1]


class CCPDescentError(RuntimeError):
    """Energy increased between two CCP sweeps by more than the allowed slack."""


def _as_cols(name, A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(name, "2-d matrix (p x k)", A.shape)
    return A


def energy_distance(points, Z):
    """Energy distance between the point set and the data.

    ``(2 / (m n)) sum_{i,l} ||z_l - d_i|| - (1 / m^2) sum_{i,j} ||d_i - d_j||``
    """
    P = _as_cols("points", points)
    Z = _as_cols("Z", Z)
    if P.shape[0] != Z.shape[0]:
        raise DimensionError("points", f"{Z.shape[0]} rows", P.shape)
    m, n = P.shape[1], Z.shape[1]
    cross = cdist(P.T, Z.T).sum()
    within = cdist(P.T, P.T).sum()
    return 2.0 * cross / (m * n) - within / (m * m)


def _update_all(P, Z, eps_guard, drop=True):
    """One Jacobi sweep; returns new points and a per-point degeneracy mask.

    A datum sitting on a point has no tight quadratic majorizer there. With
    ``drop`` it is left out of that point's weighted average, which lets the
    point move but is not a majorization step. Otherwise its distance is
    clamped at ``eps_guard``: a valid majorizer (slack ``eps_guard / 2``)
    that pins the point to the datum.
    """
    m, n = P.shape[1], Z.shape[1]
    dz = cdist(P.T, Z.T)                              # m x n
    degenerate = np.all(dz < eps_guard, axis=1)
    if drop:
        with np.errstate(divide="ignore"):
            inv_z = np.where(dz < eps_guard, 0.0, 1.0 / dz)
    else:
        inv_z = 1.0 / np.maximum(dz, eps_guard)
    q = inv_z.sum(axis=1)                             # m
    attract = Z @ inv_z.T                             # p x m
    if m > 1:
        dd = cdist(P.T, P.T)
        inv_d = 1.0 / np.maximum(dd, eps_guard)
        np.fill_diagonal(inv_d, 0.0)
        # sum_j (d_i - d_j) / ||d_i - d_j||
        repel = P * inv_d.sum(axis=1) - P @ inv_d.T
    else:
        repel = np.zeros_like(P)
    new = P.copy()
    ok = ~degenerate
    new[:, ok] = ((n / m) * repel[:, ok] + attract[:, ok]) / q[ok]
    return new, degenerate


def ccp_update_point(i, current, Z, eps_guard=1e-12):
    """Closed-form CCP update of point ``i`` given the current point set.

    Data closer than ``eps_guard`` to the point are left out of the weighted
    average; sibling distances are clamped below by ``eps_guard``.

    Returns
    -------
    point : ndarray of shape (p,)
    degenerate : bool
        True when every datum coincides with the point; it is then returned
        unchanged.
    """
    P = _as_cols("current", current)
    Z = _as_cols("Z", Z)
    if P.shape[0] != Z.shape[0]:
        raise DimensionError("current", f"{Z.shape[0]} rows", P.shape)
    m, n = P.shape[1], Z.shape[1]
    d = P[:, i]
    dz = np.linalg.norm(Z - d[:, None], axis=0)
    far = dz >= eps_guard
    if not far.any():
        return d.copy(), True
    wz = np.zeros(n)
    wz[far] = 1.0 / dz[far]
    q = wz.sum()
    others = np.delete(P, i, axis=1)
    repel = np.zeros_like(d)
    if others.size:
        diff = d[:, None] - others
        dd = np.maximum(np.linalg.norm(diff, axis=0), eps_guard)
        repel = (diff / dd).sum(axis=1)
    return ((n / m) * repel + Z @ wz) / q, False


def _initial_points(Z, m, rng):
    distinct = np.unique(Z, axis=1)
    if distinct.shape[1] < m:
        raise ConfigError(
            f"cannot draw {m} distinct initial points from {distinct.shape[1]} distinct columns")
    # keep the first occurrence order stable so the draw depends only on Z and the seed
    _, first = np.unique(Z, axis=1, return_index=True)
    cols = np.sort(first)
    pick = rng.choice(cols.size, size=m, replace=False)
    return Z[:, cols[pick]].copy()


def compute_support_points(Z, cfg, init=None, strict=True):
    """Support points of the columns of ``Z`` by CCP.

    Parameters
    ----------
    Z : ndarray of shape (p, n)
    cfg : CCPConfig
    init : ndarray of shape (p, m), optional
        Starting points. By default ``m`` distinct columns of ``Z`` are drawn
        without replacement using ``cfg.seed``.
    strict : bool
        Raise :class:`CCPDescentError` if the energy goes up by more than
        ``DESCENT_SLACK`` between sweeps.

    A collapsed buffer (all columns equal) with ``m = 1`` returns that column
    with ``degenerate`` set.
    """
    Z = _as_cols("Z", Z)
    if not np.all(np.isfinite(Z)):
        raise DomainError("data for support points must be finite")
    p, n = Z.shape
    m = cfg.m
    if n < m:
        raise ConfigError(f"need at least m={m} columns, got n={n}")
    if init is None:
        P = _initial_points(Z, m, np.random.default_rng(cfg.seed))
    else:
        P = _as_cols("init", init).copy()
        if P.shape != (p, m):
            raise DimensionError("init", (p, m), P.shape)

    energy = energy_distance(P, Z)
    history = [energy]
    degenerate = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        new, mask = _update_all(P, Z, cfg.eps_guard)
        degenerate |= bool(mask.any())
        new_energy = energy_distance(new, Z)
        if new_energy > energy:
            new, new_energy = _safeguarded_step(P, new, Z, energy, cfg.eps_guard)
        if new_energy > energy + DESCENT_SLACK * max(1.0, abs(energy)):
            msg = f"CCP energy increased from {energy:.12g} to {new_energy:.12g} at sweep {it}"
            if strict:
                raise CCPDescentError(msg)
            log.warning(msg)
        P = new
        history.append(new_energy)
        change = abs(energy - new_energy) / max(abs(energy), 1e-300)
        energy = new_energy
        if mask.all() or change < cfg.rel_tol:
            break
    _log_containment(P, Z)
    return SupportPointSet(points=P, energy=energy, iters=it, degenerate=degenerate, energy_history=history)


def _safeguarded_step(P, proposal, Z, energy, eps_guard, halvings=10):
    """Recover descent after a sweep that dropped coincident data.

    Backtracks along the proposed move first. If no fraction of it helps,
    takes the clamped majorization sweep (which cannot raise the energy by
    more than the guard slack and leaves points on data where they are),
    then tries the proposed move one pinned point at a time, keeping each
    move only if it lowers the energy.
    """
    t = 0.5
    for _ in range(halvings):
        cand = P + t * (proposal - P)
        e = energy_distance(cand, Z)
        if e <= energy:
            return cand, e
        t *= 0.5
    new, _ = _update_all(P, Z, eps_guard, drop=False)
    best = energy_distance(new, Z)
    pinned = np.flatnonzero(cdist(P.T, Z.T).min(axis=1) < eps_guard)
    for i in pinned:
        cand = new.copy()
        cand[:, i] = proposal[:, i]
        e = energy_distance(cand, Z)
        if e < best:
            new, best = cand, e
    return new, best


def _log_containment(P, Z, pad=1e-6):
    lo = Z.min(axis=1, keepdims=True) - pad
    hi = Z.max(axis=1, keepdims=True) + pad
    outside = int(np.sum(np.any((P < lo) | (P > hi), axis=0)))
    if outside:
        log.debug("%d support points outside the data bounding box", outside)
    return outside


def recommended_count(subspace_dims):
    """Lower bound ``sum(d_i + 1)`` on the number of points for independent subspaces."""
    dims = list(subspace_dims)
    if any(d < 1 for d in dims):
        raise ConfigError("subspace dimensions must be >= 1")
    return sum(d + 1 for d in dims)


def default_count(n_classes):
    """Experimental default of ten support points per class."""
    return 10 * int(n_classes)


def majorizer_value(d, d_anchor, eps_guard=1e-12):
    """Quadratic majorizer ``||d||^2 / (2 ||d'||) + ||d'|| / 2`` of ``||d||`` at ``d'``."""
    d = np.asarray(d, dtype=float)
    na = float(np.linalg.norm(d_anchor))
    if na <= eps_guard:
        raise DomainError("majorizer anchor must be nonzero")
    return float(d @ d) / (2.0 * na) + na / 2.0
