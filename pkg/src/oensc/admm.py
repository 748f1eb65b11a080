"""Per-sample online ADMM for the split l0 elastic net problem.

Each sample runs the loop::

    y <- H_t(x + u / sigma),            t = sqrt(2 lambda1 / sigma)
    x <- M^{-1} (D^T z - u + sigma y),  M = D^T D + (lambda2 + sigma) I
    u <- u + sigma (x - y)

``M`` only depends on the dictionary, so it is Cholesky-factorized once per
dictionary version and reused for every sample.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, DivergenceError, FactorizationError, StaleFactorizationError
from .model import PerSampleState, SolverConfig, _sample_vector, as_atoms, hard_threshold, pstationarity_residuals


@dataclass(frozen=True, eq=False)
class GramFactorization:
    """Cholesky factor of ``D^T D + (lambda2 + sigma) I`` plus spectral bounds.

    ``gamma`` is the smallest eigenvalue of ``D^T D`` and ``r`` the smoothness
    constant ``||D^T D||_2 + lambda2``; both come from one small eigen-solve.
    """

    lower: np.ndarray
    gram: np.ndarray
    lambda2: float
    sigma: float
    stamp: int
    gamma: float
    r: float

    @property
    def dims(self):
        return self.lower.shape[0]

    def matrix(self):
        """Rebuild ``M`` from the factor."""
        return self.lower @ self.lower.T

    def solve(self, b):
        return linalg.cho_solve((self.lower, True), b, check_finite=False)

    def kappa(self):
        """Decrease constant ``((2 + sigma)(gamma + lambda2) + sigma^2) / (2 sigma)``."""
        s = self.sigma
        return ((2.0 + s) * (self.gamma + self.lambda2) + s * s) / (2.0 * s)


def factorize(D, lambda2, sigma, stamp=0):
    """Factorize ``D^T D + (lambda2 + sigma) I``.

    Raises
    ------
    FactorizationError
        If the shifted Gram matrix is not numerically positive definite.
        The smallest eigenvalue is reported as the pivot; a larger ``sigma``
        usually fixes it.
    """
    atoms = as_atoms(D)
    if not lambda2 >= 0:
        raise ConfigError(f"lambda2 must be >= 0, got {lambda2}")
    gram = atoms.T @ atoms
    m = gram.shape[0]
    evals = np.linalg.eigvalsh(gram) if m else np.zeros(0)
    gamma = max(float(evals[0]), 0.0) if m else 0.0
    top = float(evals[-1]) if m else 0.0
    M = gram + (lambda2 + sigma) * np.eye(m)
    pivot = float(evals[0]) + lambda2 + sigma if m else 0.0
    scale = max(1.0, top + lambda2 + sigma)
    if not sigma >= 0 or pivot <= 1e-12 * scale:
        raise FactorizationError("D^T D + (lambda2 + sigma) I is not positive definite", pivot)
    try:
        lower = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"Cholesky failed: {exc}", pivot) from exc
    return GramFactorization(lower=lower, gram=gram, lambda2=float(lambda2), sigma=float(sigma),
                             stamp=stamp, gamma=gamma, r=top + float(lambda2))


class DictionaryMatrix:
    """Immutable dictionary snapshot: atoms, version and cached factorization.

    A rebuilt dictionary is a new object with a larger ``version``; solves in
    flight against an older snapshot are unaffected.
    """

    support = None

    def __init__(self, atoms, lambda2, sigma, version=0):
        atoms = np.array(as_atoms(atoms), dtype=float)
        if not np.all(np.isfinite(atoms)):
            raise ConfigError("dictionary atoms must be finite")
        atoms.setflags(write=False)
        self.atoms = atoms
        self.version = int(version)
        self.factorization = factorize(atoms, lambda2, sigma, stamp=self.version)

    @classmethod
    def auto(cls, atoms, lambda2, sigma=None, version=0):
        """Build with ``sigma = default_sigma(atoms, lambda2)`` unless given."""
        if sigma is None:
            sigma = default_sigma(atoms, lambda2)
        return cls(atoms, lambda2, sigma, version)

    @property
    def shape(self):
        return self.atoms.shape

    @property
    def m(self):
        return self.atoms.shape[1]

    @property
    def lambda2(self):
        return self.factorization.lambda2

    @property
    def sigma(self):
        return self.factorization.sigma

    @property
    def smoothness_r(self):
        return self.factorization.r

    def config(self, **kw):
        """A :class:`SolverConfig` consistent with this snapshot."""
        return SolverConfig(lambda2=self.lambda2, sigma=self.sigma, **kw)

    def __repr__(self):
        p, m = self.shape
        return f"DictionaryMatrix(p={p}, m={m}, version={self.version}, sigma={self.sigma:.4g})"


def default_sigma(D, lambda2, n_iter=30, rtol=1e-6, seed=0):
    """Return ``2 r`` with ``r = ||D^T D||_2 + lambda2`` from power iteration.

    Falls back to 1.0 when ``r`` is zero (empty dictionary, no ridge).
    """
    atoms = as_atoms(D)
    m = atoms.shape[1]
    lam = 0.0
    if m and np.any(atoms):
        v = np.random.default_rng(seed).standard_normal(m)
        v /= np.linalg.norm(v)
        for _ in range(n_iter):
            w = atoms.T @ (atoms @ v)
            new = float(v @ w)
            nw = np.linalg.norm(w)
            if nw == 0:
                break
            v = w / nw
            done = abs(new - lam) <= rtol * max(abs(new), 1e-300)
            lam = new
            if done:
                break
        lam = float(v @ (atoms.T @ (atoms @ v)))
    r = lam + lambda2
    return 2.0 * r if r > 0 else 1.0


def y_update(x, u, cfg):
    return hard_threshold(np.asarray(x) + np.asarray(u) / cfg.sigma, cfg.threshold)


def x_update(fact, D, z, y, u, cfg):
    """Closed-form minimizer of the x-subproblem."""
    _check_current(fact, D, cfg)
    atoms = as_atoms(D)
    rhs = atoms.T @ _sample_vector(z) - u + cfg.sigma * y
    return fact.solve(rhs)


def u_update(u, x, y, sigma):
    return u + sigma * (x - y)


def _check_current(fact, D, cfg):
    version = getattr(D, "version", fact.stamp)
    if fact.stamp != version:
        raise StaleFactorizationError(f"factorization stamp {fact.stamp} != dictionary version {version}")
    if fact.lambda2 != cfg.lambda2 or fact.sigma != cfg.sigma:
        raise StaleFactorizationError(
            f"factorization built for lambda2={fact.lambda2}, sigma={fact.sigma}; "
            f"config has lambda2={cfg.lambda2}, sigma={cfg.sigma}")


@dataclass
class IterationTrace:
    """Per-iteration records of one :func:`solve_sample` run.

    ``lagrangian[k]`` is the augmented Lagrangian after iteration ``k + 1``;
    ``initial_lagrangian`` is its value at the starting point.
    """

    initial_lagrangian: float = float("nan")
    kappa: float = float("nan")
    lagrangian: list = field(default_factory=list)
    dx: list = field(default_factory=list)
    feas: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    r_prox: list = field(default_factory=list)
    r_grad: list = field(default_factory=list)
    r_feas: list = field(default_factory=list)

    def __len__(self):
        return len(self.lagrangian)

    def decrease_margins(self):
        """``L^{k+1} - L^k + kappa ||x^{k+1} - x^k||^2`` per iteration.

        Non-positive entries satisfy the sufficient decrease inequality.
        """
        L = np.concatenate([[self.initial_lagrangian], self.lagrangian])
        dx = np.asarray(self.dx)
        return np.diff(L) + self.kappa * dx ** 2

    def records(self):
        for k in range(len(self)):
            yield (k + 1, self.lagrangian[k], self.r_prox[k], self.r_grad[k], self.r_feas[k])


def _lagrangian(z, atoms, y, x, u, cfg):
    r = z - atoms @ x
    g = x - y
    return (0.5 * float(r @ r) + cfg.lambda1 * np.count_nonzero(y) + 0.5 * cfg.lambda2 * float(x @ x)
            + float(u @ g) + 0.5 * cfg.sigma * float(g @ g))


def solve_sample(z, D, cfg=None, warm=None, record=False, init="multiplier"):
    """Run the ADMM loop for one sample against dictionary snapshot ``D``.

    Parameters
    ----------
    z : Sample or array of shape (p,)
    D : DictionaryMatrix
    cfg : SolverConfig, optional
        Must carry the same ``lambda2`` and ``sigma`` as ``D``. Defaults to
        ``D.config()``.
    warm : PerSampleState, optional
        Starting point; overrides ``init``.
    init : {"multiplier", "zeros"}
        Cold start. Both set ``x = y = 0``. ``"multiplier"`` starts from
        ``u = -grad h(0) = D^T z`` so that ``u = -grad h(x)`` holds at every
        iterate, including the first, which is what makes the augmented
        Lagrangian decrease from the very first step. ``"zeros"`` uses
        ``u = 0``.
    record : bool
        Record the Lagrangian and residual triple at every iteration.

    Returns
    -------
    state : PerSampleState
    trace : IterationTrace
        Empty unless ``record`` is set.
    """
    if cfg is None:
        cfg = D.config()
    fact = D.factorization
    _check_current(fact, D, cfg)
    atoms = D.atoms
    p, m = atoms.shape
    zv = _sample_vector(z)
    if zv.shape != (p,):
        raise DimensionError("z", (p,), zv.shape)
    if not np.all(np.isfinite(zv)):
        raise DivergenceError("sample has non-finite entries")
    dtz = atoms.T @ zv
    if warm is None:
        if init not in ("multiplier", "zeros"):
            raise ConfigError(f"unknown init {init!r}")
        y, x = np.zeros(m), np.zeros(m)
        u = dtz.copy() if init == "multiplier" else np.zeros(m)
    else:
        y, x, u = (np.array(a, dtype=float) for a in (warm.y, warm.x, warm.u))
        for name, a in (("y", y), ("x", x), ("u", u)):
            if a.shape != (m,):
                raise DimensionError(f"warm.{name}", (m,), a.shape)

    trace = IterationTrace()
    if record:
        trace.kappa = fact.kappa()
        trace.initial_lagrangian = _lagrangian(zv, atoms, y, x, u, cfg)

    sigma = cfg.sigma
    t = cfg.threshold
    converged = False
    k = 0
    for k in range(1, cfg.max_iter + 1):
        v = x + u / sigma
        y = np.where(np.abs(v) > t, v, 0.0)
        x_new = fact.solve(dtz - u + sigma * y)
        u = u + sigma * (x_new - y)
        nx_old = math.sqrt(float(x @ x))
        dx = math.sqrt(float((x_new - x) @ (x_new - x)))
        x = x_new
        feas = math.sqrt(float((x - y) @ (x - y)))
        if not (math.isfinite(dx) and math.isfinite(feas)):
            raise DivergenceError(f"non-finite iterate at iteration {k}", trace)
        rel = max(feas / (1.0 + math.sqrt(float(y @ y))), dx / (1.0 + nx_old))
        if record:
            trace.lagrangian.append(_lagrangian(zv, atoms, y, x, u, cfg))
            trace.dx.append(dx)
            trace.feas.append(feas)
            trace.rel_change.append(rel)
            w = PerSampleState(y, x, u)
            rp, rg, rf = pstationarity_residuals(w, zv, atoms, cfg)
            trace.r_prox.append(rp)
            trace.r_grad.append(rg)
            trace.r_feas.append(rf)
        if rel <= cfg.tol:
            converged = True
            break
    return PerSampleState(y, x, u, iters=k, converged=converged), trace


def self_expressive_coefficients(Z, lambda1, lambda2, tol=1e-6, max_iter=1000, sigma=None):
    """Batch coefficients with the data as its own dictionary.

    Column ``i`` of the result codes ``z_i`` against every other sample
    (``C[i, i] = 0``). Each solve builds its own factorization, so this is
    meant for small ``n``.

    Returns
    -------
    C : ndarray of shape (n, n)
        The sparse iterate ``y`` of every solve.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[1]
    C = np.zeros((n, n))
    for i in range(n):
        keep = np.r_[0:i, i + 1:n]
        D = DictionaryMatrix.auto(Z[:, keep], lambda2, sigma)
        st, _ = solve_sample(Z[:, i], D, D.config(lambda1=lambda1, tol=tol, max_iter=max_iter))
        C[keep, i] = st.y
    return C
