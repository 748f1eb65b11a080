"""End-to-end stream driver, grid search and report/trace writers."""

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import data as dio
from .admm import solve_sample
from .dictionary import DictionaryManager, estimate_delta, init_dictionary
from .errors import ConfigError, OenscError, ParseError
from .metrics import evaluate
from .model import Sample
from .spectral import CoefficientMatrix, build_affinity, cluster
from .support_points import CCPConfig

log = logging.getLogger(__name__)

ALGORITHMS = ("oensc", "oensc_s")
DEFAULT_LAMBDA1_GRID = (1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1, 1.0)
DEFAULT_LAMBDA2_GRID = tuple(2.0 ** k for k in range(-7, 8))


@dataclass
class RunConfig:
    """Everything one stream run needs. Every field can be set from a
    ``key = value`` config file or from the command line."""

    data: str = None
    synthetic: str = None
    has_labels: bool = True
    algorithm: str = "oensc"
    m: int = None
    mm: int = 100
    delta: float = None
    delta_quantile: float = 0.95
    lambda1: float = 1e-3
    lambda2: float = 4.0
    sigma: float = None
    tol: float = 1e-3
    max_iter: int = 100
    init: str = "multiplier"
    warm_start: bool = False
    init_batch_size: int = None
    n_clusters: int = None
    normalize: bool = True
    seed: int = 0
    ccp_max_iter: int = 100
    ccp_rel_tol: float = 1e-6
    trace: bool = False
    label_every: int = 0
    eval_from: int = None
    out: str = None

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm == "oensc_s" and self.mm < 1:
            raise ConfigError("oensc_s requires mm >= 1")
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.init_batch_size is not None and self.m is not None and self.init_batch_size < self.m:
            raise ConfigError(f"init_batch_size ({self.init_batch_size}) must be >= m ({self.m})")
        if not 0 <= self.delta_quantile <= 1:
            raise ConfigError("delta_quantile must lie in [0, 1]")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be >= 0")
        return self

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


@dataclass
class RunReport:
    config: dict
    status: str = "ok"
    error: str = None
    n_samples: int = 0
    n_clusters: int = 0
    m: int = 0
    delta: float = None
    sigma: float = None
    metrics: dict = None
    segment_metrics: dict = None
    seconds: float = 0.0
    solve_seconds: float = 0.0
    median_sample_seconds: float = 0.0
    iterations: dict = field(default_factory=dict)
    dict_version: int = 0
    n_outliers: int = 0
    rebuilds: list = field(default_factory=list)
    realigned: int = 0
    snapshots: list = field(default_factory=list)
    labels: np.ndarray = field(default=None, repr=False)
    truth: np.ndarray = field(default=None, repr=False)
    traces: dict = field(default_factory=dict, repr=False)
    coefficients: np.ndarray = field(default=None, repr=False)
    dictionary: np.ndarray = field(default=None, repr=False)
    sample_seconds: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        skip = {"labels", "truth", "traces", "coefficients", "dictionary", "sample_seconds"}
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name not in skip}


# ---------------------------------------------------------------- config io

def _coerce(value, default_type, name):
    value = value.strip()
    if value.lower() in ("none", "null", ""):
        return None
    if default_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    try:
        return default_type(value)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {value!r} as {default_type.__name__}") from exc


_FIELD_TYPES = {
    "data": str, "synthetic": str, "has_labels": bool, "algorithm": str, "m": int, "mm": int,
    "delta": float, "delta_quantile": float, "lambda1": float, "lambda2": float, "sigma": float,
    "tol": float, "max_iter": int, "init": str, "warm_start": bool, "init_batch_size": int,
    "n_clusters": int, "normalize": bool, "seed": int, "ccp_max_iter": int, "ccp_rel_tol": float,
    "trace": bool, "label_every": int, "eval_from": int, "out": str,
}


def read_key_values(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", path) from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", path, lineno)
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def load_config(path=None, **overrides):
    """Build a :class:`RunConfig` from a file plus keyword overrides.

    Relative ``data``/``synthetic`` paths are resolved against the config
    file's directory. ``None`` overrides are ignored.
    """
    values = {}
    if path is not None:
        raw = read_key_values(path)
        base = os.path.dirname(os.path.abspath(path))
        for key, value in raw.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r} in {path}")
            values[key] = _coerce(value, _FIELD_TYPES[key], key)
        for key in ("data", "synthetic"):
            if values.get(key) and not os.path.isabs(values[key]):
                values[key] = os.path.join(base, values[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def load_synthetic_spec(path):
    """Read a synthetic data description.

    Keys: ``ambient_dim``, ``dims`` and ``points`` (comma lists), optional
    ``noise_sigma``, ``seed``, ``independent``, ``shuffle``. Adding
    ``new_dims``, ``new_points`` and ``points_after`` describes a stream
    that shifts after the first segment.
    """
    raw = read_key_values(path)
    try:
        p = int(raw["ambient_dim"])
        dims = _int_list(raw["dims"])
        points = _int_list(raw["points"])
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}", path) from exc
    except ValueError as exc:
        raise ParseError(str(exc), path) from exc
    if len(points) == 1:
        points = points * len(dims)
    if len(points) != len(dims):
        raise ParseError("dims and points must have the same length", path)
    noise = float(raw.get("noise_sigma", 0.0))
    seed = int(raw.get("seed", 0))
    if "new_dims" in raw:
        after = _int_list(raw.get("points_after", "0"))
        if len(after) == 1:
            after = after * len(dims)
        new_dims = _int_list(raw["new_dims"])
        new_pts = _int_list(raw.get("new_points", "0"))
        if len(new_pts) == 1:
            new_pts = new_pts * len(new_dims)
        ds, _ = dio.generate_shift_stream(p, dims, points, after, new_dims, new_pts, noise, seed)
        return ds
    spec = dio.SyntheticSpec(p, tuple(zip(dims, points)), noise, seed,
                             independent=_coerce(raw.get("independent", "true"), bool, "independent"),
                             shuffle=_coerce(raw.get("shuffle", "true"), bool, "shuffle"))
    return dio.generate_union_of_subspaces(spec)


def load_dataset(cfg):
    if cfg.data:
        has = cfg.has_labels and os.path.exists(dio.labels_path(cfg.data))
        return dio.load_matrix(cfg.data, has_labels=has)
    if cfg.synthetic:
        return load_synthetic_spec(cfg.synthetic)
    raise ConfigError("no dataset: set `data` or `synthetic`")


# ---------------------------------------------------------------- the run

def _iteration_stats(iters, conv, within=20):
    iters = np.asarray(iters)
    return {"mean": float(iters.mean()), "median": float(np.median(iters)), "max": int(iters.max()),
            "converged_fraction": float(np.mean(conv)), f"within_{within}": float(np.mean(iters <= within))}


def _label(coefs, D, Z, scfg, cfg, c, report):
    """Re-solve stale columns against ``D`` and cluster everything."""
    for i in coefs.stale(D.version):
        st, _ = solve_sample(Z[:, i], D, scfg, init=cfg.init)
        coefs.add(i, st.x, D.version)
        report.realigned += 1
    return cluster(build_affinity(coefs), c, seed=cfg.seed)


def run_stream(cfg, dataset=None):
    """Stream every sample through the solver and label the result.

    The first ``init_batch_size`` samples build the dictionary and are then
    coded against it. Under ``oensc_s`` each later sample is first offered to
    the dictionary manager, so a sample that triggers a rebuild is coded
    against the new dictionary. At the end columns coded against older
    dictionary versions are re-solved against the final one.

    Parameters
    ----------
    cfg : RunConfig
    dataset : DatasetMatrix, optional
        Use this instead of loading ``cfg.data`` / ``cfg.synthetic``.

    Returns
    -------
    RunReport
        Also written to ``cfg.out`` when set. On failure the partial report
        is written before the exception propagates.
    """
    cfg.validate()
    t0 = time.perf_counter()
    report = RunReport(config=dataclasses.asdict(cfg))
    try:
        _run(cfg, dataset, report)
    except Exception as exc:
        report.status = "failed"
        report.error = f"{type(exc).__name__}: {exc}"
        report.seconds = time.perf_counter() - t0
        if cfg.out:
            write_outputs(report, cfg.out)
        raise
    report.seconds = time.perf_counter() - t0
    if cfg.out:
        write_outputs(report, cfg.out)
    return report


def _run(cfg, dataset, report):
    ds = dataset if dataset is not None else load_dataset(cfg)
    Z = ds.Z
    if cfg.normalize:
        Z, _ = dio.normalize_columns(Z)
    p, n = Z.shape
    c = cfg.n_clusters or ds.n_classes
    if not c or c < 2:
        raise ConfigError("number of clusters unknown: set n_clusters or supply labels")
    m = cfg.m or 10 * c
    n0 = cfg.init_batch_size or min(n, 2 * m)
    if n0 < m:
        raise ConfigError(f"init_batch_size ({n0}) must be >= m ({m})")
    if n0 > n:
        raise ConfigError(f"init_batch_size ({n0}) exceeds the number of samples ({n})")
    report.n_samples, report.n_clusters, report.m = n, c, m
    report.truth = ds.truth

    ccp = CCPConfig(m=m, max_iter=cfg.ccp_max_iter, rel_tol=cfg.ccp_rel_tol, seed=cfg.seed)
    batch = Z[:, :n0]
    D = init_dictionary(batch, m, ccp, lambda2=cfg.lambda2, sigma=cfg.sigma)
    delta = cfg.delta if cfg.delta is not None else estimate_delta(batch, D, cfg.delta_quantile)
    mode = "updating" if cfg.algorithm == "oensc_s" else "static"
    manager = DictionaryManager(D, mode=mode, delta=delta, mm=cfg.mm, ccp=ccp, sigma=cfg.sigma)
    report.delta, report.sigma = delta, D.sigma

    def solver_cfg(D):
        return D.config(lambda1=cfg.lambda1, tol=cfg.tol, max_iter=cfg.max_iter)

    scfg = solver_cfg(D)
    coefs = CoefficientMatrix(m)
    iters, conv, times = [], [], []
    prev = None
    for i in range(n):
        z = Sample(Z[:, i], i)
        if i >= n0:
            new = manager.observe_sample(z)
            if new is not None:
                D, scfg, prev = new, solver_cfg(new), None
                log.info("dictionary rebuilt at sample %d (version %d)", i, D.version)
        warm = prev if cfg.warm_start else None
        ts = time.perf_counter()
        st, tr = solve_sample(z, D, scfg, warm=warm, record=cfg.trace, init=cfg.init)
        times.append(time.perf_counter() - ts)
        coefs.add(i, st.x, D.version)
        iters.append(st.iters)
        conv.append(st.converged)
        prev = st
        if cfg.trace:
            report.traces[i] = tr
        if cfg.label_every and (i + 1) % cfg.label_every == 0 and i + 1 < n and i + 1 >= c:
            snap = _label(coefs, D, Z, scfg, cfg, c, report)
            entry = {"index": i, "dict_version": D.version}
            if ds.truth is not None:
                entry.update(evaluate(snap, ds.truth[: i + 1]))
            report.snapshots.append(entry)

    report.sample_seconds = np.asarray(times)
    report.solve_seconds = float(np.sum(times))
    report.median_sample_seconds = float(np.median(times))
    report.iterations = _iteration_stats(iters, conv)
    report.dict_version = D.version
    report.n_outliers = manager.n_outliers
    report.rebuilds = [dataclasses.asdict(e) for e in manager.events]
    if manager.errors:
        report.error = "; ".join(manager.errors)

    labels = _label(coefs, D, Z, scfg, cfg, c, report)
    report.labels = labels
    report.coefficients = coefs.to_array()
    report.dictionary = np.array(D.atoms)
    if ds.truth is not None:
        report.metrics = evaluate(labels, ds.truth)
        if cfg.eval_from is not None:
            k = cfg.eval_from
            report.segment_metrics = {"from": k, **evaluate(labels[k:], ds.truth[k:])}
    return report


# ---------------------------------------------------------------- outputs

def write_labels(path, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "label"])
        for i, lab in enumerate(labels):
            w.writerow([i, int(lab)])


TRACE_COLUMNS = ("iter", "lagrangian", "r_prox", "r_grad", "r_feas")


def emit_convergence_trace(trace, path, sample=None):
    """Write one solve's trace as CSV. Returns the path, or ``None`` if empty."""
    if trace is None or len(trace) == 0:
        return None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow((["sample"] if sample is not None else []) + list(TRACE_COLUMNS))
        for rec in trace.records():
            w.writerow(([sample] if sample is not None else []) + [repr(float(v)) if j else v
                                                                  for j, v in enumerate(rec)])
    return path


def read_convergence_trace(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]} if rows else {}


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def write_outputs(report, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, default=_json_default)
    if report.labels is not None:
        write_labels(os.path.join(out, "labels.csv"), report.labels)
    if report.dictionary is not None:
        dio.save_matrix(os.path.join(out, "dictionary.csv"), report.dictionary)
    if report.traces:
        with open(os.path.join(out, "trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample", *TRACE_COLUMNS])
            for i, tr in sorted(report.traces.items()):
                for rec in tr.records():
                    w.writerow([i, rec[0], *(repr(float(v)) for v in rec[1:])])


# ---------------------------------------------------------------- grid search

GRID_COLUMNS = ("lambda1", "lambda2", "acc", "nmi", "purity", "seconds", "status")


def _grid_cell(cfg, l1, l2, dataset):
    run_cfg = cfg.replace(lambda1=l1, lambda2=l2, out=None, trace=False)
    t = time.perf_counter()
    try:
        rep = run_stream(run_cfg, dataset)
    except OenscError as exc:
        return {"lambda1": l1, "lambda2": l2, "acc": float("nan"), "nmi": float("nan"),
                "purity": float("nan"), "seconds": time.perf_counter() - t, "status": f"failed: {exc}"}
    met = rep.metrics or {}
    return {"lambda1": l1, "lambda2": l2, "acc": met.get("acc", float("nan")),
            "nmi": met.get("nmi", float("nan")), "purity": met.get("purity", float("nan")),
            "seconds": rep.seconds, "status": "ok"}


def _score(row):
    return -np.inf if np.isnan(row["acc"]) else row["acc"]


def grid_search(cfg, lambda1_grid=DEFAULT_LAMBDA1_GRID, lambda2_grid=DEFAULT_LAMBDA2_GRID,
                coordinate=False, dataset=None):
    """Evaluate ``(lambda1, lambda2)`` pairs and rank them by accuracy.

    With ``coordinate`` the grid is swept one parameter at a time: lambda1
    with lambda2 held at its base value (``cfg.lambda2`` if on the grid,
    else the grid's middle value), then lambda2 at the best lambda1. That
    costs at most ``len(l1) + len(l2) - 1`` runs.

    Returns
    -------
    best : RunConfig
    table : list of dict
        One row per run, sorted by decreasing accuracy. A failed cell is
        kept with ``status`` set instead of aborting the search.
    """
    l1s, l2s = list(lambda1_grid), list(lambda2_grid)
    if not l1s or not l2s:
        raise ConfigError("grids must be nonempty")
    if dataset is None:
        dataset = load_dataset(cfg)
    rows = {}
    if coordinate:
        base2 = cfg.lambda2 if cfg.lambda2 in l2s else l2s[len(l2s) // 2]
        for l1 in l1s:
            rows[(l1, base2)] = _grid_cell(cfg, l1, base2, dataset)
        best1 = max((rows[(l1, base2)] for l1 in l1s), key=_score)["lambda1"]
        for l2 in l2s:
            if (best1, l2) not in rows:
                rows[(best1, l2)] = _grid_cell(cfg, best1, l2, dataset)
    else:
        for l1 in l1s:
            for l2 in l2s:
                rows[(l1, l2)] = _grid_cell(cfg, l1, l2, dataset)
    table = sorted(rows.values(), key=_score, reverse=True)
    best = table[0]
    return cfg.replace(lambda1=best["lambda1"], lambda2=best["lambda2"]), table


def write_grid_table(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=GRID_COLUMNS)
        w.writeheader()
        for row in table:
            w.writerow(row)


# ---------------------------------------------------------------- repeats

def repeat_runs(cfg, n_repeats, dataset=None):
    """Run seeds ``cfg.seed .. cfg.seed + n_repeats - 1``.

    Returns per-seed metric rows and a ``{metric: (mean, std)}`` summary.
    """
    if dataset is None:
        dataset = load_dataset(cfg)
    rows = []
    for k in range(n_repeats):
        seed = cfg.seed + k
        rep = run_stream(cfg.replace(seed=seed, out=None, trace=False), dataset)
        row = {"seed": seed, **(rep.metrics or {}), "seconds": rep.seconds, "dict_version": rep.dict_version}
        rows.append(row)
    summary = {}
    for key in ("acc", "nmi", "purity", "seconds"):
        vals = np.array([r[key] for r in rows if key in r], dtype=float)
        if vals.size:
            summary[key] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
    return rows, summary


def write_repeat_table(path, rows, summary):
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([r[k] for k in keys])
        for label, pos in (("mean", 0), ("std", 1)):
            w.writerow([label] + [summary[k][pos] if k in summary else "" for k in keys[1:]])
