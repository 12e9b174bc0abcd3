"""Synthetic benchmark functions, error metrics and convergence studies."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Dataset
from .errors import ConfigError, InputError, FTError
from .models import HyperParams, fit_model
from .optimize import OptimOptions
from .parallel import parallel_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchFunction:
    name: str
    bounds: Tuple[Tuple[float, float], ...]
    evaluator: Callable[[np.ndarray], np.ndarray]

    @property
    def d(self) -> int:
        return len(self.bounds)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(x)


def _columns(x, bounds, name, strict=True):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != len(bounds):
        raise InputError(f"{name} takes {len(bounds)} inputs, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InputError(f"non-finite input to {name}")
    if strict:
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        if np.any(X < lo) or np.any(X > hi):
            raise InputError(f"input outside the {name} domain")
    return single, X.T


OTL_BOUNDS = ((50.0, 150.0), (25.0, 70.0), (0.5, 3.0), (1.2, 2.5), (0.25, 1.2), (50.0, 300.0))


def otl_circuit(x):
    """Output voltage of an OTL push-pull circuit (6 inputs).

    Inputs: ``Rb1, Rb2, Rf, Rc1, Rc2, beta``.
    """
    single, (rb1, rb2, rf, rc1, rc2, beta) = _columns(x, OTL_BOUNDS, "otl_circuit")
    vb1 = 12.0 * rb2 / (rb1 + rb2)
    bc = beta * (rc2 + 9.0)
    den = bc + rf
    out = (vb1 + 0.74) * bc / den + 11.35 * rf / den + 0.74 * rf * bc / (den * rc1)
    return out[0] if single else out


WING_BOUNDS = (
    (150.0, 200.0), (220.0, 300.0), (6.0, 10.0), (-10.0, 10.0), (16.0, 45.0),
    (0.5, 1.0), (0.08, 0.18), (2.5, 6.0), (1700.0, 2500.0), (0.025, 0.08),
)


def wing_weight(x):
    """Light aircraft wing weight (10 inputs); sweep angle in degrees.

    Inputs: ``Sw, Wfw, A, Lambda, q, lambda, tc, Nz, Wdg, Wp``.
    """
    single, (sw, wfw, a, lam_deg, q, taper, tc, nz, wdg, wp) = _columns(x, WING_BOUNDS, "wing_weight")
    c = np.cos(np.deg2rad(lam_deg))
    out = (
        0.036 * sw**0.758 * wfw**0.0035 * (a / c**2) ** 0.6 * q**0.006 * taper**0.04
        * (100.0 * tc / c) ** -0.3 * (nz * wdg) ** 0.49
        + sw * wp
    )
    return out[0] if single else out


SINE_BOUNDS = ((-1.0, 1.0),) * 6


def sine_of_sums(x):
    """``sin(x_1 + ... + x_6)``; an exact rank-2 function."""
    single, cols = _columns(x, SINE_BOUNDS, "sine_of_sums", strict=False)
    out = np.sin(np.sum(cols, axis=0))
    return out[0] if single else out


FUNCTIONS: Dict[str, BenchFunction] = {
    "otl": BenchFunction("otl", OTL_BOUNDS, otl_circuit),
    "wing": BenchFunction("wing", WING_BOUNDS, wing_weight),
    "sinsum": BenchFunction("sinsum", SINE_BOUNDS, sine_of_sums),
}


def get_function(name: str) -> BenchFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise ConfigError(f"unknown benchmark {name!r}; choose from {sorted(FUNCTIONS)}") from None


def sample_uniform(bounds, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. uniform points in the box ``bounds``."""
    if n < 1:
        raise ConfigError("need at least one sample")
    lo = np.array([float(a) for a, _ in bounds])
    hi = np.array([float(b) for _, b in bounds])
    if not np.all(hi > lo) or not np.all(np.isfinite(lo) & np.isfinite(hi)):
        raise ConfigError(f"degenerate bounds {bounds}")
    rng = np.random.default_rng(seed)
    return lo + (hi - lo) * rng.random((n, lo.size))


def make_dataset(fn: BenchFunction, n: int, seed) -> Dataset:
    X = sample_uniform(fn.bounds, n, seed)
    return Dataset(X, fn(X), domains=fn.bounds)


def relative_squared_error(model, truth, n_val: int = 10000, seed=0, bounds=None) -> float:
    """``sum (model - truth)^2 / sum (truth - mean(truth))^2`` over validation points.

    ``truth`` is a :class:`BenchFunction` (points are drawn uniformly from its
    bounds, or from ``bounds``) or a held-out pair ``(X, y)``.
    """
    if isinstance(truth, tuple):
        X, y = np.asarray(truth[0], dtype=float), np.asarray(truth[1], dtype=float)
    else:
        X = sample_uniform(bounds or truth.bounds, n_val, seed)
        y = truth(X)
    pred = model.predict(X) if hasattr(model, "predict") else np.asarray(model(X), dtype=float)
    centered = y - y.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise FTError("validation truth has zero variance; relative error undefined")
    diff = pred - y
    return float(diff @ diff) / denom


@dataclass
class StudySpec:
    function: str
    sample_sizes: Sequence[int]
    realizations: int = 100
    optimizers: Sequence[str] = ("aao", "als")
    rank: int = 2
    p: int = 5
    basis: str = "legendre"
    lam: float = 0.0
    width: float = 1.0
    width_rule: str = "domain"
    centers: str = "uniform"
    adaptive: bool = False
    delta: float = 1e-4
    folds: int = 5
    n_val: int = 10000
    seed: int = 0
    opts: OptimOptions = field(default_factory=OptimOptions)

    def __post_init__(self):
        if self.realizations < 1 or self.n_val < 1 or not self.sample_sizes:
            raise ConfigError("study needs realizations >= 1, n_val >= 1 and sample sizes")


STUDY_HEADER = ("function", "optimizer", "rank", "p", "n", "realization", "rel_sq_error", "seconds")


def _cell_seed(seed: int, *index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *index])


def _run_cell(spec: StudySpec, ni: int, rep: int, truth) -> List[dict]:
    """All optimizers for one (sample size, realization) pair."""
    from .modelsel import rank_adapt

    fn = get_function(spec.function)
    n = int(spec.sample_sizes[ni])
    data = make_dataset(fn, n, _cell_seed(spec.seed, 1, ni, rep))
    init_seed = int(_cell_seed(spec.seed, 2, ni, rep).generate_state(1)[0])
    rows = []
    for opt in spec.optimizers:
        hyper = HyperParams(
            rank=spec.rank, p=spec.p, basis=spec.basis, lam=spec.lam, width=spec.width,
            optimizer=opt, width_rule=spec.width_rule, centers=spec.centers,
        )
        start = time.perf_counter()
        rank_label = str(spec.rank)
        try:
            if spec.adaptive:
                model, _ = rank_adapt(data, spec.delta, hyper, spec.opts, folds=spec.folds, seed=init_seed)
                rank_label = "-".join(map(str, model.ranks))
            else:
                model, _ = fit_model(hyper, data, spec.opts, seed=init_seed)
            err = relative_squared_error(model, truth)
        except (FTError, np.linalg.LinAlgError, FloatingPointError) as exc:
            logger.warning("cell n=%s rep=%s %s failed: %s", n, rep, opt, exc)
            err = float("nan")
        rows.append({
            "function": spec.function, "optimizer": opt, "rank": rank_label, "p": spec.p,
            "n": n, "realization": rep, "rel_sq_error": err,
            "seconds": time.perf_counter() - start,
        })
    return rows


def _run_cell_args(args):
    return _run_cell(*args)


def run_study(spec: StudySpec, log: Optional[Callable[[str], None]] = None,
              workers: int = 1) -> List[dict]:
    """Fit every (n, realization, optimizer) cell and record validation errors.

    Each (n, realization) pair draws its own training set and initial point
    from seeds derived from ``spec.seed`` and the cell index, so results do
    not depend on ``workers`` or on execution order.  All optimizers in a
    cell see the same data.  Failures are recorded as NaN errors.
    """
    fn = get_function(spec.function)
    val = sample_uniform(fn.bounds, spec.n_val, _cell_seed(spec.seed, 0))
    truth = (val, fn(val))
    cells = [(spec, ni, rep, truth) for ni in range(len(spec.sample_sizes))
             for rep in range(spec.realizations)]
    rows: List[dict] = []
    for cell_rows in parallel_map(_run_cell_args, cells, workers):
        rows.extend(cell_rows)
        if log:
            for row in cell_rows:
                log(f"{row['function']} {row['optimizer']} n={row['n']} rep={row['realization']} "
                    f"err={row['rel_sq_error']:.3e} ({row['seconds']:.1f}s)")
    return rows


def summarize(rows: Sequence[dict]) -> List[dict]:
    """25th/50th/75th percentiles of the error per (function, optimizer, rank, p, n)."""
    groups: Dict[tuple, List[float]] = {}
    for row in rows:
        key = (row["function"], row["optimizer"], str(row["rank"]), row["p"], row["n"])
        groups.setdefault(key, []).append(row["rel_sq_error"])
    out = []
    for key, errs in groups.items():
        errs = np.asarray(errs, dtype=float)
        ok = errs[np.isfinite(errs)]
        q25, q50, q75 = np.percentile(ok, [25, 50, 75]) if ok.size else (np.nan,) * 3
        out.append(dict(zip(("function", "optimizer", "rank", "p", "n"), key),
                        count=int(ok.size), q25=q25, q50=q50, q75=q75))
    return out


def rows_to_csv(rows: Sequence[dict], header: Sequence[str] = STUDY_HEADER) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items() if k in header})
    return buf.getvalue()


SUMMARY_HEADER = ("function", "optimizer", "rank", "p", "n", "count", "q25", "q50", "q75")
