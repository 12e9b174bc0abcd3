"""Cross-validation, grid search and cross-validated rank adaptation."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Dataset
from .errors import ConfigError, InputError, UnsupportedError
from .ftcore import FunctionTrain
from .models import HyperParams, fit_model, with_rank
from .optimize import OptimOptions
from .parallel import parallel_map
from .rounding import ft_rounding_rank

logger = logging.getLogger(__name__)


def fold_indices(n: int, folds: int, seed) -> List[np.ndarray]:
    """Shuffle ``0..n-1`` with ``seed`` and cut into ``folds`` contiguous parts."""
    if folds < 2:
        raise ConfigError("cross validation needs at least 2 folds")
    if folds > n:
        raise InputError(f"{folds} folds leave empty folds for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def kfold_cv(hyper: HyperParams, data: Dataset, folds: int = 20, seed: int = 0,
             opts: Optional[OptimOptions] = None, return_folds: bool = False):
    """Mean held-out MSE of ``hyper`` over ``folds`` folds."""
    parts = fold_indices(data.n, folds, seed)
    errors = []
    for f, test in enumerate(parts):
        train = np.concatenate([p for g, p in enumerate(parts) if g != f])
        model, _ = fit_model(hyper, data.subset(train), opts, seed=seed, domains=data.domains)
        resid = model.predict(data.X[test]) - data.y[test]
        errors.append(float(resid @ resid) / test.size)
    mse = float(np.mean(errors))
    return (mse, parts) if return_folds else mse


@dataclass
class Hypergrid:
    ranks: Sequence = (1, 2)
    ps: Sequence[int] = (3, 6, 9)
    widths: Sequence[float] = (1.0,)
    lams: Sequence[float] = (0.0,)
    folds: int = 20
    seed: int = 0
    basis: str = "legendre"
    optimizer: str = "aao"
    width_rule: str = "data"
    centers: str = "quantile"

    def combinations(self) -> List[HyperParams]:
        if not (self.ranks and self.ps and self.widths and self.lams):
            raise InputError("every hyper-parameter set must be non-empty")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        return [
            HyperParams(rank=r, p=p, basis=self.basis, lam=lam, width=w, optimizer=self.optimizer,
                        width_rule=self.width_rule, centers=self.centers)
            for r, p, w, lam in itertools.product(self.ranks, self.ps, self.widths, self.lams)
        ]


@dataclass
class CVResult:
    scores: List[Tuple[HyperParams, float]]
    winner: HyperParams
    best_mse: float
    folds: List[np.ndarray]

    def rows(self) -> List[dict]:
        return [
            {"rank": h.rank, "p": h.p, "width": h.width, "lambda": h.lam, "cv_mse": mse,
             "winner": h == self.winner}
            for h, mse in self.scores
        ]


def _cv_point(args):
    hyper, data, folds, seed, opts = args
    return kfold_cv(hyper, data, folds, seed, opts)


def grid_search(grid: Hypergrid, data: Dataset, opts: Optional[OptimOptions] = None,
                log=None, workers: int = 1) -> CVResult:
    """Cross-validate every grid point; ties go to the smaller model.

    All grid points share the same folds, so scores are comparable and do
    not depend on ``workers``.
    """
    combos = grid.combinations()
    parts = fold_indices(data.n, grid.folds, grid.seed)
    mses = parallel_map(_cv_point, [(h, data, grid.folds, grid.seed, opts) for h in combos], workers)
    scores = list(zip(combos, mses))
    if log:
        for hyper, mse in scores:
            log(f"rank={hyper.rank} p={hyper.p} w={hyper.width} lam={hyper.lam} cv_mse={mse:.6e}")
    finite = [(h, m) for h, m in scores if np.isfinite(m)]
    if not finite:
        raise InputError("every grid point failed")
    winner, best = min(finite, key=lambda hm: (hm[1], hm[0].sort_key()))
    return CVResult(scores, winner, best, parts)


@dataclass
class AdaptStep:
    ranks: Tuple[int, ...]
    cv: float
    action: str
    rounded: Optional[Tuple[int, ...]] = None


def rank_adapt(data: Dataset, delta: float, base: HyperParams, opts: Optional[OptimOptions] = None,
               folds: int = 20, seed: int = 0, r_max: int = 10) -> Tuple[FunctionTrain, List[AdaptStep]]:
    """Grow all interior ranks together until cross validation or rounding says stop.

    Each round increments every interior rank and cross-validates.  If the
    error went up, the previous ranks are kept.  Otherwise a model is fitted
    on all data and rounded with tolerance ``delta``: if rounding lowers
    every interior rank the current model is returned, else the rounded
    ranks become the new starting point.  ``r_max`` caps the interior ranks.
    Rounding is skipped (and noted in the trace) for nonlinear entries.
    """
    if not delta > 0:
        raise ConfigError("rounding tolerance must be positive")
    d = data.d
    fits: Dict[Tuple[int, ...], FunctionTrain] = {}

    def cv(ranks):
        return kfold_cv(with_rank(base, ranks), data, folds, seed, opts)

    def fit(ranks):
        if ranks not in fits:
            fits[ranks], _ = fit_model(with_rank(base, ranks), data, opts, seed=seed)
        return fits[ranks]

    ranks = (1,) * (d + 1)
    eps = cv(ranks)
    trace = [AdaptStep(ranks, eps, "start")]
    while True:
        if d < 2 or max(ranks[1:-1]) >= r_max:
            trace.append(AdaptStep(ranks, eps, "rank cap reached"))
            break
        grown = (1,) + tuple(r + 1 for r in ranks[1:-1]) + (1,)
        eps_hat = cv(grown)
        if eps_hat > eps:
            trace.append(AdaptStep(grown, eps_hat, "cv increased; reverted"))
            break
        eps = eps_hat
        model = fit(grown)
        try:
            rounded = ft_rounding_rank(model, delta)
        except UnsupportedError:
            trace.append(AdaptStep(grown, eps_hat, "rounding unsupported; continuing"))
            ranks = grown
            continue
        if all(rounded[k] < grown[k] for k in range(1, d)):
            trace.append(AdaptStep(grown, eps_hat, "rounding lowered every rank; stop", rounded))
            ranks = grown
            break
        trace.append(AdaptStep(grown, eps_hat, "adopted rounded ranks", rounded))
        ranks = tuple(rounded)
    logger.info("rank adaptation finished at ranks %s", ranks)
    return fit(ranks), trace
