"""Building and fitting trains from a compact hyper-parameter description."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .ftcore import FunctionTrain, linear_ft, moving_kernel_ft
from .objective import RegressionObjective
from .optimize import FitReport, OptimOptions, fit_aao, fit_als, fit_sgd, init_params
from .univariate import FixedKernelBasis, LegendreBasis

BASIS_KINDS = ("legendre", "kernel", "moving-kernel")
OPTIMIZERS = ("aao", "sgd", "als")


@dataclass(frozen=True)
class HyperParams:
    """One point of the model search space.

    ``p`` is the number of basis functions per entry: polynomial degree + 1
    for Legendre, the number of kernels otherwise (a moving-kernel entry has
    ``2 p`` parameters).  Kernel widths are ``width * n**(1/5) * std`` of the
    training column (``width_rule="data"``) or ``width * (b - a) / p`` of the
    domain (``width_rule="domain"``).  Kernel centers sit at uniform
    quantiles between the 10th and 90th percentile of the training column
    (``centers="quantile"``) or uniformly across the domain
    (``centers="uniform"``).
    """

    rank: Union[int, Tuple[int, ...]] = 2
    p: int = 5
    basis: str = "legendre"
    lam: float = 0.0
    width: float = 1.0
    optimizer: str = "aao"
    width_rule: str = "data"
    centers: str = "quantile"

    def __post_init__(self):
        if self.basis not in BASIS_KINDS:
            raise ConfigError(f"basis must be one of {BASIS_KINDS}, got {self.basis!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.p < 1 or self.lam < 0 or not self.width > 0:
            raise ConfigError("need p >= 1, lam >= 0 and width > 0")
        if self.width_rule not in ("data", "domain") or self.centers not in ("quantile", "uniform"):
            raise ConfigError("width_rule must be data|domain and centers quantile|uniform")

    def ranks(self, d: int) -> Tuple[int, ...]:
        if isinstance(self.rank, (int, np.integer)):
            if self.rank < 1:
                raise ConfigError("rank must be positive")
            return (1,) + (int(self.rank),) * (d - 1) + (1,)
        ranks = tuple(int(r) for r in self.rank)
        if len(ranks) != d + 1:
            raise ConfigError(f"rank vector {ranks} does not fit dimension {d}")
        return ranks

    def sort_key(self):
        r = self.rank if isinstance(self.rank, (int, np.integer)) else max(self.rank)
        return (r, self.p, self.lam, self.width)


def _kernel_layout(hyper: HyperParams, X: np.ndarray, domains):
    n = X.shape[0]
    centers, widths = [], []
    for k, (a, b) in enumerate(domains):
        col = X[:, k]
        if hyper.centers == "quantile":
            c = np.quantile(col, np.linspace(0.1, 0.9, hyper.p))
        else:
            c = np.linspace(a, b, hyper.p + 2)[1:-1]
        if hyper.width_rule == "data":
            sd = col.std() if n > 1 and col.std() > 0 else (b - a) / 2
            w = hyper.width * n ** 0.2 * sd
        else:
            w = hyper.width * (b - a) / hyper.p
        centers.append(c)
        widths.append(float(w))
    return centers, widths


def make_template(hyper: HyperParams, data: Dataset, domains=None) -> FunctionTrain:
    """Zero-coefficient train; kernel placement uses ``data`` (the training split)."""
    domains = tuple(domains or data.domains)
    ranks = hyper.ranks(len(domains))
    if hyper.basis == "legendre":
        return linear_ft(ranks, [LegendreBasis(hyper.p - 1, dom) for dom in domains])
    centers, widths = _kernel_layout(hyper, data.X, domains)
    if hyper.basis == "kernel":
        return linear_ft(ranks, [FixedKernelBasis(c, w, dom) for c, w, dom in zip(centers, widths, domains)])
    return moving_kernel_ft(ranks, centers, widths, domains)


def fit_model(hyper: HyperParams, data: Dataset, opts: Optional[OptimOptions] = None,
              seed: int = 0, domains=None) -> Tuple[FunctionTrain, FitReport]:
    """Build a template for ``hyper``, initialize it and run its optimizer."""
    opts = opts or OptimOptions()
    template = make_template(hyper, data, domains)
    theta0 = init_params(template, data.y, seed)
    if hyper.optimizer == "als":
        return fit_als(template.with_params(theta0), data, hyper.lam, opts)
    obj = RegressionObjective(template, data, hyper.lam)
    if hyper.optimizer == "aao":
        theta, report = fit_aao(obj, theta0, opts)
    else:
        theta, report = fit_sgd(obj, theta0, opts)
    return template.with_params(theta), report


def with_rank(hyper: HyperParams, ranks) -> HyperParams:
    return replace(hyper, rank=tuple(ranks))
