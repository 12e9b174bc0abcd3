import numpy as np
import pytest

from ftregress.ftcore import FTCore, FunctionTrain
from ftregress.univariate import LegendreBasis, Linear, MovingKernel


def random_entry(rng, kind: str, p: int, domain=(-1.0, 1.0)):
    if kind == "linear":
        return Linear(LegendreBasis(p - 1, domain), rng.normal(size=p))
    m = max(1, p // 2)
    a, b = domain
    return MovingKernel(rng.normal(size=m), rng.uniform(a, b, size=m), 0.3 + 0.7 * rng.random())


def random_ft(rng, d: int, ranks, kinds=("linear", "moving"), p_range=(2, 9), domains=None) -> FunctionTrain:
    """Random train with entries drawn from ``kinds`` and sizes from ``p_range``."""
    ranks = list(ranks)
    domains = domains or [(-1.0, 1.0)] * d
    cores = []
    for k in range(d):
        rows = []
        for _ in range(ranks[k]):
            row = []
            for _ in range(ranks[k + 1]):
                kind = kinds[rng.integers(len(kinds))]
                p = int(rng.integers(p_range[0], p_range[1] + 1))
                row.append(random_entry(rng, kind, p, domains[k]))
            rows.append(tuple(row))
        cores.append(FTCore(tuple(rows)))
    return FunctionTrain(tuple(cores), tuple(domains))


def central_diff(fun, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for s in range(theta.size):
        e = np.zeros_like(theta)
        e[s] = h
        out[s] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return out


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(a))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
