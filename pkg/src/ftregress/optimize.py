"""Fitting algorithms: all-at-once L-BFGS, ADAM stochastic gradient, and ALS."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .ftcore import FunctionTrain, core_jacobian, forward, rights
from .objective import RegressionObjective
from .univariate import Linear, quadrature_rule

logger = logging.getLogger(__name__)


@dataclass
class SGDOptions:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    decay: bool = True


@dataclass
class ALSOptions:
    max_sweeps: int = 50
    sweep_tol: float = 1e-10
    ridge_jitter: float = 1e-12
    mc_points: int = 4096
    inner_iters: int = 100
    seed: int = 0


@dataclass
class OptimOptions:
    max_iters: int = 500
    obj_tol: float = 1e-13
    grad_tol: float = 1e-12
    lbfgs_memory: int = 10
    sgd: SGDOptions = field(default_factory=SGDOptions)
    als: ALSOptions = field(default_factory=ALSOptions)

    def __post_init__(self):
        if self.max_iters < 0 or self.lbfgs_memory < 1:
            raise ConfigError("max_iters must be >= 0 and lbfgs_memory >= 1")
        if not (self.obj_tol > 0 and self.grad_tol > 0):
            raise ConfigError("tolerances must be positive")
        s = self.sgd
        if not (0 <= s.beta1 < 1 and 0 <= s.beta2 < 1):
            raise ConfigError("ADAM betas must lie in [0, 1)")
        if s.batch_size < 1 or s.epochs < 0 or s.learning_rate < 0:
            raise ConfigError("invalid SGD options")
        if self.als.max_sweeps < 0 or not self.als.sweep_tol > 0 or self.als.ridge_jitter < 0:
            raise ConfigError("invalid ALS options")


@dataclass
class FitReport:
    method: str
    final_objective: float
    iterations: int
    converged: bool
    trace: List[float]
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "final_objective": self.final_objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
            "trace": list(self.trace),
        }


# ---------------------------------------------------------------------------
# L-BFGS
# ---------------------------------------------------------------------------


def lbfgs(fun: Callable[[np.ndarray], Tuple[float, np.ndarray]], x0, *, memory: int = 10,
          max_iters: int = 500, obj_tol: float = 1e-13, grad_tol: float = 1e-12,
          c1: float = 1e-4, shrink: float = 0.5, max_backtracks: int = 60):
    """Limited-memory BFGS with a backtracking Armijo line search.

    Stops when successive objective values differ by at most ``obj_tol``,
    when ``max|grad| <= grad_tol`` or after ``max_iters`` iterations.
    Returns ``(x, trace, iterations, converged, message)``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    trace = [f]
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    if not np.isfinite(f):
        return x, trace, 0, False, "non-finite objective at starting point"
    if x.size == 0 or np.max(np.abs(g)) <= grad_tol:
        return x, trace, 0, True, "gradient tolerance"
    for it in range(1, max_iters + 1):
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(S), reversed(Y)):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        else:
            q /= max(1.0, np.linalg.norm(g))
        for (s, y), a in zip(zip(S, Y), reversed(alphas)):
            b = (y @ q) / (y @ s)
            q += (a - b) * s
        direction = -q
        slope = g @ direction
        if not slope < 0:
            S.clear()
            Y.clear()
            direction = -g / max(1.0, np.linalg.norm(g))
            slope = g @ direction
        step = 1.0
        for _ in range(max_backtracks):
            x_new = x + step * direction
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
                break
            step *= shrink
        else:
            return x, trace, it - 1, False, "line search failed"
        s, y = x_new - x, g_new - g
        if s @ y > 1e-12 * np.sqrt((s @ s) * (y @ y)):
            S.append(s)
            Y.append(y)
        change = f - f_new
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        if abs(change) <= obj_tol:
            return x, trace, it, True, "objective tolerance"
        if np.max(np.abs(g)) <= grad_tol:
            return x, trace, it, True, "gradient tolerance"
    return x, trace, max_iters, False, "maximum iterations"


def fit_aao(obj: RegressionObjective, theta0, opts: Optional[OptimOptions] = None):
    """Optimize all parameters simultaneously with L-BFGS."""
    opts = opts or OptimOptions()
    theta, trace, its, ok, msg = lbfgs(
        obj.full, obj._check(theta0), memory=opts.lbfgs_memory, max_iters=opts.max_iters,
        obj_tol=opts.obj_tol, grad_tol=opts.grad_tol,
    )
    return theta, FitReport("aao", trace[-1], its, ok, trace, msg)


# ---------------------------------------------------------------------------
# ADAM
# ---------------------------------------------------------------------------


def fit_sgd(obj: RegressionObjective, theta0, opts: Optional[OptimOptions] = None):
    """Minibatch stochastic gradient with ADAM step sizes.

    The learning rate decays as ``lr / sqrt(epoch)``.  Samples are reshuffled
    every epoch from a generator seeded by ``opts.sgd.seed``.  The iterate
    with the lowest end-of-epoch objective is returned.
    """
    opts = opts or OptimOptions()
    so = opts.sgd
    theta = np.array(obj._check(theta0))
    rng = np.random.default_rng(so.seed)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t = 0
    f = obj.value(theta)
    trace = [f]
    best, best_f = theta.copy(), f
    converged = False
    epoch = 0
    for epoch in range(1, so.epochs + 1):
        lr = so.learning_rate / np.sqrt(epoch) if so.decay else so.learning_rate
        perm = rng.permutation(obj.n)
        for start in range(0, obj.n, so.batch_size):
            _, g = obj.minibatch(theta, perm[start:start + so.batch_size])
            t += 1
            m = so.beta1 * m + (1 - so.beta1) * g
            v = so.beta2 * v + (1 - so.beta2) * g * g
            mhat = m / (1 - so.beta1**t)
            vhat = v / (1 - so.beta2**t)
            theta = theta - lr * mhat / (np.sqrt(vhat) + so.eps)
        f_new = obj.value(theta)
        trace.append(f_new)
        if f_new < best_f:
            best, best_f = theta.copy(), f_new
        if not np.isfinite(f_new):
            break
        if abs(f - f_new) <= opts.obj_tol:
            converged = True
            break
        f = f_new
    return best, FitReport("sgd", best_f, epoch, converged, trace, "")


# ---------------------------------------------------------------------------
# ALS
# ---------------------------------------------------------------------------


def _mc_points(ft: FunctionTrain, npts: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in ft.domains])
    hi = np.array([b for _, b in ft.domains])
    return lo + (hi - lo) * rng.random((npts, ft.d))


def _solve_linear_core(obj: RegressionObjective, theta, k: int, jitter: float):
    """Exact minimizer over the parameters of linear core ``k``."""
    layout = obj.layout
    cl = layout.cores[k]
    sl = slice(cl.offset, cl.offset + cl.n_params)
    H = np.zeros((cl.n_params, cl.n_params))
    rhs = np.zeros(cl.n_params)
    for X, y, phis in obj._chunks():
        fwd = forward(layout, theta, X, phis)
        A = core_jacobian(cl, fwd.jacs[k], fwd.lefts[k], rights(fwd)[k])
        # f is affine in the core parameters: f = A theta_k + offset
        b = y - (fwd.f - A @ theta[sl])
        H += A.T @ A
        rhs += A.T @ b
    H /= obj.n
    rhs /= obj.n
    if obj.lam:
        H += obj.lam * obj.regularizer_hessian_block(k)
    H[np.diag_indices_from(H)] += jitter
    factor = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
    sol = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("non-finite ALS solution")
    out = theta.copy()
    out[sl] = sol
    return out


def _solve_nonlinear_core(obj: RegressionObjective, theta, k: int, opts: OptimOptions):
    cl = obj.layout.cores[k]
    sl = slice(cl.offset, cl.offset + cl.n_params)
    base = theta.copy()

    def sub(z):
        full = base.copy()
        full[sl] = z
        f, g = obj.full(full)
        return f, g[sl]

    z, *_ = lbfgs(sub, theta[sl], memory=opts.lbfgs_memory, max_iters=opts.als.inner_iters,
                  obj_tol=opts.obj_tol, grad_tol=opts.grad_tol)
    out = theta.copy()
    out[sl] = z
    return out


def fit_als(ft: FunctionTrain, data, lam: float = 0.0, opts: Optional[OptimOptions] = None,
            precompute: bool = True):
    """Alternating minimization over cores.

    Linear cores are updated by solving their normal equations (plus
    ``ridge_jitter`` on the diagonal); cores containing moving kernels are
    updated with an inner L-BFGS run.  Sweeps stop once the RMS change of the
    model over fixed Monte Carlo points is below ``sweep_tol`` times the
    model's RMS there (or ``sweep_tol`` if that RMS is below 1).
    """
    opts = opts or OptimOptions()
    ao = opts.als
    obj = RegressionObjective(ft, data, lam, precompute=precompute)
    theta = np.array(ft.params)
    linear = [all(g.kind == "linear" for g in cl.groups) for cl in obj.layout.cores]
    pts = _mc_points(ft, ao.mc_points, ao.seed)
    prev = ft.with_params(theta).predict(pts)
    trace = [obj.value(theta)]
    converged, message, sweeps = False, "maximum sweeps", 0
    for sweeps in range(1, ao.max_sweeps + 1):
        try:
            for k, cl in enumerate(obj.layout.cores):
                if cl.n_params == 0:
                    continue
                if linear[k]:
                    theta = _solve_linear_core(obj, theta, k, ao.ridge_jitter)
                else:
                    theta = _solve_nonlinear_core(obj, theta, k, opts)
                trace.append(obj.value(theta))
        except np.linalg.LinAlgError as exc:
            message = f"singular core subproblem in sweep {sweeps}: {exc}"
            logger.warning(message)
            break
        cur = ft.with_params(theta).predict(pts)
        change = float(np.sqrt(np.mean((cur - prev) ** 2)))
        scale = max(1.0, float(np.sqrt(np.mean(cur * cur))))
        prev = cur
        if change <= ao.sweep_tol * scale:
            converged, message = True, "sweep tolerance"
            break
    return ft.with_params(theta), FitReport("als", trace[-1], sweeps, converged, trace, message)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def unit_coefficients(u, domain) -> np.ndarray:
    """Coefficients making ``u`` approximately the constant 1 on ``domain``."""
    if isinstance(u, Linear) and u.basis.orthonormal:
        c = np.zeros(u.n_params)
        c[0] = 1.0
        return c
    nodes, weights = quadrature_rule(domain, 100)
    if isinstance(u, Linear):
        phi = u.basis.evaluate(nodes)
    else:
        diff = nodes[:, None] - u.centers
        phi = np.exp(-(diff * diff) / u.width**2)
    sw = np.sqrt(weights)[:, None]
    coef, *_ = np.linalg.lstsq(phi * sw, sw[:, 0], rcond=None)
    return coef


def init_params(template: FunctionTrain, y, seed: int = 0) -> np.ndarray:
    """Random starting point for a fit to targets ``y``.

    Coefficients are i.i.d. normal with standard deviation ``1/sqrt(r*p)``,
    ``r`` the largest rank and ``p`` the number of coefficients of the entry.
    Diagonal entries ``(i, i)`` additionally get the constant ``rms(y)**(1/d)``
    (carrying the sign of ``mean(y)`` in the first core), so every core
    starts near a scaled identity and the train starts at the target scale.
    Putting the whole offset in the first core instead leaves the remaining
    cores near zero, and the product then has vanishing gradients once ``d``
    is moderate.  Moving-kernel centers keep their template locations.
    """
    y = np.asarray(y, dtype=float)
    mean = float(y.mean())
    root = float(np.sqrt(np.mean(y * y))) ** (1.0 / template.d)
    rng = np.random.default_rng(seed)
    rmax = max(template.ranks)
    theta = np.zeros(template.n_params)
    pos = 0
    for k, core in enumerate(template.cores):
        for i, j, u in core:
            p = u.n_params
            if not p:
                continue
            ncoef = p if isinstance(u, Linear) else p // 2
            block = np.array(u.params, dtype=float)
            block[:ncoef] = rng.standard_normal(ncoef) / np.sqrt(rmax * ncoef)
            if i == j and root > 0:
                scale = -root if (k == 0 and mean < 0) else root
                block[:ncoef] += scale * unit_coefficients(u, template.domains[k])
            theta[pos:pos + p] = block
            pos += p
    return theta
