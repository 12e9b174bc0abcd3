"""Least-squares fit objective, group-sparsity regularizer and their gradients."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from .data import Dataset
from .errors import ConfigError, InputError
from .ftcore import FunctionTrain, Layout, _group_forward, backward_accumulate, forward
from .univariate import basis_gram, quadrature_rule


class RegressionObjective:
    """``J(theta) + lam * Omega(theta)`` for a fixed train structure.

    ``J`` is the mean squared residual over the data and ``Omega`` sums the
    squared L2 norms (uniform probability measure on the train's domains) of
    all non-constant core entries.  Samples are processed in chunks of
    ``chunk_size`` so scratch memory does not grow with ``n``.

    With ``precompute=True`` the basis matrices of linear entries are
    evaluated once at construction and looked up afterwards.
    """

    def __init__(self, template: FunctionTrain, data, lam: float = 0.0,
                 precompute: bool = True, chunk_size: int = 4096):
        if isinstance(data, Dataset):
            X, y = data.X, data.y
        else:
            X, y = data
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[1] != template.d or X.shape[0] != y.size:
            raise InputError(f"data of shape {X.shape} does not match a {template.d}-dimensional train")
        if X.shape[0] < 1:
            raise InputError("empty dataset")
        if not lam >= 0:
            raise ConfigError(f"regularization weight must be non-negative, got {lam}")
        if chunk_size < 1:
            raise ConfigError("chunk_size must be positive")
        self.template = template
        self.layout: Layout = template.layout
        self.X = X
        self.y = y
        self.lam = float(lam)
        self.chunk_size = int(chunk_size)
        self.phis = self._precompute() if precompute else None
        self._reg_setup = self._regularizer_setup()

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_params(self) -> int:
        return self.layout.n_params

    def _precompute(self):
        out = []
        for k, cl in enumerate(self.layout.cores):
            out.append([g.basis.evaluate(self.X[:, k]) if g.kind == "linear" else None for g in cl.groups])
        return out

    def _chunk_phis(self, sl):
        if self.phis is None:
            return None
        return [[None if phi is None else phi[sl] for phi in core] for core in self.phis]

    def _chunks(self, idx=None):
        n = self.n if idx is None else len(idx)
        for start in range(0, n, self.chunk_size):
            stop = min(start + self.chunk_size, n)
            if idx is None:
                sl = slice(start, stop)
                yield self.X[sl], self.y[sl], self._chunk_phis(sl)
            else:
                rows = idx[start:stop]
                yield self.X[rows], self.y[rows], self._chunk_phis(rows)

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise InputError(f"expected {self.n_params} parameters, got {theta.size}")
        return theta

    # -- least squares -----------------------------------------------------

    def residuals(self, theta) -> np.ndarray:
        theta = self._check(theta)
        out = [y - forward(self.layout, theta, X, phis).f for X, y, phis in self._chunks()]
        return np.concatenate(out)

    def loss(self, theta) -> float:
        r = self.residuals(theta)
        return float(r @ r) / self.n

    def least_squares(self, theta, idx=None) -> Tuple[float, np.ndarray]:
        """Mean squared residual and its gradient, optionally over rows ``idx``."""
        theta = self._check(theta)
        total = 0.0
        grad = np.zeros(self.n_params)
        for X, y, phis in self._chunks(idx):
            fwd = forward(self.layout, theta, X, phis)
            r = y - fwd.f
            total += float(r @ r)
            backward_accumulate(self.layout, fwd, r, grad)
        n = self.n if idx is None else len(idx)
        return total / n, grad * (-2.0 / n)

    # -- regularizer -------------------------------------------------------

    def _regularizer_setup(self):
        setup = []
        for k, cl in enumerate(self.layout.cores):
            domain = self.template.domains[k]
            for g in cl.groups:
                if g.kind == "linear" and g.basis.domain == domain:
                    setup.append(("gram", g, None if g.basis.orthonormal else basis_gram(g.basis), None))
                else:
                    setup.append(("quad", g, quadrature_rule(domain), None))
        return setup

    def regularizer(self, theta) -> Tuple[float, np.ndarray]:
        """Sum of squared entry norms and its gradient."""
        theta = self._check(theta)
        omega = 0.0
        grad = np.zeros(self.n_params)
        for kind, g, extra, _ in self._reg_setup:
            if kind == "gram":
                T = theta[g.slots]
                TM = T if extra is None else T @ extra
                omega += float(np.sum(TM * T))
                grad[g.slots] += 2.0 * TM
            else:
                nodes, weights = extra
                vals, jac = _group_forward(g, theta, nodes)
                omega += float(weights @ (vals * vals).sum(axis=1))
                wv = weights[:, None] * vals
                if g.kind == "linear":
                    grad[g.slots] += 2.0 * wv.T @ jac
                else:
                    grad[g.slots] += 2.0 * np.einsum("qm,qmp->mp", wv, jac)
        return omega, grad

    def regularizer_hessian_block(self, k: int) -> np.ndarray:
        """Matrix ``M`` with ``Omega_k = theta_k^T M theta_k`` for a linear core."""
        cl = self.layout.cores[k]
        M = np.zeros((cl.n_params, cl.n_params))
        domain = self.template.domains[k]
        for g in cl.groups:
            if g.kind != "linear":
                raise ConfigError("quadratic regularizer block only exists for linear cores")
            if g.basis.domain == domain:
                G = basis_gram(g.basis)
            else:
                nodes, weights = quadrature_rule(domain)
                phi = g.basis.evaluate(nodes)
                G = (phi * weights[:, None]).T @ phi
            for row in g.slots - cl.offset:
                M[np.ix_(row, row)] = G
        return M

    # -- combined ----------------------------------------------------------

    def __call__(self, theta) -> Tuple[float, np.ndarray]:
        return self.full(theta)

    def full(self, theta) -> Tuple[float, np.ndarray]:
        J, gJ = self.least_squares(theta)
        if self.lam == 0.0:
            return J, gJ
        O, gO = self.regularizer(theta)
        return J + self.lam * O, gJ + self.lam * gO

    def value(self, theta) -> float:
        J = self.loss(theta)
        if self.lam == 0.0:
            return J
        return J + self.lam * self.regularizer(theta)[0]

    def minibatch(self, theta, idx) -> Tuple[float, np.ndarray]:
        """Objective restricted to rows ``idx`` (mean loss plus full penalty)."""
        J, gJ = self.least_squares(theta, np.asarray(idx))
        if self.lam == 0.0:
            return J, gJ
        O, gO = self.regularizer(theta)
        return J + self.lam * O, gJ + self.lam * gO

    def per_sample_grad(self, theta, i: int) -> Tuple[float, np.ndarray]:
        """Squared residual of sample ``i`` and its gradient (no ``1/n``)."""
        if not 0 <= i < self.n:
            raise IndexError(f"sample index {i} out of range for n={self.n}")
        return self.least_squares(theta, np.array([i]))

    def model(self, theta) -> FunctionTrain:
        return self.template.with_params(theta)


def least_squares(obj: RegressionObjective, theta) -> Tuple[float, np.ndarray]:
    return obj.least_squares(theta)


def regularizer(obj: RegressionObjective, theta) -> Tuple[float, np.ndarray]:
    return obj.regularizer(theta)


def objective_full(obj: RegressionObjective, theta) -> Tuple[float, np.ndarray]:
    return obj.full(theta)


def per_sample_grad(obj: RegressionObjective, theta, i: int) -> Tuple[float, np.ndarray]:
    return obj.per_sample_grad(theta, i)
