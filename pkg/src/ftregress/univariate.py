"""Parameterized univariate functions.

Every entry of a functional tensor-train core is one of the variants defined
here.  Two families carry optimizable parameters:

* :class:`Linear` -- an expansion ``sum_l theta_l * phi_l(x)`` in a fixed
  :class:`LegendreBasis` or :class:`FixedKernelBasis`;
* :class:`MovingKernel` -- a sum of Gaussian bumps whose coefficients *and*
  centers are parameters, ``sum_l a_l * exp(-(x - c_l)**2 / width**2)``.

:data:`ZERO` and :data:`ONE` are parameter-free constants used for the sparse
cores of structured trains.

All objects are immutable; ``with_params`` returns a new instance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, InputError, UnsupportedError

logger = logging.getLogger(__name__)

Domain = Tuple[float, float]

QUADRATURE_POINTS = 200

_clamp_events = 0


def clamp_count() -> int:
    """Number of evaluations that hit a point outside a linear basis domain."""
    return _clamp_events


def reset_clamp_count() -> None:
    global _clamp_events
    _clamp_events = 0


def _as_domain(domain) -> Domain:
    a, b = float(domain[0]), float(domain[1])
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise ConfigError(f"invalid domain [{a}, {b}]")
    return (a, b)


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite evaluation point")


def _clamp(x: np.ndarray, domain: Domain) -> np.ndarray:
    global _clamp_events
    a, b = domain
    outside = (x < a) | (x > b)
    if outside.any():
        count = int(outside.sum())
        if _clamp_events == 0:
            logger.warning("clamping %d point(s) to basis domain [%g, %g]", count, a, b)
        _clamp_events += count
        return np.clip(x, a, b)
    return x


@lru_cache(maxsize=8)
def gauss_legendre(npts: int = QUADRATURE_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes on [-1, 1] and weights normalized to a probability measure."""
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    return nodes, weights / 2.0


def quadrature_rule(domain: Domain, npts: int = QUADRATURE_POINTS):
    """Gauss-Legendre nodes mapped to ``domain`` with weights summing to one."""
    a, b = domain
    nodes, weights = gauss_legendre(npts)
    return 0.5 * (b - a) * nodes + 0.5 * (a + b), weights


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LegendreBasis:
    """Legendre polynomials of degree ``0..degree`` on ``domain``.

    Scaled so that they are orthonormal with respect to the uniform
    probability measure on the domain, i.e. ``phi_0 = 1`` and
    ``phi_1(x) = sqrt(3) * t`` with ``t`` the affine image of ``x`` in [-1, 1].
    """

    degree: int
    domain: Domain = (-1.0, 1.0)

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ConfigError(f"Legendre degree must be a non-negative integer, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "domain", _as_domain(self.domain))

    orthonormal = True

    @property
    def size(self) -> int:
        return self.degree + 1

    def evaluate(self, x) -> np.ndarray:
        """Matrix ``(n, size)`` of basis values; points are clamped to the domain."""
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        x = _clamp(x, self.domain)
        a, b = self.domain
        t = (2.0 * x - (a + b)) / (b - a)
        out = np.empty(x.shape + (self.size,))
        out[..., 0] = 1.0
        if self.degree >= 1:
            out[..., 1] = t
        for k in range(1, self.degree):
            out[..., k + 1] = ((2 * k + 1) * t * out[..., k] - k * out[..., k - 1]) / (k + 1)
        out *= np.sqrt(2.0 * np.arange(self.size) + 1.0)
        return out


@dataclass(frozen=True)
class FixedKernelBasis:
    """Gaussian kernels ``exp(-(x - c_l)**2 / width**2)`` at fixed centers."""

    centers: Tuple[float, ...]
    width: float
    domain: Domain = (-1.0, 1.0)

    def __post_init__(self):
        centers = tuple(float(c) for c in np.atleast_1d(self.centers))
        if len(centers) < 1:
            raise ConfigError("kernel basis needs at least one center")
        if not self.width > 0:
            raise ConfigError(f"kernel width must be positive, got {self.width}")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "domain", _as_domain(self.domain))

    orthonormal = False

    @property
    def size(self) -> int:
        return len(self.centers)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        x = _clamp(x, self.domain)
        diff = x[..., None] - np.asarray(self.centers)
        return np.exp(-(diff * diff) / self.width**2)

    @property
    def gram(self) -> np.ndarray:
        return _kernel_gram(self)


@lru_cache(maxsize=256)
def _kernel_gram(basis: FixedKernelBasis) -> np.ndarray:
    nodes, weights = quadrature_rule(basis.domain)
    phi = basis.evaluate(nodes)
    return (phi * weights[:, None]).T @ phi


BasisSpec = Union[LegendreBasis, FixedKernelBasis]


def basis_gram(basis: BasisSpec) -> np.ndarray:
    """Gram matrix of ``basis`` under the uniform probability measure."""
    if basis.orthonormal:
        return np.eye(basis.size)
    return basis.gram


def precompute_basis(basis, column) -> np.ndarray:
    """Evaluate a linear basis at every entry of ``column``.

    Because linear gradients do not depend on the coefficients, this matrix
    can be computed once per dataset and looked up afterwards.
    """
    if not isinstance(basis, (LegendreBasis, FixedKernelBasis)):
        raise UnsupportedError("only linear bases can be precomputed")
    return basis.evaluate(np.asarray(column, dtype=float))


# ---------------------------------------------------------------------------
# univariate functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """Parameter-free constant entry (0 or 1)."""

    value: float

    n_params = 0
    params = np.empty(0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        return np.full(x.shape, self.value) if x.ndim else float(self.value)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        return np.empty(x.shape + (0,))

    def with_params(self, theta) -> "Constant":
        if len(theta) != 0:
            raise InputError("constants carry no parameters")
        return self

    def __repr__(self):
        return "ONE" if self.value == 1.0 else "ZERO"


ZERO = Constant(0.0)
ONE = Constant(1.0)


@dataclass(frozen=True, eq=False)
class Linear:
    """``sum_l coeffs[l] * basis_l(x)``."""

    basis: BasisSpec
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        coeffs = np.zeros(self.basis.size) if self.coeffs is None else self.coeffs
        coeffs = np.array(coeffs, dtype=float).reshape(-1)
        if coeffs.size != self.basis.size:
            raise ConfigError(f"expected {self.basis.size} coefficients, got {coeffs.size}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_params(self) -> int:
        return self.basis.size

    @property
    def params(self) -> np.ndarray:
        return self.coeffs

    def __call__(self, x):
        val = self.basis.evaluate(x) @ self.coeffs
        return float(val) if np.ndim(val) == 0 else val

    def grad(self, x) -> np.ndarray:
        return self.basis.evaluate(x)

    def with_params(self, theta) -> "Linear":
        return Linear(self.basis, theta)


@dataclass(frozen=True, eq=False)
class MovingKernel:
    """Gaussian kernel sum with optimizable coefficients and centers.

    The parameter block is ``[coeffs..., centers...]`` so ``n_params`` is twice
    the number of kernels.  ``width`` is a fixed hyper-parameter.
    """

    coeffs: np.ndarray
    centers: np.ndarray
    width: float

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        centers = np.array(self.centers, dtype=float).reshape(-1)
        if coeffs.size < 1 or coeffs.size != centers.size:
            raise ConfigError("moving kernel needs matching, non-empty coeffs and centers")
        if not self.width > 0:
            raise ConfigError(f"kernel width must be positive, got {self.width}")
        coeffs.flags.writeable = False
        centers.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "width", float(self.width))

    @property
    def n_kernels(self) -> int:
        return self.coeffs.size

    @property
    def n_params(self) -> int:
        return 2 * self.coeffs.size

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.coeffs, self.centers])

    def _kernels(self, x):
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        diff = x[..., None] - self.centers
        return diff, np.exp(-(diff * diff) / self.width**2)

    def __call__(self, x):
        _, k = self._kernels(x)
        val = k @ self.coeffs
        return float(val) if np.ndim(val) == 0 else val

    def grad(self, x) -> np.ndarray:
        diff, k = self._kernels(x)
        dcenter = (2.0 / self.width**2) * self.coeffs * diff * k
        return np.concatenate([k, dcenter], axis=-1)

    def with_params(self, theta) -> "MovingKernel":
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise InputError(f"expected {self.n_params} parameters, got {theta.size}")
        q = self.n_kernels
        return MovingKernel(theta[:q], theta[q:], self.width)


UnivariateParam = Union[Constant, Linear, MovingKernel]


def eval_uni(u: UnivariateParam, x):
    """Value of ``u`` at scalar or array ``x``."""
    return u(x)


def grad_uni(u: UnivariateParam, x) -> np.ndarray:
    """Derivatives of ``u(x)`` with respect to each of its parameters."""
    return u.grad(x)


def _check_uni_domain(u: UnivariateParam, domain: Domain) -> None:
    if isinstance(u, Linear) and u.basis.domain != domain:
        raise ConfigError(f"basis domain {u.basis.domain} does not match {domain}")


def inner_product_uni(u1: UnivariateParam, u2: UnivariateParam, domain=(-1.0, 1.0)) -> float:
    """``int u1 * u2 dmu`` for the uniform probability measure on ``domain``.

    Orthonormal expansions in the same basis reduce to a dot product of
    coefficients; every other pairing uses Gauss-Legendre quadrature.
    """
    domain = _as_domain(domain)
    _check_uni_domain(u1, domain)
    _check_uni_domain(u2, domain)
    if u1 is ZERO or u2 is ZERO:
        return 0.0
    if (
        isinstance(u1, Linear)
        and isinstance(u2, Linear)
        and u1.basis == u2.basis
    ):
        if u1.basis.orthonormal:
            return float(u1.coeffs @ u2.coeffs)
        return float(u1.coeffs @ basis_gram(u1.basis) @ u2.coeffs)
    nodes, weights = quadrature_rule(domain)
    return float(np.sum(weights * u1(nodes) * u2(nodes)))


def legendre(degree: int, coeffs: Sequence[float] | None = None, domain=(-1.0, 1.0)) -> Linear:
    """Shorthand for a Legendre expansion."""
    return Linear(LegendreBasis(degree, domain), coeffs)
