"""Functional tensor-train data structure, evaluation and parameter gradients.

A :class:`FunctionTrain` represents

    f(x_1, ..., x_d) = F_1(x_1) F_2(x_2) ... F_d(x_d)

where each core ``F_k`` is an ``r_{k-1} x r_k`` grid of univariate functions.
Parameters of all non-constant entries are flattened into one vector in
k-major, then row, column, parameter order; constants occupy no slots.

Two evaluation paths exist.  The per-point functions (:func:`core_eval`,
:func:`ft_eval`, :func:`coregrad_left`, :func:`coregrad_right`,
:func:`ft_eval_grad`) follow the forward/backward sweep literally and are the
reference.  The batch path (:func:`forward`, :func:`backward_accumulate`,
:func:`core_jacobian`) groups core entries sharing a parameterization and
vectorizes over samples; the objective and optimizers use it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InputError
from .univariate import (
    ONE,
    ZERO,
    BasisSpec,
    Constant,
    Domain,
    Linear,
    MovingKernel,
    UnivariateParam,
    _as_domain,
)

# ---------------------------------------------------------------------------
# structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FTCore:
    """One core: a ``rows x cols`` grid of univariate functions."""

    entries: Tuple[Tuple[UnivariateParam, ...], ...]

    def __post_init__(self):
        grid = tuple(tuple(row) for row in self.entries)
        if not grid or not grid[0]:
            raise ConfigError("core must have at least one row and one column")
        if any(len(row) != len(grid[0]) for row in grid):
            raise ConfigError("ragged core grid")
        for row in grid:
            for u in row:
                if not isinstance(u, (Constant, Linear, MovingKernel)):
                    raise ConfigError(f"unsupported core entry {u!r}")
        object.__setattr__(self, "entries", grid)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def __iter__(self):
        for i, row in enumerate(self.entries):
            for j, u in enumerate(row):
                yield i, j, u

    @property
    def n_params(self) -> int:
        return sum(u.n_params for _, _, u in self)

    @property
    def params(self) -> np.ndarray:
        blocks = [u.params for _, _, u in self if u.n_params]
        return np.concatenate(blocks) if blocks else np.empty(0)

    def with_params(self, theta) -> "FTCore":
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise InputError(f"core expects {self.n_params} parameters, got {theta.size}")
        pos = 0
        rows = []
        for row in self.entries:
            new = []
            for u in row:
                new.append(u.with_params(theta[pos:pos + u.n_params]) if u.n_params else u)
                pos += u.n_params
            rows.append(tuple(new))
        return FTCore(tuple(rows))

    def __call__(self, x):
        return core_eval(self, x)


@dataclass(frozen=True)
class _Group:
    """Entries of one core that share a parameterization."""

    kind: str  # "linear" | "moving"
    basis: Optional[BasisSpec]
    width: float
    rows: np.ndarray
    cols: np.ndarray
    slots: np.ndarray  # (m, p) absolute parameter indices


@dataclass(frozen=True)
class CoreLayout:
    shape: Tuple[int, int]
    offset: int
    n_params: int
    groups: Tuple[_Group, ...]
    one_rows: np.ndarray
    one_cols: np.ndarray
    slot_rows: np.ndarray
    slot_cols: np.ndarray


@dataclass(frozen=True)
class Layout:
    cores: Tuple[CoreLayout, ...]
    n_params: int


def _build_layout(cores: Sequence[FTCore]) -> Layout:
    out = []
    offset = 0
    for core in cores:
        start = offset
        keyed = {}
        ones_r, ones_c, slot_r, slot_c = [], [], [], []
        for i, j, u in core:
            if isinstance(u, Constant):
                if u.value == 1.0:
                    ones_r.append(i)
                    ones_c.append(j)
                elif u.value != 0.0:
                    raise ConfigError("only 0 and 1 constants are supported")
                continue
            if isinstance(u, Linear):
                key = ("linear", u.basis, 0.0)
            else:
                key = ("moving", u.n_kernels, u.width)
            keyed.setdefault(key, []).append((i, j, np.arange(offset, offset + u.n_params)))
            slot_r.extend([i] * u.n_params)
            slot_c.extend([j] * u.n_params)
            offset += u.n_params
        groups = []
        for (kind, spec, width), members in keyed.items():
            groups.append(_Group(
                kind=kind,
                basis=spec if kind == "linear" else None,
                width=width,
                rows=np.array([m[0] for m in members], dtype=np.intp),
                cols=np.array([m[1] for m in members], dtype=np.intp),
                slots=np.stack([m[2] for m in members]),
            ))
        out.append(CoreLayout(
            shape=core.shape,
            offset=start,
            n_params=offset - start,
            groups=tuple(groups),
            one_rows=np.array(ones_r, dtype=np.intp),
            one_cols=np.array(ones_c, dtype=np.intp),
            slot_rows=np.array(slot_r, dtype=np.intp),
            slot_cols=np.array(slot_c, dtype=np.intp),
        ))
    return Layout(tuple(out), offset)


@dataclass(frozen=True, eq=False)
class FunctionTrain:
    """Product of matrix-valued univariate cores.

    ``domains[k]`` is the interval of the k-th input; it defines the measure
    used for norms and regularization.
    """

    cores: Tuple[FTCore, ...]
    domains: Tuple[Domain, ...] = None

    def __post_init__(self):
        cores = tuple(self.cores)
        if not cores:
            raise ConfigError("a function train needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[1] != 1:
            raise ConfigError("outer ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[1] != cores[k + 1].shape[0]:
                raise ConfigError(f"core {k} and {k + 1} shapes do not chain")
        if self.domains is None:
            domains = tuple(_infer_domain(core) for core in cores)
        else:
            domains = tuple(_as_domain(dom) for dom in self.domains)
        if len(domains) != len(cores):
            raise ConfigError("one domain per dimension required")
        object.__setattr__(self, "cores", cores)
        object.__setattr__(self, "domains", domains)

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return (1,) + tuple(core.shape[1] for core in self.cores)

    @cached_property
    def layout(self) -> Layout:
        return _build_layout(self.cores)

    @property
    def n_params(self) -> int:
        return self.layout.n_params

    @cached_property
    def params(self) -> np.ndarray:
        blocks = [core.params for core in self.cores]
        theta = np.concatenate(blocks) if blocks else np.empty(0)
        theta.flags.writeable = False
        return theta

    def with_params(self, theta) -> "FunctionTrain":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise InputError(f"expected {self.n_params} parameters, got {theta.size}")
        cores = []
        for core, cl in zip(self.cores, self.layout.cores):
            cores.append(core.with_params(theta[cl.offset:cl.offset + cl.n_params]))
        new = FunctionTrain(tuple(cores), self.domains)
        new.__dict__["layout"] = self.layout
        return new

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return ft_eval(self, x)
        return ft_eval_batch(self, x)

    def predict(self, X) -> np.ndarray:
        return ft_eval_batch(self, X)


def _infer_domain(core: FTCore) -> Domain:
    for _, _, u in core:
        if isinstance(u, Linear):
            return u.basis.domain
    return (-1.0, 1.0)


def pack_params(ft: FunctionTrain) -> np.ndarray:
    """Flat parameter vector (k-major, then row, column, parameter)."""
    return np.array(ft.params)


def unpack_params(ft: FunctionTrain, theta) -> FunctionTrain:
    """New train with the structure of ``ft`` and parameters ``theta``."""
    return ft.with_params(theta)


def param_index(ft: FunctionTrain) -> List[Tuple[int, int, int, int]]:
    """Multi-index ``(k, i, j, l)`` of every slot of the flat vector."""
    index = []
    for k, core in enumerate(ft.cores):
        for i, j, u in core:
            index.extend((k, i, j, ell) for ell in range(u.n_params))
    return index


# ---------------------------------------------------------------------------
# per-point reference path
# ---------------------------------------------------------------------------


def core_eval(core: FTCore, x_k) -> np.ndarray:
    """Matrix of entry values; an array ``x_k`` gives a stack ``(n, rows, cols)``."""
    x_k = np.asarray(x_k, dtype=float)
    rows, cols = core.shape
    out = np.empty(x_k.shape + (rows, cols))
    for i, j, u in core:
        out[..., i, j] = u(x_k)
    return out


def _check_point(ft: FunctionTrain, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != ft.d:
        raise InputError(f"expected a point of dimension {ft.d}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite evaluation point")
    return x


def ft_eval(ft: FunctionTrain, x) -> float:
    """Evaluate by sequential row-vector times core-matrix products."""
    x = _check_point(ft, x)
    a = np.ones(1)
    for core, xk in zip(ft.cores, x):
        a = a @ core_eval(core, xk)
    return float(a[0])


@dataclass
class CoreGradient:
    """Partial derivatives for the parameters of one core.

    ``values[s]`` belongs to the slot whose entry sits at
    ``(rows[s], cols[s])``.
    """

    values: np.ndarray
    rows: np.ndarray
    cols: np.ndarray


def coregrad_left(core: FTCore, x_k: float, a) -> CoreGradient:
    """Intermediate ``a[i] * du_ij/dtheta_l`` for every slot of ``core``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != core.shape[0]:
        raise ValueError(f"left multiplier has length {a.size}, core has {core.shape[0]} rows")
    vals, rows, cols = [], [], []
    for i, j, u in core:
        if not u.n_params:
            continue
        vals.append(a[i] * u.grad(x_k))
        rows.extend([i] * u.n_params)
        cols.extend([j] * u.n_params)
    values = np.concatenate(vals) if vals else np.empty(0)
    return CoreGradient(values, np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp))


def coregrad_right(partial: CoreGradient, c) -> CoreGradient:
    """Scale each intermediate partial by the right multiplier ``c[j]``."""
    c = np.asarray(c, dtype=float).reshape(-1)
    if partial.cols.size and partial.cols.max() >= c.size:
        raise ValueError(f"right multiplier has length {c.size}, too short for core")
    return CoreGradient(partial.values * c[partial.cols], partial.rows, partial.cols)


def ft_eval_grad(ft: FunctionTrain, x) -> Tuple[float, np.ndarray]:
    """Value and full parameter gradient with one forward and one backward sweep."""
    x = _check_point(ft, x)
    a = np.ones(1)
    partials, mats = [], []
    for core, xk in zip(ft.cores, x):
        partials.append(coregrad_left(core, xk, a))
        mat = core_eval(core, xk)
        mats.append(mat)
        a = a @ mat
    value = float(a[0])
    c = np.ones(1)
    for k in range(ft.d - 1, -1, -1):
        partials[k] = coregrad_right(partials[k], c)
        c = mats[k] @ c
    grad = np.concatenate([p.values for p in partials]) if partials else np.empty(0)
    return value, grad


# ---------------------------------------------------------------------------
# batch path
# ---------------------------------------------------------------------------


def _group_forward(g: _Group, theta: np.ndarray, xk: np.ndarray, phi=None):
    """Values ``(n, m)`` and parameter derivatives of one group.

    Linear groups return the shared basis matrix ``(n, p)``; moving-kernel
    groups return per-entry derivatives ``(n, m, p)``.
    """
    if g.kind == "linear":
        if phi is None:
            phi = g.basis.evaluate(xk)
        return phi @ theta[g.slots].T, phi
    q = g.slots.shape[1] // 2
    coef = theta[g.slots[:, :q]]
    cent = theta[g.slots[:, q:]]
    diff = xk[:, None, None] - cent
    ker = np.exp(-(diff * diff) / g.width**2)
    vals = np.einsum("nmq,mq->nm", ker, coef)
    jac = np.concatenate([ker, (2.0 / g.width**2) * coef * diff * ker], axis=-1)
    return vals, jac


def core_forward(cl: CoreLayout, theta, xk, phis=None):
    """Core values ``(n, rows, cols)`` and per-group derivative blocks."""
    n = xk.shape[0]
    V = np.zeros((n,) + cl.shape)
    if cl.one_rows.size:
        V[:, cl.one_rows, cl.one_cols] = 1.0
    jacs = []
    for gi, g in enumerate(cl.groups):
        vals, jac = _group_forward(g, theta, xk, None if phis is None else phis[gi])
        V[:, g.rows, g.cols] = vals
        jacs.append(jac)
    return V, jacs


@dataclass
class Forward:
    """Result of a forward sweep over a batch of points."""

    values: List[np.ndarray]  # core values per dimension
    jacs: List[list]
    lefts: List[np.ndarray]  # lefts[k] = F_{<k}, shape (n, r_{k-1})

    @property
    def f(self) -> np.ndarray:
        return self.lefts[-1][:, 0]


def forward(layout: Layout, theta, X, phis=None) -> Forward:
    n = X.shape[0]
    values, jacs = [], []
    lefts = [np.ones((n, 1))]
    for k, cl in enumerate(layout.cores):
        V, jac = core_forward(cl, theta, X[:, k], None if phis is None else phis[k])
        values.append(V)
        jacs.append(jac)
        lefts.append(np.einsum("ni,nij->nj", lefts[-1], V))
    return Forward(values, jacs, lefts)


def _accumulate_core(cl: CoreLayout, jacs, left, right, w, out):
    for g, jac in zip(cl.groups, jacs):
        W = w[:, None] * left[:, g.rows] * right[:, g.cols]
        if g.kind == "linear":
            out[g.slots] += W.T @ jac
        else:
            out[g.slots] += np.einsum("nm,nmp->mp", W, jac)


def backward_accumulate(layout: Layout, fwd: Forward, w, out: np.ndarray) -> np.ndarray:
    """Add ``sum_n w[n] * df(x_n)/dtheta`` into ``out`` during the backward sweep."""
    n = fwd.lefts[0].shape[0]
    c = np.ones((n, 1))
    for k in range(len(layout.cores) - 1, -1, -1):
        _accumulate_core(layout.cores[k], fwd.jacs[k], fwd.lefts[k], c, w, out)
        c = np.einsum("nij,nj->ni", fwd.values[k], c)
    return out


def rights(fwd: Forward) -> List[np.ndarray]:
    """``rights[k] = F_{>k}`` for every core, shape ``(n, r_k)``."""
    d = len(fwd.values)
    n = fwd.lefts[0].shape[0]
    out = [None] * d
    c = np.ones((n, 1))
    for k in range(d - 1, -1, -1):
        out[k] = c
        c = np.einsum("nij,nj->ni", fwd.values[k], c)
    return out


def core_jacobian(cl: CoreLayout, jacs, left, right) -> np.ndarray:
    """Per-sample derivatives ``(n, core params)`` of f w.r.t. one core."""
    n = left.shape[0]
    J = np.zeros((n, cl.n_params))
    for g, jac in zip(cl.groups, jacs):
        W = left[:, g.rows] * right[:, g.cols]
        if g.kind == "linear":
            block = W[:, :, None] * jac[:, None, :]
        else:
            block = W[:, :, None] * jac
        J[:, g.slots - cl.offset] = block
    return J


def ft_eval_batch(ft: FunctionTrain, X) -> np.ndarray:
    """Evaluate at every row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != ft.d:
        raise InputError(f"expected an (n, {ft.d}) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("non-finite evaluation point")
    return forward(ft.layout, ft.params, X).f.copy()


def ft_jacobian(ft: FunctionTrain, X) -> np.ndarray:
    """``(n, n_params)`` matrix of df(x_n)/dtheta."""
    X = np.asarray(X, dtype=float)
    fwd = forward(ft.layout, ft.params, X)
    rs = rights(fwd)
    return np.concatenate(
        [core_jacobian(cl, fwd.jacs[k], fwd.lefts[k], rs[k]) for k, cl in enumerate(ft.layout.cores)],
        axis=1,
    )


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def _check_ranks(ranks: Sequence[int]) -> Tuple[int, ...]:
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) < 2 or ranks[0] != 1 or ranks[-1] != 1 or min(ranks) < 1:
        raise ConfigError(f"invalid rank vector {ranks}")
    return ranks


def linear_ft(ranks: Sequence[int], bases: Sequence[BasisSpec], coeffs=None) -> FunctionTrain:
    """Train whose entries of dimension k all use ``bases[k]``.

    Coefficients default to zero; ``coeffs`` may be a flat vector.
    """
    ranks = _check_ranks(ranks)
    if len(bases) != len(ranks) - 1:
        raise ConfigError("one basis per dimension required")
    cores = []
    for k, basis in enumerate(bases):
        cores.append(FTCore(tuple(
            tuple(Linear(basis) for _ in range(ranks[k + 1])) for _ in range(ranks[k])
        )))
    ft = FunctionTrain(tuple(cores), tuple(b.domain for b in bases))
    return ft if coeffs is None else ft.with_params(coeffs)


def moving_kernel_ft(ranks: Sequence[int], centers: Sequence, widths: Sequence[float],
                     domains: Sequence[Domain]) -> FunctionTrain:
    """Train of moving-center kernel entries with zero coefficients.

    ``centers[k]`` gives the initial kernel locations for dimension k.
    """
    ranks = _check_ranks(ranks)
    d = len(ranks) - 1
    if not (len(centers) == len(widths) == len(domains) == d):
        raise ConfigError("centers, widths and domains need one entry per dimension")
    cores = []
    for k in range(d):
        c = np.asarray(centers[k], dtype=float)
        u = MovingKernel(np.zeros_like(c), c, widths[k])
        cores.append(FTCore(tuple(tuple(u for _ in range(ranks[k + 1])) for _ in range(ranks[k]))))
    return FunctionTrain(tuple(cores), tuple(domains))


def ftc_to_ft(tt_cores: Sequence[np.ndarray], bases: Sequence[BasisSpec]) -> FunctionTrain:
    """Functional train from TT cores ``(r_{k-1}, p_k, r_k)`` of basis coefficients."""
    if len(tt_cores) != len(bases) or not tt_cores:
        raise InputError("one TT core per basis required")
    cores = []
    prev = 1
    for k, (G, basis) in enumerate(zip(tt_cores, bases)):
        G = np.asarray(G, dtype=float)
        if G.ndim != 3 or G.shape[0] != prev or G.shape[1] != basis.size:
            raise InputError(f"TT core {k} has shape {G.shape}, incompatible with chain/basis")
        cores.append(FTCore(tuple(
            tuple(Linear(basis, G[i, :, j]) for j in range(G.shape[2])) for i in range(G.shape[0])
        )))
        prev = G.shape[2]
    if prev != 1:
        raise InputError("last TT core must have trailing rank 1")
    return FunctionTrain(tuple(cores), tuple(b.domain for b in bases))


def additive_ft(fs: Sequence[UnivariateParam], domains: Optional[Sequence[Domain]] = None) -> FunctionTrain:
    """Rank-2 train of ``f_1(x_1) + ... + f_d(x_d)`` using constant tags.

    Cores are ``[f_1, 1]``, ``[[1, 0], [f_k, 1]]`` and ``[[1], [f_d]]``, so
    only the ``f_k`` carry parameters.
    """
    d = len(fs)
    if d < 2:
        raise InputError("additive construction needs at least two dimensions")
    cores = [FTCore(((fs[0], ONE),))]
    for f in fs[1:-1]:
        cores.append(FTCore(((ONE, ZERO), (f, ONE))))
    cores.append(FTCore(((ONE,), (fs[-1],))))
    if domains is None:
        domains = [f.basis.domain if isinstance(f, Linear) else (-1.0, 1.0) for f in fs]
    return FunctionTrain(tuple(cores), tuple(domains))
