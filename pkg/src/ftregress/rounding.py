"""Rank reduction of linearly parameterized function trains.

With an orthonormal basis per dimension the L2 norm of the function equals
the Frobenius norm of its coefficient tensor, so rounding reduces to classic
TT rounding of the coefficient cores: a left-to-right QR sweep followed by a
right-to-left truncated SVD sweep.
"""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, UnsupportedError
from .ftcore import FunctionTrain, ftc_to_ft
from .univariate import Constant, LegendreBasis, Linear


def to_tt_cores(ft: FunctionTrain) -> Tuple[List[np.ndarray], List[LegendreBasis]]:
    """Coefficient cores ``(r_{k-1}, p_k, r_k)`` and the shared basis per dimension.

    Constant entries are expressed in the basis (``1 = phi_0``).  Raises
    :class:`UnsupportedError` for nonlinear entries, non-orthonormal bases or
    mixed bases within one dimension.
    """
    cores, bases = [], []
    for k, core in enumerate(ft.cores):
        basis = None
        for _, _, u in core:
            if isinstance(u, Constant):
                continue
            if not isinstance(u, Linear):
                raise UnsupportedError("rounding is only defined for linear parameterizations")
            if not u.basis.orthonormal:
                raise UnsupportedError("rounding requires an orthonormal basis")
            if basis is None:
                basis = u.basis
            elif u.basis != basis:
                raise UnsupportedError(f"dimension {k} mixes bases; rounding needs a shared basis")
        if basis is None:
            basis = LegendreBasis(0, ft.domains[k])
        if basis.domain != ft.domains[k]:
            raise UnsupportedError(f"basis domain of dimension {k} differs from the train domain")
        r0, r1 = core.shape
        G = np.zeros((r0, basis.size, r1))
        for i, j, u in core:
            if isinstance(u, Linear):
                G[i, :, j] = u.coeffs
            elif u.value == 1.0:
                G[i, 0, j] = 1.0
        cores.append(G)
        bases.append(basis)
    return cores, bases


def _truncation_rank(s: np.ndarray, eps: float) -> int:
    # tail[r] = norm of the singular values discarded when keeping r
    tail = np.sqrt(np.cumsum((s * s)[::-1])[::-1])
    for r in range(1, s.size):
        if tail[r] <= eps:
            return r
    return max(s.size, 1)


def tt_round(cores: Sequence[np.ndarray], delta: float) -> Tuple[List[np.ndarray], float]:
    """Round TT cores to relative Frobenius accuracy ``delta``.

    Returns the new cores and the Frobenius norm of the input tensor.
    """
    if delta < 0:
        raise ConfigError("rounding tolerance must be non-negative")
    cores = [np.array(c, dtype=float) for c in cores]
    d = len(cores)
    for k in range(d - 1):
        r0, p, r1 = cores[k].shape
        Q, R = np.linalg.qr(cores[k].reshape(r0 * p, r1))
        cores[k] = Q.reshape(r0, p, Q.shape[1])
        cores[k + 1] = np.einsum("ab,bpc->apc", R, cores[k + 1])
    norm = float(np.linalg.norm(cores[-1]))
    if d == 1:
        return cores, norm
    eps = delta * norm / np.sqrt(d - 1)
    for k in range(d - 1, 0, -1):
        r0, p, r1 = cores[k].shape
        U, S, Vt = np.linalg.svd(cores[k].reshape(r0, p * r1), full_matrices=False)
        rank = _truncation_rank(S, eps)
        cores[k] = Vt[:rank].reshape(rank, p, r1)
        cores[k - 1] = np.einsum("apb,bc->apc", cores[k - 1], U[:, :rank] * S[:rank])
    return cores, norm


def ft_round(ft: FunctionTrain, delta: float) -> FunctionTrain:
    """Train of (weakly) smaller ranks within relative L2 error ``delta``."""
    cores, bases = to_tt_cores(ft)
    rounded, _ = tt_round(cores, delta)
    return ftc_to_ft(rounded, bases)


def ft_rounding_rank(ft: FunctionTrain, delta: float) -> Tuple[int, ...]:
    """Ranks that :func:`ft_round` would produce, without building the train."""
    cores, _ = to_tt_cores(ft)
    rounded, _ = tt_round(cores, delta)
    return (1,) + tuple(c.shape[2] for c in rounded)
