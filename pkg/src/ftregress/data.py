"""Regression datasets, CSV ingestion and normalization."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs ``X`` (n, d) and targets ``y`` (n,), possibly normalized.

    ``x_mean``/``x_std`` and ``y_mean``/``y_std`` map stored values back to
    original units: ``original = stored * std + mean``.  Without
    normalization they are zeros and ones.  ``flagged`` lists input columns
    with zero variance; they are kept and their std is reported as 1.
    """

    X: np.ndarray
    y: np.ndarray
    domains: Tuple[Tuple[float, float], ...] = None
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    y_mean: float = 0.0
    y_std: float = 1.0
    flagged: Tuple[int, ...] = ()
    names: Tuple[str, ...] = ()
    target_name: str = "y"

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.size:
            raise InputError(f"inconsistent shapes X{X.shape}, y{y.shape}")
        if X.shape[0] < 1:
            raise InputError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite values")
        d = X.shape[1]
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.domains is None:
            object.__setattr__(self, "domains", data_domains(X))
        elif len(self.domains) != d:
            raise ConfigError("one domain per input column required")
        else:
            object.__setattr__(self, "domains", tuple((float(a), float(b)) for a, b in self.domains))
        if self.x_mean is None:
            object.__setattr__(self, "x_mean", np.zeros(d))
        if self.x_std is None:
            object.__setattr__(self, "x_std", np.ones(d))
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{k}" for k in range(d)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` with the same statistics and domains."""
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=self.y[idx])

    def transform_inputs(self, X) -> np.ndarray:
        """Map original-unit inputs to the stored representation."""
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_std

    def restore_targets(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.y_std + self.y_mean

    def stats(self) -> dict:
        return {
            "x_mean": [float(v) for v in self.x_mean],
            "x_std": [float(v) for v in self.x_std],
            "y_mean": float(self.y_mean),
            "y_std": float(self.y_std),
            "flagged": list(self.flagged),
            "names": list(self.names),
            "target": self.target_name,
        }


def data_domains(X: np.ndarray) -> Tuple[Tuple[float, float], ...]:
    """Per-column ``[min, max]``; degenerate columns are widened to unit length."""
    lo, hi = X.min(axis=0), X.max(axis=0)
    out = []
    for a, b in zip(lo, hi):
        if not b > a:
            a, b = a - 0.5, b + 0.5
        out.append((float(a), float(b)))
    return tuple(out)


def normalize(X, y, names=(), target_name="y") -> Dataset:
    """Shift and scale every column to zero mean and unit standard deviation."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    flagged = tuple(int(k) for k in np.flatnonzero(x_std == 0))
    if flagged:
        logger.warning("columns %s do not vary; kept with unit scale", list(flagged))
    x_std = np.where(x_std == 0, 1.0, x_std)
    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std == 0:
        logger.warning("target does not vary; kept with unit scale")
        y_std = 1.0
    return Dataset(
        X=(X - x_mean) / x_std,
        y=(y - y_mean) / y_std,
        x_mean=x_mean,
        x_std=x_std,
        y_mean=y_mean,
        y_std=y_std,
        flagged=flagged,
        names=tuple(names),
        target_name=target_name,
    )


def read_csv(path, target: Optional[str] = None, require_target: bool = True):
    """Parse a numeric CSV with a header row.

    Returns ``(X, y, feature_names, target_name)``; ``y`` is ``None`` when
    the target is absent and not required.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {header[col]!r}"
                    ) from None
                if not np.isfinite(v):
                    raise InputError(f"{path}:{lineno}: non-finite value in column {header[col]!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    table = np.array(rows)
    if target is None:
        t = len(header) - 1 if require_target else None
    elif target in header:
        t = header.index(target)
    elif require_target:
        raise ConfigError(f"target column {target!r} not in {header}")
    else:
        t = None
    if t is None:
        return table, None, tuple(header), target
    keep = [c for c in range(len(header)) if c != t]
    if not keep:
        raise InputError(f"{path}: no feature columns")
    return table[:, keep], table[:, t], tuple(header[c] for c in keep), header[t]


def ingest_csv(path, target: Optional[str] = None, normalize_data: bool = True) -> Dataset:
    """Load a CSV dataset; the target is the named column or the last one."""
    X, y, names, tname = read_csv(path, target)
    if normalize_data:
        return normalize(X, y, names, tname)
    return Dataset(X, y, names=names, target_name=tname)
