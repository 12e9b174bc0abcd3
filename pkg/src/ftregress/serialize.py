"""Line-oriented text format for trained models.

Layout::

    ftregress-model 1
    d <d>
    ranks 1 r_1 ... 1
    domain <k> <a> <b>
    basis <k> legendre <degree>            (dimension uses Legendre entries)
    basis <k> kernel <width> <c_1> ...     (dimension uses fixed kernels)
    width <k> <width>                      (dimension uses moving kernels)
    meta <key> <json>                      (optional, repeated)
    entries
    <k> <i> <j> <linear|moving|zero|one> <p> <theta_1> ... <theta_p>
    end

Floats are written with ``repr`` so a save/load cycle is bit exact.
"""
from __future__ import annotations

import json
import os
import tempfile
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import FormatError, UnsupportedError
from .ftcore import FTCore, FunctionTrain
from .univariate import ONE, ZERO, Constant, FixedKernelBasis, LegendreBasis, Linear, MovingKernel

MAGIC = "ftregress-model"
VERSION = 1


def dumps(ft: FunctionTrain, meta: Optional[Dict] = None) -> str:
    lines = [f"{MAGIC} {VERSION}", f"d {ft.d}", "ranks " + " ".join(map(str, ft.ranks))]
    for k, core in enumerate(ft.cores):
        a, b = ft.domains[k]
        lines.append(f"domain {k} {a!r} {b!r}")
        bases = {u.basis for _, _, u in core if isinstance(u, Linear)}
        widths = {u.width for _, _, u in core if isinstance(u, MovingKernel)}
        if len(bases) > 1 or len(widths) > 1:
            raise UnsupportedError(f"dimension {k} mixes parameterizations; cannot serialize")
        for basis in bases:
            if basis.domain != ft.domains[k]:
                raise UnsupportedError(f"dimension {k} basis domain differs from train domain")
            if isinstance(basis, LegendreBasis):
                lines.append(f"basis {k} legendre {basis.degree}")
            else:
                lines.append(f"basis {k} kernel {basis.width!r} " + " ".join(repr(c) for c in basis.centers))
        for width in widths:
            lines.append(f"width {k} {width!r}")
    for key, value in (meta or {}).items():
        if not key or any(ch.isspace() for ch in key):
            raise FormatError(f"invalid meta key {key!r}")
        lines.append(f"meta {key} {json.dumps(value)}")
    lines.append("entries")
    for k, core in enumerate(ft.cores):
        for i, j, u in core:
            if isinstance(u, Constant):
                lines.append(f"{k} {i} {j} {'one' if u.value == 1.0 else 'zero'} 0")
            else:
                kind = "linear" if isinstance(u, Linear) else "moving"
                vals = " ".join(repr(float(v)) for v in u.params)
                lines.append(f"{k} {i} {j} {kind} {u.n_params} {vals}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Tuple[FunctionTrain, Dict]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty model file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise FormatError("not a ftregress model file")
    if head[1] != str(VERSION):
        raise FormatError(f"unsupported model format version {head[1]} (expected {VERSION})")
    try:
        return _parse(lines[1:])
    except FormatError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc


def _parse(lines):
    d = None
    ranks = None
    domains, bases, widths, meta = {}, {}, {}, {}
    it = iter(lines)
    for line in it:
        tok = line.split()
        if tok[0] == "d":
            d = int(tok[1])
        elif tok[0] == "ranks":
            ranks = [int(t) for t in tok[1:]]
        elif tok[0] == "domain":
            domains[int(tok[1])] = (float(tok[2]), float(tok[3]))
        elif tok[0] == "basis":
            k = int(tok[1])
            if tok[2] == "legendre":
                bases[k] = ("legendre", int(tok[3]))
            elif tok[2] == "kernel":
                bases[k] = ("kernel", float(tok[3]), tuple(float(t) for t in tok[4:]))
            else:
                raise FormatError(f"unknown basis kind {tok[2]!r}")
        elif tok[0] == "width":
            widths[int(tok[1])] = float(tok[2])
        elif tok[0] == "meta":
            meta[tok[1]] = json.loads(line.split(None, 2)[2])
        elif tok[0] == "entries":
            break
        else:
            raise FormatError(f"unexpected header line {line!r}")
    if d is None or ranks is None or len(ranks) != d + 1 or sorted(domains) != list(range(d)):
        raise FormatError("incomplete model header")
    basis_objs = {}
    for k, spec in bases.items():
        if spec[0] == "legendre":
            basis_objs[k] = LegendreBasis(spec[1], domains[k])
        else:
            basis_objs[k] = FixedKernelBasis(spec[2], spec[1], domains[k])
    grids = [[[None] * ranks[k + 1] for _ in range(ranks[k])] for k in range(d)]
    ended = False
    for line in it:
        tok = line.split()
        if tok[0] == "end":
            ended = True
            break
        k, i, j, kind, p = int(tok[0]), int(tok[1]), int(tok[2]), tok[3], int(tok[4])
        theta = np.array([float(t) for t in tok[5:]])
        if theta.size != p:
            raise FormatError(f"entry ({k},{i},{j}) declares {p} values, has {theta.size}")
        if kind == "zero":
            u = ZERO
        elif kind == "one":
            u = ONE
        elif kind == "linear":
            u = Linear(basis_objs[k], theta)
        elif kind == "moving":
            q = p // 2
            u = MovingKernel(theta[:q], theta[q:], widths[k])
        else:
            raise FormatError(f"unknown entry kind {kind!r}")
        grids[k][i][j] = u
    if not ended:
        raise FormatError("model file truncated (no 'end')")
    if any(u is None for g in grids for row in g for u in row):
        raise FormatError("model file is missing core entries")
    cores = tuple(FTCore(tuple(tuple(row) for row in g)) for g in grids)
    return FunctionTrain(cores, tuple(domains[k] for k in range(d))), meta


def save_model(ft: FunctionTrain, path, meta: Optional[Dict] = None) -> None:
    """Write atomically (temporary file + rename)."""
    write_atomic(path, dumps(ft, meta))


def load_model(path) -> Tuple[FunctionTrain, Dict]:
    with open(path) as fh:
        return loads(fh.read())


def write_atomic(path, text: str) -> None:
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
