import os

import numpy as np
import pytest

from ftregress.errors import FormatError
from ftregress.ftcore import FTCore, FunctionTrain, linear_ft, moving_kernel_ft
from ftregress.serialize import dumps, load_model, loads, save_model
from ftregress.univariate import ONE, ZERO, FixedKernelBasis, LegendreBasis, Linear

from conftest import random_ft


def _same(a, b, X):
    assert a.ranks == b.ranks
    assert a.domains == b.domains
    np.testing.assert_array_equal(a.params, b.params)
    np.testing.assert_array_equal(a.predict(X), b.predict(X))


def test_round_trip_legendre(rng, tmp_path):
    doms = ((0.0, 2.0), (-3.0, 1.5), (-1.0, 1.0))
    ft = linear_ft([1, 3, 2, 1], [LegendreBasis(4, dm) for dm in doms])
    ft = ft.with_params(rng.normal(size=ft.n_params) * 1e3)
    path = tmp_path / "m.ft"
    save_model(ft, path, {"note": "hello", "stats": [1.5, 2]})
    back, meta = load_model(path)
    X = np.column_stack([rng.uniform(a, b, 50) for a, b in doms])
    _same(ft, back, X)
    assert meta == {"note": "hello", "stats": [1.5, 2]}


def test_round_trip_kernels_and_constants(rng):
    dom = (-1.0, 1.0)
    kb = FixedKernelBasis((-0.5, 0.1, 0.7), 0.37, dom)
    cores = (
        FTCore(((Linear(kb, rng.normal(size=3)), ONE),)),
        FTCore(((ZERO,), (Linear(kb, rng.normal(size=3)),))),
    )
    ft = FunctionTrain(cores, (dom, dom))
    X = rng.uniform(-1, 1, (40, 2))
    _same(ft, loads(dumps(ft))[0], X)

    mk = moving_kernel_ft([1, 2, 1], [np.array([-0.2, 0.4])] * 2, [0.6, 0.3], (dom, dom))
    mk = mk.with_params(rng.normal(size=mk.n_params))
    _same(mk, loads(dumps(mk))[0], X)


def test_bit_exact_awkward_floats(rng):
    ft = random_ft(rng, 3, [1, 2, 2, 1], kinds=("linear",), p_range=(5, 5))
    theta = ft.params.copy()
    theta[:4] = [np.nextafter(1.0, 2.0), 1e-310, -0.0, 1 / 3]
    ft = ft.with_params(theta)
    back, _ = loads(dumps(ft))
    assert back.params.tobytes() == ft.params.tobytes()


def test_version_mismatch(rng):
    text = dumps(random_ft(rng, 2, [1, 1, 1], kinds=("linear",), p_range=(5, 5)))
    bad = text.replace("ftregress-model 1", "ftregress-model 2", 1)
    with pytest.raises(FormatError, match="version"):
        loads(bad)


@pytest.mark.parametrize("mutate", [
    lambda t: "",
    lambda t: "garbage\n" + t,
    lambda t: t.replace("end\n", ""),
    lambda t: "\n".join(ln for ln in t.splitlines() if not ln.startswith("1 0 0")),
    lambda t: t.replace("entries", "entries\n0 0 0 linear 5 1.0", 1),
])
def test_malformed_files(rng, mutate):
    text = dumps(linear_ft([1, 1, 1], [LegendreBasis(2)] * 2))
    with pytest.raises(FormatError):
        loads(mutate(text))


def test_atomic_write_leaves_old_file_on_failure(rng, tmp_path, monkeypatch):
    ft = random_ft(rng, 2, [1, 2, 1], kinds=("linear",), p_range=(5, 5))
    path = tmp_path / "m.ft"
    save_model(ft, path)
    before = path.read_bytes()

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        save_model(ft.with_params(ft.params + 1), path)
    assert path.read_bytes() == before
    assert [p.name for p in tmp_path.iterdir()] == ["m.ft"]
