import numpy as np
import pytest
from scipy import stats

from ftregress.bench import (
    OTL_BOUNDS, WING_BOUNDS, StudySpec, get_function, otl_circuit, relative_squared_error, rows_to_csv,
    run_study, sample_uniform, sine_of_sums, summarize, wing_weight,
)
from ftregress.errors import ConfigError, FTError, InputError

# frozen from a separate scalar transcription of the two formulas
OTL_MID = 5.310616942188329
WING_MID = 267.6246925704357


def _mid(bounds):
    return np.array([(a + b) / 2 for a, b in bounds])


def test_golden_midpoints():
    assert otl_circuit(_mid(OTL_BOUNDS)) == pytest.approx(OTL_MID, rel=1e-14)
    assert wing_weight(_mid(WING_BOUNDS)) == pytest.approx(WING_MID, rel=1e-14)


def test_otl_depends_on_beta_times_rc2_plus_nine(rng):
    X = sample_uniform(OTL_BOUNDS, 200, rng.integers(1 << 30))
    X[:, 5] = np.clip(X[:, 5], 60, 280)
    s = 1.05
    Y = X.copy()
    Y[:, 5] = X[:, 5] * s
    Y[:, 4] = (X[:, 4] + 9.0) / s - 9.0
    ok = (Y[:, 4] >= 0.25) & (Y[:, 5] <= 300)
    np.testing.assert_allclose(otl_circuit(Y[ok]), otl_circuit(X[ok]), rtol=1e-14)


def test_otl_increases_with_rb2():
    x = _mid(OTL_BOUNDS)
    vals = []
    for rb2 in np.linspace(25, 70, 10):
        x[1] = rb2
        vals.append(otl_circuit(x))
    assert np.all(np.diff(vals) > 0)


def test_out_of_bounds_rejected():
    x = _mid(OTL_BOUNDS)
    x[0] = 10.0
    with pytest.raises(InputError):
        otl_circuit(x)
    with pytest.raises(InputError):
        wing_weight(np.zeros(3))


def test_wing_positive():
    X = sample_uniform(WING_BOUNDS, 100_000, 5)
    assert np.all(wing_weight(X) > 0)


def test_wing_product_term_is_log_additive(rng):
    X = sample_uniform(WING_BOUNDS, 1000, 6)
    sw, wfw, a, lam, q, taper, tc, nz, wdg, wp = X.T
    c = np.cos(lam * np.pi / 180)
    logs = (np.log(0.036) + 0.758 * np.log(sw) + 0.0035 * np.log(wfw) + 0.6 * (np.log(a) - 2 * np.log(c))
            + 0.006 * np.log(q) + 0.04 * np.log(taper) - 0.3 * (np.log(100 * tc) - np.log(c))
            + 0.49 * (np.log(nz) + np.log(wdg)))
    np.testing.assert_allclose(np.log(wing_weight(X) - sw * wp), logs, rtol=0, atol=1e-12)


def test_sine_of_sums_values():
    assert sine_of_sums(np.zeros(6)) == 0.0
    assert sine_of_sums(np.full(6, np.pi / 12)) == pytest.approx(1.0, abs=1e-15)


def test_sine_of_sums_rank_two_chain(rng):
    X = rng.uniform(-1, 1, (1000, 6))
    out = np.empty(1000)
    for n, x in enumerate(X):
        v = np.array([[np.sin(x[0]), np.cos(x[0])]])
        for xk in x[1:-1]:
            v = v @ np.array([[np.cos(xk), -np.sin(xk)], [np.sin(xk), np.cos(xk)]])
        out[n] = (v @ np.array([[np.cos(x[-1])], [np.sin(x[-1])]]))[0, 0]
    np.testing.assert_allclose(sine_of_sums(X), out, atol=1e-12)


def test_sample_uniform():
    x = sample_uniform(OTL_BOUNDS, 1, 0)
    assert x.shape == (1, 6)
    assert all(a <= v <= b for v, (a, b) in zip(x[0], OTL_BOUNDS))
    np.testing.assert_array_equal(sample_uniform(OTL_BOUNDS, 50, 3), sample_uniform(OTL_BOUNDS, 50, 3))
    X = sample_uniform(WING_BOUNDS, 10_000, 11)
    for k, (a, b) in enumerate(WING_BOUNDS):
        assert stats.kstest(X[:, k], "uniform", args=(a, b - a)).statistic < 0.05
    with pytest.raises(ConfigError):
        sample_uniform(((0.0, 0.0),), 5, 0)
    with pytest.raises(ConfigError):
        sample_uniform(OTL_BOUNDS, 0, 0)


def test_relative_error_definition(rng):
    fn = get_function("otl")
    assert relative_squared_error(fn, fn, n_val=500) == 0.0
    X = sample_uniform(fn.bounds, 20_000, 1)
    y = fn(X)
    mean = lambda Z: np.full(len(Z), y.mean())
    assert relative_squared_error(mean, (X, y)) == pytest.approx(1.0, abs=1e-12)
    assert relative_squared_error(mean, fn, n_val=20_000, seed=2) == pytest.approx(1.0, abs=0.03)
    pred = lambda Z: fn(Z) * 1.01 + 0.02
    direct = np.sum((pred(X) - y) ** 2) / np.sum((y - y.mean()) ** 2)
    assert relative_squared_error(pred, (X, y)) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(FTError):
        relative_squared_error(mean, (X, np.ones(len(X))))


def test_single_cell_study():
    spec = StudySpec("sinsum", [40], realizations=1, optimizers=("aao",), rank=1, p=2, n_val=200)
    rows = run_study(spec)
    assert len(rows) == 1
    assert rows[0]["n"] == 40 and rows[0]["optimizer"] == "aao"
    assert np.isfinite(rows[0]["rel_sq_error"])


def test_summary_of_constants():
    rows = [{"function": "f", "optimizer": "aao", "rank": 2, "p": 3, "n": 10, "realization": i,
             "rel_sq_error": 0.25} for i in range(7)]
    (out,) = summarize(rows)
    assert out["count"] == 7
    assert out["q25"] == out["q50"] == out["q75"] == 0.25


def test_failed_cells_are_recorded(monkeypatch):
    import ftregress.bench as bench

    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("boom")

    monkeypatch.setattr(bench, "fit_model", broken)
    rows = run_study(StudySpec("sinsum", [20], realizations=2, optimizers=("aao",), n_val=50))
    assert len(rows) == 2 and all(np.isnan(r["rel_sq_error"]) for r in rows)


def _strip_seconds(csv_text):
    return [ln.rsplit(",", 1)[0] for ln in csv_text.splitlines()]


def test_study_bit_reproducible():
    spec = StudySpec("otl", [30, 60], realizations=2, optimizers=("aao", "als"), rank=2, p=3, n_val=300,
                     seed=4)
    a = _strip_seconds(rows_to_csv(run_study(spec)))
    b = _strip_seconds(rows_to_csv(run_study(spec)))
    c = _strip_seconds(rows_to_csv(run_study(spec, workers=2)))
    assert a == b == c
    assert a[0] == "function,optimizer,rank,p,n,realization,rel_sq_error"


@pytest.mark.slow
def test_otl_gradient_beats_als_at_small_n():
    spec = StudySpec("otl", [200, 400], realizations=20, optimizers=("aao", "als"), rank=4, p=9, seed=0)
    rows = run_study(spec)
    for summary in [s for s in summarize(rows) if s["optimizer"] == "aao"]:
        als = next(s for s in summarize(rows) if s["optimizer"] == "als" and s["n"] == summary["n"])
        assert summary["q50"] <= als["q50"] / 10
