import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftregress.errors import ConfigError, InputError
from ftregress.ftcore import (
    FTCore, FunctionTrain, additive_ft, core_eval, coregrad_left, coregrad_right, ft_eval,
    ft_eval_batch, ft_eval_grad, ft_jacobian, ftc_to_ft, linear_ft, pack_params, param_index,
    unpack_params,
)
from ftregress.univariate import ONE, ZERO, Constant, LegendreBasis, Linear, MovingKernel, eval_uni, grad_uni, legendre

from conftest import central_diff, random_ft

SQRT3 = np.sqrt(3.0)


def test_core_eval_constant():
    assert core_eval(FTCore(((ONE,),)), 0.123).tolist() == [[1.0]]


def test_core_eval_row_with_constant():
    core = FTCore(((legendre(1, [0.0, 1.0]), ONE),))
    np.testing.assert_allclose(core_eval(core, 0.5), [[SQRT3 * 0.5, 1.0]], rtol=1e-15)


def test_core_eval_matches_entries(rng):
    ft = random_ft(rng, 3, [1, 3, 4, 1])
    core = ft.cores[1]
    mat = core_eval(core, 0.3)
    assert mat.shape == (3, 4)
    for i, j, u in core:
        assert mat[i, j] == eval_uni(u, 0.3)


def test_ft_eval_scalar_product():
    cores = tuple(FTCore(((Constant(v),),)) for v in (2.0, 3.0, 5.0))
    assert ft_eval(FunctionTrain(cores), [0.1, 0.2, 0.3]) == 30.0


def test_additive_ft_sums(rng):
    fs = [legendre(3, rng.normal(size=4)) for _ in range(5)]
    ft = additive_ft(fs)
    X = rng.uniform(-1, 1, (1000, 5))
    direct = sum(f(X[:, k]) for k, f in enumerate(fs))
    np.testing.assert_allclose(ft.predict(X), direct, rtol=0, atol=1e-13)
    x = X[0]
    assert ft_eval(ft, x) == pytest.approx(sum(f(x[k]) for k, f in enumerate(fs)), abs=1e-14)


def test_additive_of_ones_is_two():
    ft = additive_ft([ONE, ONE])
    assert ft_eval(ft, [0.3, -0.7]) == 2.0


def test_additive_slot_count():
    fs = [legendre(4) for _ in range(4)]
    assert additive_ft(fs).n_params == 4 * 5


def test_ft_eval_matches_triple_sum(rng):
    ft = linear_ft([1, 2, 3, 1], [LegendreBasis(2)] * 3)
    ft = ft.with_params(rng.normal(size=ft.n_params))
    F = [[[ft.cores[k].entries[i][j] for j in range(ft.cores[k].shape[1])]
          for i in range(ft.cores[k].shape[0])] for k in range(3)]
    for _ in range(20):
        x = rng.uniform(-1, 1, 3)
        total = 0.0
        for a in range(2):
            for b in range(3):
                total += F[0][0][a](x[0]) * F[1][a][b](x[1]) * F[2][b][0](x[2])
        assert ft_eval(ft, x) == pytest.approx(total, rel=1e-13, abs=1e-14)


def test_coregrad_left_unit_multiplier(rng):
    ft = random_ft(rng, 2, [1, 3, 1])
    core = ft.cores[0]
    part = coregrad_left(core, 0.2, [1.0])
    expected = np.concatenate([grad_uni(u, 0.2) for _, _, u in core])
    np.testing.assert_array_equal(part.values, expected)


def test_coregrad_left_zero_multiplier(rng):
    core = random_ft(rng, 3, [1, 2, 3, 1]).cores[1]
    assert not np.any(coregrad_left(core, 0.4, np.zeros(2)).values)


def test_coregrad_left_definition(rng):
    core = random_ft(rng, 3, [1, 3, 2, 1]).cores[1]
    a = rng.normal(size=3)
    part = coregrad_left(core, -0.1, a)
    s = 0
    for i, j, u in core:
        g = grad_uni(u, -0.1)
        np.testing.assert_array_equal(part.values[s:s + g.size], a[i] * g)
        assert set(part.rows[s:s + g.size]) <= {i} and set(part.cols[s:s + g.size]) <= {j}
        s += g.size


def test_coregrad_left_length_mismatch(rng):
    core = random_ft(rng, 3, [1, 3, 2, 1]).cores[1]
    with pytest.raises(ValueError):
        coregrad_left(core, 0.0, np.ones(2))


def test_coregrad_right_identity_and_zero(rng):
    core = random_ft(rng, 2, [1, 1, 1]).cores[0]
    part = coregrad_left(core, 0.3, [1.0])
    np.testing.assert_array_equal(coregrad_right(part, [1.0]).values, part.values)
    assert not np.any(coregrad_right(part, [0.0]).values)


def test_core_gradient_composition_matches_matrix_products(rng):
    """F_<k dF_k/dtheta F_>k for every slot, computed from dense matrices."""
    ft = random_ft(rng, 4, [1, 2, 3, 2, 1])
    x = rng.uniform(-1, 1, 4)
    mats = [core_eval(c, xk) for c, xk in zip(ft.cores, x)]
    _, grad = ft_eval_grad(ft, x)
    s = 0
    for k, core in enumerate(ft.cores):
        left = np.linalg.multi_dot([np.ones((1, 1))] + mats[:k] + [np.eye(core.shape[0])])
        right = np.linalg.multi_dot([np.eye(core.shape[1])] + mats[k + 1:] + [np.ones((1, 1))])
        a = left.reshape(-1)
        part = coregrad_right(coregrad_left(core, x[k], a), right.reshape(-1))
        for i, j, u in core:
            for g in grad_uni(u, x[k]):
                dense = np.zeros(core.shape)
                dense[i, j] = g
                # one nonzero entry per slot partial
                assert np.count_nonzero(dense) <= 1
                expect = float((left @ dense @ right)[0, 0])
                assert grad[s] == pytest.approx(expect, rel=1e-12, abs=1e-14)
                assert part.values[s - sum(c.n_params for c in ft.cores[:k])] == pytest.approx(expect, rel=1e-12, abs=1e-14)
                s += 1
    assert s == ft.n_params


def test_rank_one_product_rule(rng):
    u1 = legendre(3, rng.normal(size=4))
    u2 = legendre(2, rng.normal(size=3))
    ft = FunctionTrain((FTCore(((u1,),)), FTCore(((u2,),))))
    x = np.array([0.3, -0.6])
    _, grad = ft_eval_grad(ft, x)
    np.testing.assert_allclose(grad[:4], grad_uni(u1, x[0]) * u2(x[1]), rtol=1e-14)
    np.testing.assert_allclose(grad[4:], u1(x[0]) * grad_uni(u2, x[1]), rtol=1e-14)


def test_ft_eval_grad_value_bit_exact(rng):
    for _ in range(20):
        ft = random_ft(rng, 4, [1, 3, 2, 2, 1])
        x = rng.uniform(-1, 1, 4)
        assert ft_eval_grad(ft, x)[0] == ft_eval(ft, x)


def test_ft_eval_grad_matches_finite_difference(rng):
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 7))
        ranks = [1] + list(rng.integers(1, 5, size=d - 1)) + [1]
        ft = random_ft(rng, d, ranks)
        x = rng.uniform(-1, 1, d)
        _, g = ft_eval_grad(ft, x)
        fd = central_diff(lambda th: ft_eval(ft.with_params(th), x), ft.params)
        worst = max(worst, np.max(np.abs(g - fd)) / (1 + np.max(np.abs(g))))
    assert worst < 1e-6


def test_batch_path_matches_per_point(rng):
    ft = random_ft(rng, 4, [1, 2, 3, 2, 1])
    X = rng.uniform(-1, 1, (30, 4))
    vals = ft_eval_batch(ft, X)
    jac = ft_jacobian(ft, X)
    for n, x in enumerate(X):
        v, g = ft_eval_grad(ft, x)
        assert vals[n] == pytest.approx(v, rel=1e-13, abs=1e-14)
        np.testing.assert_allclose(jac[n], g, rtol=1e-12, atol=1e-13)


def test_ftc_single_dimension():
    theta = np.array([0.5, -1.0, 2.0])
    ft = ftc_to_ft([theta.reshape(1, 3, 1)], [LegendreBasis(2)])
    u = ft.cores[0].entries[0][0]
    assert isinstance(u, Linear)
    np.testing.assert_array_equal(u.params, theta)


def test_ftc_zero_cores():
    cores = [np.zeros((1, 3, 2)), np.zeros((2, 3, 1))]
    ft = ftc_to_ft(cores, [LegendreBasis(2)] * 2)
    assert ft_eval(ft, [0.2, 0.9]) == 0.0


def test_ftc_matches_tensor_product_sum(rng):
    bases = [LegendreBasis(2)] * 3
    G = [rng.normal(size=s) for s in [(1, 3, 2), (2, 3, 2), (2, 3, 1)]]
    ft = ftc_to_ft(G, bases)
    for _ in range(100):
        x = rng.uniform(-1, 1, 3)
        phis = [b.evaluate(np.array([xk]))[0] for b, xk in zip(bases, x)]
        total = 0.0
        for l1, l2, l3 in itertools.product(range(3), repeat=3):
            coef = (G[0][:, l1, :] @ G[1][:, l2, :] @ G[2][:, l3, :])[0, 0]
            total += coef * phis[0][l1] * phis[1][l2] * phis[2][l3]
        assert ft_eval(ft, x) == pytest.approx(total, rel=1e-12, abs=1e-14)


def test_ftc_rejects_bad_shapes():
    with pytest.raises(InputError):
        ftc_to_ft([np.zeros((1, 3, 2)), np.zeros((3, 3, 1))], [LegendreBasis(2)] * 2)


def test_empty_parameter_vector():
    ft = additive_ft([ONE, ZERO, ONE])
    assert pack_params(ft).size == 0
    assert ft_eval_grad(ft, [0.0, 0.0, 0.0])[1].size == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_pack_unpack_round_trip(d, r, seed):
    g = np.random.default_rng(seed)
    ft = random_ft(g, d, [1] + [r] * (d - 1) + [1])
    theta = pack_params(ft)
    back = unpack_params(ft, theta)
    np.testing.assert_array_equal(pack_params(back), theta)
    x = g.uniform(-1, 1, d)
    assert ft_eval(back, x) == ft_eval(ft, x)


def test_permuting_parameters_changes_value(rng):
    ft = random_ft(rng, 3, [1, 2, 2, 1], kinds=("linear",))
    theta = ft.params
    x = rng.uniform(-1, 1, 3)
    base = ft_eval(ft, x)
    for _ in range(20):
        perm = rng.permutation(theta.size)
        if np.array_equal(perm, np.arange(theta.size)):
            continue
        assert ft_eval(ft.with_params(theta[perm]), x) != base


def test_parameter_order_is_core_row_col_slot(rng):
    ft = random_ft(rng, 3, [1, 2, 2, 1])
    idx = param_index(ft)
    assert len(idx) == ft.n_params
    assert idx == sorted(idx)


def test_rank_chain_validation():
    u = legendre(1, [1.0, 1.0])
    with pytest.raises(ConfigError):
        FunctionTrain((FTCore(((u, u),)), FTCore(((u,),))))
    with pytest.raises(ConfigError):
        linear_ft([1, 2, 2], [LegendreBasis(1)] * 2)


def test_wrong_point_dimension(rng):
    ft = random_ft(rng, 3, [1, 2, 2, 1])
    with pytest.raises(InputError):
        ft_eval(ft, [0.0, 0.0])
    with pytest.raises(InputError):
        ft.predict(np.zeros((4, 2)))


def test_moving_kernel_entries_in_train(rng):
    u = MovingKernel([1.0, 2.0], [0.0, 0.5], 0.7)
    v = legendre(2, [1.0, 0.0, 0.5])
    ft = FunctionTrain((FTCore(((u,),)), FTCore(((v,),))))
    assert ft_eval(ft, [0.1, 0.2]) == pytest.approx(u(0.1) * v(0.2), rel=1e-15)
