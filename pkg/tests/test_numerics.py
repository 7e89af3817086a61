"""Linear algebra and RNG determinism, checked against naive oracles."""
import numpy as np
import pytest

from claire.errors import ConditioningError, DegenerateDataError, ShapeError
from claire.numerics import (RngStream, as_matrix, as_vector, column_mean_var, matmul,
                             solve_weighted_least_squares, substream_seed)


def loop_matmul(a, b):
    # independent oracle: textbook triple loop
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def test_matmul_matches_loop_oracle():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 7))
    b = rng.normal(size=(7, 3))
    got = matmul(a, b)
    want = loop_matmul(a, b)
    assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


def test_matmul_hand_values():
    assert np.allclose(matmul(np.eye(2), [[2.0], [3.0]]), [[2.0], [3.0]])
    assert np.allclose(matmul([[1.0, 2.0]], [[3.0], [4.0]]), [[11.0]])


def test_matmul_associativity():
    rng = np.random.default_rng(1)
    a, b, c = rng.normal(size=(4, 6)), rng.normal(size=(6, 5)), rng.normal(size=(5, 3))
    left = matmul(matmul(a, b), c)
    right = matmul(a, matmul(b, c))
    assert np.max(np.abs(left - right)) <= 1e-9 * max(1.0, np.max(np.abs(left)))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match="cannot multiply 2x3 by 4x5"):
        matmul(np.zeros((2, 3)), np.zeros((4, 5)))


def test_as_matrix_rejects_wrong_ndim():
    with pytest.raises(ShapeError):
        as_matrix(np.zeros(3))
    with pytest.raises(ShapeError):
        as_vector(np.zeros((2, 2)))
    assert as_matrix([[1, 2]]).dtype == np.float64


def test_column_mean_var_two_pass_oracle():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(20, 4)) * 3.0 + 1.0
    mean, var = column_mean_var(m)
    for j in range(4):
        col = m[:, j]
        mu = sum(col) / len(col)
        v = sum((c - mu) ** 2 for c in col) / len(col)   # population variance
        assert mean[j] == pytest.approx(mu, rel=1e-12)
        assert var[j] == pytest.approx(v, rel=1e-12)


def test_column_mean_var_hand_case_and_empty():
    mean, var = column_mean_var([[1.0], [3.0]])
    assert mean[0] == pytest.approx(2.0)
    assert var[0] == pytest.approx(1.0)          # population divisor, not n-1
    with pytest.raises(DegenerateDataError):
        column_mean_var(np.zeros((0, 3)))


def test_wls_matches_longdouble_normal_equations():
    rng = np.random.default_rng(3)
    design = rng.normal(size=(50, 6))
    targets = rng.normal(size=50)
    weights = rng.uniform(0.1, 2.0, size=50)
    beta = solve_weighted_least_squares(design, targets, weights)

    dl = design.astype(np.longdouble)
    tl = targets.astype(np.longdouble)
    wl = weights.astype(np.longdouble)
    lhs = dl.T @ (dl * wl[:, None]) + np.longdouble(1e-10) * np.eye(6, dtype=np.longdouble)
    rhs = dl.T @ (tl * wl)
    want = np.linalg.solve(lhs.astype(np.float64), rhs.astype(np.float64))
    assert np.max(np.abs(beta - want)) <= 1e-8 * max(1.0, np.max(np.abs(want)))


def test_wls_multi_target_equals_per_column():
    rng = np.random.default_rng(4)
    design = rng.normal(size=(30, 5))
    targets = rng.normal(size=(30, 3))
    weights = rng.uniform(0.5, 1.5, size=30)
    beta = solve_weighted_least_squares(design, targets, weights)
    assert beta.shape == (5, 3)
    for c in range(3):
        single = solve_weighted_least_squares(design, targets[:, c], weights)
        assert np.allclose(beta[:, c], single, atol=1e-12)


def test_wls_recovers_exact_solution():
    rng = np.random.default_rng(5)
    design = rng.normal(size=(40, 4))
    truth = np.array([2.0, -1.0, 0.5, 3.0])
    targets = design @ truth
    beta = solve_weighted_least_squares(design, targets, np.ones(40))
    assert np.allclose(beta, truth, atol=1e-6)


def test_wls_errors():
    with pytest.raises(ShapeError):
        solve_weighted_least_squares(np.zeros((3, 2)), np.zeros(4), np.ones(3))
    with pytest.raises(ShapeError):
        solve_weighted_least_squares(np.zeros((3, 2)), np.zeros(3), -np.ones(3))
    with pytest.raises(ConditioningError):
        solve_weighted_least_squares(np.full((3, 2), np.nan), np.zeros(3), np.ones(3))


def test_substream_seed_stable_and_distinct():
    assert substream_seed(42, "init") == substream_seed(42, "init")
    names = ["init", "shuffle", "dropout", "corruption", "smo", "shap", "split"]
    seeds = {substream_seed(42, n) for n in names}
    assert len(seeds) == len(names)
    for s in seeds:
        assert 0 <= s < 2**63


def test_rng_stream_determinism():
    a = RngStream(99).normal((10000,))
    b = RngStream(99).normal((10000,))
    assert np.array_equal(a, b)
    c = RngStream(100).normal((10000,))
    assert not np.array_equal(a, c)


def test_rng_stream_spawn_matches_substream_seed():
    root = RngStream(7)
    direct = RngStream(substream_seed(7, "dropout")).uniform((50,))
    spawned = root.spawn("dropout").uniform((50,))
    assert np.array_equal(direct, spawned)


def test_rng_stream_draw_kinds():
    rng = RngStream(11)
    perm = rng.permutation(20)
    assert sorted(perm.tolist()) == list(range(20))
    ints = rng.integers(0, 5, size=1000)
    assert ints.min() >= 0 and ints.max() <= 4
    mask = rng.bernoulli(0.7, (20000,))
    assert set(np.unique(mask)) <= {0.0, 1.0}
    assert abs(mask.mean() - 0.7) < 0.02
    u = rng.uniform((1000,), 2.0, 3.0)
    assert u.min() >= 2.0 and u.max() <= 3.0
