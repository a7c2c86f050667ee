import math

import numpy as np
import pytest

from factorchain import (
    InvalidParamsError,
    NotPositiveDefiniteError,
    SparseSymMatrix,
    SparsifyParams,
    average_and_sparsify,
    grid2d,
    loewner_check,
    normalize,
    path_graph,
    random_sddm,
    sparsify_square_step,
    square_walk_sparsify,
    validate_sddm,
)
from factorchain.sparse import blend, identity, square
from factorchain.sparsify import (
    measure_step,
    merge_sample_count,
    use_exact,
    walk_sample_count,
)


def split_of(m):
    return normalize(m, validate_sddm(m))


def measured_eps(approx, target):
    n = approx.n
    a = np.eye(n) - approx.to_dense()
    b = np.eye(n) - target.to_dense()
    return loewner_check(a, b, math.inf).eps_measured


# ------------------------------------------------------------------ params


def test_params_reject_nonpositive_eps():
    with pytest.raises(InvalidParamsError):
        SparsifyParams(eps=0.0)


def test_params_reject_zero_oversampling():
    with pytest.raises(InvalidParamsError):
        SparsifyParams(eps=0.5, samples_per_edge=0)


def test_params_reject_unknown_mode():
    with pytest.raises(InvalidParamsError):
        SparsifyParams(eps=0.5, mode="sometimes")


def test_walk_sample_count_default_formula():
    p = SparsifyParams(eps=0.5, split=0.5)
    n = 100
    assert walk_sample_count(p, n) == math.ceil(9.0 * math.log(n) / 0.25)


def test_walk_sample_count_override():
    p = SparsifyParams(eps=0.5, samples_per_edge=17)
    assert walk_sample_count(p, 1000) == 17


def test_mode_selection():
    assert use_exact(SparsifyParams(eps=0.5, mode="exact"), 10)
    assert not use_exact(SparsifyParams(eps=0.5, mode="sampled"), 10)


# --------------------------------------------------------------- walk step


def test_walk_empty_matrix_stays_empty():
    x = SparseSymMatrix.from_dense(np.zeros((4, 4)))
    out = square_walk_sparsify(x, SparsifyParams(eps=0.5, mode="sampled"))
    assert out.nnz == 0


def test_walk_exact_mode_hand_square():
    x = SparseSymMatrix.from_dense(np.array([[0.0, 0.5], [0.5, 0.0]]))
    out = square_walk_sparsify(x, SparsifyParams(eps=0.5, mode="exact"))
    assert np.allclose(out.to_dense(), np.diag([0.25, 0.25]), atol=0)


def test_walk_sampled_path32_certifies_half_eps():
    split = split_of(path_graph(32))
    params = SparsifyParams(eps=0.5, seed=0, samples_per_edge=200, mode="sampled")
    xp = square_walk_sparsify(split.X, params)
    assert xp.min_value() >= 0.0
    assert measured_eps(xp, square(split.X)) <= 0.25


def test_walk_deterministic_per_seed():
    split = split_of(grid2d(4))
    p = SparsifyParams(eps=0.5, seed=3, mode="sampled")
    a = square_walk_sparsify(split.X, p)
    b = square_walk_sparsify(split.X, p)
    assert a.same_entries(b)
    assert np.array_equal(a.vals, b.vals)
    c = square_walk_sparsify(split.X, SparsifyParams(eps=0.5, seed=4, mode="sampled"))
    assert not (a.same_entries(c) and np.array_equal(a.vals, c.vals))


def test_walk_unbiased_over_many_repetitions():
    # sample mean of the two-step walk estimate converges to X^2 entrywise
    split = split_of(random_sddm(8, seed=5))
    exact = square(split.X).to_dense()
    reps = 10_000
    acc = np.zeros((8, 8))
    acc2 = np.zeros((8, 8))
    for r in range(reps):
        p = SparsifyParams(eps=0.5, seed=r, samples_per_edge=4, mode="sampled")
        d = square_walk_sparsify(split.X, p).to_dense()
        acc += d
        acc2 += d * d
    mean = acc / reps
    var = np.maximum(acc2 / reps - mean**2, 0.0)
    se = np.sqrt(var / reps)
    dev = np.abs(mean - exact)
    assert np.all(dev <= 3.0 * se + 1e-12)


# -------------------------------------------------------------- merge step


def test_average_identical_inputs_exact_mode_is_identity():
    split = split_of(grid2d(4))
    out = average_and_sparsify(split.X, split.X,
                               SparsifyParams(eps=0.5, mode="exact"))
    assert np.allclose(out.to_dense(), split.X.to_dense(), atol=0)


def test_average_exact_mode_is_plain_blend():
    split = split_of(grid2d(4))
    xp = square(split.X)
    out = average_and_sparsify(split.X, xp, SparsifyParams(eps=0.5, mode="exact"))
    assert np.allclose(out.to_dense(), blend(split.X, xp).to_dense(), atol=0)


def test_average_sampled_grid64_reduces_and_certifies():
    split = split_of(grid2d(8))
    xp = square(split.X)
    t_avg = blend(split.X, xp)
    out = average_and_sparsify(split.X, xp,
                               SparsifyParams(eps=0.5, seed=0, mode="sampled"))
    assert out.min_value() >= 0.0
    assert out.nnz < t_avg.nnz
    assert measured_eps(out, t_avg) <= 0.25


def test_average_rejects_exhausted_slack():
    # row sums of 1 leave no diagonal slack: I - X is singular
    x = SparseSymMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(NotPositiveDefiniteError):
        average_and_sparsify(x, x, SparsifyParams(eps=0.5, mode="sampled"))


def test_merge_sample_count_grows_with_n():
    p = SparsifyParams(eps=0.5)
    assert merge_sample_count(p, 400) > merge_sample_count(p, 100)


# --------------------------------------------------------------- full step


def test_step_diagonal_case_no_sampling_error():
    alpha = 0.4
    x = SparseSymMatrix.from_dense(alpha * np.eye(5))
    out, report = sparsify_square_step(x, SparsifyParams(eps=0.5, seed=1,
                                                         mode="sampled"))
    expect = (alpha / 2.0 + alpha**2 / 2.0) * np.eye(5)
    assert np.max(np.abs(out.to_dense() - expect)) <= 1e-14
    assert report.nnz_out == out.nnz


def test_step_exact_mode_equals_average():
    split = split_of(grid2d(4))
    out, report = sparsify_square_step(split.X, SparsifyParams(eps=0.5,
                                                               mode="exact"))
    expect = blend(split.X, square(split.X))
    assert np.allclose(out.to_dense(), expect.to_dense(), atol=0)
    assert report.eps_measured == 0.0


def test_step_random_sddm_within_requested_eps():
    split = split_of(random_sddm(48, seed=9))
    eps = 0.3
    out, report = sparsify_square_step(split.X, SparsifyParams(eps=eps, seed=2,
                                                               mode="sampled"))
    target = blend(split.X, square(split.X))
    assert out.min_value() >= 0.0
    assert measured_eps(out, target) <= eps
    assert report.eps_requested == eps


def test_step_measure_flag_populates_report():
    split = split_of(grid2d(4))
    out, report = sparsify_square_step(
        split.X, SparsifyParams(eps=0.5, seed=0, mode="sampled", measure=True))
    assert report.eps_measured is not None
    assert report.eps_measured == pytest.approx(
        measure_step(split.X, out), abs=1e-12)


def test_step_deterministic_per_seed():
    split = split_of(grid2d(5))
    p = SparsifyParams(eps=0.5, seed=11, mode="sampled")
    a, _ = sparsify_square_step(split.X, p)
    b, _ = sparsify_square_step(split.X, p)
    assert a.same_entries(b) and np.array_equal(a.vals, b.vals)


def test_step_nonnegative_across_seeds():
    split = split_of(random_sddm(30, seed=1))
    for seed in range(6):
        out, _ = sparsify_square_step(
            split.X, SparsifyParams(eps=0.5, seed=seed, mode="sampled"))
        assert out.min_value() >= 0.0


def test_identity_matrix_helper():
    assert np.array_equal(identity(3).to_dense(), np.eye(3))
