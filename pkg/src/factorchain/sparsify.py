"""Randomized sparsification of the squared-step matrix.

Given nonnegative X with I - X positive definite, produce a sparse
nonnegative X~ with I - X~ close to I - X/2 - X^2/2 in the multiplicative
(Loewner) sense.  Two stages:

  1. an unbiased estimate of X^2 from two-step walks through each midpoint
     vertex, and
  2. effective-resistance subsampling of the averaged matrix, where only
     the off-diagonal (Laplacian) part is resampled and the diagonal
     dominance slack is carried through exactly, so I - X~ stays SDDM and
     X~ stays nonnegative.

Both stages draw from counter-based per-midpoint / per-attempt streams, so
results are reproducible for a given seed regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .errors import (
    DimensionMismatchError,
    InvalidParamsError,
    NotPositiveDefiniteError,
)
from .rng import stream, TAG_MERGE, TAG_WALK
from .sparse import SparseSymMatrix, blend, identity_minus_scaled, square

# dense certification is only attempted below this size
MEASURE_LIMIT = 256

# per-node budget multiplier for the merge-stage keep probabilities;
# empirical, balancing certification noise against output sparsity
MERGE_CONSTANT = 0.5


@dataclass(frozen=True)
class SparsifyParams:
    """Knobs of one sparsified squaring step.

    eps is the multiplicative target for the whole step, allocated
    split : (1 - split) between the walk and merge stages.  mode "auto"
    picks the exact path for n <= exact_threshold; exact_threshold also
    bounds the dense effective-resistance computation in sampled mode.
    samples_per_edge overrides the walk-stage draw count per incident
    entry, merge_oversample the per-node draw count of the merge stage.
    """

    eps: float
    seed: int = 0
    samples_per_edge: int | None = None
    mode: str = "auto"
    exact_threshold: int = 4096
    split: float = 0.5
    merge_oversample: float | None = None
    measure: bool = False

    def __post_init__(self):
        if self.eps <= 0.0:
            raise InvalidParamsError("eps must be positive")
        if self.samples_per_edge is not None and self.samples_per_edge < 1:
            raise InvalidParamsError("samples_per_edge must be >= 1")
        if self.mode not in ("exact", "sampled", "auto"):
            raise InvalidParamsError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.split < 1.0):
            raise InvalidParamsError("split must lie in (0, 1)")
        if self.exact_threshold < 0:
            raise InvalidParamsError("exact_threshold must be nonnegative")


@dataclass(frozen=True)
class SparsifyReport:
    nnz_in: int
    nnz_out: int
    eps_requested: float
    eps_measured: float | None


def use_exact(params: SparsifyParams, n: int) -> bool:
    if params.mode == "exact":
        return True
    if params.mode == "sampled":
        return False
    return n <= params.exact_threshold


def walk_sample_count(params: SparsifyParams, n: int) -> int:
    """Walk-stage draws per incident entry: ceil(9 ln n / eps_w^2)."""
    if params.samples_per_edge is not None:
        return params.samples_per_edge
    eps_w = 2.0 * params.split * params.eps
    return int(math.ceil(9.0 * math.log(max(n, 2)) / eps_w**2))


def merge_sample_count(params: SparsifyParams, n: int) -> int:
    """Merge-stage total draws: n * ceil(C ln n / eps_m^2)."""
    if params.merge_oversample is not None:
        per_node = params.merge_oversample
    else:
        eps_m = 2.0 * (1.0 - params.split) * params.eps
        per_node = MERGE_CONSTANT * math.log(max(n, 2)) / eps_m**2
    return int(math.ceil(per_node * n))


def square_walk_sparsify(x: SparseSymMatrix, params: SparsifyParams) -> SparseSymMatrix:
    """Unbiased sparse estimate of X @ X (exact product in exact mode).

    Sampled mode: for each midpoint w with row sum s_w, each incident
    entry (u, w) spawns k endpoint draws v ~ X_{w,.}/s_w, contributing
    X_{u,w} s_w / k to entry (u, v).  Expectation is X^2 entrywise; the
    realized matrix is symmetrized by averaging with its transpose.
    """
    n = x.n
    if x.nnz == 0:
        return x
    if use_exact(params, n):
        return square(x)
    k = walk_sample_count(params, n)
    csr = x.to_scipy()
    indptr, indices, data = csr.indptr, csr.indices, csr.data
    row_sum = np.asarray(csr.sum(axis=1)).ravel()
    out_r: list[np.ndarray] = []
    out_c: list[np.ndarray] = []
    out_v: list[np.ndarray] = []
    for w in range(n):
        lo, hi = indptr[w], indptr[w + 1]
        deg = hi - lo
        if deg == 0:
            continue
        neigh = indices[lo:hi]
        wts = data[lo:hi]
        s_w = row_sum[w]
        rng = stream(params.seed, TAG_WALK, w)
        draws = rng.choice(deg, size=(deg, k), p=wts / s_w)
        out_r.append(np.repeat(neigh, k))
        out_c.append(neigh[draws.ravel()])
        out_v.append(np.repeat(wts * (s_w / k), k))
    est = sp.coo_matrix(
        (np.concatenate(out_v), (np.concatenate(out_r), np.concatenate(out_c))),
        shape=(n, n),
    ).tocsr()
    return SparseSymMatrix._from_scipy_upper(0.5 * (est + est.T))


def _edge_columns(n: int, eu: np.ndarray, ev: np.ndarray, w: np.ndarray,
                  sigma: np.ndarray) -> sp.csc_matrix:
    """B with B B^T = Laplacian(eu, ev, w) + diag(sigma)."""
    m = eu.size
    rows = np.concatenate([eu, ev, np.arange(n)])
    cols = np.concatenate([np.arange(m), np.arange(m), m + np.arange(n)])
    sw = np.sqrt(w)
    vals = np.concatenate([sw, -sw, np.sqrt(np.maximum(sigma, 0.0))])
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, m + n))


def _effective_resistances(m_tilde: SparseSymMatrix, eu: np.ndarray, ev: np.ndarray,
                           w: np.ndarray, sigma: np.ndarray, exact: bool,
                           seed: int) -> np.ndarray:
    """R_e = b_e^T M~^{-1} b_e for each edge; sketched when not exact."""
    if exact:
        inv = np.linalg.inv(m_tilde.to_dense())
        return inv[eu, eu] + inv[ev, ev] - 2.0 * inv[eu, ev]
    # R_e = ||B^T M~^{-1} b_e||^2; project B^T to O(log n) rows
    n = m_tilde.n
    b = _edge_columns(n, eu, ev, w, sigma)
    t = max(16, int(math.ceil(8.0 * math.log(max(n, 2)))))
    g = stream(seed, TAG_MERGE, 0x5E7C).standard_normal((b.shape[1], t))
    probes = b @ (g / math.sqrt(t))
    a = m_tilde.to_scipy()
    precond = sp.diags(1.0 / a.diagonal())
    z = np.empty((n, t))
    for j in range(t):
        zj, info = scipy.sparse.linalg.cg(a, probes[:, j], M=precond,
                                          rtol=1e-10, atol=0.0, maxiter=2000)
        z[:, j] = zj
    diff = z[eu, :] - z[ev, :]
    return np.sum(diff * diff, axis=1)


def average_and_sparsify(x: SparseSymMatrix, xp: SparseSymMatrix,
                         params: SparsifyParams) -> SparseSymMatrix:
    """Resistance-subsample the average T = X/2 + Xp/2.

    I - T decomposes as Laplacian(edge weights T_uv) + diag(slack); only
    the edge part is resampled, with keep probabilities proportional to
    weight x effective resistance (capped at 1) and kept edges reweighted
    to stay unbiased.  The slack passes through exactly, which pins the
    row sums of I - X~ and keeps X~ nonnegative as long as no sampled row
    overshoots its diagonal budget; overshoot triggers deterministic
    retries with doubled budget, which degrade gracefully toward the
    exact average.
    """
    if x.n != xp.n:
        raise DimensionMismatchError("average_and_sparsify: dimension mismatch")
    t_avg = blend(x, xp, 0.5, 0.5)
    n = t_avg.n
    if use_exact(params, n):
        return t_avg
    sigma = 1.0 - t_avg.row_sums()
    if n and sigma.min() <= 0.0:
        raise NotPositiveDefiniteError(
            f"dominance slack {sigma.min():.3e} is not positive"
        )
    off = t_avg.rows != t_avg.cols
    eu, ev, w = t_avg.rows[off], t_avg.cols[off], t_avg.vals[off]
    if n <= 2 or eu.size <= 2:
        return t_avg
    m_tilde = identity_minus_scaled(1.0, t_avg)
    r_eff = _effective_resistances(
        m_tilde, eu, ev, w, sigma, n <= params.exact_threshold, params.seed
    )
    scores = w * np.maximum(r_eff, 0.0)
    scores = np.maximum(scores, 1e-12 * scores.max())
    probs = scores / scores.sum()
    diag_budget = 1.0 - sigma  # = rowsum(T), the most a row may carry
    q0 = merge_sample_count(params, n)
    diag_idx = np.arange(n)
    # Bernoulli leverage sampling: edges with q*p >= 1 pass through exactly,
    # the light tail is kept with probability q*p and reweighted 1/(q*p).
    # Only the tail fluctuates, so rows rarely overshoot their budget; a
    # doubled q pushes more edges into the exact regime, and once every
    # keep probability saturates the draw reproduces T and must succeed.
    for attempt in range(8):
        q = q0 << attempt
        pi = np.minimum(1.0, q * probs)
        keep = stream(params.seed, TAG_MERGE, attempt).random(pi.size) < pi
        w_hat = w[keep] / pi[keep]
        carried = np.zeros(n)
        np.add.at(carried, eu[keep], w_hat)
        np.add.at(carried, ev[keep], w_hat)
        new_diag = diag_budget - carried
        if new_diag.min() >= 0.0:
            return SparseSymMatrix.from_entries(
                n,
                np.concatenate([eu[keep], diag_idx]),
                np.concatenate([ev[keep], diag_idx]),
                np.concatenate([w_hat, new_diag]),
            )
    return t_avg


def sparsify_square_step(x: SparseSymMatrix,
                         params: SparsifyParams) -> tuple[SparseSymMatrix, SparsifyReport]:
    """One chain step: X~ with I - X~ approximating I - X/2 - X^2/2.

    Stage errors add, so each stage targets its share of eps.  Exact mode
    returns X/2 + X^2/2 itself (measured error identically zero).
    """
    xp = square_walk_sparsify(x, params)
    xt = average_and_sparsify(x, xp, params)
    if use_exact(params, x.n):
        measured: float | None = 0.0
    elif params.measure and x.n <= MEASURE_LIMIT:
        measured = measure_step(x, xt)
    else:
        measured = None
    report = SparsifyReport(
        nnz_in=x.nnz, nnz_out=xt.nnz,
        eps_requested=params.eps, eps_measured=measured,
    )
    return xt, report


def measure_step(x: SparseSymMatrix, xt: SparseSymMatrix) -> float:
    """Dense log-generalized-eigenvalue width of (I - X~, I - X/2 - X^2/2)."""
    from .oracle import loewner_check

    xd = x.to_dense()
    eye = np.eye(x.n)
    target = eye - 0.5 * xd - 0.5 * (xd @ xd)
    return loewner_check(eye - xt.to_dense(), target, math.inf).eps_measured
