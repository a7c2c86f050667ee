"""Test-instance generators.

Each generator returns a graph Laplacian plus a positive diagonal slack,
which is the canonical way to get an SDDM matrix with a controlled
condition number.  sdd_mixed instead flips some edge signs to produce a
matrix that is strictly diagonally dominant but not SDDM, exercising the
lifting path.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParamsError
from .rng import TAG_GEN, stream
from .sparse import SparseSymMatrix


def _laplacian_plus_slack(n, eu, ev, w, slack) -> SparseSymMatrix:
    eu = np.asarray(eu, dtype=np.int64)
    ev = np.asarray(ev, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    slack = np.broadcast_to(np.asarray(slack, dtype=np.float64), (n,))
    diag = slack.copy()
    np.add.at(diag, eu, w)
    np.add.at(diag, ev, w)
    rows = np.concatenate([eu, np.arange(n)])
    cols = np.concatenate([ev, np.arange(n)])
    vals = np.concatenate([-w, diag])
    return SparseSymMatrix.from_entries(n, rows, cols, vals)


def path_graph(n: int, slack: float = 1.0) -> SparseSymMatrix:
    """Path on n nodes, unit edge weights, slack added to every diagonal."""
    if n < 1:
        raise InvalidParamsError("n must be at least 1")
    if slack <= 0.0:
        raise InvalidParamsError("slack must be positive")
    idx = np.arange(n - 1)
    return _laplacian_plus_slack(n, idx, idx + 1, np.ones(n - 1), slack)


def grid2d(side: int, slack: float = 1.0) -> SparseSymMatrix:
    """side x side grid with 4-neighbor unit edges; n = side**2."""
    if side < 1:
        raise InvalidParamsError("side must be at least 1")
    if slack <= 0.0:
        raise InvalidParamsError("slack must be positive")
    n = side * side
    ids = np.arange(n).reshape(side, side)
    eu = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    ev = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    return _laplacian_plus_slack(n, eu, ev, np.ones(eu.size), slack)


def random_regular(n: int, degree: int = 3, *, seed: int = 0,
                   slack: float = 1.0) -> SparseSymMatrix:
    """Random simple degree-regular graph via the pairing model.

    Pairings with self-loops or repeated edges are rejected and redrawn
    from the next substream; a couple hundred attempts is far more than
    enough for the sizes used here.
    """
    if n < 2 or degree < 1 or degree >= n:
        raise InvalidParamsError("need 2 <= degree + 1 <= n")
    if (n * degree) % 2 != 0:
        raise InvalidParamsError("n * degree must be even")
    if slack <= 0.0:
        raise InvalidParamsError("slack must be positive")
    stubs = np.repeat(np.arange(n), degree)
    for attempt in range(200):
        rng = stream(seed, TAG_GEN, attempt)
        pairs = rng.permutation(stubs).reshape(-1, 2)
        eu = np.minimum(pairs[:, 0], pairs[:, 1])
        ev = np.maximum(pairs[:, 0], pairs[:, 1])
        if np.any(eu == ev):
            continue
        if np.unique(np.stack([eu, ev], axis=1), axis=0).shape[0] != eu.size:
            continue
        return _laplacian_plus_slack(n, eu, ev, np.ones(eu.size), slack)
    raise InvalidParamsError("could not realize a simple regular graph")


def sdd_mixed(n: int, *, seed: int = 0, slack: float = 1.0,
              flip_fraction: float = 0.4) -> SparseSymMatrix:
    """SDD matrix with both signs off the diagonal (so not SDDM).

    A ring plus random chords gets random weights in [0.5, 1.5]; roughly
    flip_fraction of the edges keep a positive off-diagonal entry (at
    least one always does).  Diagonals dominate by exactly slack.
    """
    if n < 2:
        raise InvalidParamsError("n must be at least 2")
    if slack <= 0.0:
        raise InvalidParamsError("slack must be positive")
    if not 0.0 < flip_fraction <= 1.0:
        raise InvalidParamsError("flip_fraction must be in (0, 1]")
    rng = stream(seed, TAG_GEN, 0xD1)
    edges = set()
    if n == 2:
        edges.add((0, 1))
    else:
        for i in range(n):
            edges.add((min(i, (i + 1) % n), max(i, (i + 1) % n)))
        for _ in range(n // 2):
            u, v = rng.integers(0, n, size=2)
            if u != v:
                edges.add((min(u, v), max(u, v)))
    eu, ev = np.array(sorted(edges), dtype=np.int64).T
    m = eu.size
    w = rng.uniform(0.5, 1.5, size=m)
    pos = rng.random(m) < flip_fraction
    if not np.any(pos):
        pos[0] = True
    offdiag = np.where(pos, w, -w)
    diag = np.full(n, float(slack))
    np.add.at(diag, eu, w)
    np.add.at(diag, ev, w)
    rows = np.concatenate([eu, np.arange(n)])
    cols = np.concatenate([ev, np.arange(n)])
    vals = np.concatenate([offdiag, diag])
    return SparseSymMatrix.from_entries(n, rows, cols, vals)


def random_sddm(n: int, *, seed: int = 0, slack: float = 1.0) -> SparseSymMatrix:
    """Random SDDM test matrix: ring plus chords, varied weights and slack."""
    if n < 2:
        raise InvalidParamsError("n must be at least 2")
    if slack <= 0.0:
        raise InvalidParamsError("slack must be positive")
    rng = stream(seed, TAG_GEN, 0xA5)
    edges = set()
    if n == 2:
        edges.add((0, 1))
    else:
        for i in range(n):
            edges.add((min(i, (i + 1) % n), max(i, (i + 1) % n)))
        for _ in range(int(np.ceil(0.7 * n))):
            u, v = rng.integers(0, n, size=2)
            if u != v:
                edges.add((min(u, v), max(u, v)))
    eu, ev = np.array(sorted(edges), dtype=np.int64).T
    w = rng.uniform(0.5, 1.5, size=eu.size)
    per_row = slack * rng.uniform(0.5, 1.5, size=n)
    return _laplacian_plus_slack(n, eu, ev, w, per_row)
