"""Track per-level spectral decay while building factor chains.

For each test graph this prints the lambda (= 1 - rho(X_i)) sequence, the
growth ratio between consecutive levels, and compares the realized chain
length against the a priori bound.  Useful for eyeballing whether the
sparsified squares keep the geometric decay that the exact squares have.
"""

import argparse
import math

from factorchain import (
    SparsifyParams,
    build_chain,
    chain_length_bound,
    grid2d,
    normalize,
    path_graph,
    random_sddm,
    validate_sddm,
)


def describe(name, m, eps, mode, seed):
    cert = validate_sddm(m)
    split = normalize(m, cert)
    sp = SparsifyParams(eps=1.0, seed=seed, mode=mode)
    chain = build_chain(split, -1.0, eps, sp)
    bound = chain_length_bound(split.kappa_bound, eps)
    print(f"\n{name}: n={m.n} kappa_hat={split.kappa_bound:.3f} "
          f"d={chain.d} bound={bound} eps_total={chain.eps_total:.4f}")
    print(f"  {'level':>5} {'lambda':>10} {'ratio':>8} {'nnz':>8} {'poly_t':>6}")
    prev = None
    for i, lam in enumerate(chain.lambdas):
        ratio = "" if prev is None else f"{lam / prev:8.4f}"
        nnz = chain.levels[i].full_nnz if i < len(chain.levels) else "-"
        deg = chain.polys[i].t if i < len(chain.polys) else "-"
        print(f"  {i:>5} {lam:>10.5f} {ratio:>8} {nnz:>8} {deg:>6}")
        prev = lam
    ok = all(b >= (9.0 / 8.0) * a or a > 0.5
             for a, b in zip(chain.lambdas, chain.lambdas[1:]))
    print(f"  growth >= 9/8 while lambda <= 1/2: {ok}   d <= bound: {chain.d <= bound}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--mode", choices=["auto", "exact", "sampled"], default="auto")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    describe("path n=64", path_graph(64), args.eps, args.mode, args.seed)
    describe("grid 8x8", grid2d(8), args.eps, args.mode, args.seed)
    describe("grid 16x16", grid2d(16), args.eps, args.mode, args.seed)
    describe("random sddm n=100", random_sddm(100, seed=args.seed),
             args.eps, args.mode, args.seed)


if __name__ == "__main__":
    main()
