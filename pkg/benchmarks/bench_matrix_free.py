"""Time matrix-free application against dense assembly plus a matrix product.

Usage: python3 benchmarks/bench_matrix_free.py [--depths 8,9,10] [--dims 1,2,4]
"""
import argparse
import time

import numpy as np

from opbmo.dyadic import MatrixSymbol, VectorField
from opbmo.operators import apply_matrix_free, assemble_mult, assemble_para


def best_of(fn, repeat=3):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--depths", default="8,9,10")
    p.add_argument("--dims", default="1,2,4")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    rng = np.random.default_rng(a.seed)
    print("kind,n,depth,matrix_free_s,dense_s,speedup")
    for K in (int(s) for s in a.depths.split(",")):
        for n in (int(s) for s in a.dims.split(",")):
            if n * 2 ** K > 4096:
                continue
            B = MatrixSymbol.random(rng, n, K)
            f = VectorField.random(rng, n, K, zero_mean=True)
            for kind, build in (("para", assemble_para), ("mult", assemble_mult)):
                mf = best_of(lambda: apply_matrix_free(kind, B, f))
                dense = best_of(lambda: build(B).apply(f), repeat=1)
                print(f"{kind},{n},{K},{mf:.2e},{dense:.2e},{dense / mf:.0f}")


if __name__ == "__main__":
    main()
