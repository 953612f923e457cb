"""Throughput comparison of the compiled kernel against the pure-Python path.

Run directly: ``python3 benchmarks/bench_kernel.py``
"""

import random
import string
import time

import numpy as np

from evd.kernel import (
    KERNEL_BACKEND,
    dot_select,
    hash64,
    hashed_ids,
    pure_dot_select,
    pure_hashed_ids,
)
from evd import _purekernel


def _tokens(n: int, rng: random.Random) -> list[str]:
    return [
        "".join(rng.choices(string.ascii_letters + "_", k=rng.randint(2, 14)))
        for _ in range(n)
    ]


def bench(label: str, fn, repeats: int = 5) -> float:
    best = min(_timed(fn) for _ in range(repeats))
    print(f"{label:<40} {best * 1000:9.2f} ms")
    return best


def _timed(fn) -> float:
    started = time.perf_counter()
    fn()
    return time.perf_counter() - started


def main():
    rng = random.Random(0)
    tokens = _tokens(50000, rng)
    payloads = [t.encode() for t in tokens]
    weights = np.random.default_rng(0).standard_normal(2**19)
    indices = np.array(
        [rng.randrange(weights.size) for _ in range(200000)], dtype=np.int64
    )

    print(f"active backend: {KERNEL_BACKEND}\n")

    bench("hash64 x50k (active)", lambda: [hash64(p) for p in payloads])
    bench("hash64 x50k (pure python)", lambda: [_purekernel.hash64(p) for p in payloads])
    print()
    bench("hashed_ids 50k tokens (active)", lambda: hashed_ids(tokens, 2**18))
    bench("hashed_ids 50k tokens (pure python)", lambda: pure_hashed_ids(tokens, 2**18))
    print()
    bench("dot_select 200k indices (active)", lambda: dot_select(weights, indices))
    bench(
        "dot_select 200k indices (pure python)",
        lambda: pure_dot_select(weights, list(indices)),
    )

    # correctness cross-check while we are here
    assert hashed_ids(tokens[:1000], 2**18) == pure_hashed_ids(tokens[:1000], 2**18)
    assert abs(dot_select(weights, indices[:10000]) - pure_dot_select(weights, list(indices[:10000]))) < 1e-6
    print("\ncross-check: both backends agree")


if __name__ == "__main__":
    main()
