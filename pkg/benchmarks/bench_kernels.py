#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure-Python fallback.

Times the three hot kernels (LCS length, LCS alignment, token counting)
on workloads shaped like the evaluation suite's: long-horizon protocol
sequences and multi-thousand-token schema payloads.

    python benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import random
import time
from pathlib import Path

from labgate._kernels import _pure

try:
    from labgate._kernels import _native
except ImportError:
    _native = None


def _time(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = random.Random(0)
    seq_a = [rng.randrange(50) for _ in range(1500)]
    seq_b = [rng.randrange(50) for _ in range(1500)]
    registry_path = Path(__file__).resolve().parent.parent / "src" / "labgate" / "data" / "registry.json"
    text = registry_path.read_text() * 5 if registry_path.exists() else ("transfer(50, plate_1); " * 20000)

    workloads = [
        ("lcs_length 1500x1500", "lcs_length", (seq_a, seq_b)),
        ("lcs_pairs  1500x1500", "lcs_pairs", (seq_a, seq_b)),
        (f"count_tokens {len(text)} chars", "count_tokens", (text,)),
    ]

    print(f"{'workload':<28}{'pure':>12}{'native':>12}{'speedup':>10}")
    print("-" * 62)
    for label, name, payload in workloads:
        pure_s = _time(getattr(_pure, name), *payload, repeats=args.repeats)
        if _native is None:
            print(f"{label:<28}{pure_s * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}")
            continue
        native_s = _time(getattr(_native, name), *payload, repeats=args.repeats)
        # sanity: both backends agree before we compare their speed
        assert getattr(_pure, name)(*payload) == getattr(_native, name)(*payload)
        print(
            f"{label:<28}{pure_s * 1e3:>10.2f}ms{native_s * 1e3:>10.2f}ms"
            f"{pure_s / native_s:>9.1f}x"
        )
    if _native is None:
        print("\ncompiled backend not built; install with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
