"""Pure-Python kernels: LCS dynamic programming and token counting.

Reference implementations for the compiled module in _native.pyx. Both
backends must produce byte-identical results; the parity suite in
tests/test_kernels.py enforces this.
"""

from __future__ import annotations

from typing import Sequence


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two id sequences."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    # Two rolling rows keep memory at O(min side); iterate the longer side.
    if m > n:
        a, b = b, a
        n, m = m, n
    prev = [0] * (m + 1)
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = cur[j - 1]
                cur[j] = up if up >= left else left
        prev, cur = cur, prev
    return prev[m]


def lcs_pairs(a: Sequence[int], b: Sequence[int]) -> list[tuple[int, int]]:
    """Canonical LCS alignment as (index_in_a, index_in_b) pairs.

    Backtrace rule (shared with the compiled backend): on a match take the
    diagonal; otherwise move up when dp[i-1][j] >= dp[i][j-1], else left.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return []
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        ai = a[i - 1]
        row = dp[i]
        prev = dp[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = row[j - 1]
                row[j] = up if up >= left else left
    pairs: list[tuple[int, int]] = []
    i, j = n, m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif dp[i - 1][j] >= dp[i][j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def count_tokens(text: str) -> int:
    """Deterministic token count.

    Count = number of maximal alphanumeric runs plus the number of
    non-whitespace, non-alphanumeric characters.
    """
    count = 0
    in_run = False
    for ch in text:
        if ch.isalnum():
            if not in_run:
                count += 1
                in_run = True
        else:
            in_run = False
            if not ch.isspace():
                count += 1
    return count
