# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels: LCS dynamic programming and token counting.

Semantics must match labgate._kernels._pure exactly, including the LCS
backtrace tie rule. The parity suite in tests/test_kernels.py runs both
backends against each other.
"""

from cpython.mem cimport PyMem_Malloc, PyMem_Free


cdef long* _to_c_array(object seq, Py_ssize_t n) except NULL:
    cdef long* out = <long*> PyMem_Malloc(n * sizeof(long))
    if out == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    try:
        for i in range(n):
            out[i] = seq[i]
    except BaseException:
        PyMem_Free(out)
        raise
    return out


def lcs_length(object a, object b):
    """Length of the longest common subsequence of two id sequences."""
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n
    cdef long* ca = _to_c_array(a, n)
    cdef long* cb
    cdef long* prev
    cdef long* cur
    cdef long* tmp
    cdef Py_ssize_t i, j
    cdef long ai, up, left, result
    try:
        cb = _to_c_array(b, m)
    except BaseException:
        PyMem_Free(ca)
        raise
    prev = <long*> PyMem_Malloc((m + 1) * sizeof(long))
    cur = <long*> PyMem_Malloc((m + 1) * sizeof(long))
    if prev == NULL or cur == NULL:
        PyMem_Free(ca)
        PyMem_Free(cb)
        if prev != NULL:
            PyMem_Free(prev)
        if cur != NULL:
            PyMem_Free(cur)
        raise MemoryError()
    for j in range(m + 1):
        prev[j] = 0
        cur[j] = 0
    for i in range(1, n + 1):
        ai = ca[i - 1]
        for j in range(1, m + 1):
            if ai == cb[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = cur[j - 1]
                cur[j] = up if up >= left else left
        tmp = prev
        prev = cur
        cur = tmp
    result = prev[m]
    PyMem_Free(ca)
    PyMem_Free(cb)
    PyMem_Free(prev)
    PyMem_Free(cur)
    return result


def lcs_pairs(object a, object b):
    """Canonical LCS alignment as (index_in_a, index_in_b) pairs."""
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    if n == 0 or m == 0:
        return []
    cdef long* ca = _to_c_array(a, n)
    cdef long* cb
    cdef long* dp
    cdef Py_ssize_t i, j, w
    cdef long ai, up, left
    try:
        cb = _to_c_array(b, m)
    except BaseException:
        PyMem_Free(ca)
        raise
    w = m + 1
    dp = <long*> PyMem_Malloc((n + 1) * w * sizeof(long))
    if dp == NULL:
        PyMem_Free(ca)
        PyMem_Free(cb)
        raise MemoryError()
    for j in range(w):
        dp[j] = 0
    for i in range(1, n + 1):
        dp[i * w] = 0
        ai = ca[i - 1]
        for j in range(1, m + 1):
            if ai == cb[j - 1]:
                dp[i * w + j] = dp[(i - 1) * w + (j - 1)] + 1
            else:
                up = dp[(i - 1) * w + j]
                left = dp[i * w + (j - 1)]
                dp[i * w + j] = up if up >= left else left
    pairs = []
    i = n
    j = m
    while i > 0 and j > 0:
        if ca[i - 1] == cb[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif dp[(i - 1) * w + j] >= dp[i * w + (j - 1)]:
            i -= 1
        else:
            j -= 1
    PyMem_Free(ca)
    PyMem_Free(cb)
    PyMem_Free(dp)
    pairs.reverse()
    return pairs


def count_tokens(str text):
    """Deterministic token count: alphanumeric runs + visible punctuation."""
    cdef Py_ssize_t count = 0
    cdef bint in_run = False
    cdef Py_UCS4 ch
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
