"""Kernel selection: compiled extension when available, pure Python otherwise.

Set LABGATE_KERNELS=pure to force the fallback (used by the benchmark to
time both backends in one process via the module-level functions here).
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("LABGATE_KERNELS") == "pure":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

lcs_length = _impl.lcs_length
lcs_pairs = _impl.lcs_pairs
count_tokens = _impl.count_tokens

__all__ = ["BACKEND", "lcs_length", "lcs_pairs", "count_tokens"]
