"""labgate: a safety-interlocked protocol execution engine.

A pluggable planner policy is grounded inside a deterministic finite-state
controller; every drafted protocol is verified scientifically and every
generated instruction physically against a hardware registry before a
virtual lab executes it.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
