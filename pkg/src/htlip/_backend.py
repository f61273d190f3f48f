"""Select the kernel implementation at import time.

Prefers the compiled extension, falls back to the pure-Python twin when the
extension is missing or when HTLIP_PURE_PYTHON is set in the environment.
"""

import os

if os.environ.get("HTLIP_PURE_PYTHON"):
    from . import _kernels as kernels
else:
    try:
        from . import _speedups as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels as kernels  # type: ignore[no-redef]


def backend_name() -> str:
    return "compiled" if kernels.COMPILED else "pure-python"
