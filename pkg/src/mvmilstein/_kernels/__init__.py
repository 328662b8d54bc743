"""Step-kernel selection.

The compiled extension is preferred when it imported cleanly; the numpy
fallback has identical semantics (agreement is covered by tests).  Set
``MVMILSTEIN_FORCE_FALLBACK=1`` to skip the extension, e.g. for
benchmarking or debugging.
"""

import os

from . import fallback

fallback_step = fallback.milstein_step
compiled_step = None

if not os.environ.get("MVMILSTEIN_FORCE_FALLBACK"):
    try:
        from . import _core
        compiled_step = _core.milstein_step
    except ImportError:
        pass

if compiled_step is not None:
    milstein_step = compiled_step
    KERNEL = "compiled"
else:
    milstein_step = fallback_step
    KERNEL = "numpy"
