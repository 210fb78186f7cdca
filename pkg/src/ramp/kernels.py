"""Backend selection for the inner-loop kernels.

The compiled extension is used when it imports; ``RAMP_PURE_PYTHON=1``
forces the numpy fallback.  Both expose the same functions.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("RAMP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

step_one = active.step_one
step_batch = active.step_batch
segment_hits_any = active.segment_hits_any
cell_index = active.cell_index
last_writer = active.last_writer
