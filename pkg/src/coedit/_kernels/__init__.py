"""Hot pixel kernels with a compiled core and a numpy fallback.

The compiled extension (Cython) is preferred when importable; otherwise the
numpy implementation is used. Both expose the same three functions and
produce bit-identical results:

    dilate_disc(mask_u8, radius)  -> dilated uint8 {0,1} mask
    count_changed(a, b, tau)      -> pixels whose max-channel |a-b| > tau
    sq_diff_sum(a, b)             -> exact integer sum of squared diffs

Set COEDIT_KERNELS=python to force the fallback (used by the benchmark and
the parity tests).
"""
from __future__ import annotations

import os

from . import python as _python

if os.environ.get("COEDIT_KERNELS", "").lower() == "python":
    _impl = _python
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _python
        BACKEND = "python"

dilate_disc = _impl.dilate_disc
count_changed = _impl.count_changed
sq_diff_sum = _impl.sq_diff_sum

__all__ = ["BACKEND", "dilate_disc", "count_changed", "sq_diff_sum"]
