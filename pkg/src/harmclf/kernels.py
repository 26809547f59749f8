"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set HARMCLF_KERNELS=python to force the fallback (used by the benchmark and
the agreement tests).
"""

import os

from . import _kernels_py

if os.environ.get("HARMCLF_KERNELS", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

cos_design = _impl.cos_design
cos_design_lineage = _impl.cos_design_lineage
holo_design_lineage = _impl.holo_design_lineage
phase_design = _impl.phase_design
cos_input_grad = _impl.cos_input_grad
phase_input_grad = _impl.phase_input_grad
holo_input_grad = _impl.holo_input_grad
