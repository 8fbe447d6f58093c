"""Backend selection for the RK4 Lindblad propagation kernel.

The compiled Cython kernel is preferred when present; the pure-numpy
fallback is mathematically identical.  Set ``RCDSIM_KERNEL=python`` (or
``cython``) to force a backend, e.g. for benchmarking the two against each
other (see ``benchmarks/bench_kernels.py``).
"""

import os

from . import _lindblad_py

_forced = os.environ.get("RCDSIM_KERNEL", "").strip().lower()

if _forced in ("py", "python"):
    _impl = _lindblad_py
elif _forced in ("cy", "cython"):
    from . import _lindblad_cy as _impl  # raises if not built
else:
    try:
        from . import _lindblad_cy as _impl
    except ImportError:
        _impl = _lindblad_py

BACKEND = _impl.BACKEND
rk4_propagate = _impl.rk4_propagate


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from . import _lindblad_cy  # noqa: F401
        out.append("cython")
    except ImportError:
        pass
    return out
