"""Backend dispatch for the hot-path kernels.

Two interchangeable implementations exist:

* ``bnlab._kernels._cyops`` -- compiled Cython extension (preferred),
* ``bnlab._kernels.reference`` -- pure numpy fallback.

Selection happens once at import time.  The BNLAB_KERNELS environment
variable forces a choice: ``cython`` (error if the extension is
missing), ``numpy``, or ``auto`` (default: cython if importable).

``bnlab._kernels.ops`` is the selected module; everything above this
layer imports kernels only through it.  ``benchmarks/bench_kernels.py``
compares the two backends head to head.
"""

import os

from bnlab._kernels import reference


def _select():
    choice = os.environ.get("BNLAB_KERNELS", "auto").lower()
    if choice not in ("auto", "cython", "numpy"):
        raise ValueError(
            f"BNLAB_KERNELS must be auto, cython or numpy, got {choice!r}"
        )
    if choice == "numpy":
        return reference
    try:
        from bnlab._kernels import _cyops
    except ImportError:
        if choice == "cython":
            raise ImportError(
                "BNLAB_KERNELS=cython but the compiled extension is not "
                "available; reinstall with a working C toolchain or unset "
                "the variable"
            )
        return reference
    return _cyops


ops = _select()
BACKEND = ops.NAME


def available_backends():
    """Names of importable backends (for benchmarks and tests)."""
    names = ["numpy"]
    try:
        from bnlab._kernels import _cyops  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names
