"""Backend selection for the compiled kernels.

Numba is used when it is importable and ``OPENULAM_DISABLE_JIT`` is not
set to a truthy value; otherwise every kernel runs its numpy twin.
"""

import os

ENV_FLAG = "OPENULAM_DISABLE_JIT"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    HAVE_NUMBA = False

JIT_ENABLED = HAVE_NUMBA and os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def njit(func):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def default_backend() -> str:
    return "numba" if JIT_ENABLED else "numpy"


def resolve(backend):
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
