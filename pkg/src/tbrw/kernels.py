"""Back-end selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``TBRW_PURE_PYTHON=1``) the pure-Python versions are used. Both produce
identical results for identical seeds.
"""
import os

from . import _pykernels

MODE_PHI_U = _pykernels.MODE_PHI_U
MODE_NAIVE = _pykernels.MODE_NAIVE
MODE_SIMPLE = _pykernels.MODE_SIMPLE
STOP_COVER = _pykernels.STOP_COVER
STOP_HIT = _pykernels.STOP_HIT

_NAMES = ("bfs", "all_pairs", "ball_sizes", "walk_schedule", "explore_walk", "controller_pick",
          "phi_u_p")


def _load(pure: bool):
    if not pure:
        try:
            from . import _ckernels as mod
            return mod, "cython"
        except ImportError:
            pass
    return _pykernels, "python"


_mod, BACKEND = _load(os.environ.get("TBRW_PURE_PYTHON", "") not in ("", "0"))


def use_backend(name: str) -> str:
    """Switch back ends at runtime (``"cython"`` or ``"python"``); returns the active one."""
    global _mod, BACKEND
    if name not in ("cython", "python"):
        raise ValueError(name)
    _mod, BACKEND = _load(name == "python")
    if name == "cython" and BACKEND != "cython":
        raise ImportError("compiled kernels are not built")
    return BACKEND


def get(name: str):
    return getattr(_mod, name)


def bfs(indptr, indices, source_mask, limit=-1):
    return _mod.bfs(indptr, indices, source_mask, limit)


def all_pairs(indptr, indices):
    return _mod.all_pairs(indptr, indices)


def ball_sizes(indptr, indices, radius):
    return _mod.ball_sizes(indptr, indices, radius)


def walk_schedule(*args, **kwargs):
    return _mod.walk_schedule(*args, **kwargs)


def explore_walk(*args, **kwargs):
    return _mod.explore_walk(*args, **kwargs)


def compiled_available() -> bool:
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True
