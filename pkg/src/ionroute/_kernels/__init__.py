"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it imported cleanly; set IONROUTE_PURE=1
to force the fallback (used by the parity tests and the kernel benchmark).
Both backends implement the same functions with identical numerics.
"""

import os

from . import _py

if os.environ.get("IONROUTE_PURE"):
    _impl = _py
else:
    try:
        from . import _cy as _impl
    except ImportError:
        _impl = _py

BACKEND = _impl.BACKEND

KIND_INNER_SWAP = _py.KIND_INNER_SWAP
KIND_MERGE = _py.KIND_MERGE
KIND_MOVE = _py.KIND_MOVE
KIND_SHIFT = _py.KIND_SHIFT
KIND_SPLIT = _py.KIND_SPLIT

floyd_warshall = _impl.floyd_warshall
free_slot_distance = _impl.free_slot_distance
score_state = _impl.score_state
score_moves = _impl.score_moves
enumerate_moves = _impl.enumerate_moves
