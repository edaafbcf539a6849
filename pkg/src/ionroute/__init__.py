"""ionroute: a shuttling-aware compiler for QCCD trapped-ion devices."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .arch import (ArchitectureSpec, DistanceMatrix, JunctionSpec,
                   PositionGraph, SegmentSpec, TimingModel, TrapSpec,
                   all_pairs_shuttle_cost, build_position_graph,
                   nearest_free_trap_distance, preset)
from .circuit import (Block, BlockDag, Circuit, FrontState, Gate, advance,
                      generate, initial_front, partition_blocks)
from .errors import (ArchitectureError, CapacityError, IllegalMoveError,
                     IonRouteError, QasmError, RoutingError, TraceFormatError)
from .qasm import emit_qasm, parse_qasm
from .scheduler import (ExecuteBlock, SearchConfig, default_block_cost,
                        escape_local_minimum, fold_permutation,
                        heuristic_score, initial_layout, make_table_oracle,
                        replay, resolve_congestion, route, select_permutation)
from .state import (IonAssignment, Move, apply_move, executable_trap,
                    legal_moves)
from .timeline import (Event, ScheduleStats, TimedSchedule, Violation,
                       dump_trace, load_trace, schedule, stats,
                       trace_document, validate)

__all__ = [name for name in dir() if not name.startswith("_")]
