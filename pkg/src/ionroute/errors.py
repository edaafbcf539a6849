"""Exception types shared across the compiler."""


class IonRouteError(Exception):
    """Base class for all compiler errors."""


class ArchitectureError(IonRouteError):
    """Malformed architecture description (dangling endpoint, bad capacity, ...)."""


class QasmError(IonRouteError):
    """OpenQASM parse failure, with source position when available."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)


class IllegalMoveError(IonRouteError):
    """A shuttling move violates a hardware constraint.

    ``constraint`` is the number of the violated occupancy/shuttle rule
    (1: segment occupancy, 2: junction transit, 3: trap capacity,
    4: split shape, 5: merge shape, 6: move shape) or None for structural
    problems that have no single rule number.
    """

    def __init__(self, message, constraint=None):
        self.constraint = constraint
        if constraint is not None:
            message = f"constraint {constraint}: {message}"
        super().__init__(message)


class CapacityError(IonRouteError):
    """Circuit does not fit the device (too many qubits or too-wide blocks)."""


class RoutingError(IonRouteError):
    """Search failed: nontermination guard tripped or an unresolvable deadlock."""


class TraceFormatError(IonRouteError):
    """A trace file does not match the expected schema."""
