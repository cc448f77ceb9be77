"""Exception types shared across fednetsim modules."""

from __future__ import annotations


class FednetsimError(Exception):
    """Base class for all errors raised by this package."""


class MissingFile(FednetsimError):
    def __init__(self, filename: str):
        self.filename = filename
        super().__init__(f"missing required file: {filename}")


class ParseError(FednetsimError):
    """A file could not be parsed, or contained keys outside the schema."""

    def __init__(self, filename: str, message: str, line: int | None = None, key: str | None = None):
        self.filename = filename
        self.line = line
        self.key = key
        loc = f"{filename}:{line}" if line is not None else filename
        if key is not None:
            loc += f" (key {key!r})"
        super().__init__(f"{loc}: {message}")


class ValidationError(FednetsimError):
    """One or more configuration invariants are violated.

    Carries every violation found in the offending value, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {lines}")


class SchemaError(FednetsimError):
    """Structured input (JSON, GraphML, CSV header) does not match its schema."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DisconnectedGraph(FednetsimError):
    def __init__(self, unreachable):
        self.unreachable = sorted(unreachable)
        super().__init__(f"topology is not connected; unreachable nodes: {', '.join(self.unreachable)}")


class DuplicateLink(FednetsimError):
    def __init__(self, a: str, b: str):
        self.endpoints = (a, b)
        super().__init__(f"duplicate link between {a} and {b}")


class InvalidCount(FednetsimError):
    pass


class NoPath(FednetsimError):
    def __init__(self, src: str, dst: str):
        super().__init__(f"no path from {src} to {dst}")


class StalledSimulation(FednetsimError):
    def __init__(self, flow_id: str):
        self.flow_id = flow_id
        super().__init__(
            f"flow {flow_id!r} can make no progress (rate 0 with no pending events)"
        )


class InvalidArgs(FednetsimError):
    pass


class NumericalDivergence(FednetsimError):
    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"loss became non-finite at epoch {epoch}, batch {batch}")


class ShapeMismatch(FednetsimError):
    pass


class TraceFormatError(FednetsimError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"trace line {line}: {message}")


class NonMonotonicTime(FednetsimError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"trace line {line}: time offsets must be non-decreasing")


class BindError(FednetsimError):
    def __init__(self, address: str, cause: Exception):
        self.address = address
        super().__init__(f"cannot bind metrics stream to {address}: {cause}")
