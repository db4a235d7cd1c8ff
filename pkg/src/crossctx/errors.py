"""Exception types shared across the package."""


class CrossCtxError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CrossCtxError):
    """A source file could not be parsed.

    Carries the file path and the 1-based line / 0-based column of the
    first offending position when the backend reports one.
    """

    def __init__(self, path, message, line=0, col=0):
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.path = path
        self.line = line
        self.col = col


class EmptyProject(CrossCtxError):
    """The project root contains no parseable source files."""


class GraphTooLarge(CrossCtxError):
    """The project would produce more nodes than the configured cap."""

    def __init__(self, count, max_nodes):
        super().__init__(f"project produces {count} nodes, cap is {max_nodes}")
        self.count = count
        self.max_nodes = max_nodes


class FormatError(CrossCtxError):
    """Serialized input (graph JSON, bundle JSONL) is malformed.

    ``position`` is a human-readable locator: a character offset for JSON
    syntax errors, or a line number for JSONL records.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


class NodeNotFound(CrossCtxError):
    """An import reference names a module with no node in the graph."""

    def __init__(self, ref):
        super().__init__(f"no graph node for import of {ref.module_path!r}")
        self.ref = ref


class BudgetTooSmall(CrossCtxError):
    """A token budget cannot fit the mandatory parts of an entity."""
