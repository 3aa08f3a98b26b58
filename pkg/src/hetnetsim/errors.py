"""Exception types shared across the package."""


class TopologyParseError(ValueError):
    """A topology file line could not be parsed."""


class ValidationError(ValueError):
    """A domain value violates one of its invariants."""


class ContractViolation(RuntimeError):
    """An operation was called outside its contract (wrong state or shape)."""
