"""Exception hierarchy shared by the planning and coordination modules."""


class MracError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MracError, ValueError):
    """An argument is outside the domain of the operation."""


class DegenerateEvidenceError(MracError):
    """An observation has zero probability under the current belief."""


class InconsistentLedgerError(MracError):
    """A down-date or ledger edit contradicts the recorded history."""


class EnumerationLimitError(MracError):
    """A realization space is larger than the configured enumeration cap."""

    def __init__(self, n_slots: int, cap: int):
        super().__init__(f"{n_slots} slots exceed the enumeration cap of {cap}")
        self.n_slots = n_slots
        self.cap = cap


class ProtocolError(MracError):
    """A message does not match the receiver's slot bookkeeping."""


class ContractError(MracError):
    """A documented precondition of a guarantee computation was violated."""


class ConfigError(MracError):
    """Run configuration failed validation."""


class ComparisonError(MracError):
    """Run directories cannot be aligned for comparison."""
