"""Exception taxonomy.

Every exception raised on purpose by the package derives from
:class:`ContractGenError` and carries the CLI exit code it maps to, so the
command-line layer never has to guess.
"""

from __future__ import annotations


class ContractGenError(Exception):
    exit_code = 4


class InputError(ContractGenError):
    """Unreadable or schema-invalid input (story, config, contract, LaTeX)."""

    exit_code = 2


class ViolationError(ContractGenError):
    """A contract, validation or adapt-loop failure."""

    exit_code = 1


class BackendError(ContractGenError):
    """Agent backend failed to deliver a usable response."""

    exit_code = 3
