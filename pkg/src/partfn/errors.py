"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command-line front-end maps it to.
"""


class PartfnError(Exception):
    exit_code = 1


class InstanceError(PartfnError, ValueError):
    """Malformed instance document or invalid Hamiltonian data."""

    exit_code = 3


class NoCertificateError(PartfnError):
    """The target point lies outside every certified zero-free region."""

    exit_code = 2


class BudgetExceededError(PartfnError):
    """A configured size cap (matrix, tuple count, set count) was hit."""

    exit_code = 4


class PreconditionError(PartfnError, ValueError):
    exit_code = 5


class NotFerromagneticError(PartfnError):
    exit_code = 6
