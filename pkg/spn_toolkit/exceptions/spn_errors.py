# spn_toolkit/exceptions/spn_errors.py

"""
Exception hierarchy for the SPN toolkit.

Every error raised on purpose by the library derives from SpnError so the CLI
can turn it into a one-line diagnostic.
"""

from typing import Optional


class SpnError(Exception):
    """
    Base class for all toolkit errors.
    """

    def __init__(self, message="SPN toolkit error"):
        super().__init__(message)


class MalformedGraphError(SpnError):
    """
    Raised when a node table violates the construction invariants
    (children must precede parents, weights must be non-negative, ...).
    """

    def __init__(self, message="Malformed SPN node table"):
        super().__init__(message)


class DegenerateNodeError(SpnError):
    """
    Raised when a sum node has no strictly positive weight left.

    Attributes:
        node -- id of the offending sum node
    """

    def __init__(self, node: int, message: Optional[str] = None):
        self.node = node
        super().__init__(message or f"Sum node {node} has no positive weight")


class InvalidSpnError(SpnError):
    def __init__(self, message="SPN is not complete and consistent"):
        super().__init__(message)


class InputError(SpnError):
    """
    Raised for bad caller input: evidence, samples, datasets, configuration.
    """

    def __init__(self, message="Invalid input"):
        super().__init__(message)


class EvidenceError(InputError):
    def __init__(self, message="Evidence does not match the variable table"):
        super().__init__(message)


class ConfigError(InputError):
    def __init__(self, message="Invalid configuration"):
        super().__init__(message)


class ZeroEvidenceError(SpnError):
    """
    Raised when S(e) = 0, so conditionals given e are undefined.
    """

    def __init__(self, message="Evidence has zero probability under the SPN"):
        super().__init__(message)


class OracleCapacityError(SpnError):
    def __init__(self, message="Brute-force oracle capacity exceeded"):
        super().__init__(message)


class CapacityError(SpnError):
    def __init__(self, message="Architecture exceeds the configured size cap"):
        super().__init__(message)


class DegenerateModelError(SpnError):
    def __init__(self, message="Pruning would leave a sum node without children"):
        super().__init__(message)


class TrainingDivergedError(SpnError):
    def __init__(self, message="Average log-likelihood is NaN"):
        super().__init__(message)
