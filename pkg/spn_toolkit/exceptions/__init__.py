from spn_toolkit.exceptions.spn_errors import (
    CapacityError,
    ConfigError,
    DegenerateModelError,
    DegenerateNodeError,
    EvidenceError,
    InputError,
    InvalidSpnError,
    MalformedGraphError,
    OracleCapacityError,
    SpnError,
    TrainingDivergedError,
    ZeroEvidenceError,
)
from spn_toolkit.exceptions.unsupported_format import UnsupportedFormat

__all__ = [
    "CapacityError",
    "ConfigError",
    "DegenerateModelError",
    "DegenerateNodeError",
    "EvidenceError",
    "InputError",
    "InvalidSpnError",
    "MalformedGraphError",
    "OracleCapacityError",
    "SpnError",
    "TrainingDivergedError",
    "UnsupportedFormat",
    "ZeroEvidenceError",
]
