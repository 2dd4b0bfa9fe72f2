"""Exact spectra, exceptional points and dynamics of PT-symmetric
two-photon quantum Rabi models."""

from ptrabi.core import (
    ModelKind,
    ModelParams,
    ParityVariant,
    Q_EVEN,
    Q_ODD,
    build_hamiltonian,
    build_parity,
    parse_q,
    sector_hamiltonian,
    sector_split,
)
from ptrabi.exceptions import (
    CollapseDomainError,
    EigensolverError,
    NoCollapseError,
    PoleProximityError,
    SelfOrthogonalError,
    SeriesConvergenceError,
)

__version__ = "0.1.0"

__all__ = [
    "ModelKind",
    "ModelParams",
    "ParityVariant",
    "Q_EVEN",
    "Q_ODD",
    "build_hamiltonian",
    "build_parity",
    "parse_q",
    "sector_hamiltonian",
    "sector_split",
    "CollapseDomainError",
    "EigensolverError",
    "NoCollapseError",
    "PoleProximityError",
    "SelfOrthogonalError",
    "SeriesConvergenceError",
    "__version__",
]
