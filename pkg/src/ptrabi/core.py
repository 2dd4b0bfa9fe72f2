"""Model parameters and truncated Fock-space matrices.

Basis convention used everywhere in the package: the qubit index is the
slow index and the photon number the fast one, so basis state
``|s, n>`` sits at position ``s * (n_max + 1) + n`` with ``s = 0`` the
sigma_z = +1 state and ``s = 1`` the sigma_z = -1 state.
"""

from __future__ import annotations

import dataclasses
import enum
from fractions import Fraction

import numpy as np

Q_EVEN = Fraction(1, 4)
Q_ODD = Fraction(3, 4)


class ModelKind(str, enum.Enum):
    """Which two-photon Rabi Hamiltonian to build."""

    BTP = "btp"  # imaginary bias  i*eps/2 sigma_z
    DTP = "dtp"  # imaginary two-photon coupling  i*g
    HERMITIAN_TP = "hermitian"  # real bias, real coupling

    @classmethod
    def coerce(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"herm": "hermitian", "hermitian_tp": "hermitian", "tp": "hermitian"}
        return cls(aliases.get(key, key))


class ParityVariant(str, enum.Enum):
    PI = "pi"  # sigma_x exp(i pi/2 a^dag a)
    P_SIGMA_X = "p_sigma_x"  # sigma_x (x) 1


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Physical parameters in units of the cavity frequency.

    ``epsilon`` is the bias magnitude; it enters the btp Hamiltonian as
    ``i*epsilon`` and the Hermitian one as ``epsilon``. The dtp model has
    no bias, so ``epsilon`` must be zero there.
    """

    delta: float
    epsilon: float = 0.0
    g: float = 0.0
    kind: ModelKind = ModelKind.BTP
    omega: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.coerce(self.kind))
        for name in ("delta", "epsilon", "g"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")
            object.__setattr__(self, name, value)
        if self.omega != 1.0:
            raise ValueError("omega is fixed to 1 (energies are in units of the cavity frequency)")
        if self.kind is ModelKind.DTP and self.epsilon != 0.0:
            raise ValueError("the dtp model has no bias term; epsilon must be 0")

    def with_g(self, g: float) -> "ModelParams":
        return dataclasses.replace(self, g=float(g))

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "g": self.g,
            "omega": self.omega,
        }


def parse_q(q) -> Fraction:
    """Normalize a Bargmann index given as ``"1/4"``, ``0.25`` or a Fraction."""
    if isinstance(q, str):
        value = Fraction(q.strip())
    else:
        value = Fraction(q).limit_denominator(8)
    if value not in (Q_EVEN, Q_ODD):
        raise ValueError(f"Bargmann index must be 1/4 or 3/4, got {q!r}")
    return value


def _check_n_max(n_max: int) -> int:
    if int(n_max) != n_max or n_max < 2:
        raise ValueError(f"n_max must be an integer >= 2, got {n_max!r}")
    return int(n_max)


def _ladder(n_max: int):
    n = np.arange(n_max + 1)
    a = np.diag(np.sqrt(n[1:].astype(float)), 1)
    return a, n


def build_hamiltonian(params: ModelParams, n_max: int) -> np.ndarray:
    """Dense Hamiltonian on the truncated qubit (x) Fock space.

    Returns a complex ``(2(n_max+1), 2(n_max+1))`` array.
    """
    n_max = _check_n_max(n_max)
    a, n = _ladder(n_max)
    two_photon = a @ a
    two_photon = two_photon + two_photon.T
    eye_f = np.eye(n_max + 1)
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])

    if params.kind is ModelKind.BTP:
        coupling, bias = params.g, 0.5j * params.epsilon
    elif params.kind is ModelKind.DTP:
        coupling, bias = 1j * params.g, 0.0
    else:
        coupling, bias = params.g, 0.5 * params.epsilon

    h = np.kron(np.eye(2), np.diag(n.astype(float))).astype(complex)
    h += coupling * np.kron(sz, two_photon)
    h += bias * np.kron(sz, eye_f)
    h -= 0.5 * params.delta * np.kron(sx, eye_f)
    return h


def build_parity(variant, n_max: int) -> np.ndarray:
    """Parity operator as a dense unitary matrix.

    ``PI`` is ``sigma_x exp(i pi a^dag a / 2)`` (a Z4 generator), and
    ``P_SIGMA_X`` is the bare qubit flip.
    """
    n_max = _check_n_max(n_max)
    variant = ParityVariant(variant)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    if variant is ParityVariant.P_SIGMA_X:
        return np.kron(sx, np.eye(n_max + 1)).astype(complex)
    phases = np.array([1, 1j, -1, -1j])[np.arange(n_max + 1) % 4]
    return np.kron(sx, np.diag(phases))


def sector_split(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Photon numbers of the q=1/4 (even) and q=3/4 (odd) sectors."""
    n = np.arange(int(n_max) + 1)
    return n[n % 2 == 0], n[n % 2 == 1]


def photon_numbers(q, n_max: int) -> np.ndarray:
    even, odd = sector_split(n_max)
    return even if parse_q(q) == Q_EVEN else odd


def sector_indices(q, n_max: int) -> np.ndarray:
    """Positions in the full basis of all states belonging to sector ``q``."""
    n = photon_numbers(q, n_max)
    return np.concatenate([n, n + n_max + 1])


def sector_hamiltonian(params: ModelParams, n_max: int, q) -> np.ndarray:
    idx = sector_indices(q, n_max)
    return build_hamiltonian(params, n_max)[np.ix_(idx, idx)]


def parity_eigenvalues(q) -> tuple[complex, complex]:
    """The two Pi eigenvalues available inside sector ``q``."""
    return (1, -1) if parse_q(q) == Q_EVEN else (1j, -1j)


def parity_basis(q, n_max: int, parity) -> np.ndarray:
    """Orthonormal columns spanning the Pi eigenspace ``parity`` of sector ``q``.

    Columns are expressed in the full ``2(n_max+1)`` basis. On each photon
    number ``n`` Pi acts as ``i**n sigma_x``, so its eigenvectors are
    ``(|up,n> +- |down,n>)/sqrt(2)`` with eigenvalue ``+-i**n``.
    """
    parity = complex(parity)
    if not any(abs(parity - p) < 1e-12 for p in parity_eigenvalues(q)):
        raise ValueError(f"parity {parity} does not occur in sector q={parse_q(q)}")
    dim = 2 * (n_max + 1)
    cols = []
    for n in photon_numbers(q, n_max):
        sign = 1 if abs(1j**n - parity) < 1e-12 else -1
        v = np.zeros(dim, dtype=complex)
        v[n] = 1 / np.sqrt(2)
        v[n + n_max + 1] = sign / np.sqrt(2)
        cols.append(v)
    return np.array(cols).T


def parity_block(params: ModelParams, n_max: int, q, parity) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian restricted to one Pi eigenspace, with its isometry.

    Only meaningful when Pi is conserved (dtp or the unbiased Hermitian
    model).
    """
    basis = parity_basis(q, n_max, parity)
    h = build_hamiltonian(params, n_max)
    return basis.conj().T @ h @ basis, basis


def number_operator(n_max: int) -> np.ndarray:
    """Diagonal of a^dag a in the full basis."""
    n = np.arange(n_max + 1, dtype=float)
    return np.concatenate([n, n])
