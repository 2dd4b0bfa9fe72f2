"""Dense non-Hermitian eigendecomposition with biorthogonal left vectors."""

from __future__ import annotations

import dataclasses
import enum

import numpy as np
import scipy.linalg

from ptrabi.exceptions import EigensolverError, SelfOrthogonalError

MAX_DIM = 1000
RESIDUAL_TOL = 1e-9
CLUSTER_TOL = 1e-10


class Normalization(str, enum.Enum):
    BI = "bi"  # <L|R> = 1 and <L|L> = <R|R>
    UNIT = "unit"  # <L|L> = <R|R> = 1


@dataclasses.dataclass(frozen=True)
class BiorthogonalPair:
    """Right eigenvector and matching left eigenvector.

    ``left`` is stored as a ket; the bra ``<L|`` is its conjugate
    transpose, so ``<L|R> = np.vdot(left, right)``.
    """

    energy: complex
    right: np.ndarray
    left: np.ndarray
    normalization: Normalization

    @property
    def overlap(self) -> complex:
        """``<L|R>``; equals 1 under BI and is the c-product under UNIT."""
        return complex(np.vdot(self.left, self.right))


def order_energies(energies, tol=1e-9) -> np.ndarray:
    """Indices sorting by real part, conjugate partners by imaginary part.

    Partners of a conjugate pair share the same real part up to rounding,
    so a plain lexicographic sort would order them by noise.
    """
    energies = np.asarray(energies)
    order = list(np.argsort(energies.real, kind="stable"))
    i = 0
    while i < len(order):
        j = i + 1
        scale = tol * max(1.0, abs(energies[order[i]].real))
        while j < len(order) and energies[order[j]].real - energies[order[i]].real < scale:
            j += 1
        if j - i > 1:
            order[i:j] = sorted(order[i:j], key=lambda k: energies[k].imag)
        i = j
    return np.array(order, dtype=int)


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    vectors = np.array(vectors, dtype=complex, copy=True)
    cols = vectors if vectors.ndim == 2 else vectors[:, None]
    idx = np.argmax(np.abs(cols), axis=0)
    pivots = cols[idx, np.arange(cols.shape[1])]
    cols *= (np.abs(pivots) / np.where(pivots == 0, 1, pivots))[None, :]
    return cols if vectors.ndim == 2 else cols[:, 0]


def eigendecompose(h: np.ndarray, max_dim: int = MAX_DIM, hermitian: bool = False):
    """Eigenvalues and unit-norm right eigenvectors, sorted.

    Parameters
    ----------
    h : (d, d) array
    hermitian : bool
        Use the Hermitian solver (eigenvalues then exactly real).

    Returns
    -------
    energies : (d,) complex array
    right : (d, d) complex array, one eigenvector per column
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    if h.shape[0] > max_dim:
        raise ValueError(f"dimension {h.shape[0]} exceeds the dense limit {max_dim}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    if hermitian:
        w, v = np.linalg.eigh(h)
        w = w.astype(complex)
    else:
        w, v = scipy.linalg.eig(h)
    order = order_energies(w)
    w, v = w[order], v[:, order]
    v = fix_phase(v / np.linalg.norm(v, axis=0))
    scale = max(np.linalg.norm(h, 2), 1.0)
    residual = np.linalg.norm(h @ v - v * w, axis=0)
    worst = int(np.argmax(residual))
    if residual[worst] > RESIDUAL_TOL * scale:
        raise EigensolverError(
            f"eigenpair {worst} (E={w[worst]}) has residual {residual[worst]:.3g}; "
            f"cond(V)={np.linalg.cond(v):.3g}")
    return w, v


def _clusters(energies, tol=CLUSTER_TOL):
    clusters, current = [], [0]
    for k in range(1, len(energies)):
        if abs(energies[k] - energies[current[-1]]) < tol * max(1.0, abs(energies[k])):
            current.append(k)
        else:
            if len(current) > 1:
                clusters.append(current)
            current = [k]
    if len(current) > 1:
        clusters.append(current)
    return clusters


def left_eigenvectors(h: np.ndarray, energies: np.ndarray, right: np.ndarray):
    """Left eigenvectors matched one-to-one with ``right``.

    Solves the eigenproblem of ``h^dagger`` and pairs each of its
    eigenvalues with the conjugate of a right eigenvalue; for a complex
    symmetric ``h`` the left vectors are the conjugated right ones. Inside a cluster
    of (numerically) equal eigenvalues the left vectors are recombined so
    that ``<L_i|R_j>`` is diagonal whenever that is possible.

    Returns
    -------
    left : (d, d) array, unit-norm columns
    clusters : list of index lists that needed cluster handling
    """
    h = np.asarray(h)
    if np.array_equal(h, h.T):
        # complex symmetric: h^dagger conj(R) = conj(E) conj(R)
        left = right.conj().astype(complex)
    else:
        mu, lv = scipy.linalg.eig(h.conj().T)
        target = np.conj(mu)
        available = np.ones(len(mu), dtype=bool)
        left = np.empty_like(right, dtype=complex)
        for k, e in enumerate(energies):
            dist = np.where(available, np.abs(target - e), np.inf)
            j = int(np.argmin(dist))
            available[j] = False
            left[:, k] = lv[:, j]
    clusters = _clusters(np.asarray(energies))
    for idx in clusters:
        gram = left[:, idx].conj().T @ right[:, idx]
        if np.linalg.cond(gram) < 1e12:
            left[:, idx] = left[:, idx] @ np.linalg.inv(gram).conj().T
    left = fix_phase(left / np.linalg.norm(left, axis=0))
    return left, clusters


def normalize(energy, right, left, convention=Normalization.BI) -> BiorthogonalPair:
    """Scale a left/right pair to the requested convention.

    BI raises ``SelfOrthogonalError`` when ``|<L|R>|`` falls below
    ``1e-12 ||L|| ||R||``, the signature of an exceptional point.
    """
    convention = Normalization(convention)
    right = np.asarray(right, dtype=complex)
    left = np.asarray(left, dtype=complex)
    r = right / np.linalg.norm(right)
    l = left / np.linalg.norm(left)
    if convention is Normalization.UNIT:
        return BiorthogonalPair(complex(energy), r, l, convention)
    c = np.vdot(l, r)
    if abs(c) < 1e-12:
        raise SelfOrthogonalError(f"|<L|R>| = {abs(c):.3g} at E={energy}: state is self-orthogonal")
    root = np.sqrt(c)
    return BiorthogonalPair(complex(energy), r / root, l / np.conj(root), convention)


def biorthogonal_system(h, convention=Normalization.BI, max_dim: int = MAX_DIM):
    """All eigenpairs of ``h`` as a list of ``BiorthogonalPair``.

    Under BI, pairs that are self-orthogonal are returned UNIT-normalized
    instead, so callers can test ``pair.normalization``.
    """
    energies, right = eigendecompose(h, max_dim=max_dim)
    left, _ = left_eigenvectors(h, energies, right)
    pairs = []
    for k in range(len(energies)):
        try:
            pairs.append(normalize(energies[k], right[:, k], left[:, k], convention))
        except SelfOrthogonalError:
            pairs.append(normalize(energies[k], right[:, k], left[:, k], Normalization.UNIT))
    return pairs


@dataclasses.dataclass(frozen=True)
class Matching:
    """Assignment of states in set ``a`` to states in set ``b``.

    ``pairs[i] = (i_a, i_b)``; ``overlaps`` holds ``|<L_a|R_b>|`` for each.
    """

    pairs: list
    overlaps: np.ndarray
    ambiguous: list

    def as_permutation(self) -> np.ndarray:
        perm = np.full(len(self.pairs), -1, dtype=int)
        for ia, ib in self.pairs:
            perm[ia] = ib
        return perm


def match_states(set_a, set_b, ambiguity: float = 0.05) -> Matching:
    """Greedy maximal-overlap pairing of two lists of ``BiorthogonalPair``.

    A pairing is flagged ambiguous when the runner-up candidate for the
    same state comes within ``ambiguity`` (relative) of the chosen one.
    """
    la = np.array([p.left for p in set_a]).T
    rb = np.array([p.right for p in set_b]).T
    ov = np.abs(la.conj().T @ rb)
    pairs, overlaps, ambiguous = [], [], []
    work = ov.copy()
    for _ in range(min(len(set_a), len(set_b))):
        ia, ib = np.unravel_index(np.argmax(work), work.shape)
        best = work[ia, ib]
        row = np.delete(work[ia], ib)
        if row.size and np.max(row) >= (1 - ambiguity) * best:
            ambiguous.append((int(ia), int(ib)))
        pairs.append((int(ia), int(ib)))
        overlaps.append(ov[ia, ib])
        work[ia, :] = -np.inf
        work[:, ib] = -np.inf
    order = np.argsort([p[0] for p in pairs])
    pairs = [pairs[i] for i in order]
    return Matching(pairs, np.array(overlaps)[order], ambiguous)
