"""Zeros of the G-functions and diagonalization sweeps over the coupling."""

from __future__ import annotations

import dataclasses
import enum
import logging
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from ptrabi.core import ModelKind, ModelParams, build_parity, parse_q, sector_hamiltonian, sector_indices
from ptrabi.eigensolver import (
    BiorthogonalPair,
    Normalization,
    eigendecompose,
    left_eigenvectors,
    match_states,
    normalize,
    order_energies,
)
from ptrabi.exceptions import SelfOrthogonalError
from ptrabi.gfunction import gfunction, gfunction_values, pole_ladder, pole_spacing

log = logging.getLogger(__name__)

TOL_REAL = 1e-9
DEFAULT_N_MAX = 120
REFINE_N_MAX = 40


class PTStatus(str, enum.Enum):
    SYMMETRIC = "symmetric"
    BROKEN = "broken"


def pt_status(energy, tol=TOL_REAL) -> PTStatus:
    return PTStatus.SYMMETRIC if abs(complex(energy).imag) < tol else PTStatus.BROKEN


@dataclasses.dataclass(frozen=True)
class SpectrumPoint:
    g: float
    level_index: int
    energy: complex
    q: Fraction
    pi_parity: complex | None
    pt_status: PTStatus
    converged: bool


@dataclasses.dataclass
class SpectrumSweep:
    """Per-coupling level sets plus a branch map between neighbours.

    ``branch_map[i][k]`` is the index at ``g_grid[i+1]`` of the level that
    continues level ``k`` at ``g_grid[i]``.
    """

    params: ModelParams
    q: Fraction
    g_grid: np.ndarray
    points: list
    branch_map: list

    def energies(self) -> np.ndarray:
        """(n_g, n_levels) array of energies in per-g sorted order."""
        return np.array([[p.energy for p in row] for row in self.points])

    def branch(self, k: int) -> np.ndarray:
        """Energies along the tracked branch starting at level ``k`` of g_grid[0]."""
        out, idx = [], k
        for i, row in enumerate(self.points):
            out.append(row[idx].energy)
            if i < len(self.branch_map):
                idx = int(self.branch_map[i][idx])
                if idx < 0:
                    break
        return np.array(out)


@dataclasses.dataclass(frozen=True)
class ZeroScan:
    """Real zeros found by a scan, and sub-intervals that could not be evaluated."""

    zeros: list
    gaps: list


def _safe(fun, x):
    try:
        value = fun(x)
    except ArithmeticError:
        return None
    value = complex(value)
    return value.real if np.isfinite(value.real) else None


def scan_real_zeros(fun, e_lo: float, e_hi: float, step: float, poles=(), xtol: float = 1e-12,
                    residual_ratio: float = 1e-3) -> ZeroScan:
    """Bracket and refine sign changes of ``Re fun(E)`` on ``[e_lo, e_hi]``.

    The interval is cut at every entry of ``poles`` so that a sign flip
    across a pole is never reported. A bracketed root is kept only if
    ``|fun|`` at the refined point is small against the bracketing
    values; otherwise it was a jump, not a zero.
    """
    if step <= 0 or e_hi <= e_lo:
        raise ValueError("need e_hi > e_lo and a positive step")
    cuts = [p for p in sorted(np.real(np.asarray(poles, dtype=complex))) if e_lo < p < e_hi]
    edges = [e_lo, *cuts, e_hi]
    zeros, gaps = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(int(np.ceil((b - a) / step)), 2)
        # endpoints sit on poles; stay a hair inside the segment
        pad = 1e-9 * max(b - a, 1e-12)
        xs = np.linspace(a + pad, b - pad, n + 1)
        vals = [_safe(fun, x) for x in xs]
        gap_start = None
        for i, v in enumerate(vals):
            if v is None and gap_start is None:
                gap_start = xs[i]
            elif v is not None and gap_start is not None:
                gaps.append((gap_start, xs[i]))
                gap_start = None
        if gap_start is not None:
            gaps.append((gap_start, xs[-1]))
        for i in range(n):
            v0, v1 = vals[i], vals[i + 1]
            if v0 is None or v1 is None:
                continue
            if v0 == 0.0:
                zeros.append(float(xs[i]))
                continue
            if np.sign(v0) == np.sign(v1):
                continue
            try:
                root = brentq(lambda x: complex(fun(x)).real, xs[i], xs[i + 1], xtol=xtol, rtol=1e-15)
            except ArithmeticError:
                gaps.append((xs[i], xs[i + 1]))
                continue
            value = _safe(fun, root)
            if value is not None and abs(value) <= residual_ratio * max(abs(v0), abs(v1)):
                zeros.append(float(root))
    return ZeroScan(zeros=sorted(zeros), gaps=gaps)


def gfunction_real_zeros(params: ModelParams, q, e_lo: float, e_hi: float, parity=None,
                         step: float | None = None) -> ZeroScan:
    """Real zeros of the model's G-function with the default scan step
    (pole spacing / 50) and cuts at the pole ladder."""
    spacing = pole_spacing(params)
    step = spacing / 50 if step is None else step
    n_poles = int(np.ceil((e_hi + 1) / spacing)) + 2
    ladder = pole_ladder(params, q, n_poles)
    return scan_real_zeros(gfunction(params, q, parity), e_lo, e_hi, step, ladder.real_positions())


@dataclasses.dataclass(frozen=True)
class ComplexZeros:
    zeros: list
    rejected: list  # (seed, reason)


def _newton(fun, z0, h, tol, max_iter=60):
    z = complex(z0)
    fz = complex(fun(z))
    for _ in range(max_iter):
        d = (fun(z + h) - fun(z - h)) / (2 * h)
        if d == 0 or not np.isfinite(d):
            raise ArithmeticError("vanishing derivative")
        dz = -fz / d
        if abs(dz) < tol * max(1.0, abs(z)):
            return z + dz, complex(fun(z + dz))
        lam = 1.0
        while True:
            trial = z + lam * dz
            ft = complex(fun(trial))
            if np.isfinite(ft) and abs(ft) < abs(fz):
                break
            lam /= 2
            if lam < 1e-6:
                raise ArithmeticError("damping failed to reduce |G|")
        z, fz = trial, ft
        if abs(lam * dz) < tol * max(1.0, abs(z)):
            return z, fz
    raise ArithmeticError("Newton iteration did not converge")


def find_complex_zeros(fun, region, grid_n: int = 60, refine_tol: float = 1e-12,
                       accept: float = 1e-9, h: float = 1e-7, grid_fun=None) -> ComplexZeros:
    """Zeros of an analytic ``fun`` inside ``region = (re_lo, re_hi, im_lo, im_hi)``.

    Local minima of ``ln|G|^2`` on a ``grid_n x grid_n`` grid seed a damped
    Newton iteration (central-difference derivative). A refined point is
    accepted when ``|G|`` is below ``accept`` times the largest ``|G|``
    among the seed's grid neighbours. Conjugate partners inside the
    region are added, and duplicates merged.

    ``grid_fun``, if given, evaluates an array of points at once (nan where
    undefined) and replaces the point-by-point grid scan.
    """
    re_lo, re_hi, im_lo, im_hi = region
    xs = np.linspace(re_lo, re_hi, grid_n)
    ys = np.linspace(im_lo, im_hi, grid_n)
    if grid_fun is not None:
        z = xs[:, None] + 1j * ys[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            grid = np.log(np.abs(np.asarray(grid_fun(z), dtype=complex)) ** 2)
        grid[~np.isfinite(grid)] = np.nan
    else:
        grid = np.full((grid_n, grid_n), np.nan)
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                try:
                    grid[i, j] = np.log(abs(complex(fun(complex(x, y)))) ** 2)
                except ArithmeticError:
                    pass
    found, rejected = [], []
    for i in range(grid_n):
        for j in range(grid_n):
            c = grid[i, j]
            if not np.isfinite(c):
                continue
            nb = grid[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if np.any(nb[np.isfinite(nb)] < c):
                continue
            seed = complex(xs[i], ys[j])
            scale = np.sqrt(np.exp(np.nanmax(nb)))
            try:
                z, fz = _newton(fun, seed, h, refine_tol)
            except ArithmeticError as exc:
                rejected.append((seed, str(exc)))
                continue
            if abs(fz) > accept * scale:
                rejected.append((seed, f"|G|={abs(fz):.3g} not below acceptance"))
                continue
            if not (re_lo <= z.real <= re_hi and im_lo <= z.imag <= im_hi):
                rejected.append((seed, "converged outside region"))
                continue
            found.append(z)
    merged = []
    for z in found + [np.conj(z) for z in found if im_lo <= -z.imag <= im_hi]:
        if all(abs(z - m) > 1e-8 * max(1.0, abs(z)) for m in merged):
            merged.append(z)
    merged.sort(key=lambda z: (round(z.real, 9), z.imag))
    return ComplexZeros(zeros=merged, rejected=rejected)


def gfunction_complex_zeros(params: ModelParams, q, region, parity=None, grid_n: int = 60,
                            conjugates: bool = True) -> ComplexZeros:
    """Complex zeros of the model's G-function in ``region``; with
    ``conjugates`` the mirror image of every zero is appended as well,
    since the spectrum is closed under conjugation."""
    res = find_complex_zeros(gfunction(params, q, parity), region, grid_n=grid_n,
                             grid_fun=lambda z: gfunction_values(params, q, z, parity)[0])
    if not conjugates:
        return res
    zeros = list(res.zeros)
    for z in res.zeros:
        if abs(z.imag) > TOL_REAL and all(abs(np.conj(z) - w) > 1e-8 * max(1.0, abs(z)) for w in zeros):
            zeros.append(complex(np.conj(z)))
    zeros.sort(key=lambda z: (round(z.real, 9), z.imag))
    return ComplexZeros(zeros=zeros, rejected=res.rejected)


def _sector_pairs(params: ModelParams, q, n_max: int):
    h = sector_hamiltonian(params, n_max, q)
    hermitian = params.kind is ModelKind.HERMITIAN_TP
    energies, right = eigendecompose(h, hermitian=hermitian)
    if hermitian:
        left = right.copy()
    else:
        left, _ = left_eigenvectors(h, energies, right)
    pairs = []
    for k in range(len(energies)):
        try:
            pairs.append(normalize(energies[k], right[:, k], left[:, k], Normalization.BI))
        except SelfOrthogonalError:
            pairs.append(normalize(energies[k], right[:, k], left[:, k], Normalization.UNIT))
    return pairs


def sector_states(params: ModelParams, q, n_max: int = DEFAULT_N_MAX, n_levels: int | None = None):
    """Lowest ``n_levels`` (by real part) biorthogonal pairs of sector ``q``."""
    pairs = _sector_pairs(params, q, n_max)
    return pairs if n_levels is None else pairs[:n_levels]


def pi_parity_of(pair: BiorthogonalPair, q, n_max: int) -> complex:
    """Pi eigenvalue of a sector eigenstate, snapped to {1, -1, i, -i}."""
    idx = sector_indices(q, n_max)
    pi = build_parity("pi", n_max)[np.ix_(idx, idx)]
    r = pair.right
    value = np.vdot(r, pi @ r) / np.vdot(r, r)
    options = np.array([1, -1, 1j, -1j])
    return complex(options[np.argmin(np.abs(options - value))])


def _convergence_flags(energies, refined, tol):
    flags = []
    for e in energies:
        flags.append(bool(np.min(np.abs(refined - e)) < tol * max(1.0, abs(e))))
    return flags


def spectrum_at(params: ModelParams, q, n_levels: int, n_max: int = DEFAULT_N_MAX,
                tol_conv: float = 1e-8, check_convergence: bool = True):
    """SpectrumPoints and their pairs for one coupling value."""
    q = parse_q(q)
    pairs = _sector_pairs(params, q, n_max)[:n_levels]
    energies = np.array([p.energy for p in pairs])
    if check_convergence:
        h2 = sector_hamiltonian(params, n_max + REFINE_N_MAX, q)
        refined = np.linalg.eigvals(h2)
        flags = _convergence_flags(energies, refined, tol_conv)
    else:
        flags = [True] * len(pairs)
    points = []
    for k, pair in enumerate(pairs):
        parity = pi_parity_of(pair, q, n_max) if params.kind is ModelKind.DTP else None
        points.append(SpectrumPoint(params.g, k, pair.energy, q, parity,
                                    pt_status(pair.energy), flags[k]))
    return points, pairs


def _track(prev_pairs, next_pairs, min_overlap=0.5):
    match = match_states(prev_pairs, next_pairs)
    perm = match.as_permutation()
    e_next = np.array([p.energy for p in next_pairs])
    weak = [ia for (ia, _), ov in zip(match.pairs, match.overlaps) if ov < min_overlap]
    if weak:
        # ambiguous eigenvector overlap: fall back to nearest energy
        used = set(int(perm[i]) for i in range(len(perm)) if i not in weak and perm[i] >= 0)
        for ia in weak:
            order = np.argsort(np.abs(e_next - prev_pairs[ia].energy))
            choice = next((int(j) for j in order if int(j) not in used), -1)
            perm[ia] = choice
            used.add(choice)
    return perm


def sweep_spectrum(params: ModelParams, g_grid, q, n_levels: int, n_max: int = DEFAULT_N_MAX,
                   tol_conv: float = 1e-8, check_convergence: bool = True) -> SpectrumSweep:
    """Exact-diagonalization spectra of sector ``q`` over a coupling grid."""
    q = parse_q(q)
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.size == 0:
        raise ValueError("empty coupling grid")
    if params.kind is not ModelKind.DTP and np.any(g_grid >= 0.5):
        raise ValueError("btp/Hermitian sweeps must stay below the collapse point g = 1/2")
    rows, maps, prev = [], [], None
    for g in g_grid:
        points, pairs = spectrum_at(params.with_g(g), q, n_levels, n_max, tol_conv, check_convergence)
        rows.append(points)
        if prev is not None:
            maps.append(_track(prev, pairs))
        prev = pairs
    return SpectrumSweep(params, q, g_grid, rows, maps)


def conjugate_pairing_defect(energies, tol=TOL_REAL) -> float:
    """Largest distance from a complex eigenvalue to the nearest conjugate
    of another eigenvalue; 0 when the set is closed under conjugation."""
    energies = np.asarray(energies, dtype=complex)
    worst = 0.0
    for k, e in enumerate(energies):
        if abs(e.imag) < tol:
            continue
        others = np.delete(energies, k)
        worst = max(worst, float(np.min(np.abs(others - np.conj(e)))))
    return worst


def sorted_eigenvalues(h) -> np.ndarray:
    w = np.linalg.eigvals(h)
    return w[order_energies(w)]
