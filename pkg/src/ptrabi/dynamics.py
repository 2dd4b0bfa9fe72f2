"""Time evolution under the non-Hermitian Hamiltonian.

The state is propagated unnormalized; observables are expectations in
the normalized state and the amplification is tracked separately as
``log_norm = log ||psi(t)||``, which keeps long runs of an amplifying
evolution finite.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.linalg

from ptrabi.core import ModelParams, build_hamiltonian, number_operator, sector_indices, Q_EVEN
from ptrabi.eigensolver import eigendecompose, left_eigenvectors
from ptrabi.exceptions import EigensolverError

log = logging.getLogger(__name__)

DEFAULT_N_MAX = 200
STEP_TOL = 1e-8
AMPLIFICATION_LIMIT = 1e-8
_CHUNK = 2048


@dataclasses.dataclass(frozen=True)
class EvolutionTrace:
    times: np.ndarray
    W: np.ndarray
    n_avg: np.ndarray
    log_norm: np.ndarray
    params: ModelParams
    n_max: int
    method: str = "spectral"


def initial_state(n_max: int) -> np.ndarray:
    """Excited qubit (sigma_x = -1) and cavity vacuum, unit norm."""
    psi = np.zeros(2 * (n_max + 1), dtype=complex)
    psi[0] = 1 / np.sqrt(2)
    psi[n_max + 1] = -1 / np.sqrt(2)
    return psi


def observables(psi: np.ndarray, n_max: int):
    """``(W, n_avg, log_norm)`` of an unnormalized state or of columns of states."""
    psi = np.asarray(psi)
    cols = psi if psi.ndim == 2 else psi[:, None]
    d = n_max + 1
    norm2 = np.sum(np.abs(cols) ** 2, axis=0)
    sx = 2 * np.sum((np.conj(cols[:d]) * cols[d:]).real, axis=0) / norm2
    n_avg = (number_operator(n_max) @ (np.abs(cols) ** 2)) / norm2
    out = (np.clip((1 - sx) / 2, 0.0, 1.0), n_avg, 0.5 * np.log(norm2))
    return out if psi.ndim == 2 else tuple(x[0] for x in out)


def default_dt(params: ModelParams) -> float:
    """Output cadence: 40 samples per period of the fastest bare scale."""
    return 2 * np.pi / (40 * max(params.delta, params.omega))


def _spectral_system(h):
    energies, right = eigendecompose(h)
    left, _ = left_eigenvectors(h, energies, right)
    # BI scaling folded into the coefficients: c_k = <L_k|psi> / <L_k|R_k>
    overlaps = np.einsum("ij,ij->j", left.conj(), right)
    return energies, right, left, overlaps


def amplification_estimate(h, psi0, t_max, system=None) -> float:
    """Rough relative error of the spectral propagator at ``t_max``.

    Rounding puts ``~eps cond(R)`` weight on every mode; modes that the
    initial state does not populate but that grow faster than the
    populated ones amplify that noise by ``exp(dIm t)``.
    """
    energies, right, left, overlaps = system or _spectral_system(h)
    coeff = (left.conj().T @ psi0) / overlaps
    cond = np.linalg.cond(right)
    populated = np.abs(coeff) > 1e3 * np.finfo(float).eps * cond * np.abs(coeff).max()
    gap = energies.imag.max() - energies.imag[populated].max()
    return float(cond * np.finfo(float).eps * np.exp(min(gap * t_max, 700.0)))


def _evolve_spectral(h, psi0, times, system):
    energies, right, left, overlaps = system
    coeff = (left.conj().T @ psi0) / overlaps
    keep = coeff != 0
    growth = energies.imag[keep].max()
    states, shifts = [], []
    for start in range(0, len(times), _CHUNK):
        t = times[start:start + _CHUNK]
        phase = np.exp(-1j * np.outer(energies, t) - growth * t[None, :])
        states.append(right @ (coeff[:, None] * phase))
        shifts.append(growth * t)
    return np.hstack(states), np.concatenate(shifts)


def _evolve_expm(h, psi0, times, tol=STEP_TOL):
    """Stepwise propagation with step halving on the local error.

    The local error of a step is estimated by comparing one step with two
    half steps; the state is renormalized after each output time.
    """
    out = np.empty((len(psi0), len(times)), dtype=complex)
    log_norm = np.zeros(len(times))
    psi = psi0 / np.linalg.norm(psi0)
    acc = np.log(np.linalg.norm(psi0))
    out[:, 0], log_norm[0] = psi, acc
    cache = {}

    def propagators(step):
        if step not in cache:
            cache[step] = (scipy.linalg.expm(-1j * h * step), scipy.linalg.expm(-0.5j * h * step))
        return cache[step]

    for i in range(1, len(times)):
        span = times[i] - times[i - 1]
        n_sub = 1
        while True:
            step = span / n_sub
            full, half = propagators(step)
            trial = psi
            ok = True
            for _ in range(n_sub):
                one = full @ trial
                two = half @ (half @ trial)
                if np.linalg.norm(one - two) > tol * np.linalg.norm(one):
                    ok = False
                    break
                scale = np.linalg.norm(one)
                trial = one / scale
                acc += np.log(scale)
            if ok:
                break
            if n_sub > 1 << 12:
                raise EigensolverError(f"matrix-exponential step control failed at t={times[i]}")
            # roll back the partial accumulation before refining
            acc = log_norm[i - 1]
            n_sub *= 2
        psi = trial
        out[:, i], log_norm[i] = psi, acc
    return out, log_norm


def evolve(params: ModelParams, t_max: float, dt: float | None = None,
           n_max: int = DEFAULT_N_MAX, method: str = "auto",
           psi0: np.ndarray | None = None) -> EvolutionTrace:
    """Propagate ``psi0`` (default: ``initial_state``) up to ``t_max``.

    Parameters
    ----------
    method : {'auto', 'spectral', 'expm'}
        'spectral' expands in the biorthogonal eigenbasis; 'expm' steps
        with matrix exponentials. 'auto' uses the spectral propagator
        unless ``amplification_estimate`` exceeds 1e-8 (ill-conditioned
        eigenvectors near an EP, or rounding noise in fast-growing unpopulated
        modes).
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    dt = default_dt(params) if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if method not in ("auto", "spectral", "expm"):
        raise ValueError(f"unknown method {method!r}")
    n_steps = int(np.floor(t_max / dt + 1e-9))
    times = dt * np.arange(n_steps + 1)
    h = build_hamiltonian(params, n_max)
    psi0 = initial_state(n_max) if psi0 is None else np.asarray(psi0, dtype=complex)

    system = None
    if method in ("auto", "spectral"):
        try:
            system = _spectral_system(h)
        except EigensolverError as exc:
            if method == "spectral":
                raise
            log.warning("spectral propagator unavailable (%s); using expm", exc)
    if method == "auto" and system is not None:
        amp = amplification_estimate(h, psi0, t_max, system)
        if amp > AMPLIFICATION_LIMIT:
            log.info("spectral amplification estimate %.3g; using expm stepping", amp)
            system = None
        method = "spectral" if system is not None else "expm"
    elif method == "auto":
        method = "expm"

    if method == "spectral":
        states, shift = _evolve_spectral(h, psi0, times, system)
        W, n_avg, ln = observables(states, n_max)
        log_norm = ln + shift
    else:
        try:
            states, log_norm = _evolve_expm(h, psi0, times)
        except EigensolverError as exc:
            cond = np.linalg.cond(system[1]) if system is not None else float("nan")
            raise EigensolverError(f"both propagators failed; cond(R)={cond:.3g}: {exc}") from exc
        W, n_avg, ln = observables(states, n_max)
        log_norm = log_norm + ln
    return EvolutionTrace(times, W, n_avg, log_norm, params, n_max, method)


@dataclasses.dataclass(frozen=True)
class Mode:
    level: int
    energy: complex
    im: float
    weight: float  # |c_k| for BI-normalized R_k
    n_avg: float


def dominant_mode_analysis(params: ModelParams, n_max: int = DEFAULT_N_MAX, q=Q_EVEN,
                           t: float | None = None) -> list:
    """Eigenmodes of sector ``q`` ranked by their dynamical importance.

    Without ``t`` modes are ranked by Im E (descending), ties by weight.
    With ``t`` they are ranked by ``log|c_k| + Im E_k t``, the log of
    their amplitude at time ``t``. Levels are energy-ordered indices in
    the sector; ``n_avg`` is the photon number of the normalized R_k.
    """
    idx = sector_indices(q, n_max)
    h = build_hamiltonian(params, n_max)[np.ix_(idx, idx)]
    psi0 = initial_state(n_max)[idx]
    energies, right, left, overlaps = _spectral_system(h)
    coeff = (left.conj().T @ psi0) / overlaps
    weight = np.abs(coeff * np.sqrt(overlaps))
    n_op = number_operator(n_max)[idx]
    n_modes = (n_op @ np.abs(right) ** 2) / np.sum(np.abs(right) ** 2, axis=0)
    modes = [Mode(k, complex(energies[k]), float(energies[k].imag), float(weight[k]),
                  float(n_modes[k])) for k in range(len(energies))]
    if t is None:
        return sorted(modes, key=lambda m: (-round(m.im, 12), -m.weight))
    score = {m.level: np.log(max(m.weight, 1e-300)) + m.im * t for m in modes}
    return sorted(modes, key=lambda m: -score[m.level])


@dataclasses.dataclass(frozen=True)
class Plateau:
    t_start: float
    t_end: float
    level: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def find_plateaus(times, values, window: float, rel_tol: float = 0.05,
                  min_duration: float | None = None) -> list:
    """Intervals where a trace stays flat after smoothing.

    The trace is averaged over ``window`` (to remove fast oscillations);
    a point belongs to a plateau when the smoothed value changes by less
    than ``rel_tol * max(1, value)`` over the next window.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    dt = times[1] - times[0]
    w = max(1, int(round(window / dt)))
    if len(values) <= 2 * w:
        return []
    kernel = np.ones(w) / w
    smooth = np.convolve(values, kernel, mode="valid")
    ahead = smooth[w:]
    base = smooth[:-w]
    flat = np.abs(ahead - base) < rel_tol * np.maximum(1.0, np.abs(base))
    min_duration = 2 * window if min_duration is None else min_duration
    plateaus, start = [], None
    for i, f in enumerate(np.append(flat, False)):
        if f and start is None:
            start = i
        elif not f and start is not None:
            t0, t1 = times[start], times[i - 1 + w]
            if t1 - t0 >= min_duration:
                plateaus.append(Plateau(float(t0), float(t1), float(np.mean(smooth[start:i + w]))))
            start = None
    return plateaus
