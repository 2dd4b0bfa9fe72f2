"""G-functions of the biased and dissipative two-photon Rabi models.

Both models reduce, after a squeezing transform of the field, to a pair
of coupled coefficient sequences ``e_n``, ``f_n`` obeying

    e_n     = (delta/2) f_n / (pole_n - E)
    f_{n+1} = (A_n(E) f_n + B f_{n-1} + C e_n) / (8 g (n+q+1/4)(n+q+3/4))

with ``f_0 = 1``. The G-function is a weighted sum of these sequences
with weight ``F(n) = m!/n! (t/2)**n``, ``m = 2(n+q-1/4)``, and its zeros
are the regular eigenvalues.

``F(n)`` grows factorially while ``f_n`` decays factorially, so the sums
are accumulated on the products ``u_n = F(n) f_n`` and ``v_n = F(n) e_n``
directly, each step multiplying by the exact ratio ``F(n+1)/F(n)``.
"""

from __future__ import annotations

import dataclasses
import enum
from fractions import Fraction

import numpy as np

from ptrabi.core import ModelKind, ModelParams, Q_EVEN, parse_q
from ptrabi.exceptions import CollapseDomainError, PoleProximityError, SeriesConvergenceError

DEFAULT_TOL = 1e-12
DEFAULT_MAX_TERMS = 500
TAIL_WINDOW = 5


class Branch(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    DTP = "dtp"


@dataclasses.dataclass(frozen=True)
class SqueezeParams:
    """Squeezing-transform parameters at coupling ``g``.

    ``beta``/``tanh_theta`` belong to the unitary transform used for the
    btp and Hermitian models (undefined, stored as nan, for g >= 1/2);
    ``gamma``/``tan_r`` to the similarity transform of the dtp model.
    """

    g: float
    beta: float
    gamma: float
    tanh_theta: float
    tan_r: float


def squeeze_params(g: float, kind=ModelKind.BTP) -> SqueezeParams:
    kind = ModelKind.coerce(kind)
    g = float(g)
    if g < 0:
        raise ValueError("g must be non-negative")
    gamma = np.sqrt(1 + 4 * g * g)
    tan_r = np.sqrt((gamma - 1) / (gamma + 1))
    if g < 0.5:
        beta = np.sqrt(1 - 4 * g * g)
        tanh_theta = np.sqrt((1 - beta) / (1 + beta))
    elif kind is ModelKind.DTP:
        beta = tanh_theta = float("nan")
    else:
        raise CollapseDomainError(
            f"g={g} is at or beyond the collapse point g=1/2; the squeezing transform is singular"
        )
    return SqueezeParams(g=g, beta=float(beta), gamma=float(gamma),
                         tanh_theta=float(tanh_theta), tan_r=float(tan_r))


@dataclasses.dataclass(frozen=True)
class PoleLadder:
    """Energies at which the ``e_n`` denominators vanish.

    ``entries`` has shape ``(n, 2)`` for btp/Hermitian models (columns are
    the + and - branches) and shape ``(n,)`` for the dtp model.
    """

    kind: ModelKind
    q: Fraction
    entries: np.ndarray
    spacing: float

    def real_positions(self) -> np.ndarray:
        """Sorted distinct real parts, used to split real-axis scans."""
        re = np.unique(np.round(np.real(self.entries).ravel(), 14))
        return np.sort(re)


def pole_ladder(params: ModelParams, q, n_poles: int) -> PoleLadder:
    q = parse_q(q)
    sp = squeeze_params(params.g, params.kind)
    n = np.arange(n_poles)
    if params.kind is ModelKind.DTP:
        entries = 2 * (n + float(q)) * sp.gamma - 0.5
        return PoleLadder(params.kind, q, entries.astype(float), 2 * sp.gamma)
    bias = _bias(params)
    base = 2 * (n + float(q)) * sp.beta - 0.5
    entries = np.stack([base + bias, base - bias], axis=1).astype(complex)
    return PoleLadder(params.kind, q, entries, 2 * sp.beta)


def _bias(params: ModelParams) -> complex:
    # Bias seen by the "+" branch; the "-" branch sees its negative.
    if params.kind is ModelKind.BTP:
        return 0.5j * params.epsilon
    return 0.5 * params.epsilon


@dataclasses.dataclass(frozen=True)
class _Coefficients:
    """Per-index constants of one recurrence branch."""

    q: float
    g: float
    ce: float  # delta/2
    poles: np.ndarray
    a0: np.ndarray  # A_n(E) = a0[n] + a1*E
    a1: float
    b: float
    c: float
    den: np.ndarray
    ratio: np.ndarray  # F(n+1)/F(n)
    spacing: float


def _coefficients(params: ModelParams, q: Fraction, branch: Branch, n_terms: int) -> _Coefficients:
    if params.g <= 0:
        raise ValueError("the series solution needs g > 0 (the f recurrence divides by 8g)")
    sp = squeeze_params(params.g, params.kind)
    qf = float(q)
    g = params.g
    n = np.arange(n_terms + 1, dtype=float)
    if branch is Branch.DTP:
        if params.kind is not ModelKind.DTP:
            raise ValueError("dtp branch requested for a non-dtp model")
        poles = (2 * (n + qf) * sp.gamma - 0.5).astype(complex)
        a0 = (2 * (n + qf) * (2 - sp.gamma**2) - 0.5 * sp.gamma).astype(complex)
        a1, b, c = -sp.gamma, 2 * g, -0.5 * params.delta * sp.gamma
        t, spacing = sp.tan_r, 2 * sp.gamma
    else:
        if params.kind is ModelKind.DTP:
            raise ValueError("plus/minus branches belong to the btp and Hermitian models")
        s = 1 if branch is Branch.PLUS else -1
        bias = s * _bias(params)
        poles = 2 * (n + qf) * sp.beta + bias - 0.5
        a0 = 2 * (n + qf) * (1 + 4 * g * g) - sp.beta * (bias + 0.5)
        a1, b, c = -sp.beta, -2 * g, -0.5 * params.delta * sp.beta
        t, spacing = sp.tanh_theta, 2 * sp.beta
    m = 2 * n + (0 if q == Q_EVEN else 1)
    ratio = (m + 1) * (m + 2) / (n + 1) * (t / 2)
    den = 8 * g * (n + qf + 0.25) * (n + qf + 0.75)
    return _Coefficients(qf, g, 0.5 * params.delta, poles, a0 + 0j, a1, b, c, den, ratio, spacing)


def _scaled_sums(co: _Coefficients, energy, tol, max_terms, tol_pole):
    """Sums of F(n) e_n and F(n) f_n over a vector of energies.

    Returns ``(sum_e, sum_f, near_pole, converged, n_used)``.
    """
    E = np.atleast_1d(np.asarray(energy, dtype=complex))
    u_prev = np.zeros_like(E)
    u = np.ones_like(E)
    sum_e = np.zeros_like(E)
    sum_f = np.zeros_like(E)
    near_pole = np.zeros(E.shape, dtype=bool)
    recent = []
    converged = np.zeros(E.shape, dtype=bool)
    n_used = 0
    for n in range(max_terms):
        dist = co.poles[n] - E
        near = np.abs(dist) < tol_pole
        near_pole |= near
        dist = np.where(near, 1.0, dist)
        v = co.ce * u / dist
        sum_e += v
        sum_f += u
        n_used = n + 1
        recent.append(np.abs(u) + np.abs(v))
        if len(recent) > TAIL_WINDOW:
            recent.pop(0)
        if n + 1 >= TAIL_WINDOW:
            scale = np.abs(sum_e) + np.abs(sum_f)
            tail = np.max(recent, axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                converged = (tail <= tol * scale) & np.isfinite(scale)
            if np.all(converged | near_pole | ~np.isfinite(scale)):
                break
        r_prev = co.ratio[n - 1] if n > 0 else 0.0
        u_next = co.ratio[n] * ((co.a0[n] + co.a1 * E) * u + co.b * r_prev * u_prev + co.c * v) / co.den[n]
        u_prev, u = u, u_next
    return sum_e, sum_f, near_pole, converged, n_used


def _default_tol_pole(co: _Coefficients) -> float:
    return 1e-8 * co.spacing


@dataclasses.dataclass(frozen=True)
class RecurrenceSeries:
    """Raw coefficient sequences at one energy."""

    q: Fraction
    branch: Branch
    energy: complex
    e: np.ndarray
    f: np.ndarray

    @property
    def n_terms(self) -> int:
        return len(self.f)


def _raw_recurrence(params, q, energy, branch, n_terms, tol_pole, e_override):
    q = parse_q(q)
    if n_terms < 2:
        raise ValueError("n_terms must be at least 2")
    co = _coefficients(params, q, branch, n_terms)
    tol_pole = _default_tol_pole(co) if tol_pole is None else tol_pole
    overrides = dict(e_override or {})
    E = complex(energy)
    e = np.zeros(n_terms, dtype=complex)
    f = np.zeros(n_terms, dtype=complex)
    f[0] = 1.0
    for n in range(n_terms):
        if n in overrides:
            e[n] = overrides[n]
        else:
            dist = co.poles[n] - E
            if abs(dist) < tol_pole:
                raise PoleProximityError(
                    f"E={E} lies within {tol_pole:.3g} of pole {n} ({co.poles[n]})",
                    pole_index=n, distance=abs(dist))
            e[n] = co.ce * f[n] / dist
        if n + 1 < n_terms:
            f_prev = f[n - 1] if n > 0 else 0.0
            f[n + 1] = ((co.a0[n] + co.a1 * E) * f[n] + co.b * f_prev + co.c * e[n]) / co.den[n]
    return RecurrenceSeries(q=q, branch=branch, energy=E, e=e, f=f)


def btp_recurrence(params: ModelParams, q, energy, branch, n_terms: int,
                   tol_pole: float | None = None, e_override=None) -> RecurrenceSeries:
    """Coefficients ``e_{n,+-}``, ``f_{n,+-}`` of the biased (or Hermitian) model.

    ``e_override`` maps an index to a value used in place of the pole
    formula; this is how the finite Juddian solutions are built on a pole.
    """
    branch = Branch(branch)
    if branch is Branch.DTP:
        raise ValueError("branch must be plus or minus")
    return _raw_recurrence(params, q, energy, branch, n_terms, tol_pole, e_override)


def dtp_recurrence(params: ModelParams, q, energy, n_terms: int,
                   tol_pole: float | None = None, e_override=None) -> RecurrenceSeries:
    """Coefficients ``e_n``, ``f_n`` of the dissipative model (needs g > 0)."""
    return _raw_recurrence(params, q, energy, Branch.DTP, n_terms, tol_pole, e_override)


def _parity_sign(parity) -> int:
    if isinstance(parity, str):
        parity = parity.strip()
        if parity in ("+", "+1", "even"):
            return 1
        if parity in ("-", "-1", "odd"):
            return -1
    elif parity in (1, -1):
        return int(parity)
    raise ValueError(f"parity must be '+' or '-', got {parity!r}")


def gfunction_values(params: ModelParams, q, energies, parity=None, tol=DEFAULT_TOL,
                     max_terms=DEFAULT_MAX_TERMS, tol_pole=None):
    """Vectorized G-function.

    Returns ``(values, near_pole, converged)``; entries that hit a pole or
    failed the tail criterion are nan in ``values``.
    """
    q = parse_q(q)
    E = np.asarray(energies, dtype=complex)
    shape = E.shape
    E = E.ravel()
    if params.kind is ModelKind.DTP:
        sign = _parity_sign(parity)
        co = _coefficients(params, q, Branch.DTP, max_terms)
        tp = _default_tol_pole(co) if tol_pole is None else tol_pole
        se, sf, near, conv, _ = _scaled_sums(co, E, tol, max_terms, tp)
        values = se - sign * sf
    else:
        co_p = _coefficients(params, q, Branch.PLUS, max_terms)
        co_m = _coefficients(params, q, Branch.MINUS, max_terms)
        tp = _default_tol_pole(co_p) if tol_pole is None else tol_pole
        se_p, sf_p, near_p, conv_p, _ = _scaled_sums(co_p, E, tol, max_terms, tp)
        se_m, sf_m, near_m, conv_m, _ = _scaled_sums(co_m, E, tol, max_terms, tp)
        values = se_p * se_m - sf_p * sf_m
        near = near_p | near_m
        conv = conv_p & conv_m
    values = np.where(near | ~conv, np.nan, values)
    return values.reshape(shape), near.reshape(shape), conv.reshape(shape)


def _scalar(params, q, energy, parity, tol, max_terms, tol_pole):
    values, near, conv = gfunction_values(params, q, [energy], parity, tol, max_terms, tol_pole)
    if near[0]:
        raise PoleProximityError(f"E={energy} is within pole tolerance of the ladder")
    if not conv[0]:
        raise SeriesConvergenceError(
            f"G-function series at E={energy} did not converge within {max_terms} terms")
    return complex(values[0])


def btp_gfunction(params: ModelParams, q, energy, tol=DEFAULT_TOL,
                  max_terms=DEFAULT_MAX_TERMS, tol_pole=None) -> complex:
    """``(sum F e_+)(sum F e_-) - (sum F f_+)(sum F f_-)``.

    Also serves the Hermitian model (real bias). Defined up to a nonzero
    global factor; only its zeros carry meaning.
    """
    if params.kind is ModelKind.DTP:
        raise ValueError("use dtp_gfunction for the dtp model")
    return _scalar(params, q, energy, None, tol, max_terms, tol_pole)


def btp_gfunction_pt(params: ModelParams, q, energy: float, tol=DEFAULT_TOL,
                     max_terms=DEFAULT_MAX_TERMS, tol_pole=None) -> float:
    """Manifestly real form ``|sum F e_+|^2 - |sum F f_+|^2`` for real E."""
    if params.kind is not ModelKind.BTP:
        raise ValueError("the |.|^2 form holds for the btp model only")
    co = _coefficients(params, parse_q(q), Branch.PLUS, max_terms)
    tp = _default_tol_pole(co) if tol_pole is None else tol_pole
    se, sf, near, conv, _ = _scaled_sums(co, [float(energy)], tol, max_terms, tp)
    if near[0]:
        raise PoleProximityError(f"E={energy} is within pole tolerance of the ladder")
    if not conv[0]:
        raise SeriesConvergenceError(f"series at E={energy} did not converge")
    return float(abs(se[0]) ** 2 - abs(sf[0]) ** 2)


def dtp_gfunction(params: ModelParams, q, energy, parity, tol=DEFAULT_TOL,
                  max_terms=DEFAULT_MAX_TERMS, tol_pole=None) -> complex:
    """``G_+-(E) = sum (e_n -+ f_n) F(n)`` with ``t = tan r``.

    ``parity='+'`` selects the Pi-even family (Pi = +1 for q=1/4,
    Pi = +i for q=3/4), ``'-'`` the Pi-odd one.
    """
    if params.kind is not ModelKind.DTP:
        raise ValueError("dtp_gfunction needs a dtp model")
    return _scalar(params, q, energy, parity, tol, max_terms, tol_pole)


def gfunction(params: ModelParams, q, parity=None, **kwargs):
    """Closure ``E -> G(E)`` for the model's appropriate G-function."""
    if params.kind is ModelKind.DTP:
        return lambda E: dtp_gfunction(params, q, E, parity, **kwargs)
    return lambda E: btp_gfunction(params, q, E, **kwargs)


def pole_spacing(params: ModelParams) -> float:
    sp = squeeze_params(params.g, params.kind)
    return 2 * (sp.gamma if params.kind is ModelKind.DTP else sp.beta)


def gfunction_derivative(params: ModelParams, q, energy, parity=None, step=None, **kwargs) -> complex:
    """dG/dE by central difference, step ``1e-6 * pole spacing`` by default."""
    h = 1e-6 * pole_spacing(params) if step is None else step
    G = gfunction(params, q, parity, **kwargs)
    return (G(energy + h) - G(energy - h)) / (2 * h)
