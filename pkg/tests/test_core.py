import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import same_multiset
from ptrabi.core import (
    ModelParams,
    ParityVariant,
    Q_EVEN,
    Q_ODD,
    build_hamiltonian,
    build_parity,
    number_operator,
    parity_basis,
    parity_block,
    parse_q,
    sector_hamiltonian,
    sector_indices,
    sector_split,
)

N = 30


def _pt(h, p):
    # P T H T P with T complex conjugation
    return p @ h.conj() @ p.conj().T


def test_shape_and_complex_symmetry():
    for kind, eps in [("btp", 0.1), ("dtp", 0.0), ("hermitian", 0.1)]:
        h = build_hamiltonian(ModelParams(0.5, eps, 0.2, kind), N)
        assert h.shape == (2 * (N + 1),) * 2
        assert np.allclose(h, h.T)


def test_hermitian_kind_is_hermitian():
    h = build_hamiltonian(ModelParams(0.5, 0.3, 0.2, "hermitian"), N)
    assert np.allclose(h, h.conj().T)


def test_small_matrix_by_hand():
    # n_max = 2: basis |up,0>,|up,1>,|up,2>,|down,0>,|down,1>,|down,2>
    h = build_hamiltonian(ModelParams(1.0, 0.2, 0.3, "btp"), 2)
    s2 = np.sqrt(2)
    assert h[0, 0] == pytest.approx(0.1j)
    assert h[3, 3] == pytest.approx(-0.1j)
    assert h[0, 2] == pytest.approx(0.3 * s2)
    assert h[3, 5] == pytest.approx(-0.3 * s2)
    assert h[0, 3] == pytest.approx(-0.5)
    assert h[2, 2] == pytest.approx(2 + 0.1j)


def test_btp_pt_symmetry_with_pi():
    h = build_hamiltonian(ModelParams(0.5, 0.1, 0.2, "btp"), N)
    pi = build_parity(ParityVariant.PI, N)
    assert np.max(np.abs(_pt(h, pi) - h)) < 1e-12
    assert np.max(np.abs(pi @ h - h @ pi)) > 1e-3  # bias breaks Pi itself


def test_dtp_pi_commutes_and_p_sigma_x_pt():
    h = build_hamiltonian(ModelParams(5.0, 0.0, 0.7, "dtp"), N)
    pi = build_parity(ParityVariant.PI, N)
    p = build_parity(ParityVariant.P_SIGMA_X, N)
    assert np.max(np.abs(pi @ h - h @ pi)) < 1e-12
    assert np.max(np.abs(_pt(h, p) - h)) < 1e-12


def test_pi_order_four():
    pi = build_parity("pi", 9)
    assert np.allclose(np.linalg.matrix_power(pi, 4), np.eye(20))
    assert not np.allclose(np.linalg.matrix_power(pi, 2), np.eye(20))


def test_validation():
    with pytest.raises(ValueError):
        ModelParams(0.5, 0.1, 0.2, "dtp")
    with pytest.raises(ValueError):
        ModelParams(-1.0)
    with pytest.raises(ValueError):
        ModelParams(0.5, omega=2.0)
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(0.5), 1)
    with pytest.raises(ValueError):
        parse_q("1/2")


def test_parse_q_forms():
    assert parse_q("1/4") == parse_q(0.25) == Q_EVEN
    assert parse_q(" 3/4") == Q_ODD


def test_sectors_cover_full_spectrum():
    p = ModelParams(0.5, 0.1, 0.2, "btp")
    full = np.linalg.eigvals(build_hamiltonian(p, N))
    parts = np.concatenate([np.linalg.eigvals(sector_hamiltonian(p, N, q)) for q in ("1/4", "3/4")])
    assert same_multiset(parts, full, 1e-9)
    even, odd = sector_split(N)
    assert len(even) + len(odd) == N + 1


def test_sector_blocks_decouple():
    h = build_hamiltonian(ModelParams(0.5, 0.1, 0.3, "btp"), N)
    a, b = sector_indices("1/4", N), sector_indices("3/4", N)
    assert np.all(h[np.ix_(a, b)] == 0)


def test_parity_basis_is_eigenbasis():
    pi = build_parity("pi", N)
    for q in ("1/4", "3/4"):
        for parity in ((1, -1) if q == "1/4" else (1j, -1j)):
            v = parity_basis(q, N, parity)
            assert np.allclose(v.conj().T @ v, np.eye(v.shape[1]))
            assert np.allclose(pi @ v, parity * v)


def test_parity_blocks_cover_dtp_sector():
    p = ModelParams(5.0, 0.0, 0.5, "dtp")
    sector = np.linalg.eigvals(sector_hamiltonian(p, N, "1/4"))
    blocks = np.concatenate([np.linalg.eigvals(parity_block(p, N, "1/4", s)[0]) for s in (1, -1)])
    assert same_multiset(blocks, sector, 1e-8)


def test_number_operator():
    assert np.array_equal(number_operator(3), [0, 1, 2, 3, 0, 1, 2, 3])


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(0.01, 6), eps=st.floats(0, 1), g=st.floats(0, 0.49))
def test_btp_spectrum_closed_under_conjugation(delta, eps, g):
    h = sector_hamiltonian(ModelParams(delta, eps, g, "btp"), 24, "1/4")
    w = np.linalg.eigvals(h)
    # characteristic polynomial has real coefficients
    assert same_multiset(w, w.conj(), 1e-7 * (1 + np.abs(w).max()))


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(0, 3), eps=st.floats(0, 1))
def test_g_zero_closed_form(delta, eps):
    split = 0.5 * np.sqrt(complex(delta**2 - eps**2))
    expect = np.concatenate([np.arange(7) + split, np.arange(7) - split])
    got = np.linalg.eigvals(build_hamiltonian(ModelParams(delta, eps, 0.0, "btp"), 6))
    # an exceptional point at delta == eps splits eigenvalues by ~sqrt(eps_mach)
    assert same_multiset(got, expect, 1e-10 if abs(delta - eps) > 1e-3 else 1e-6)
