import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptrabi.core import ModelParams, sector_hamiltonian
from ptrabi.eigensolver import (
    Normalization,
    biorthogonal_system,
    eigendecompose,
    fix_phase,
    left_eigenvectors,
    match_states,
    normalize,
    order_energies,
)
from ptrabi.exceptions import SelfOrthogonalError


def _h(g=0.3, eps=0.1, n_max=40):
    return sector_hamiltonian(ModelParams(0.5, eps, g, "btp"), n_max, "1/4")


def test_biorthonormality():
    pairs = biorthogonal_system(_h())
    L = np.array([p.left for p in pairs]).T
    R = np.array([p.right for p in pairs]).T
    assert np.max(np.abs(L.conj().T @ R - np.eye(len(pairs)))) < 1e-8


def test_bi_norms_balanced_and_left_eigen():
    h = _h()
    for p in biorthogonal_system(h)[:10]:
        assert p.overlap == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.norm(p.left) == pytest.approx(np.linalg.norm(p.right), rel=1e-10)
        assert np.linalg.norm(p.left.conj() @ h - p.energy * p.left.conj()) < 1e-8


def test_left_is_conjugate_of_right_for_complex_symmetric():
    # h == h.T, so the left eigenvector is the conjugate right one
    h = _h()
    w, r = eigendecompose(h)
    left, _ = left_eigenvectors(h, w, r)
    for k in range(8):
        c = np.vdot(left[:, k], r[:, k].conj())
        assert abs(abs(c) - 1) < 1e-8


def test_hermitian_left_equals_right():
    h = sector_hamiltonian(ModelParams(0.5, 0.2, 0.3, "hermitian"), 30, "1/4")
    for p in biorthogonal_system(h):
        assert p.overlap == pytest.approx(1.0)
        assert np.allclose(p.left, p.right, atol=1e-8)


def test_unit_normalization_c_product():
    pairs = biorthogonal_system(_h(), Normalization.UNIT)
    for p in pairs[:6]:
        assert np.linalg.norm(p.right) == pytest.approx(1.0)
        assert 0 < abs(p.overlap) <= 1 + 1e-12


def test_self_orthogonal_jordan_block():
    # 2x2 Jordan block: a single eigenvector whose left partner is orthogonal to it
    r = np.array([1.0, 0.0])
    l = np.array([0.0, 1.0])
    with pytest.raises(SelfOrthogonalError):
        normalize(0.0, r, l, Normalization.BI)
    assert normalize(0.0, r, l, Normalization.UNIT).overlap == 0


def test_residual_check_and_dimension_limit():
    with pytest.raises(ValueError):
        eigendecompose(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        eigendecompose(np.eye(5), max_dim=4)
    with pytest.raises(ValueError):
        eigendecompose(np.array([[np.nan]]))


def test_order_energies_conjugate_tiebreak():
    e = np.array([1 + 1e-13 + 0.2j, 1 - 0.2j, -3 + 0j])
    assert list(order_energies(e)) == [2, 1, 0]


def test_fix_phase():
    v = np.array([[1j, 0.1], [0.5, -2.0]])
    out = fix_phase(v)
    assert out[0, 0] == pytest.approx(1.0)
    assert out[1, 1] == pytest.approx(2.0)


def test_match_states_identity_and_permutation():
    a = biorthogonal_system(_h(0.30))[:6]
    b = biorthogonal_system(_h(0.3001))[:6]
    m = match_states(a, b)
    assert list(m.as_permutation()) == list(range(6))
    m2 = match_states(a, b[::-1])
    assert list(m2.as_permutation()) == list(range(5, -1, -1))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 12))
def test_random_complex_matrices(seed, n):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    pairs = biorthogonal_system(h)
    L = np.array([p.left for p in pairs]).T
    R = np.array([p.right for p in pairs]).T
    assert np.max(np.abs(L.conj().T @ R - np.eye(n))) < 1e-6
