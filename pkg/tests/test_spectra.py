import numpy as np
import pytest

from conftest import sector_eigs
from ptrabi.core import ModelParams, parity_block
from ptrabi.spectra import (
    PTStatus,
    conjugate_pairing_defect,
    find_complex_zeros,
    gfunction_complex_zeros,
    gfunction_real_zeros,
    pi_parity_of,
    pt_status,
    scan_real_zeros,
    sector_states,
    spectrum_at,
    sweep_spectrum,
)
from ptrabi.gfunction import gfunction


def test_scan_real_zeros_with_poles():
    # tan has poles at pi/2 + k pi that must not be mistaken for zeros
    poles = [np.pi / 2, 3 * np.pi / 2]
    scan = scan_real_zeros(np.tan, 0.1, 4.5, 0.01, poles=poles)
    assert np.allclose(scan.zeros, [np.pi], atol=1e-11)


def test_scan_records_gaps():
    def f(x):
        if 1.0 < x < 1.2:
            raise ArithmeticError("unevaluable")
        return x - 2.0

    scan = scan_real_zeros(f, 0, 3, 0.05)
    assert np.allclose(scan.zeros, [2.0])
    assert scan.gaps


def test_complex_zeros_simple():
    res = find_complex_zeros(lambda z: z * z + 1, (-1, 1, -2, 2), grid_n=20)
    got = sorted(res.zeros, key=lambda z: z.imag)
    assert np.allclose(got, [-1j, 1j], atol=1e-10)


def test_complex_gfunction_zero_is_eigenvalue():
    p = ModelParams(0.5, 0.1, 0.2, "btp")
    res = find_complex_zeros(gfunction(p, "1/4"), (5.3, 5.6, 0.005, 0.1), grid_n=12)
    exact = sector_eigs(p, "1/4")
    target = exact[np.argmin(np.abs(exact - (5.459 + 0.035j)))]
    assert any(abs(z - target) < 1e-7 for z in res.zeros)


def test_pt_status():
    assert pt_status(1.0 + 1e-12j) is PTStatus.SYMMETRIC
    assert pt_status(1.0 + 1e-3j) is PTStatus.BROKEN


def test_hermitian_limit_real_and_g0():
    p = ModelParams(0.5, 0.0, 0.3, "btp")
    points, _ = spectrum_at(p, "1/4", 10)
    assert max(abs(pt.energy.imag) for pt in points) < 1e-10
    points, _ = spectrum_at(p.with_g(0.0), "1/4", 6)
    expect = np.sort([n + s * 0.25 for n in (0, 2, 4) for s in (1, -1)])
    assert np.allclose([pt.energy.real for pt in points], expect, atol=1e-10)


def test_convergence_flag_and_parity_labels():
    p = ModelParams(0.5, 0.0, 0.25, "dtp")
    points, pairs = spectrum_at(p, "1/4", 5)
    assert all(pt.converged for pt in points)
    zp = gfunction_real_zeros(p, "1/4", -1, 5, parity="+").zeros
    for pt in points:
        if any(abs(pt.energy - z) < 1e-7 for z in zp):
            assert pt.pi_parity == 1
        else:
            assert pt.pi_parity == -1


def test_pi_parity_odd_sector():
    p = ModelParams(0.5, 0.0, 0.25, "dtp")
    pairs = sector_states(p, "3/4", 60, 4)
    assert {pi_parity_of(pr, "3/4", 60) for pr in pairs} <= {1j, -1j}


def test_sweep_and_errors():
    p = ModelParams(0.5, 0.1, 0.0, "btp")
    sweep = sweep_spectrum(p, np.linspace(0.1, 0.2, 4), "1/4", 4, n_max=60)
    assert sweep.energies().shape == (4, 4)
    assert len(sweep.branch(0)) == 4
    with pytest.raises(ValueError):
        sweep_spectrum(p, [], "1/4", 4)
    with pytest.raises(ValueError):
        sweep_spectrum(p, [0.5], "1/4", 4)


def test_conjugate_pairing_defect():
    assert conjugate_pairing_defect(np.array([1 + 1j, 1 - 1j, 2.0])) < 1e-12
    assert conjugate_pairing_defect(np.array([1 + 1j, 2.0])) > 0.1


def test_gfunction_complex_zeros_match_block():
    p = ModelParams(0.5, 0.0, 0.25, "dtp")
    h, _ = parity_block(p, 120, "1/4", -1)
    w = np.linalg.eigvals(h)
    expect = w[(np.abs(w.imag) > 1e-6) & (w.real < 10)]
    got = gfunction_complex_zeros(p, "1/4", (-1.0, 10.0, 0.005, 3.0), "-").zeros
    assert len(got) == len(expect) == 4
    for z in got:
        assert np.min(np.abs(expect - z)) < 1e-8
