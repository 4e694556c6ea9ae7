import math

import numpy as np
import pytest

from slhweno import stability as st


def test_code_path_matches_closed_form_at_reference_point():
    A = st.build_amplification(0.3, 0.7, 1.1, 2.2)
    B = st.amplification_closed_form(0.3, 0.7, 1.1, 2.2)
    assert np.abs(A - B).max() < 1e-12
    assert st.spectral_radius(A) <= 1 + 1e-12


def test_dual_path_on_random_tuples():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        t1, t2 = rng.uniform(0, 1, 2)
        x1, x2 = rng.uniform(0, 2 * math.pi, 2)
        R = st.impulse_responses(t1, t2)
        A = st._assemble(R, x1, x2)[0, 0]
        worst = max(worst, np.abs(A - st.amplification_closed_form(t1, t2, x1, x2)).max())
    assert worst < 1e-12


def test_zero_shift_is_neutral():
    # the average is carried unchanged; the recomputed first moments are damped
    for xi in ((0.0, 0.0), (1.0, 2.0), (math.pi, 0.3)):
        A = st.build_amplification(0.0, 0.0, *xi)
        assert st.spectral_radius(A) == pytest.approx(1.0, abs=1e-13)
        assert abs(A[0, 0] - 1) < 1e-13


def test_mass_row_at_zero_frequency():
    rng = np.random.default_rng(1)
    for t1, t2 in rng.uniform(0, 1, (5, 2)):
        A = st.build_amplification(t1, t2, 0.0, 0.0)
        np.testing.assert_allclose(A[0], [1, 0, 0], atol=1e-13)


@pytest.mark.parametrize("shift", [(1, 0), (2, 1), (-1, 3)])
def test_integer_shift_is_a_phase(shift):
    t1, t2, x1, x2 = 0.35, 0.6, 0.9, 2.7
    full = st.build_amplification(t1 + shift[0], t2 + shift[1], x1, x2, reduce=False)
    frac = st.build_amplification(t1, t2, x1, x2, reduce=False)
    phase = np.exp(-1j * (x1 * shift[0] + x2 * shift[1]))
    np.testing.assert_allclose(full, phase * frac, atol=1e-12)
    np.testing.assert_allclose(np.linalg.svd(full, compute_uv=False),
                               np.linalg.svd(frac, compute_uv=False), atol=1e-12)


def test_corner_sweep():
    res = st.sweep_spectral_radius(2)
    assert res.max_rho == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(res.slices[:, 2], 1.0, atol=1e-12)


def test_one_dimensional_reduction():
    for t1 in np.linspace(0, 1, 7):
        R = st.impulse_responses(t1, 0.0)
        xis = np.linspace(0, 2 * math.pi, 13)
        A = st._assemble(R, xis, np.zeros(1))[:, 0]
        # the y moment decouples from (ubar, vbar)
        assert np.abs(A[:, 2, :2]).max() < 1e-13 and np.abs(A[:, :2, 2]).max() < 1e-13
        assert st.spectral_radius(A).max() <= 1 + 1e-12


def test_small_sweep_and_csv(tmp_path):
    res = st.sweep_spectral_radius(4)
    assert res.max_rho <= 1 + 1e-12
    assert res.slices.shape == (16, 5)
    st.write_slices_csv(tmp_path / "s.csv", res)
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "theta1,theta2,max_rho,xi1,xi2" and len(rows) == 17
    with pytest.raises(ValueError):
        st.sweep_spectral_radius(1)
    with pytest.raises(ValueError):
        st.amplification_closed_form(1.5, 0.0, 0.0, 0.0)
