import numpy as np
import pytest

from requant.errors import NonSymplecticPoint
from requant.manifold import (RephasedChart, connection, connection_curl, fd_gradient,
                              hamilton_function, hamilton_gradient, symplectic_form)
from requant.models import ProjectiveChart, SpinCoherentChart

# regression constant: 2 j hbar for the spin-10 chart at the pole, fixed after the curl check agreed
SPIN10_OMEGA_AT_POLE = 20.0


def charts_and_points(glauber, spin_chart):
    proj = ProjectiveChart(3, base=1)
    return [
        (glauber, np.array([0.4, -0.7])),
        (glauber, np.array([-1.1, 0.3])),
        (spin_chart, np.array([0.2, 0.35])),
        (spin_chart, np.array([-0.9, 0.4])),
        (proj, np.array([0.3, -0.2, 0.5, 0.1])),
        (RephasedChart(glauber, lambda x: x[0] * x[1] ** 2, lambda x: np.array([x[1] ** 2, 2 * x[0] * x[1]])),
         np.array([0.5, 0.6])),
    ]


def test_embed_is_normalized(glauber, spin_chart):
    for chart, x in charts_and_points(glauber, spin_chart):
        psi = chart.embed(x)
        assert abs(np.vdot(psi, psi).real - 1) <= 1e-10


def test_analytic_tangents_match_differences(glauber, spin_chart):
    for chart, x in charts_and_points(glauber, spin_chart):
        assert chart.has_analytic_tangent
        err = np.max(np.abs(chart.tangent(x) - chart.fd_tangent(x)))
        assert err <= 1e-8, chart.name


def test_symplectic_antisymmetry_and_curl(glauber, spin_chart):
    for chart, x in charts_and_points(glauber, spin_chart):
        w = symplectic_form(chart, x)
        assert np.max(np.abs(w + w.T)) <= 1e-10 * np.max(np.abs(w))
        assert np.all(np.diag(w) == 0)
        assert np.max(np.abs(connection_curl(chart, x, h=1e-4) - w)) <= 1e-5


def test_connection_is_imaginary(glauber, spin_chart):
    for chart, x in charts_and_points(glauber, spin_chart):
        assert np.max(np.abs(connection(chart, x).real)) <= 1e-10


def test_glauber_symplectic_form_is_canonical(glauber):
    for x in ([0.0, 0.0], [1.2, -0.4], [-2.0, 1.5]):
        assert np.allclose(symplectic_form(glauber, x), [[0, 1], [-1, 0]], atol=1e-12)


def test_glauber_hamilton_function_and_gradient(glauber, oscillator):
    for x in ([0.0, 0.0], [0.8, -0.3], [1.5, 2.0]):
        x = np.array(x)
        assert hamilton_function(glauber, oscillator.H, x) == pytest.approx(x @ x + 0.5, abs=1e-12)
        assert np.allclose(hamilton_gradient(glauber, oscillator.H, x), 2 * x, atol=1e-11)


def test_gradient_matches_finite_differences(glauber, spin_chart, lipkin, rng):
    a = rng.normal(size=(21, 21)) + 1j * rng.normal(size=(21, 21))
    H_random = a + a.conj().T
    cases = [(glauber, np.diag(np.arange(40.0))), (spin_chart, lipkin.H), (spin_chart, H_random)]
    for chart, H in cases:
        for _ in range(3):
            x = rng.uniform(-0.8, 0.8, size=2)
            assert np.max(np.abs(hamilton_gradient(chart, H, x) - fd_gradient(chart, H, x))) <= 1e-6


def test_spin_omega_at_pole_regression(spin_chart):
    w = symplectic_form(spin_chart, [0.0, 0.0])
    assert w[0, 1] == pytest.approx(SPIN10_OMEGA_AT_POLE, abs=1e-9)
    assert np.max(np.abs(connection_curl(spin_chart, [1e-3, 0.0]) - symplectic_form(spin_chart, [1e-3, 0.0]))) <= 1e-5


def test_antipode_is_not_symplectic():
    chart = SpinCoherentChart(2)
    with pytest.raises(NonSymplecticPoint):
        symplectic_form(chart, [np.pi / 2, 0.0])


def test_rephasing_leaves_the_form_unchanged(glauber):
    re = RephasedChart(glauber, lambda x: np.sin(x[0]) + x[1], lambda x: np.array([np.cos(x[0]), 1.0]))
    x = np.array([0.3, -0.9])
    assert np.allclose(symplectic_form(re, x), symplectic_form(glauber, x), atol=1e-12)
