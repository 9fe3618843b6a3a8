import numpy as np
import pytest

from requant.errors import SpectrumNotInteger, ZeroAverage
from requant.flow import Trajectory
from requant.hilbert import spectral_decomposition, spectral_projector
from requant.models import SpinCoherentChart, spin_operators
from requant.orbits import ClosedOrbit, QuantizedOrbit
from requant.requantizer import (angular_project, ergodic_project, orbit_average, requantize,
                                 transition_amplitude)

# ||raw|| = e^{-n/2} n^{n/2} / sqrt(n!), frozen from a 30-digit quadrature of the circle average
RAW_NORM = [1.0, 0.60653065971263342, 0.52026009502288890, 0.47333054798458523,
            0.44200318416631864, 0.41888825451169039]


def test_glauber_requantized_states_are_fock_states(glauber_quantized, oscillator):
    _, states, _ = glauber_quantized
    for n, s in enumerate(states):
        assert abs(np.vdot(oscillator.fock(n), s.normalized)) >= 1 - 1e-8
        assert s.norm == pytest.approx(RAW_NORM[n], abs=1e-8)
        assert s.energy == pytest.approx(n + 0.5, rel=1e-8)
        assert 0 < s.norm <= 1


def test_time_origin_only_changes_the_phase(glauber_quantized):
    qs, _, _ = glauber_quantized
    orbit = qs[2].orbit
    a = orbit_average(orbit, 256)
    b = orbit_average(orbit, 256, shift=0.37 * orbit.period)
    assert abs(abs(np.vdot(a, b)) - np.vdot(a, a).real) <= 1e-10


def test_sample_floor(glauber_quantized):
    with pytest.raises(ValueError):
        requantize(glauber_quantized[0][1], samples_per_period=8)


def test_position_matrix_element(glauber_quantized, oscillator):
    _, states, _ = glauber_quantized
    amp = transition_amplitude(states[0], oscillator.x_op, states[1])
    assert abs(amp) == pytest.approx(np.sqrt(0.5), abs=1e-6)
    assert transition_amplitude(states[1], np.eye(40), states[1]) == pytest.approx(1.0)
    assert abs(transition_amplitude(states[1], oscillator.H, states[2])) <= 1e-8


def test_zero_average_is_an_error():
    e0 = np.eye(2, dtype=complex)[0]
    T = 2 * np.pi

    def section(t):
        t = np.atleast_1d(t)
        return np.repeat(e0[None], t.size, axis=0), t.copy()

    traj = Trajectory(np.array([0.0, T]), np.zeros((2, 1)), np.zeros(2), np.array([0.0, T]),
                      section_fn=section, hamiltonian=np.diag([0.0, 1.0]))
    orbit = ClosedOrbit(T, traj, 0.0, T, 0.0)
    with pytest.raises(ZeroAverage):
        requantize(QuantizedOrbit(orbit, 1, 0.0))


def test_ergodic_projection_examples(rng):
    H = np.diag([0.0, 1.0])
    psi = np.array([1, 1]) / np.sqrt(2)
    T = 2 * np.pi
    assert np.allclose(ergodic_project(H, psi, 0.0, T), [1 / np.sqrt(2), 0], atol=1e-12)
    v = np.array([0, 1.0])
    assert np.allclose(ergodic_project(H, v, 1.0, T), v, atol=1e-12)
    H3 = np.diag([0.0, 1.0, 2.0])
    # offsets of +-1/2 from the comb cancel over two periods
    out = ergodic_project(H3, np.ones(3) / np.sqrt(3), 0.5, 2 * T)
    assert np.linalg.norm(out) <= 1e-12


def test_angular_projection_examples():
    jz, _, _ = spin_operators(1)
    chart = SpinCoherentChart(1)
    psi = chart.embed(chart.coordinates(1.1, 0.4))
    out = angular_project(jz, psi, 0)
    assert np.linalg.norm(jz @ out) <= 1e-10 * np.linalg.norm(out)
    P = spectral_projector(spectral_decomposition(jz), 0.0).matrix
    assert np.linalg.norm(out - P @ psi) <= 1e-10
    assert np.allclose(angular_project(jz, np.eye(3)[2], 1), np.eye(3)[2])
    assert np.linalg.norm(angular_project(jz, psi, 5)) <= 1e-12


def test_half_integer_ladders_and_nonintegral_spectra():
    jz, _, _ = spin_operators(1.5)
    psi = np.ones(4) / 2
    out = angular_project(jz, psi, 0.5)
    assert np.allclose(out, [0, 0, 0.5, 0])
    with pytest.raises(SpectrumNotInteger):
        angular_project(jz, psi, 0)
    with pytest.raises(SpectrumNotInteger):
        angular_project(np.diag([0.0, 0.3]), [1, 0], 0)


def test_few_samples_are_enlarged():
    jz, _, _ = spin_operators(6)
    psi = np.ones(13) / np.sqrt(13)
    out = angular_project(jz, psi, -6, samples=4)
    assert np.allclose(out, np.eye(13)[0] / np.sqrt(13))
