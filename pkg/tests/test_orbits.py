import numpy as np
import pytest

from requant.errors import BracketNotFound, NoClosureFound, NotACylinderOrbit
from requant.hilbert import propagate
from requant.models import CylinderModel, cylinder_orbit, two_level_model
from requant.orbits import (ClosedOrbit, cylinder_quantization, detect_closed_orbit, quantize_family,
                            quasienergy)

TWO_PI = 2 * np.pi


@pytest.mark.parametrize("z0", [0.3, 1.0 + 0.5j, 2.2])
def test_glauber_period_independent_of_amplitude(glauber, oscillator, z0):
    orbit = detect_closed_orbit(glauber, oscillator.H, [z0.real, np.imag(z0)], 1.5 * TWO_PI)
    assert orbit.period == pytest.approx(TWO_PI, abs=1e-9)
    assert orbit.total_phase == pytest.approx(TWO_PI * abs(z0) ** 2, rel=1e-9)
    assert orbit.closure_defect <= 1e-6
    assert orbit.total_phase == orbit.samples.theta[-1]


def test_fixed_point_has_no_orbit(glauber, oscillator):
    with pytest.raises(NoClosureFound):
        detect_closed_orbit(glauber, oscillator.H, [0.0, 0.0], 10.0)


def test_short_window_finds_nothing(glauber, oscillator):
    with pytest.raises(NoClosureFound):
        detect_closed_orbit(glauber, oscillator.H, [1.0, 0.0], 4.0)


def test_two_level_projective_orbit_period():
    model = two_level_model(delta_e=0.8, weight=0.4)
    chart = model.chart()
    x0 = chart.coordinates(model.psi0)
    orbit = detect_closed_orbit(chart, model.H, x0, 1.5 * TWO_PI / 0.8)
    assert orbit.period == pytest.approx(TWO_PI / 0.8, rel=1e-9)
    psi0 = model.psi0
    back = propagate(model.H, psi0, orbit.period)
    assert abs(abs(np.vdot(psi0, back)) - 1) <= 1e-12


def test_glauber_family_quantization(glauber_quantized):
    qs, _, _ = glauber_quantized
    for n, q in enumerate(qs):
        z = q.orbit.initial_point
        assert abs(z @ z - n) <= 1e-6
        assert q.residual <= 1e-8
        assert q.orbit.energy == pytest.approx(n + 0.5, rel=1e-8)
    assert qs[0].orbit.total_phase == 0.0


def test_targets_outside_the_family_range(glauber, oscillator):
    with pytest.raises(BracketNotFound):
        quantize_family(glauber, oscillator.H, lambda s: [s, 0.0], (0.5, 1.5), [4], t_max=1.5 * TWO_PI,
                        n_scan=3)


def test_threaded_scan_matches_serial(glauber, oscillator):
    fam = lambda s: [np.sqrt(s), 0.0]
    a = quantize_family(glauber, oscillator.H, fam, (0.5, 2.5), [1, 2], 1.5 * TWO_PI, n_scan=5)
    b = quantize_family(glauber, oscillator.H, fam, (0.5, 2.5), [1, 2], 1.5 * TWO_PI, n_scan=5, threads=3)
    for qa, qb in zip(a, b):
        assert qa.parameter == qb.parameter
        assert np.array_equal(qa.orbit.initial_point, qb.orbit.initial_point)


def test_quasienergy_of_cylinders():
    orbit = cylinder_orbit(two_level_model(delta_e=1.0, weight=0.5))
    assert quasienergy(orbit, orbit.samples.hamiltonian) == pytest.approx(0.0, abs=1e-12)
    three = CylinderModel.from_eigenvalues([0.0, 1.0, 3.0], [0.5, 0.3 + 0.4j, 0.6])
    o3 = cylinder_orbit(three)
    assert o3.period == pytest.approx(TWO_PI)
    assert quasienergy(o3, three.H) == pytest.approx(0.0, abs=1e-12)
    q = cylinder_quantization(o3, three.H)
    assert q.residual == pytest.approx(abs(o3.energy - round(o3.energy)), abs=1e-12)


def test_quasienergy_of_a_stationary_orbit():
    m = CylinderModel.from_eigenvalues([0.0, 2.7], [0, 1])
    orbit = cylinder_orbit(m, period=TWO_PI)
    eps = quasienergy(orbit, m.H)
    assert eps == pytest.approx(2.7 - 3.0, abs=1e-12)


def test_quasienergy_rejects_non_cylinder_orbits(glauber, oscillator, spin_chart, lipkin):
    orbit = detect_closed_orbit(spin_chart, lipkin.H, [0.5, 0.0], 12.0)
    with pytest.raises(NotACylinderOrbit):
        quasienergy(orbit, lipkin.H)


def test_closed_orbit_json(glauber, oscillator):
    orbit = detect_closed_orbit(glauber, oscillator.H, [1.0, 0.0], 1.5 * TWO_PI)
    assert isinstance(orbit, ClosedOrbit)
    assert orbit.winding == pytest.approx(1.0, abs=1e-9)
