import numpy as np
import pytest

from requant.models import (LipkinModel, OscillatorModel, RotorModel, glauber_chart,
                            spin_coherent_chart)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def oscillator():
    return OscillatorModel(omega=1.0, truncation=40)


@pytest.fixture(scope="session")
def glauber(oscillator):
    return glauber_chart(oscillator)


@pytest.fixture(scope="session")
def lipkin():
    return LipkinModel(j=10, epsilon=1.0, V=0.01)


@pytest.fixture(scope="session")
def spin_chart(lipkin):
    return spin_coherent_chart(lipkin)


@pytest.fixture(scope="session")
def rotor():
    return RotorModel(j=3, epsilon=1.0)


@pytest.fixture(scope="session")
def rotor_chart(rotor):
    return spin_coherent_chart(rotor)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


GLAUBER_N = list(range(6))


@pytest.fixture(scope="session")
def glauber_quantized(glauber, oscillator):
    """Quantized Glauber orbits n = 0..5 and the wall time of quantize + requantize."""
    import time

    from requant.orbits import quantize_family
    from requant.requantizer import requantize

    t0 = time.perf_counter()
    qs = quantize_family(glauber, oscillator.H, lambda s: [np.sqrt(s), 0.0], (0.0, 6.0), GLAUBER_N,
                         t_max=1.5 * 2 * np.pi, n_scan=7)
    states = [requantize(q, 256, oscillator.H) for q in qs]
    return qs, states, time.perf_counter() - t0


LIPKIN_COUPLINGS = (0.005, 0.01, 0.02)


@pytest.fixture(scope="session")
def lipkin_rpa():
    """{V: (model, chart, x_star, modes, solution, seconds)} for the weak-coupling Lipkin runs."""
    import time

    from requant.rpa import find_minimum, linearize, rpa_state

    out = {}
    for V in LIPKIN_COUPLINGS:
        t0 = time.perf_counter()
        model = LipkinModel(j=10, epsilon=1.0, V=V)
        chart = spin_coherent_chart(model)
        x = find_minimum(chart, model.H, [0.05, 0.0])
        modes = linearize(chart, model.H, x)
        sol = rpa_state(modes[0], chart, x, model.H, exact=model.H.spectrum.vector(1))
        out[V] = (model, chart, x, modes, sol, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def rotor_action_angle(rotor, rotor_chart):
    from requant.variational import build_action_angle_chart, solve_family

    nodes = np.linspace(-2.5, 2.5, 11)
    fam = solve_family(rotor_chart, rotor.H, [rotor.J], nodes, x_init=rotor_chart.coordinates(np.pi / 2))
    return build_action_angle_chart(rotor_chart, fam, [rotor.J])
