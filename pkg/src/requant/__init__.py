"""Constrained quantum dynamics on trial manifolds, closed-orbit quantization and requantization."""

from .errors import *  # noqa: F401,F403
from .flow import IntegratorOptions, Trajectory, autoparallel_section, integrate_flow, lift
from .hilbert import (HermitianOperator, PhysicalConstants, SpectralDecomposition, propagate,
                      spectral_decomposition, spectral_projector)
from .manifold import (ManifoldChart, RephasedChart, connection, connection_curl, hamilton_function,
                       hamilton_gradient, hessian, symplectic_form)
from .models import (CylinderModel, GlauberChart, LipkinModel, OscillatorModel, ProjectiveChart,
                     RotorModel, SpinCoherentChart, cylinder_orbit, glauber_chart, spin_coherent_chart,
                     two_level_model)
from .orbits import (ClosedOrbit, QuantizedOrbit, cylinder_quantization, detect_closed_orbit,
                     quantize_family, quasienergy)
from .requantizer import (RequantizedState, angular_project, ergodic_project, requantize,
                          transition_amplitude)
from .rpa import NormalMode, RpaSolution, find_minimum, linearize, quantize_amplitude, rpa_state
from .variational import (ActionAngleChart, ConstraintSpec, CrankedSolution, build_action_angle_chart,
                          minimize_modified, solve_family, solve_targets)

__version__ = "0.1.0"
