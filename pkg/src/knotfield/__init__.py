"""Electromagnetic knot fields from hyperspherical harmonics and the motion of charges in them."""

__version__ = "0.1.0"

from .errors import (DegenerateLandscapeError, DegenerateSeedError, DomainError,
                     FieldPropagationError, KnotFieldError, StiffnessError)
from .geometry import coframe, sigma, to_cylinder
from .harmonics import SpinLabel, harmonic, wigner_matrix
from .fields import (CompositeConfiguration, ConfigurationLabel, KnotField, energy_density,
                     field_strength, find_rmax, gauge_potential, get_preset, parse_configuration)
from .dynamics import (EnsembleSpec, ParticleState, SimulationParams, TrajectoryRecord,
                       generate_ensemble, integrate_trajectory, run_ensemble)
from .tracing import FieldLine, trace_line
from .analysis import (BeamReport, cluster_final_directions, energy_budget, kappa_sweep,
                       maxwell_residual_scan, time_reversal_defect)
