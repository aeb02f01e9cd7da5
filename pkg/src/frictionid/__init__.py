"""Damped 1D pipe-flow simulation and friction-law identification.

The package simulates pressure/flux waves in a gas pipe with a nonlinear
wall-friction law, and reconstructs that law from boundary measurements
of the pressure drop, either through Tikhonov-regularized Gauss-Newton
iteration on the transient model or through the closed-form relation
valid in the quasi-stationary regime.
"""

from .discretization import (BoundarySchedule, DiscreteOperators, MeasurementSeries,
                             Mesh1D, StateTrajectory, TimeGrid, assemble_operators,
                             discrete_energy, forward_step, observe_pressure_drop,
                             pressure_mean, solve_forward)
from .errors import (ConfigurationError, ContractViolation, DomainExcursionError,
                     NumericalBreakdownError)
from .experiments import (ExperimentConfig, flux_schedule, run_reconstruct,
                          run_simulate, run_table1, run_table2)
from .inversion import (NoisyData, PcgResult, ReconstructionResult, TikhonovConfig,
                        add_noise, irgn_solve, pcg_solve, tikhonov_value)
from .sensitivity import (JacobianHandle, apply_jacobian, apply_jacobian_transpose,
                          assemble_jacobian, linearize)
from .splines import (GramOperator, ParameterBounds, SplineParameter, build_gram,
                      design_rows, gram_solve, h2_inner, h2_norm, identity_parameter,
                      l2_distance, load_parameter, project_admissible, save_parameter,
                      spline_fit, true_law, true_law_slope, true_parameter,
                      uniform_knots)
from .stationary import (ProximityMetrics, SteadyState, proximity_metrics,
                         solve_steady, stationary_reconstruct, stationary_response)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
