"""Time-inhomogeneous branching processes through evolution families.

Laplace exponents of continuous-state branching processes and probability
generating functions of discrete ones are integrated from their driving
vector fields by a backward ODE; analytics (moments, extinction, fixed-point
classification) are cross-validated against closed forms and exact Monte
Carlo samplers.
"""

from .analytics import (CSBPModel, ExtinctionReport, MonotonicityReport, conservative,
                        extinction_report, mean, monotonicity_class, rescale_state,
                        survival_probability, transition_laplace, variance)
from .bernstein import (BernsteinTriplet, FixedPointReport, boundary_data,
                        classify_fixed_points, compose, feller_semigroup)
from .errors import (AmbiguousClassification, DomainError, ExplosionCapError,
                     ExtrapolationError, FiniteMeanError, InconsistencyError,
                     LoewnerBranchError, MeasureIntegrabilityError, NotEmbeddableError,
                     ParameterError, ScenarioError, SolverEscapeError, StiffnessError,
                     TruncationError)
from .evolution import (EvolutionSolver, SolveTrace, composition_residual,
                        derivative_at_infinity, derivative_at_zero, evolve_limit_at_infinity,
                        evolve_point, evolve_points)
from .fields import (BRFPInfFamily, BRFPInfSegment, DW0Family, DW0Segment, FieldSegment,
                     HerglotzFieldBF, LevyFamily, finite_mean_check, from_brfp_inf,
                     from_dw0, from_generating_family)
from .measures import (DensityPanel, DiscretizedMeasure, density_measure, dirac,
                       empty_measure, exponential_measure, integrate_kernel)
from .montecarlo import (DiscretePath, DiscreteSample, FellerSchedule, MCEstimate,
                         RNGSeedPlan, estimate_laplace, estimate_mean, estimate_pgf,
                         simulate_discrete, simulate_feller)
from .pgf import (EmbeddabilityReport, GeneratingFamily, PGFCoefficients, PGFSegment,
                  embeddability_test, evolve_pgf, extract_coefficients, mean_discrete,
                  pgf_at_one, phi_pgf_eval, round_trip_check)
from .scenario import ScenarioConfig, load_scenario, run_scenario, run_verification_suite

__version__ = "0.1.0"
