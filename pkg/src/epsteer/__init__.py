"""Dwell-time scheduling and schedule optimization for mode conversion
along closed loops around exceptional points of non-Hermitian Hamiltonians.

Core surface:

- :mod:`epsteer.hamiltonian` -- matrix families, biorthonormal eigensystems,
  exceptional-point location, Riemann-sheet sampling
- :mod:`epsteer.path` -- closed-loop construction, orientation, arc length
- :mod:`epsteer.evolution` -- discrete spectral propagation and traces
- :mod:`epsteer.scheduler` -- uniform and stable-conversion schedules
- :mod:`epsteer.optimizer` -- genetic + SQP schedule synthesis
- :mod:`epsteer.metrics` -- chiral index, time-to-purity, comparisons
- :mod:`epsteer.cli` -- configuration-driven experiment runner
"""

from ._backend import BACKEND
from .errors import (
    ConfigError,
    DegeneracyError,
    DwellCapWarning,
    EpsteerError,
    InputError,
    InvalidStateError,
    PinningExemptionWarning,
    RefinementWarning,
    SchedulerError,
    StepError,
)
from .hamiltonian import (
    EP_EXCLUSION_RADIUS,
    Eigensystem,
    HamiltonianFamily,
    ParameterPoint,
    eigensystem,
    evaluate,
    locate_eps,
    regauge,
    sheet_sample,
    table_family,
    two_level_family,
)
from .path import (
    CCW,
    CW,
    LoopSpec,
    OrientedLoop,
    ParameterLoop,
    build_loop,
    default_loop_spec,
    min_ep_distance,
    orient,
    winding_number,
)
from .evolution import (
    EvolutionState,
    EvolutionTrace,
    LoopEigensystems,
    ModeBasis,
    TraceSample,
    init_state,
    mode_projection,
    proportions,
    run_trace,
    step,
    weighted_eigenvalue,
)
from .scheduler import (
    Schedule,
    SchedulerConfig,
    dwell_for_target,
    engagement,
    stable_schedule,
    uniform_schedule,
)
from .optimizer import (
    ConstraintSet,
    GaConfig,
    OptimizationProblem,
    OptimizedSchedule,
    Scenario,
    chiral_targets,
    fitness,
    ga_search,
    nonchiral_targets,
    optimize,
    sqp_refine,
)
from .metrics import (
    MethodReport,
    chiral_index,
    compare_methods,
    optimized_time_runner,
    stable_time_runner,
    time_to_purity,
    uniform_time_runner,
)

__version__ = "0.1.0"
