"""Two-relay successive relaying with two reconfigurable intelligent surfaces.

Channel sampling, SINR evaluation in direct and lifted trace form, a
semidefinite-relaxation upper bound, a velocity-normalized particle swarm
optimizer, baselines, and a deterministic experiment sweep.
"""

from .scenario import (
    Scenario,
    ChannelRealization,
    ConfigError,
    link_distance,
    sample_rician_vector,
    sample_rayleigh_scalar,
    sample_realization,
)
from .sinr import (
    QuadraticForms,
    build_quadratics,
    sinr_r1,
    sinr_d,
    sinr_batch,
    sinr_trace_form,
    effective_rate,
    rate_for_phases,
    wrap_phase,
)
from .pso import (
    PsoParams,
    PsoState,
    PsoRun,
    init_population,
    evaluate_fitness,
    find_bests,
    update_velocities,
    normalize_velocities,
    step_positions,
    run_pso,
)
from .sdp import (
    SdpSettings,
    SdpResult,
    SolverError,
    init_linearization,
    solve_inner,
    run_algorithm1,
    extract_rank_one,
    solve_sdp,
)
from .baselines import (
    OracleConfig,
    brute_force_search,
    rate_sr_no_ris,
    rate_ris_only,
)

__version__ = "0.1.0"
