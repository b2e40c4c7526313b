"""Pressure-transient simulation and pipe area reconstruction on tree networks."""

__version__ = "0.1.0"

from .graph import (
    ActionTimes,
    AdmissibleSet,
    Network,
    Pipe,
    PointOnPipe,
    action_times,
    admissible_set,
    network_distance,
    travel_time,
    validate_network,
)
from .simulate import (
    BoundaryFlow,
    Histories,
    SimConfig,
    conservation_residual,
    junction_scatter,
    simulate,
    step_inflow,
)
from .irm import (
    AnalyticIRM,
    SampledIRM,
    StepResponseBundle,
    differentiate,
    irm_row_from_step_response,
    load_irm,
    measure_irm,
    median_smooth,
    oracle_irm,
    remove_initial_pulse,
    resample,
    sample_irm,
    save_irm,
)
from .inversion import (
    AreaProfile,
    BCSystem,
    ReconConfig,
    VolumeProfile,
    area_profile,
    assemble_system,
    solve_boundary_flows,
    volume,
    volume_for_point,
    volume_profile,
)
