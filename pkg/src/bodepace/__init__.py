"""Frequency-domain design and simulation of budget pacing control loops."""
from .compensators import (
    LAMBDA_FLOOR,
    GridSearchResult,
    PidSpec,
    PiRuntimeState,
    ZeroPoleSpec,
    best_cell,
    grid_search,
    loop_report,
    loop_transfer_functions,
    pi_step,
    pid_tf,
    zero_pole_tf,
)
from .discretization import DiscreteTransferFunction, RecurrenceFilter, inverse_tustin, step_filter, to_recurrence, tustin
from .filters import LpfConfig, SampleStream, SmootherConfig, lpf_step, regularize, smoother_step, smoother_to_laplace
from .lti import (
    PlantParams,
    Polynomial,
    StabilityReport,
    TransferFunction,
    bode_arrays,
    freq_response,
    plant_open_loop,
    stability_report,
    tf_feedback,
    tf_series,
    zoh_tf,
)
from .sim import (
    BaselineSpec,
    CohortConfig,
    SimTrace,
    TrafficCurve,
    pacing_error,
    run_closed_loop,
    synthetic_diurnal,
    traffic_fft,
)

__version__ = "0.1.0"

__all__ = [
    "LAMBDA_FLOOR",
    "GridSearchResult",
    "PidSpec",
    "PiRuntimeState",
    "ZeroPoleSpec",
    "best_cell",
    "grid_search",
    "loop_report",
    "loop_transfer_functions",
    "pi_step",
    "pid_tf",
    "zero_pole_tf",
    "DiscreteTransferFunction",
    "RecurrenceFilter",
    "inverse_tustin",
    "step_filter",
    "to_recurrence",
    "tustin",
    "LpfConfig",
    "SampleStream",
    "SmootherConfig",
    "lpf_step",
    "regularize",
    "smoother_step",
    "smoother_to_laplace",
    "PlantParams",
    "Polynomial",
    "StabilityReport",
    "TransferFunction",
    "bode_arrays",
    "freq_response",
    "plant_open_loop",
    "stability_report",
    "tf_feedback",
    "tf_series",
    "zoh_tf",
    "BaselineSpec",
    "CohortConfig",
    "SimTrace",
    "TrafficCurve",
    "pacing_error",
    "run_closed_loop",
    "synthetic_diurnal",
    "traffic_fft",
]
