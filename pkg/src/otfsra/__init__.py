"""Delay-Doppler (OTFS) random-access preambles: design rules, closed-form
receiver, detection with timing-advance estimation, collision analysis and a
Monte Carlo timing-error engine."""

__version__ = "0.1.0"

from .analysis import CollisionBound, bound_sweep, collision_lower_bound, collision_term_exact
from .channel import (
    ETU,
    ChannelProfile,
    ChannelRealization,
    FrameScenario,
    PathTap,
    UtTransmission,
    draw_etu_channel,
    draw_frame_scenario,
    draw_geometry,
)
from .design import (
    RaLoadModel,
    SystemBudget,
    derive_grid,
    load_model,
    min_doppler_width,
    policy_width,
    snr_to_energy,
)
from .detector import (
    DetectionOutcome,
    Threshold,
    analytic_threshold,
    classify_miss,
    detect_preamble,
    empirical_threshold,
)
from .errors import (
    BudgetInfeasible,
    DopplerInfeasible,
    Infeasible,
    InvalidParameter,
    ModelDomainError,
    NumericError,
    OtfsRaError,
    ScenarioInfeasible,
)
from .grid import DdIndex, OtfsGrid, PreambleAllocation, build_allocation
from .receiver import DdFrame, ReceiveWindow, TfFrame, analytic_dd_response, make_window, receive_dd, receive_tf
from .simharness import ScenarioConfig, TepResult, run_tep, search_n1, search_rho
from .waveform import PreambleSymbolGrid, TimeWaveformSpec, eval_waveform, isfft, papr, sfft
