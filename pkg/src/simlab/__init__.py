"""Deterministic simulation lab for neuro-adaptive sliding-mode consensus control.

Leader-follower teams of higher-order nonlinear agents on a directed graph,
controlled by a sliding-mode law with online-adapted deep-network
compensation, with design-time gain certificates and runtime barrier /
Lyapunov monitors.
"""

from .barrier import BarrierFunction, weighted_norm
from .config import bundled_scenario, load_config, load_config_dict
from .controller import ControllerGains, GainCertificate, control_law, corrective_signal, gain_certificate
from .dnn import (
    AdaptationConfig,
    AgentNetwork,
    BoundEstimates,
    DeepNetworkArch,
    check_v_bound,
    forward,
    inner_update,
    outer_update,
    switch_signal,
)
from .errors import SimlabError
from .graph import DirectedTopology, GraphMatrices, build_matrices, check_reachability, singular_values
from .plant import DisturbanceModel, DynamicsExpr, disturbance, eval_dynamics, parse_dynamics
from .sim import (
    MonitorReport,
    ScenarioConfig,
    SimState,
    TraceRecord,
    monitor,
    run,
    step,
    synthetic_truth_setup,
)
from .sliding import ErrorState, SlidingDesign, companion_and_lyapunov, lambdas_from_roots, sliding_variable, sync_errors

__version__ = "0.1.0"
