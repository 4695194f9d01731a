"""Discrete-environment navigation simulator and evaluation harness."""

from .navgraph import (
    FovConfig,
    GraphError,
    NavGraph,
    Position3D,
    UnreachableError,
    bearing,
    hfov_from_vfov,
    load_connectivity,
    wrap_angle,
)
from .simulator import (
    ADJUST,
    LEFT,
    MOVE,
    RIGHT,
    SPACE_LOW,
    SPACE_PANO,
    STOP,
    AgentState,
    Candidate,
    EpisodeRecord,
    EpisodeSession,
    EpisodeSpec,
    LowObservation,
    PanoObservation,
    VariantConfig,
    ViewDescriptor,
    initial_state,
    observe,
    observe_low,
    observe_pano,
    replay_actions,
    run_episode,
    step,
    step_low,
    step_pano,
)
from .expert import ExpertError, StepStats, expert_actions, low_level_expert, pano_expert, step_stats
from .prompts import (
    ActionParseError,
    InvalidCandidateError,
    Prompt,
    UnknownActionError,
    parse_action,
    render_state_prompt,
    render_system_prompt,
)
from .metrics import (
    DEFAULT_SUCCESS_RADIUS_M,
    EpisodeScore,
    OfflineScore,
    OnlineScore,
    aggregate_online,
    cls_score,
    macro_f1,
    score_offline,
    score_online,
    sr_by_path_length,
)
from .data import (
    R2REpisode,
    SyntheticWorldParams,
    export_bc,
    gen_synthetic,
    load_r2r,
    load_world,
    save_world,
)
from .evaluation import MetricsReport, run_offline_eval, run_online_eval
from .policies import ExpertPolicy, RandomPolicy, RemotePolicy, StopPolicy, policy_factory

__version__ = "0.1.0"
