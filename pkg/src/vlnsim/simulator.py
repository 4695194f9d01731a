"""Episode state machine for the low-level and panoramic action spaces.

The low-level space observes an egocentric view and acts with
{move, left, right, stop}; turns are 30 degrees, and move relocates to the
adjacent node nearest the center of the field of view. When auto-adjust is
enabled the simulator reorients to face the movement target before
relocating; the reorientation is recorded in history as a pseudo-action
("adjust") but is never part of the learnable action space.

The panoramic space observes a 360-degree descriptor plus one candidate per
adjacent node (sorted left to right by relative heading) and acts by
candidate index or stop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence, Union

from .navgraph import (
    FovConfig,
    NavGraph,
    bearing,
    hfov_from_vfov,
    wrap_angle,
)

RECORD_FORMAT_VERSION = "episode_record/v1"

SPACE_LOW = "low"
SPACE_PANO = "pano"
SPACES = (SPACE_LOW, SPACE_PANO)

MOVE = "move"
LEFT = "left"
RIGHT = "right"
STOP = "stop"
ADJUST = "adjust"  # simulator-inserted only, never a learnable action
LOW_ACTIONS = (MOVE, LEFT, RIGHT, STOP)

TURN_DEG = 30.0
ADJUST_EPSILON_DEG = 0.01
PANO_SUBVIEW_OFFSETS_DEG = (-120.0, 0.0, 120.0)
DEFAULT_MAX_STEPS = {SPACE_LOW: 80, SPACE_PANO: 20}


class SimulatorError(RuntimeError):
    pass


class EpisodeDoneError(SimulatorError):
    """A step was requested on a finished episode."""


class InvalidActionError(SimulatorError):
    """Action token is not applicable in the current state."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class VariantConfig:
    """Action-space configuration knobs shared by both spaces.

    ``max_steps`` of None resolves to the per-space default (80 low-level,
    20 panoramic). Image resolution is fixed at 640x480 by default; only
    the vertical FOV varies across the studied configurations.
    """

    vfov_deg: float = 105.0
    auto_adjust: bool = True
    max_steps: Optional[int] = None
    image_width: int = 640
    image_height: int = 480

    def fov(self) -> FovConfig:
        return FovConfig(self.vfov_deg, self.image_width, self.image_height)

    def resolved_max_steps(self, space: str) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return DEFAULT_MAX_STEPS[space]

    def to_dict(self) -> dict:
        return {
            "vfov_deg": self.vfov_deg,
            "auto_adjust": self.auto_adjust,
            "max_steps": self.max_steps,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }


@dataclass(frozen=True)
class ViewDescriptor:
    """Renderer-agnostic camera pose: where a view is taken from and toward.

    ``image_ref`` is an opaque handle for an external renderer; the core
    never inspects it. Panoramic descriptors cover 360 degrees centered on
    ``heading_deg``.
    """

    kind: str  # "egocentric" | "panoramic" | "candidate"
    node: str
    heading_deg: float
    fov: FovConfig
    image_ref: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "node": self.node,
            "heading_deg": round(self.heading_deg, 6),
            "fov": self.fov.to_dict(),
            "image_ref": self.image_ref,
        }


def pano_subviews(view: ViewDescriptor) -> tuple[ViewDescriptor, ...]:
    """Decompose a panoramic descriptor into three egocentric sub-views.

    Offsets -120/0/+120 degrees cover the full circle at the default
    105-degree VFOV (HFOV ~ 120.2 degrees at 640x480).
    """
    if view.kind != "panoramic":
        raise ValueError("pano_subviews expects a panoramic descriptor")
    return tuple(
        ViewDescriptor(
            kind="egocentric",
            node=view.node,
            heading_deg=(view.heading_deg + off) % 360.0,
            fov=view.fov,
            image_ref=view.image_ref,
        )
        for off in PANO_SUBVIEW_OFFSETS_DEG
    )


@dataclass(frozen=True)
class Candidate:
    """A navigable direction in the panoramic space."""

    index: int
    node: str
    theta_deg: float  # relative heading in (-180, 180], negative = left
    delta_m: float  # travel distance along the edge
    view: ViewDescriptor

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "node": self.node,
            "theta_deg": round(self.theta_deg, 6),
            "delta_m": round(self.delta_m, 6),
            "view": self.view.to_dict(),
        }


@dataclass(frozen=True)
class LowObservation:
    view: ViewDescriptor
    allowed: tuple[str, ...]
    center_node: Optional[str]


@dataclass(frozen=True)
class PanoObservation:
    pano: ViewDescriptor
    candidates: tuple[Candidate, ...]


Observation = Union[LowObservation, PanoObservation]


@dataclass(frozen=True)
class EpisodeSpec:
    """Everything needed to run one navigation episode."""

    graph: NavGraph
    start: str
    start_heading_deg: float
    goal: str
    instruction: str
    gt_path: tuple[str, ...]
    space: str = SPACE_PANO
    variant: VariantConfig = VariantConfig()
    episode_id: str = ""
    instruction_index: int = 0

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown action space {self.space!r}")
        if self.start not in self.graph or self.goal not in self.graph:
            raise ValueError("start/goal must be graph nodes")
        path = tuple(self.gt_path)
        object.__setattr__(self, "gt_path", path)
        if not path or path[0] != self.start or path[-1] != self.goal:
            raise ValueError("gt_path must run from start to goal")
        for a, b in zip(path, path[1:]):
            if not self.graph.has_edge(a, b):
                raise ValueError(f"gt_path hop ({a!r}, {b!r}) is not a graph edge")


@dataclass
class AgentState:
    """Mutable per-episode agent state; owned by exactly one episode.

    ``history`` holds (ViewDescriptor, action) pairs in the low-level space
    and bare ViewDescriptors in the panoramic space. ``step`` is the 1-based
    index of the next policy decision; simulator-inserted adjustments do not
    advance it. Once ``done`` the state is frozen and further steps raise.
    """

    node: str
    heading_deg: float
    goal: str
    distance_m: float = 0.0
    step: int = 1
    history: list = field(default_factory=list)
    done: bool = False


def initial_state(spec: EpisodeSpec) -> AgentState:
    return AgentState(
        node=spec.start,
        heading_deg=spec.start_heading_deg % 360.0,
        goal=spec.goal,
    )


def _center_node(
    graph: NavGraph, node: str, heading_deg: float, fov: FovConfig
) -> Optional[str]:
    """Adjacent node nearest the view center, or None when none is in view.

    Ties on |relative angle| prefer the smaller signed angle (the left
    neighbor), then the lexicographically smaller node id.
    """
    half_hfov = hfov_from_vfov(fov) / 2.0
    best: Optional[tuple[float, float, str]] = None
    for nb in graph.neighbors(node):
        dx = graph.position(nb).x - graph.position(node).x
        dy = graph.position(nb).y - graph.position(node).y
        if dx == 0.0 and dy == 0.0:
            continue  # directly above/below: no facing direction exists
        rel = wrap_angle(bearing(graph, node, nb) - heading_deg)
        if abs(rel) > half_hfov:
            continue
        key = (abs(rel), rel, nb)
        if best is None or key < best:
            best = key
    return best[2] if best else None


def observe_low(state: AgentState, spec: EpisodeSpec) -> LowObservation:
    """Egocentric observation plus the physically-allowed action set."""
    if state.done:
        raise EpisodeDoneError("episode is finished")
    fov = spec.variant.fov()
    center = _center_node(spec.graph, state.node, state.heading_deg, fov)
    allowed = LOW_ACTIONS if center else (LEFT, RIGHT, STOP)
    view = ViewDescriptor("egocentric", state.node, state.heading_deg, fov)
    return LowObservation(view=view, allowed=allowed, center_node=center)


def observe_pano(state: AgentState, spec: EpisodeSpec) -> PanoObservation:
    """Panoramic observation with one candidate per adjacent node.

    Candidates are sorted left to right by relative heading (ties by
    distance, then node id) and indexed consecutively from 0. An isolated
    node yields an empty candidate list; stop is always available.
    """
    if state.done:
        raise EpisodeDoneError("episode is finished")
    graph = spec.graph
    fov = spec.variant.fov()
    entries = []
    for nb in graph.neighbors(state.node):
        abs_bearing = bearing(graph, state.node, nb)
        theta = wrap_angle(abs_bearing - state.heading_deg)
        delta = graph.edge_length(state.node, nb)
        entries.append((theta, delta, nb, abs_bearing))
    entries.sort()
    candidates = tuple(
        Candidate(
            index=i,
            node=nb,
            theta_deg=theta,
            delta_m=delta,
            view=ViewDescriptor("candidate", state.node, abs_bearing, fov),
        )
        for i, (theta, delta, nb, abs_bearing) in enumerate(entries)
    )
    pano = ViewDescriptor("panoramic", state.node, state.heading_deg, fov)
    return PanoObservation(pano=pano, candidates=candidates)


def observe(state: AgentState, spec: EpisodeSpec) -> Observation:
    if spec.space == SPACE_LOW:
        return observe_low(state, spec)
    return observe_pano(state, spec)


def _advance_step_counter(state: AgentState, spec: EpisodeSpec):
    state.step += 1
    if not state.done and state.step > spec.variant.resolved_max_steps(spec.space):
        state.done = True  # forced termination; recorded as not-stopped


def step_low(
    state: AgentState, spec: EpisodeSpec, action: str
) -> tuple[AgentState, Optional[LowObservation], bool]:
    """Apply one low-level action; returns (state, next observation, done)."""
    if state.done:
        raise EpisodeDoneError("episode is finished")
    obs = observe_low(state, spec)
    if action not in obs.allowed:
        if action == MOVE:
            raise InvalidActionError("move is not allowed: no node in view", raw=action)
        raise InvalidActionError(f"unknown low-level action {action!r}", raw=action)
    if action in (LEFT, RIGHT):
        state.history.append((obs.view, action))
        delta = -TURN_DEG if action == LEFT else TURN_DEG
        state.heading_deg = (state.heading_deg + delta) % 360.0
    elif action == STOP:
        state.history.append((obs.view, action))
        state.done = True
    else:  # MOVE
        target = obs.center_node
        rel = wrap_angle(bearing(spec.graph, state.node, target) - state.heading_deg)
        if spec.variant.auto_adjust and abs(rel) > ADJUST_EPSILON_DEG:
            state.history.append((obs.view, ADJUST))
            state.heading_deg = bearing(spec.graph, state.node, target)
            aligned = observe_low(state, spec)
            state.history.append((aligned.view, MOVE))
        else:
            state.history.append((obs.view, MOVE))
        state.distance_m += spec.graph.edge_length(state.node, target)
        state.node = target
    _advance_step_counter(state, spec)
    next_obs = None if state.done else observe_low(state, spec)
    return state, next_obs, state.done


def step_pano(
    state: AgentState, spec: EpisodeSpec, action: str
) -> tuple[AgentState, Optional[PanoObservation], bool]:
    """Apply one panoramic action ("stop" or a candidate index as a string)."""
    if state.done:
        raise EpisodeDoneError("episode is finished")
    obs = observe_pano(state, spec)
    state.history.append(obs.pano)
    if action == STOP:
        state.done = True
    else:
        try:
            idx = int(action)
        except (TypeError, ValueError):
            raise InvalidActionError(
                f"unknown panoramic action {action!r}", raw=str(action)
            ) from None
        if not 0 <= idx < len(obs.candidates):
            raise InvalidActionError(
                f"invalid candidate {idx} (have {len(obs.candidates)})", raw=str(action)
            )
        cand = obs.candidates[idx]
        state.heading_deg = bearing(spec.graph, state.node, cand.node)
        state.distance_m += cand.delta_m
        state.node = cand.node
    _advance_step_counter(state, spec)
    next_obs = None if state.done else observe_pano(state, spec)
    return state, next_obs, state.done


def step(
    state: AgentState, spec: EpisodeSpec, action: str
) -> tuple[AgentState, Optional[Observation], bool]:
    if spec.space == SPACE_LOW:
        return step_low(state, spec, action)
    return step_pano(state, spec, action)


@dataclass
class EpisodeRecord:
    """Executed episode: the node/heading/action trace plus bookkeeping.

    ``actions`` contains every recorded entry including simulator-inserted
    "adjust" pseudo-actions; ``headings_deg`` is aligned with it (heading
    after each entry took effect). ``nodes`` is the visited node walk.
    Per-step timing is kept but excluded from serialized documents unless
    requested, so that reports stay byte-deterministic.
    """

    episode_id: str
    instruction_index: int
    scan_id: str
    space: str
    variant: dict
    start: str
    start_heading_deg: float
    goal: str
    gt_path: tuple[str, ...]
    nodes: list[str]
    headings_deg: list[float]
    actions: list[str]
    stopped: bool
    num_decisions: int
    prompts: Optional[list[dict]] = None
    step_ms: Optional[list[float]] = None

    @property
    def final_node(self) -> str:
        return self.nodes[-1]

    def learnable_actions(self) -> list[str]:
        return [a for a in self.actions if a != ADJUST]

    def to_doc(self, include_timing: bool = False, include_prompts: bool = True) -> dict:
        doc = {
            "format_version": RECORD_FORMAT_VERSION,
            "episode_id": self.episode_id,
            "instruction_index": self.instruction_index,
            "scan_id": self.scan_id,
            "space": self.space,
            "variant": self.variant,
            "start": self.start,
            "start_heading_deg": round(self.start_heading_deg, 6),
            "goal": self.goal,
            "gt_path": list(self.gt_path),
            "nodes": list(self.nodes),
            "headings_deg": [round(h, 6) for h in self.headings_deg],
            "actions": list(self.actions),
            "stopped": self.stopped,
            "num_decisions": self.num_decisions,
        }
        if include_prompts and self.prompts is not None:
            doc["prompts"] = self.prompts
        if include_timing and self.step_ms is not None:
            doc["step_ms"] = self.step_ms
        return doc

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(
            self.to_doc(include_timing=include_timing),
            sort_keys=True,
            separators=(",", ":"),
        )


class Policy(Protocol):
    """A navigation policy: maps the current prompt/state to a raw action string."""

    def decide(
        self,
        prompt,
        state: AgentState,
        observation: Observation,
        spec: EpisodeSpec,
    ) -> str: ...


class PolicyError(RuntimeError):
    """A policy failed to produce a usable action; carries step context."""

    def __init__(self, message: str, episode_id: str, step: int):
        super().__init__(f"episode {episode_id!r} step {step}: {message}")
        self.episode_id = episode_id
        self.step = step


class EpisodeSession:
    """Single episode driver shared by the in-process runner and the HTTP API.

    Both surfaces funnel through :meth:`act_token`, which guarantees that an
    API-driven episode and an in-process one produce identical records for
    identical action sequences.
    """

    def __init__(self, spec: EpisodeSpec, record_prompts: bool = False):
        self.spec = spec
        self.state = initial_state(spec)
        self._actions: list[str] = []
        self._headings: list[float] = [self.state.heading_deg]
        self._nodes: list[str] = [spec.start]
        self._prompts: Optional[list[dict]] = [] if record_prompts else None
        self._step_ms: list[float] = []
        self._stopped = False

    @property
    def done(self) -> bool:
        return self.state.done

    def observation(self) -> Observation:
        return observe(self.state, self.spec)

    def prompt(self):
        from .prompts import render_state_prompt

        return render_state_prompt(self.state, self.observation(), self.spec)

    def system_prompt(self) -> str:
        from .prompts import render_system_prompt

        return render_system_prompt(self.spec.space)

    def act_token(self, token: str):
        """Apply one parsed learnable action token and record its effects."""
        import time

        if self._prompts is not None:
            self._prompts.append(self.prompt().to_doc())
        t0 = time.perf_counter()
        if self.spec.space == SPACE_LOW:
            before = len(self.state.history)
            step_low(self.state, self.spec, token)
            performed = [a for (_v, a) in self.state.history[before:]]
        else:
            step_pano(self.state, self.spec, token)
            performed = [token]
        self._step_ms.append((time.perf_counter() - t0) * 1000.0)
        for a in performed:
            self._actions.append(a)
            self._headings.append(self.state.heading_deg)
        if self._nodes[-1] != self.state.node:
            self._nodes.append(self.state.node)
        if token == STOP:
            self._stopped = True

    def record(self) -> EpisodeRecord:
        return EpisodeRecord(
            episode_id=self.spec.episode_id,
            instruction_index=self.spec.instruction_index,
            scan_id=self.spec.graph.scan_id,
            space=self.spec.space,
            variant=self.spec.variant.to_dict(),
            start=self.spec.start,
            start_heading_deg=self.spec.start_heading_deg % 360.0,
            goal=self.spec.goal,
            gt_path=self.spec.gt_path,
            nodes=list(self._nodes),
            headings_deg=[h for h in self._headings[1:]],
            actions=list(self._actions),
            stopped=self._stopped,
            num_decisions=self.state.step - 1,
            prompts=self._prompts,
            step_ms=list(self._step_ms),
        )


def run_episode(
    policy: Policy, spec: EpisodeSpec, record_prompts: bool = False
) -> EpisodeRecord:
    """Greedy closed-loop rollout: observe, prompt, decide, step, repeat.

    Deterministic given a deterministic policy. Policy exceptions and
    unparseable outputs are re-raised as :class:`PolicyError` with episode
    and step context.
    """
    from .prompts import parse_action

    session = EpisodeSession(spec, record_prompts=record_prompts)
    while not session.done:
        obs = session.observation()
        prompt = session.prompt()
        try:
            raw = policy.decide(prompt, session.state, obs, spec)
        except Exception as e:
            raise PolicyError(str(e), spec.episode_id, session.state.step) from e
        k = len(obs.candidates) if isinstance(obs, PanoObservation) else 0
        try:
            token = parse_action(raw, spec.space, k)
            session.act_token(token)
        except (ValueError, SimulatorError) as e:
            raise PolicyError(str(e), spec.episode_id, session.state.step) from e
    return session.record()


def replay_actions(
    spec: EpisodeSpec, actions: Sequence[str], record_prompts: bool = False
) -> EpisodeRecord:
    """Re-execute a recorded action list (adjust entries are skipped and
    re-inserted by the simulator); used for determinism checks."""
    session = EpisodeSession(spec, record_prompts=record_prompts)
    for token in actions:
        if token == ADJUST:
            continue
        if session.done:
            raise EpisodeDoneError("action list extends past episode end")
        session.act_token(token)
    return session.record()


def spec_from_current_state(spec: EpisodeSpec, state: AgentState) -> EpisodeSpec:
    """Rebase an episode spec onto the agent's current pose, re-planning the
    ground-truth path as the shortest path to the goal."""
    path = spec.graph.shortest_path(state.node, spec.goal)
    return replace(
        spec,
        start=state.node,
        start_heading_deg=state.heading_deg,
        gt_path=tuple(path),
    )
