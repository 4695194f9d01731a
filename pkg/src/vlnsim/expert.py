"""Expert action sequences from ground-truth node trajectories.

These are the supervision targets for behavior cloning: the low-level
expert turns in 30-degree increments until the next ground-truth node is
the centered (movable) one, then moves; the panoramic expert picks the
candidate index of the next node. Simulator-inserted adjustments appear in
replayed histories but never in the learnable action lists.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .simulator import (
    LEFT,
    MOVE,
    RIGHT,
    SPACE_LOW,
    SPACE_PANO,
    STOP,
    EpisodeSpec,
    VariantConfig,
    initial_state,
    observe_pano,
    step_low,
    step_pano,
    _center_node,
)

# Generation must never trip the episode's step cap; closed-loop tests
# replay under the real cap and surface over-length sequences there.
_UNCAPPED = 1_000_000


class ExpertError(RuntimeError):
    """The ground-truth path cannot be converted into actions."""

    def __init__(self, message: str, episode_id: str = ""):
        if episode_id:
            message = f"episode {episode_id!r}: {message}"
        super().__init__(message)
        self.episode_id = episode_id


def uncapped(spec: EpisodeSpec) -> EpisodeSpec:
    """The same episode with the step cap lifted (expert walks are supervision,
    not subject to the evaluation-time cutoff)."""
    return replace(spec, variant=replace(spec.variant, max_steps=_UNCAPPED))


_uncapped = uncapped


def _turns_to_center(spec: EpisodeSpec, node: str, heading_deg: float, target: str):
    """Turns that leave ``target`` maximally centered on the 30-degree grid.

    Scans all 12 grid headings reachable from the current one (k = 0..6 in
    both directions) and keeps those where ``target`` is the center node;
    among them it picks the heading minimizing the target's |relative
    angle|, preferring fewer turns and then turning right (the exactly-180
    case ties both directions at six turns, so right wins there). Raises
    when no grid heading centers the target, e.g. a competing neighbor
    always sits closer to the view center.
    """
    from .navgraph import bearing, wrap_angle

    fov = spec.variant.fov()
    graph = spec.graph
    target_bearing = bearing(graph, node, target)
    best = None  # (|rel|, turn count, direction rank, direction)
    for k in range(7):
        for rank, (direction, sign) in enumerate(((RIGHT, 1.0), (LEFT, -1.0))):
            heading = (heading_deg + sign * 30.0 * k) % 360.0
            if _center_node(graph, node, heading, fov) == target:
                rel = abs(wrap_angle(target_bearing - heading))
                key = (rel, k, rank, direction)
                if best is None or key < best:
                    best = key
            if k == 0:
                break  # both directions coincide
    if best is None:
        raise ExpertError(
            f"target {target!r} can never be the center node from {node!r}"
            " under any grid heading"
        )
    return best[1], best[3]


def low_level_expert(spec: EpisodeSpec) -> list[str]:
    """Expert token list for the low-level space: turns, moves, final stop.

    Generated by simulating the episode's own variant (adjust mode changes
    the heading at each relocation and therefore the turn counts of later
    hops), so the list replays to the ground-truth path exactly.
    """
    sim_spec = _uncapped(replace(spec, space=SPACE_LOW))
    state = initial_state(sim_spec)
    actions: list[str] = []
    for target in spec.gt_path[1:]:
        count, direction = _turns_to_center(
            sim_spec, state.node, state.heading_deg, target
        )
        for _ in range(count):
            actions.append(direction)
            step_low(state, sim_spec, direction)
        center = _center_node(
            sim_spec.graph, state.node, state.heading_deg, sim_spec.variant.fov()
        )
        if center != target:  # pragma: no cover - guarded by _turns_to_center
            raise ExpertError(f"turn planning failed to center {target!r}")
        actions.append(MOVE)
        step_low(state, sim_spec, MOVE)
    actions.append(STOP)
    return actions


def pano_expert(spec: EpisodeSpec) -> list[str]:
    """Expert token list for the panoramic space: candidate indices + stop."""
    sim_spec = _uncapped(replace(spec, space=SPACE_PANO))
    state = initial_state(sim_spec)
    actions: list[str] = []
    for target in spec.gt_path[1:]:
        obs = observe_pano(state, sim_spec)
        index = next((c.index for c in obs.candidates if c.node == target), None)
        if index is None:
            raise ExpertError(
                f"next path node {target!r} is not among the candidates at {state.node!r}"
            )
        actions.append(str(index))
        step_pano(state, sim_spec, str(index))
    actions.append(STOP)
    return actions


def expert_actions(spec: EpisodeSpec) -> list[str]:
    if spec.space == SPACE_LOW:
        return low_level_expert(spec)
    return pano_expert(spec)


@dataclass(frozen=True)
class StepStats:
    """Learnable-action count statistics over a set of episodes."""

    avg_steps: float
    histogram: dict[int, int]
    episode_count: int


def step_stats(
    episodes: Sequence[EpisodeSpec],
    space: str,
    variant: Optional[VariantConfig] = None,
) -> StepStats:
    """Mean expert action count per episode plus a length histogram.

    Adjust pseudo-actions never appear in expert lists, so the counts are
    learnable actions by construction. Expert failures propagate with the
    offending episode id.
    """
    if not episodes:
        raise ValueError("step_stats requires at least one episode")
    counts: list[int] = []
    for ep in episodes:
        target = replace(ep, space=space, variant=variant or ep.variant)
        try:
            counts.append(len(expert_actions(target)))
        except ExpertError as e:
            raise ExpertError(str(e), episode_id=ep.episode_id) from e
    histogram: dict[int, int] = {}
    for c in counts:
        histogram[c] = histogram.get(c, 0) + 1
    return StepStats(
        avg_steps=sum(counts) / len(counts),
        histogram=dict(sorted(histogram.items())),
        episode_count=len(counts),
    )
