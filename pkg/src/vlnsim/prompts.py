"""Deterministic prompt construction and model-output parsing.

Rendering is a pure function of (state, observation, spec): identical
inputs produce byte-identical text and identical image-slot order. Image
slots carry view descriptors, never pixels; attaching rendered imagery is
the job of model-side adapters.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .simulator import (
    LOW_ACTIONS,
    SPACE_LOW,
    SPACE_PANO,
    SPACES,
    STOP,
    AgentState,
    EpisodeSpec,
    LowObservation,
    Observation,
    PanoObservation,
    ViewDescriptor,
)

PROMPT_SCHEMA_VERSION = "prompt/v1"

_DIGITS = re.compile(r"^[0-9]+$")


class PromptError(ValueError):
    pass


class ActionParseError(ValueError):
    """Model output could not be mapped to an action; keeps the raw text."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message} (raw={raw!r})")
        self.raw = raw


class UnknownActionError(ActionParseError):
    pass


class InvalidCandidateError(ActionParseError):
    pass


@dataclass(frozen=True)
class PromptSegment:
    kind: str  # "text" | "image"
    text: str = ""
    view: Optional[ViewDescriptor] = None

    def to_doc(self) -> dict:
        if self.kind == "text":
            return {"type": "text", "value": self.text}
        return {"type": "image", "value": self.view.to_dict()}


@dataclass(frozen=True)
class Prompt:
    """A rendered decision query: static system text plus ordered segments."""

    system_text: str
    segments: tuple[PromptSegment, ...]
    vocabulary: tuple[str, ...]

    def to_doc(self) -> dict:
        return {
            "schema_version": PROMPT_SCHEMA_VERSION,
            "system": self.system_text,
            "segments": [s.to_doc() for s in self.segments],
            "vocabulary": list(self.vocabulary),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))

    def user_text(self) -> str:
        """Text-only flattening; image slots appear as bracketed view notes."""
        parts = []
        for seg in self.segments:
            if seg.kind == "text":
                parts.append(seg.text)
            else:
                v = seg.view
                parts.append(
                    f"[image: {v.kind} view at {v.node} heading {round(v.heading_deg)}]"
                )
        return "\n".join(parts)


_SYSTEM_LOW = """You are a navigation agent inside a building, moving along a graph of viewpoints.
Follow the route instruction to reach the described goal location, then stop.

Each request contains these fields:
INSTRUCTION: the natural-language route to follow.
STEP: the current decision number, starting at 1.
DISTANCE_TRAVELED: total meters traveled so far.
HISTORY: earlier views and the action taken after each; 'none' before the first action.
CURRENT VIEW: your current egocentric view.
ALLOWED ACTIONS: the actions you may output right now.

Available actions:
move: go forward to the node nearest the center of your current view.
left: rotate 30 degrees to the left.
right: rotate 30 degrees to the right.
stop: end the episode; output this once you believe you have reached the goal.

Reply with exactly one action token: move, left, right, or stop."""

_SYSTEM_PANO = """You are a navigation agent inside a building, moving along a graph of viewpoints.
Follow the route instruction to reach the described goal location, then stop.

Each request contains these fields:
INSTRUCTION: the natural-language route to follow.
STEP: the current decision number, starting at 1.
DISTANCE_TRAVELED: total meters traveled so far.
HISTORY: panoramas seen at earlier steps; 'none' before the first action.
PANORAMA: a 360-degree view centered on your current heading.
CANDIDATES: one navigable direction per line as 'index: heading, distance', where
heading is degrees relative to the panorama center (negative = left) and distance
is the travel distance in meters; each candidate view looks straight at that direction.
VALID ACTIONS: the candidate indices you may choose now.

Available actions:
a candidate index (0 up to one less than the number of candidates): travel to that candidate.
stop: end the episode; output this once you believe you have reached the goal.

Reply with exactly one token: a candidate index or stop."""


def render_system_prompt(space: str) -> str:
    """Static per-space task description; identical across all episodes."""
    if space not in SPACES:
        raise PromptError(f"unknown action space {space!r}")
    return _SYSTEM_LOW if space == SPACE_LOW else _SYSTEM_PANO


def _format_theta(theta_deg: float) -> str:
    return str(int(round(theta_deg)))


def render_state_prompt(
    state: AgentState,
    observation: Observation,
    spec: EpisodeSpec,
    history_limit: Optional[int] = None,
) -> Prompt:
    """Serialize the current state into the canonical prompt schema.

    Field order is fixed: INSTRUCTION, STEP, DISTANCE_TRAVELED, HISTORY,
    then the space-specific view block and the valid action list. Numeric
    formatting is pinned (headings whole degrees, distances two decimals)
    so rendering is byte-deterministic. ``history_limit`` keeps only the
    most recent entries; the default is uncapped.
    """
    if spec.space == SPACE_LOW and not isinstance(observation, LowObservation):
        raise PromptError("low-level space requires a low-level observation")
    if spec.space == SPACE_PANO and not isinstance(observation, PanoObservation):
        raise PromptError("panoramic space requires a panoramic observation")
    text = lambda s: PromptSegment("text", text=s)  # noqa: E731
    image = lambda v: PromptSegment("image", view=v)  # noqa: E731

    segments: list[PromptSegment] = [
        text(f"INSTRUCTION: {spec.instruction}"),
        text(f"STEP: {state.step}"),
        text(f"DISTANCE_TRAVELED: {state.distance_m:.2f} m"),
        text("HISTORY:"),
    ]
    history = state.history
    if history_limit is not None:
        history = history[-history_limit:] if history_limit > 0 else []
    if not history:
        segments.append(text("none"))
    elif spec.space == SPACE_LOW:
        for view, action in history:
            segments.append(text(action))
            segments.append(image(view))
    else:
        for view in history:
            segments.append(image(view))

    if spec.space == SPACE_LOW:
        segments.append(text("CURRENT VIEW:"))
        segments.append(image(observation.view))
        segments.append(text(f"ALLOWED ACTIONS: {', '.join(observation.allowed)}"))
        vocabulary = observation.allowed
    else:
        segments.append(text("PANORAMA:"))
        segments.append(image(observation.pano))
        segments.append(text("CANDIDATES:"))
        if not observation.candidates:
            segments.append(text("none"))
        for cand in observation.candidates:
            segments.append(
                text(
                    f"{cand.index}: heading {_format_theta(cand.theta_deg)},"
                    f" distance {cand.delta_m:.2f}m"
                )
            )
            segments.append(image(cand.view))
        indices = [str(c.index) for c in observation.candidates]
        vocabulary = tuple(indices) + (STOP,)
        segments.append(text(f"VALID ACTIONS: {', '.join(vocabulary)}"))

    return Prompt(
        system_text=render_system_prompt(spec.space),
        segments=tuple(segments),
        vocabulary=vocabulary,
    )


def parse_action(raw: str, space: str, k: int = 0) -> str:
    """Normalize raw model text into a canonical action token.

    Takes the first whitespace-separated token, case-insensitively. The
    low-level vocabulary is {move, left, right, stop}; the panoramic one is
    a decimal candidate index in [0, k) or "stop". Errors keep the raw text
    for logging.
    """
    if space not in SPACES:
        raise PromptError(f"unknown action space {space!r}")
    if raw is None:
        raise UnknownActionError("empty model output", raw="")
    tokens = raw.strip().split()
    if not tokens:
        raise UnknownActionError("empty model output", raw=raw)
    token = tokens[0].lower()
    if space == SPACE_LOW:
        if token in LOW_ACTIONS:
            return token
        raise UnknownActionError("unknown low-level action", raw=raw)
    if token == STOP:
        return STOP
    if not _DIGITS.match(token):
        raise UnknownActionError("unknown panoramic action", raw=raw)
    index = int(token)
    if not 0 <= index < k:
        raise InvalidCandidateError(f"invalid candidate (K={k})", raw=raw)
    return str(index)
