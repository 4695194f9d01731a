"""Built-in navigation policies and the remote-policy HTTP client.

A policy maps (prompt, state, observation, spec) to a raw action string;
the episode runner normalizes that string through the shared parser. The
expert policy replays the precomputed expert plan for its episode; random
draws uniformly from the currently valid tokens with a per-episode seed so
results do not depend on evaluation order.
"""

from __future__ import annotations

import random
import zlib
from typing import Callable, Optional

import httpx

from .expert import expert_actions
from .simulator import (
    STOP,
    AgentState,
    EpisodeSpec,
    Observation,
    PanoObservation,
)

POLICY_NAMES = ("expert", "random", "stop")
REMOTE_PREFIX = "remote:"


class RemotePolicyError(RuntimeError):
    pass


class StopPolicy:
    """Always stops immediately."""

    def decide(self, prompt, state, observation, spec) -> str:
        return STOP


class ExpertPolicy:
    """Replays the expert action list for one episode."""

    def __init__(self, spec: EpisodeSpec):
        self._plan = expert_actions(spec)
        self._cursor = 0

    def decide(self, prompt, state, observation, spec) -> str:
        if self._cursor >= len(self._plan):
            return STOP
        token = self._plan[self._cursor]
        self._cursor += 1
        return token


class RandomPolicy:
    """Uniform draw over the currently valid tokens, seeded per episode."""

    def __init__(self, seed: int, spec: EpisodeSpec):
        key = f"{seed}:{spec.episode_id}:{spec.instruction_index}".encode()
        self._rng = random.Random(zlib.crc32(key))

    def decide(self, prompt, state, observation, spec) -> str:
        if isinstance(observation, PanoObservation):
            options = [str(c.index) for c in observation.candidates] + [STOP]
        else:
            options = list(observation.allowed)
        return self._rng.choice(options)


class RemotePolicy:
    """Posts the prompt document to a model endpoint and returns its text.

    Protocol: POST <url> with the prompt JSON document (system text,
    segments, vocabulary); the endpoint replies with JSON {"text": "..."}
    or a plain-text body. The reply is parsed by the caller through the
    standard action parser.
    """

    def __init__(self, url: str, timeout_s: float = 30.0, client: Optional[httpx.Client] = None):
        self.url = url
        self._client = client or httpx.Client(timeout=timeout_s)

    @classmethod
    def probe(cls, url: str, timeout_s: float = 5.0, client: Optional[httpx.Client] = None):
        """Raise RemotePolicyError if the endpoint is not reachable at all.

        Any HTTP status proves reachability; only transport failures count.
        """
        c = client or httpx.Client(timeout=timeout_s)
        try:
            c.get(url)
        except httpx.HTTPError as e:
            raise RemotePolicyError(f"remote policy unreachable at {url}: {e}") from e
        finally:
            if client is None:
                c.close()

    def decide(self, prompt, state, observation, spec) -> str:
        doc = prompt.to_doc()
        doc["episode_id"] = spec.episode_id
        doc["space"] = spec.space
        try:
            resp = self._client.post(self.url, json=doc)
            resp.raise_for_status()
        except httpx.HTTPError as e:
            raise RemotePolicyError(f"remote policy request failed: {e}") from e
        try:
            body = resp.json()
        except ValueError:
            return resp.text
        if isinstance(body, dict) and "text" in body:
            return str(body["text"])
        return str(body)


PolicyFactory = Callable[[EpisodeSpec], object]


def policy_factory(
    name: str,
    seed: int = 0,
    client: Optional[httpx.Client] = None,
) -> PolicyFactory:
    """Build a per-episode policy constructor from a CLI policy string.

    Accepts "expert", "random", "stop", or "remote:<url>". Remote policies
    are probed once at construction so an unreachable endpoint fails fast.
    """
    if name == "expert":
        return lambda spec: ExpertPolicy(spec)
    if name == "random":
        return lambda spec: RandomPolicy(seed, spec)
    if name == "stop":
        return lambda spec: StopPolicy()
    if name.startswith(REMOTE_PREFIX):
        url = name[len(REMOTE_PREFIX) :]
        if not url:
            raise ValueError("remote policy needs a URL, e.g. remote:http://host:port/act")
        RemotePolicy.probe(url, client=client)
        shared = RemotePolicy(url, client=client)
        return lambda spec: shared
    raise ValueError(
        f"unknown policy {name!r}; expected one of {POLICY_NAMES} or remote:<url>"
    )
