"""FastAPI episode API: remote processes drive episodes one action per request.

Each episode is identified by an opaque token. Requests to the same episode
are serialized: a second concurrent request is rejected with 409 rather
than queued, which keeps replay determinism trivial. Episodes expire after
a configurable idle timeout. State lives in process memory only; restarts
drop in-flight episodes.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..expert import ExpertError, expert_actions
from ..metrics import DEFAULT_SUCCESS_RADIUS_M, score_online
from ..prompts import ActionParseError, parse_action
from ..simulator import (
    STOP,
    EpisodeSession,
    EpisodeSpec,
    InvalidActionError,
    PanoObservation,
    VariantConfig,
    spec_from_current_state,
)
from .registry import DatasetRegistry
from ..data import DataError
from .schemas import (
    ActionRequest,
    EpisodeListing,
    ExpertActionResponse,
    OpenEpisodeRequest,
    OpenEpisodeResponse,
    SnapshotResponse,
    SplitListing,
    StepResponse,
)


@dataclass
class _Session:
    token: str
    split: str
    session: EpisodeSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)
    expert_plan: Optional[list[str]] = None
    expert_cursor: int = 0

    def touch(self):
        self.last_access = time.monotonic()


class SessionStore:
    def __init__(self, idle_timeout_s: float = 600.0):
        self.idle_timeout_s = idle_timeout_s
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def create(self, split: str, session: EpisodeSession) -> _Session:
        token = uuid.uuid4().hex
        entry = _Session(token=token, split=split, session=session)
        with self._lock:
            self._sessions[token] = entry
        return entry

    def get(self, token: str) -> Optional[_Session]:
        self.sweep()
        with self._lock:
            return self._sessions.get(token)

    def drop(self, token: str):
        with self._lock:
            self._sessions.pop(token, None)

    def sweep(self):
        now = time.monotonic()
        with self._lock:
            expired = [
                t
                for t, s in self._sessions.items()
                if now - s.last_access > self.idle_timeout_s
            ]
            for t in expired:
                del self._sessions[t]


def _error(status: int, message: str, raw: Optional[str] = None) -> JSONResponse:
    body = {"error": message}
    if raw is not None:
        body["raw"] = raw
    return JSONResponse(status_code=status, content=body)


def create_app(
    registry: DatasetRegistry,
    debug: bool = False,
    idle_timeout_s: float = 600.0,
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
) -> FastAPI:
    app = FastAPI(title="vlnsim episode API")
    store = SessionStore(idle_timeout_s=idle_timeout_s)
    app.state.store = store
    app.state.registry = registry

    def _summary(entry: _Session) -> dict:
        record = entry.session.record()
        score = score_online(record, entry.session.spec, success_radius_m)
        return {
            "pl_m": score.pl_m,
            "ne_m": score.ne_m,
            "oracle_success": score.oracle_success,
            "success": score.success,
            "spl": score.spl,
            "cls": score.cls,
            "stopped": record.stopped,
            "num_decisions": record.num_decisions,
            "final_node": record.final_node,
            "record": record.to_doc(),
        }

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/splits")
    def splits():
        return {"splits": registry.splits()}

    @app.get("/splits/{split}/episodes", response_model=SplitListing)
    def split_episodes(split: str):
        try:
            episodes = registry.episodes(split)
        except DataError as e:
            return _error(404, str(e))
        return SplitListing(
            split=split,
            episodes=[
                EpisodeListing(
                    episode_id=e.episode_id,
                    instruction_index=e.instruction_index,
                    gt_path_length=len(e.gt_path),
                )
                for e in episodes
            ],
        )

    @app.post("/episodes", response_model=OpenEpisodeResponse)
    def open_episode(req: OpenEpisodeRequest):
        variant = VariantConfig(
            vfov_deg=req.variant.vfov_deg,
            auto_adjust=req.variant.auto_adjust,
            max_steps=req.variant.max_steps,
        )
        try:
            spec = registry.episode(
                req.split, req.episode_id, req.instruction_index, req.space, variant
            )
        except DataError as e:
            return _error(404, str(e))
        session = EpisodeSession(spec)
        entry = store.create(req.split, session)
        return OpenEpisodeResponse(
            episode_token=entry.token,
            system_prompt=session.system_prompt(),
            prompt=session.prompt().to_doc(),
            step=session.state.step,
        )

    def _locked_entry(token: str):
        entry = store.get(token)
        if entry is None:
            return None, _error(404, "unknown or expired episode token")
        if not entry.lock.acquire(blocking=False):
            return None, _error(409, "episode is busy with another request")
        entry.touch()
        return entry, None

    @app.post("/episodes/{token}/action", response_model=StepResponse)
    def act(token: str, body: ActionRequest):
        entry, err = _locked_entry(token)
        if err is not None:
            return err
        try:
            session = entry.session
            if session.done:
                return _error(409, "episode already finished")
            obs = session.observation()
            k = len(obs.candidates) if isinstance(obs, PanoObservation) else 0
            try:
                parsed = parse_action(body.token, session.spec.space, k)
                _advance_expert_cursor(entry, parsed)
                session.act_token(parsed)
            except (ActionParseError, InvalidActionError) as e:
                raw = getattr(e, "raw", body.token)
                return _error(422, str(e), raw=raw)
            if session.done:
                return StepResponse(done=True, summary=_summary(entry))
            return StepResponse(
                done=False, prompt=session.prompt().to_doc(), step=session.state.step
            )
        finally:
            entry.lock.release()

    @app.get("/episodes/{token}", response_model=SnapshotResponse)
    def snapshot(token: str):
        entry = store.get(token)
        if entry is None:
            return _error(404, "unknown or expired episode token")
        entry.touch()
        state = entry.session.state
        spec = entry.session.spec
        return SnapshotResponse(
            episode_id=spec.episode_id,
            instruction_index=spec.instruction_index,
            split=entry.split,
            space=spec.space,
            node=state.node,
            heading_deg=state.heading_deg,
            distance_m=state.distance_m,
            step=state.step,
            done=state.done,
        )

    def _advance_expert_cursor(entry: _Session, parsed: str):
        if entry.expert_plan is None:
            return
        plan, cur = entry.expert_plan, entry.expert_cursor
        if cur < len(plan) and plan[cur] == parsed:
            entry.expert_cursor += 1
        else:
            entry.expert_plan = None  # deviation: replan lazily on next query

    @app.get("/episodes/{token}/expert_action", response_model=ExpertActionResponse)
    def expert_action(token: str):
        # Test fixture: the next expert token from the current state.
        if not debug:
            return _error(404, "not found")
        entry = store.get(token)
        if entry is None:
            return _error(404, "unknown or expired episode token")
        entry.touch()
        session = entry.session
        if session.done:
            return ExpertActionResponse(token=STOP)
        if entry.expert_plan is None or entry.expert_cursor >= len(entry.expert_plan):
            try:
                if session.state.step == 1:
                    # Fresh episode: follow the ground-truth path as-is.
                    entry.expert_plan = expert_actions(session.spec)
                else:
                    # The client deviated; replan via the shortest path to goal.
                    rebased = spec_from_current_state(session.spec, session.state)
                    entry.expert_plan = expert_actions(rebased)
                entry.expert_cursor = 0
            except ExpertError as e:
                return _error(409, f"expert cannot serve this state: {e}")
        return ExpertActionResponse(token=entry.expert_plan[entry.expert_cursor])

    return app
