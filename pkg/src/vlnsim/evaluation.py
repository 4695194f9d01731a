"""Evaluation loops and report assembly.

Online mode rolls each episode out closed-loop with the policy; offline
mode walks the expert trajectory and compares the policy's prediction at
every expert state (teacher forcing). Per-episode policy failures are
recorded as failed episodes, never crashes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .expert import ExpertError, expert_actions, uncapped
from .metrics import (
    DEFAULT_SUCCESS_RADIUS_M,
    BucketStat,
    EpisodeScore,
    OfflineScore,
    OnlineScore,
    aggregate_online,
    score_offline,
    score_online,
    sr_by_path_length,
)
from .prompts import ActionParseError, parse_action, render_state_prompt
from .simulator import (
    EpisodeRecord,
    EpisodeSession,
    EpisodeSpec,
    PanoObservation,
    initial_state,
    observe,
    step,
)

REPORT_FORMAT_VERSION = "metrics_report/v1"

INVALID_LABEL = "invalid"  # offline stand-in for unparseable policy output


@dataclass
class MetricsReport:
    """Aggregated evaluation results plus run metadata."""

    mode: str
    space: str
    split: str
    variant: dict
    n_episodes: int
    n_failures: int
    success_radius_m: float
    seed: Optional[int] = None
    online: Optional[OnlineScore] = None
    offline: Optional[OfflineScore] = None
    buckets: Optional[list[BucketStat]] = None
    failures: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        doc = {
            "format_version": REPORT_FORMAT_VERSION,
            "mode": self.mode,
            "space": self.space,
            "split": self.split,
            "variant": self.variant,
            "n_episodes": self.n_episodes,
            "n_failures": self.n_failures,
            "success_radius_m": self.success_radius_m,
            "seed": self.seed,
            "failures": self.failures,
        }
        if self.online is not None:
            doc["online"] = {k: round(v, 9) for k, v in self.online.to_dict().items()}
        if self.offline is not None:
            doc["offline"] = {k: round(v, 9) for k, v in self.offline.to_dict().items()}
        if self.buckets is not None:
            doc["buckets"] = [b.to_dict() for b in self.buckets]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":")) + "\n"

    def to_table(self) -> str:
        """Aligned plain-text table: PL, NE, OSR, SR, SPL, then CLS."""
        lines = [
            f"split: {self.split}  space: {self.space}  mode: {self.mode}"
            f"  episodes: {self.n_episodes}  failures: {self.n_failures}"
        ]
        if self.online is not None:
            header = f"{'PL':>8} {'NE':>8} {'OSR':>6} {'SR':>6} {'SPL':>6} {'CLS':>6}"
            o = self.online
            row = (
                f"{o.pl_m:>8.2f} {o.ne_m:>8.2f} {o.osr:>6.2f} {o.sr:>6.2f}"
                f" {o.spl:>6.2f} {o.cls:>6.2f}"
            )
            lines += [header, row]
        if self.offline is not None:
            header = f"{'Accuracy':>9} {'MacroF1':>8} {'CSR':>6}"
            f = self.offline
            row = f"{f.accuracy:>9.2f} {f.macro_f1:>8.2f} {f.csr:>6.2f}"
            lines += [header, row]
        if self.buckets is not None:
            lines.append("SR by ground-truth path length:")
            for b in self.buckets:
                lo = "-inf" if b.lo_m == float("-inf") else f"{b.lo_m:g}"
                hi = "+inf" if b.hi_m == float("inf") else f"{b.hi_m:g}"
                sr = "n/a" if b.sr is None else f"{b.sr:.2f}"
                lines.append(f"  [{lo}, {hi}): count={b.count} sr={sr}")
        return "\n".join(lines) + "\n"


@dataclass
class OnlineEvalResult:
    report: MetricsReport
    records: list[EpisodeRecord]
    scores: list[EpisodeScore]


@dataclass
class OfflineEvalResult:
    report: MetricsReport
    pairs: list[tuple[list[str], list[str]]]


def run_online_eval(
    specs: Sequence[EpisodeSpec],
    make_policy,
    split: str = "",
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
    bucket_edges: Optional[Sequence[float]] = None,
    seed: Optional[int] = None,
    record_prompts: bool = False,
) -> OnlineEvalResult:
    """Closed-loop rollout of every episode; failures score as unsuccessful."""
    if not specs:
        raise ValueError("no episodes to evaluate")
    records: list[EpisodeRecord] = []
    scores: list[EpisodeScore] = []
    failures: list[str] = []
    for spec in specs:
        session = EpisodeSession(spec, record_prompts=record_prompts)
        try:
            policy = make_policy(spec)
        except ExpertError as e:
            policy = None
            failures.append(f"{spec.episode_id}: {e}")
        while policy is not None and not session.done:
            obs = session.observation()
            prompt = session.prompt()
            try:
                raw = policy.decide(prompt, session.state, obs, spec)
                k = len(obs.candidates) if isinstance(obs, PanoObservation) else 0
                token = parse_action(raw, spec.space, k)
                session.act_token(token)
            except Exception as e:
                failures.append(f"{spec.episode_id}: step {session.state.step}: {e}")
                break
        record = session.record()
        records.append(record)
        scores.append(score_online(record, spec, success_radius_m))
    online = aggregate_online(scores)
    buckets = None
    if bucket_edges is not None:
        buckets = sr_by_path_length(
            records, specs, bucket_edges, success_radius_m, scores=scores
        )
    report = MetricsReport(
        mode="online",
        space=specs[0].space,
        split=split,
        variant=specs[0].variant.to_dict(),
        n_episodes=len(specs),
        n_failures=len(failures),
        success_radius_m=success_radius_m,
        seed=seed,
        online=online,
        buckets=buckets,
        failures=failures,
    )
    return OnlineEvalResult(report=report, records=records, scores=scores)


def run_offline_eval(
    specs: Sequence[EpisodeSpec],
    make_policy,
    split: str = "",
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
    seed: Optional[int] = None,
) -> OfflineEvalResult:
    """Teacher-forced comparison against expert actions at every expert state.

    The trajectory always follows the expert; the policy's output at each
    state is recorded (unparseable output becomes the literal "invalid"
    class and counts as wrong).
    """
    if not specs:
        raise ValueError("no episodes to evaluate")
    pairs: list[tuple[list[str], list[str]]] = []
    failures: list[str] = []
    for spec in specs:
        try:
            gold = expert_actions(spec)
        except ExpertError as e:
            failures.append(f"{spec.episode_id}: {e}")
            continue
        policy = make_policy(spec)
        walk_spec = uncapped(spec)
        state = initial_state(walk_spec)
        preds: list[str] = []
        for token in gold:
            obs = observe(state, walk_spec)
            prompt = render_state_prompt(state, obs, walk_spec)
            k = len(obs.candidates) if isinstance(obs, PanoObservation) else 0
            try:
                raw = policy.decide(prompt, state, obs, walk_spec)
                preds.append(parse_action(raw, spec.space, k))
            except ActionParseError:
                preds.append(INVALID_LABEL)
            except Exception as e:
                failures.append(f"{spec.episode_id}: step {state.step}: {e}")
                preds.append(INVALID_LABEL)
            step(state, walk_spec, token)
        pairs.append((gold, preds))
    if not pairs:
        raise ExpertError("expert generation failed for every episode")
    offline = score_offline(pairs)
    report = MetricsReport(
        mode="offline",
        space=specs[0].space,
        split=split,
        variant=specs[0].variant.to_dict(),
        n_episodes=len(pairs),
        n_failures=len(failures),
        success_radius_m=success_radius_m,
        seed=seed,
        offline=offline,
        failures=failures,
    )
    return OfflineEvalResult(report=report, pairs=pairs)
