import json
from dataclasses import replace

import httpx
import pytest

from vlnsim.evaluation import run_offline_eval, run_online_eval
from vlnsim.policies import (
    RandomPolicy,
    RemotePolicy,
    RemotePolicyError,
    StopPolicy,
    policy_factory,
)
from vlnsim.simulator import STOP


class TestOnlineEval:
    def test_expert_is_perfect(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:10]]
        result = run_online_eval(specs, policy_factory("expert"), split="syn")
        agg = result.report.online
        assert agg.sr == 1.0 and agg.osr == 1.0
        assert agg.spl == pytest.approx(1.0, abs=1e-9)
        assert agg.cls == pytest.approx(1.0, abs=1e-9)
        assert agg.ne_m == 0.0
        assert result.report.n_failures == 0

    def test_stop_policy_path_length_zero(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:5]]
        result = run_online_eval(specs, policy_factory("stop"), split="syn")
        assert result.report.online.pl_m == 0.0
        assert all(r.nodes == [s.start] for r, s in zip(result.records, specs))

    def test_random_policy_deterministic_and_order_free(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:8]]
        r1 = run_online_eval(specs, policy_factory("random", seed=5), split="syn", seed=5)
        r2 = run_online_eval(specs, policy_factory("random", seed=5), split="syn", seed=5)
        assert r1.report.to_json() == r2.report.to_json()
        shuffled = list(reversed(specs))
        r3 = run_online_eval(shuffled, policy_factory("random", seed=5), split="syn", seed=5)
        by_id = {rec.episode_id: rec.actions for rec in r3.records}
        for rec in r1.records:
            assert by_id[rec.episode_id] == rec.actions

    def test_policy_failure_recorded_not_raised(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:3]]

        class Detonator:
            def decide(self, prompt, state, observation, spec):
                raise RuntimeError("boom")

        result = run_online_eval(specs, lambda s: Detonator(), split="syn")
        assert result.report.n_failures == len(specs)
        assert result.report.online.sr == 0.0

    def test_unparseable_output_recorded_as_failure(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:2]]

        class Gibberish:
            def decide(self, prompt, state, observation, spec):
                return "???"

        result = run_online_eval(specs, lambda s: Gibberish(), split="syn")
        assert result.report.n_failures == 2
        assert all(not r.stopped for r in result.records)

    def test_bucket_report(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:10]]
        result = run_online_eval(
            specs, policy_factory("expert"), split="syn", bucket_edges=[6.0, 12.0, 18.0]
        )
        buckets = result.report.buckets
        assert buckets is not None
        assert sum(b.count for b in buckets) == len(specs)
        for b in buckets:
            if b.count:
                assert b.sr == 1.0


class TestOfflineEval:
    def test_expert_scores_perfectly(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        for space in ("low", "pano"):
            specs = [replace(s, space=space) for s in episodes[:8]]
            result = run_offline_eval(specs, policy_factory("expert"), split="syn")
            sc = result.report.offline
            assert sc.accuracy == 1.0 and sc.csr == 1.0 and sc.macro_f1 == 1.0

    def test_stop_policy_offline(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:4]]
        result = run_offline_eval(specs, lambda s: StopPolicy(), split="syn")
        sc = result.report.offline
        assert sc.csr == 0.0
        # stop matches exactly the final expert action of every episode
        total = sum(len(g) for g, _p in result.pairs)
        assert sc.accuracy == pytest.approx(len(specs) / total)

    def test_pairs_follow_expert_trajectory(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:4]]
        result = run_offline_eval(specs, policy_factory("random", seed=1), split="syn")
        for (gold, pred), spec in zip(result.pairs, specs):
            assert gold[-1] == STOP
            assert len(gold) == len(pred) == len(spec.gt_path)


class TestReportRendering:
    def test_table_has_required_columns(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:3]]
        result = run_online_eval(specs, policy_factory("expert"), split="syn")
        table = result.report.to_table()
        for col in ("PL", "NE", "OSR", "SR", "SPL", "CLS"):
            assert col in table

    def test_json_round_trips(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        specs = [replace(s, space="pano") for s in episodes[:3]]
        result = run_online_eval(specs, policy_factory("expert"), split="syn")
        doc = json.loads(result.report.to_json())
        assert doc["online"]["sr"] == 1.0
        assert doc["mode"] == "online"


class TestRemotePolicy:
    def _fake_model_client(self, reply):
        def handler(request: httpx.Request) -> httpx.Response:
            if request.method == "GET":
                return httpx.Response(200, json={"status": "ok"})
            body = json.loads(request.content)
            assert "segments" in body and "vocabulary" in body
            return httpx.Response(200, json={"text": reply(body)})

        return httpx.Client(transport=httpx.MockTransport(handler))

    def test_remote_policy_round_trip(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        spec = replace(episodes[0], space="pano")
        client = self._fake_model_client(lambda body: " stop ")
        policy = RemotePolicy("http://model/act", client=client)
        result = run_online_eval([spec], lambda s: policy, split="syn")
        assert result.records[0].actions == [STOP]
        assert result.report.n_failures == 0

    def test_probe_failure(self):
        with pytest.raises(RemotePolicyError, match="unreachable"):
            RemotePolicy.probe("http://127.0.0.1:1/nothing", timeout_s=0.2)

    def test_factory_parses_remote_uri(self):
        client = self._fake_model_client(lambda body: "stop")
        factory = policy_factory("remote:http://model/act", client=client)
        assert factory is not None

    def test_factory_rejects_unknown_name(self):
        with pytest.raises(ValueError, match="unknown policy"):
            policy_factory("alien")
