import math
import random
from dataclasses import replace

import pytest

from vlnsim.metrics import (
    BucketStat,
    EpisodeScore,
    MetricsError,
    aggregate_online,
    cls_score,
    macro_f1,
    score_offline,
    score_online,
    sr_by_path_length,
)
from vlnsim.policies import ExpertPolicy, RandomPolicy
from vlnsim.simulator import run_episode

from conftest import make_graph, spec_for
from oracles import cls_formula, confusion_macro_f1, random_walk, random_world, spl_formula


def line_graph(spacing=5.0, n=3):
    positions = {f"P{i}": (0.0, i * spacing, 0.0) for i in range(n)}
    edges = [(f"P{i}", f"P{i+1}") for i in range(n - 1)]
    return make_graph(positions, edges)


class TestScoreOnline:
    def test_perfect_episode(self):
        g = line_graph(spacing=4.0, n=3)
        spec = spec_for(g, ["P0", "P1", "P2"], heading=0.0, space="pano")
        record = run_episode(ExpertPolicy(spec), spec)
        sc = score_online(record, spec)
        assert sc.ne_m == 0.0
        assert sc.success and sc.oracle_success
        assert sc.spl == pytest.approx(1.0, abs=1e-12)
        assert sc.cls == pytest.approx(1.0, abs=1e-12)
        assert sc.pl_m == pytest.approx(8.0)

    def test_spl_penalizes_detour(self):
        # optimal 10, traveled 20, success: spl = 10 / max(20, 10) = 0.5
        g = make_graph(
            {"S": (0, 0, 0), "G": (0, 10, 0), "D": (0, -5, 0)},
            [("S", "G"), ("S", "D")],
        )
        spec = spec_for(g, ["S", "G"], heading=0.0, space="pano")
        record = run_episode(ExpertPolicy(spec), spec)
        detour = record
        detour.nodes = ["S", "D", "S", "G"]
        sc = score_online(detour, spec)
        assert sc.success
        assert sc.pl_m == pytest.approx(20.0)
        assert sc.spl == pytest.approx(0.5)

    def test_oracle_success_without_success(self):
        # Visits within 3 m of the goal mid-route but ends 8 m away.
        g = make_graph(
            {"S": (0, 0, 0), "NEAR": (0, 8, 0), "G": (0, 10, 0), "FAR": (0, 2, 0)},
            [("S", "NEAR"), ("NEAR", "G"), ("S", "FAR"), ("NEAR", "FAR")],
        )
        spec = spec_for(g, ["S", "NEAR", "G"], heading=0.0, space="pano")
        record = run_episode(ExpertPolicy(spec), spec)
        record.nodes = ["S", "NEAR", "FAR"]
        record.actions = ["0", "1", "stop"]
        sc = score_online(record, spec)
        assert sc.oracle_success and not sc.success
        assert sc.ne_m == pytest.approx(8.0)

    def test_success_requires_stop(self):
        g = line_graph(spacing=4.0, n=2)
        spec = spec_for(g, ["P0", "P1"], heading=0.0, space="pano")
        record = run_episode(ExpertPolicy(spec), spec)
        record.actions = ["0"]  # reached the goal but never stopped
        sc = score_online(record, spec)
        assert sc.ne_m == 0.0 and not sc.success

    def test_zero_length_episode_success(self):
        g = line_graph(spacing=4.0, n=2)
        spec = spec_for(g, ["P0"], heading=0.0, space="pano")
        record = run_episode(ExpertPolicy(spec), spec)
        sc = score_online(record, spec)
        assert record.nodes == ["P0"]
        assert sc.pl_m == 0.0 and sc.success and sc.spl == 1.0


class TestCls:
    def test_identity_path(self):
        g = line_graph()
        assert cls_score(["P0", "P1", "P2"], ["P0", "P1", "P2"], g) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_stationary_prediction_closed_form(self):
        # Reference: two nodes 5 m apart; prediction stays at the start.
        # Direct evaluation: PC = (1 + e^(-5/3)) / 2, EPL = 5 PC, LS = 1/2.
        g = line_graph(spacing=5.0, n=2)
        pc = (1.0 + math.exp(-5.0 / 3.0)) / 2.0
        expected = pc * 0.5
        got = cls_score(["P0"], ["P0", "P1"], g)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.297, abs=5e-4)

    def test_reversal_invariance(self):
        rng = random.Random(13)
        for _ in range(50):
            g = random_world(rng)
            pred = random_walk(rng, g)
            ref = random_walk(rng, g)
            fwd = cls_score(pred, ref, g)
            rev = cls_score(list(reversed(pred)), ref, g)
            assert fwd == pytest.approx(rev, abs=1e-9)

    def test_single_node_reference(self):
        g = line_graph()
        assert cls_score(["P0"], ["P0"], g) == pytest.approx(1.0)
        assert cls_score(["P0", "P1"], ["P0"], g) < 1.0

    def test_matches_direct_formula_on_random_instances(self):
        rng = random.Random(17)
        for _ in range(100):
            g = random_world(rng)
            pred = random_walk(rng, g)
            ref = random_walk(rng, g)
            assert cls_score(pred, ref, g) == pytest.approx(
                cls_formula(g, pred, ref), abs=1e-9
            )


class TestAggregate:
    def _score(self, **kw):
        base = dict(
            pl_m=10.0,
            ne_m=1.0,
            oracle_success=True,
            success=True,
            spl=1.0,
            cls=1.0,
            gt_geodesic_m=10.0,
        )
        base.update(kw)
        return EpisodeScore(**base)

    def test_single_episode_is_identity(self):
        sc = self._score()
        agg = aggregate_online([sc])
        assert (agg.pl_m, agg.ne_m, agg.osr, agg.sr, agg.spl, agg.cls) == (
            10.0,
            1.0,
            1.0,
            1.0,
            1.0,
            1.0,
        )

    def test_mean_of_mixed_outcomes(self):
        a = self._score()
        b = self._score(success=False, spl=0.0, oracle_success=False)
        agg = aggregate_online([a, b])
        assert agg.sr == 0.5 and agg.osr == 0.5 and agg.spl == 0.5

    def test_order_invariance(self):
        scores = [self._score(pl_m=float(i)) for i in range(7)]
        fwd = aggregate_online(scores)
        rev = aggregate_online(list(reversed(scores)))
        assert fwd == rev

    def test_empty_rejected(self):
        with pytest.raises(MetricsError):
            aggregate_online([])


class TestScoreOffline:
    def test_hand_computed_example(self):
        # expert [move, move, stop] vs predicted [move, left, stop]:
        # accuracy 2/3; per-class F1: move 2/3, left 0, stop 1 -> macro 5/9.
        gold = ["move", "move", "stop"]
        pred = ["move", "left", "stop"]
        sc = score_offline([(gold, pred)])
        assert sc.accuracy == pytest.approx(2 / 3)
        assert sc.macro_f1 == pytest.approx(5 / 9)
        assert sc.csr == 0.0
        assert sc.macro_f1 == pytest.approx(confusion_macro_f1(gold, pred), abs=1e-12)

    def test_perfect_prediction(self):
        pairs = [(["0", "1", "stop"], ["0", "1", "stop"])] * 3
        sc = score_offline(pairs)
        assert (sc.accuracy, sc.macro_f1, sc.csr) == (1.0, 1.0, 1.0)

    def test_many_classes_can_lower_macro_f1_at_same_accuracy(self):
        # Same pooled accuracy, but the panoramic-style episode spreads
        # errors over twelve index classes and scores a lower macro F1.
        low_gold = ["move"] * 8 + ["left", "right", "stop", "move"]
        low_pred = ["move"] * 8 + ["left", "right", "stop", "left"]
        pano_gold = [str(i) for i in range(12)]
        pano_pred = [str(i) for i in range(11)] + ["0"]
        low = score_offline([(low_gold, low_pred)])
        pano = score_offline([(pano_gold, pano_pred)])
        assert low.accuracy == pano.accuracy
        assert pano.macro_f1 < low.macro_f1

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricsError, match="mismatch"):
            score_offline([(["stop"], ["move", "stop"])])

    def test_macro_f1_matches_confusion_matrix_oracle(self):
        rng = random.Random(23)
        labels = ["move", "left", "right", "stop", "0", "1", "2"]
        for _ in range(200):
            n = rng.randint(1, 30)
            gold = [rng.choice(labels) for _ in range(n)]
            pred = [rng.choice(labels) for _ in range(n)]
            assert macro_f1(gold, pred) == pytest.approx(
                confusion_macro_f1(gold, pred), abs=1e-12
            )

    def test_macro_f1_matches_sklearn(self):
        from sklearn.metrics import f1_score

        rng = random.Random(29)
        labels = ["a", "b", "c", "d"]
        for _ in range(50):
            n = rng.randint(2, 40)
            gold = [rng.choice(labels) for _ in range(n)]
            pred = [rng.choice(labels) for _ in range(n)]
            ours = macro_f1(gold, pred)
            theirs = f1_score(gold, pred, average="macro", zero_division=0)
            assert ours == pytest.approx(theirs, abs=1e-12)


class TestSrByPathLength:
    def _scores(self, lengths, successes):
        return [
            EpisodeScore(
                pl_m=1.0,
                ne_m=0.0,
                oracle_success=True,
                success=s,
                spl=1.0 if s else 0.0,
                cls=1.0,
                gt_geodesic_m=length,
            )
            for length, s in zip(lengths, successes)
        ]

    def test_single_bucket_equals_overall(self):
        scores = self._scores([5.0, 5.5, 5.9], [True, False, True])
        buckets = sr_by_path_length([], [], [4.0, 8.0], scores=scores)
        middle = [b for b in buckets if b.lo_m == 4.0][0]
        assert middle.count == 3
        assert middle.sr == pytest.approx(2 / 3)

    def test_empty_bucket_reports_none(self):
        scores = self._scores([5.0], [True])
        buckets = sr_by_path_length([], [], [0.0, 4.0, 8.0], scores=scores)
        empty = [b for b in buckets if b.lo_m == 0.0][0]
        assert empty.count == 0 and empty.sr is None

    def test_successes_only_in_short_bucket(self):
        scores = self._scores([2.0, 9.0, 2.5, 8.5], [True, False, True, False])
        buckets = sr_by_path_length([], [], [0.0, 5.0, 10.0], scores=scores)
        short = [b for b in buckets if b.lo_m == 0.0][0]
        long = [b for b in buckets if b.lo_m == 5.0][0]
        assert short.sr == 1.0 and long.sr == 0.0

    def test_edges_must_increase(self):
        with pytest.raises(MetricsError):
            sr_by_path_length([], [], [3.0, 3.0], scores=[])


class TestOrderingInvariant:
    def test_spl_le_sr_le_osr_for_random_policies(self, synthetic_world):
        _params, _graph, episodes = synthetic_world
        for seed in (0, 1, 2):
            scores = []
            for spec in episodes[:15]:
                sp = replace(spec, space="pano")
                record = run_episode(RandomPolicy(seed, sp), sp)
                scores.append(score_online(record, sp))
            for sc in scores:
                assert sc.spl <= (1.0 if sc.success else 0.0) <= (
                    1.0 if sc.oracle_success else 0.0
                ) + 1e-12
            agg = aggregate_online(scores)
            assert agg.spl <= agg.sr + 1e-12
            assert agg.sr <= agg.osr + 1e-12

    def test_spl_matches_direct_formula(self, synthetic_world):
        _params, graph, episodes = synthetic_world
        for seed in (3, 4):
            for spec in episodes[:10]:
                sp = replace(spec, space="pano")
                record = run_episode(RandomPolicy(seed, sp), sp)
                sc = score_online(record, sp)
                optimal = graph.geodesic(sp.start, sp.goal)
                assert sc.spl == pytest.approx(
                    spl_formula(sc.success, optimal, sc.pl_m), abs=1e-12
                )
