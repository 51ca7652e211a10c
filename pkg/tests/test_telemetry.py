from __future__ import annotations


import pytest

from dansedoigts.reactive import Atom, Generate, Loop, Pause, Seq, make_machine
from dansedoigts.session import EV_TRIAL_RECORDED, Finger, TrialRecord
from dansedoigts.telemetry import (
    RetryPolicy,
    SessionObserver,
    SessionStats,
    SpoolStore,
    aggregate,
    build_observer_program,
    derive_session_id,
    flush,
)

from collect_stub import CollectStub
from helpers import perfect_model, replay, short_config, synth_samples


def make_trial(finger, game, reaction_ms=None, strays=0, hz=60):
    hit = reaction_ms is not None
    reaction_ticks = None if reaction_ms is None else int(reaction_ms * hz / 1000)
    return TrialRecord(
        game=game,
        finger=finger.value,
        prompt_tick=0,
        crown_tap_tick=1,
        target_x=0.5,
        target_y=0.5,
        target_radius=0.05,
        motion={"kind": "static"},
        outcome_kind="hit" if hit else "timeout",
        hit_tick=5 if hit else None,
        hit_x=0.5 if hit else None,
        hit_y=0.5 if hit else None,
        reaction_ticks=reaction_ticks,
        unexpected_contacts=strays,
        tick_hz=hz,
    )


class TestAggregate:
    def test_mean_and_lower_median(self):
        trials = [
            make_trial(Finger.INDEX, "rain", 400),
            make_trial(Finger.INDEX, "rain", 600),
            make_trial(Finger.INDEX, "rain", 800),
        ]
        agg = aggregate(trials)
        stats = agg["per_finger"]["index"]
        assert stats["mean_reaction_ms"] == 600
        assert stats["median_reaction_ms"] == 600

    def test_even_count_uses_lower_median(self):
        trials = [
            make_trial(Finger.RING, "sun", 100),
            make_trial(Finger.RING, "sun", 300),
        ]
        assert aggregate(trials)["per_finger"]["ring"]["median_reaction_ms"] == 100

    def test_empty_trials_absent_means(self):
        agg = aggregate([])
        assert agg["per_finger"] == {}
        assert agg["per_game"] == {}
        assert agg["pause"] == {"count": 0, "total_paused_ticks": 0}
        assert agg["unexpected_contact_total"] == 0

    def test_hit_rate_exact_ratio(self):
        trials = [
            make_trial(Finger.INDEX, "rain", 400),
            make_trial(Finger.MIDDLE, "rain", 500),
            make_trial(Finger.RING, "rain"),
        ]
        game = aggregate(trials)["per_game"]["rain"]
        assert game == {"trials": 3, "hits": 2, "timeouts": 1}

    def test_timeout_only_finger_has_absent_means(self):
        agg = aggregate([make_trial(Finger.THUMB, "sun")])
        stats = agg["per_finger"]["thumb"]
        assert stats["trials"] == 1 and stats["hits"] == 0
        assert stats["mean_reaction_ms"] is None

    def test_pause_spans_counted(self):
        agg = aggregate([], pause_spans=[(10, 25), (40, None)])
        assert agg["pause"] == {"count": 2, "total_paused_ticks": 15}

    def test_stray_total(self):
        trials = [make_trial(Finger.INDEX, "rain", 400, strays=2),
                  make_trial(Finger.RING, "rain", 400, strays=1)]
        assert aggregate(trials)["unexpected_contact_total"] == 3


class TestObserver:
    def test_non_interference_digest_equality(self):
        config = short_config(duration_s=0.6, tick_hz=20, seed=11)
        samples, _ = synth_samples(config, perfect_model(seed=3))
        with_obs, _ = replay(config, samples, observer=True)
        without_obs, _ = replay(config, samples, observer=False)
        assert with_obs.digest == without_obs.digest

    def test_observer_failure_does_not_kill_the_game(self):
        machine = make_machine()
        machine.event("beat")
        machine.add_program(Loop(Seq(Generate("beat"), Pause())), label="game")

        def broken(env):
            raise RuntimeError("telemetry bug")

        from dansedoigts.reactive import Await

        machine.add_program(
            Seq(Await("beat"), Atom(broken)), label="observer"
        )
        r0 = machine.react()
        assert r0.error is not None and r0.error.kind == "actionFailure"
        for _ in range(3):
            r = machine.react()
            assert "beat" in r.emitted
            assert r.error is None

    def test_empty_event_set_is_inert(self):
        program = build_observer_program([], [])
        machine = make_machine()
        h = machine.add_program(program)
        assert machine.react().terminated == (h,)

    def test_records_carry_final_value_lists(self):
        config = short_config(duration_s=0.6, tick_hz=20, seed=12)
        samples, _ = synth_samples(config, perfect_model(seed=4))
        result, observer = replay(config, samples)
        by_instant = {r.instant: r for r in result.reports}
        for instant, vals in observer.occurrences(EV_TRIAL_RECORDED):
            assert vals.snapshot() == by_instant[instant].emitted[EV_TRIAL_RECORDED]

    def test_recomputable_aggregates(self):
        config = short_config(duration_s=0.8, tick_hz=20, seed=13)
        samples, _ = synth_samples(
            config,
            perfect_model(seed=5),
        )
        result, observer = replay(config, samples)
        stats = SessionStats.collect(observer, config, result.digest)
        assert stats.aggregates == aggregate(list(stats.trials), list(stats.pause_spans))


class TestSpool:
    def make_stats(self, config=None, digest="d" * 64):
        config = config or short_config()
        observer = SessionObserver()
        return SessionStats.collect(observer, config, digest)

    def test_spool_then_reopen_still_listed(self, tmp_path):
        store = SpoolStore(tmp_path / "spool")
        stats = self.make_stats()
        sid = store.spool(stats)
        reopened = SpoolStore(tmp_path / "spool")
        assert reopened.pending() == [sid]
        assert reopened.load(sid)["stats"]["session_id"] == sid

    def test_spool_is_idempotent_by_session_id(self, tmp_path):
        store = SpoolStore(tmp_path)
        stats = self.make_stats()
        store.spool(stats)
        store.spool(stats)
        assert store.pending() == [stats.session_id]

    def test_no_tmp_litter(self, tmp_path):
        store = SpoolStore(tmp_path)
        store.spool(self.make_stats())
        assert not list(tmp_path.glob("*.tmp"))

    def test_unwritable_store_surfaces_error(self, tmp_path):
        # Point the store at a path that turns out to be a file: the write
        # fails with an OSError for the caller; nothing else is touched.
        store = SpoolStore(tmp_path)
        store.root = tmp_path / "not-a-dir"
        store.root.write_text("occupied")
        with pytest.raises(OSError):
            store.spool(self.make_stats())

    def test_session_id_derivation_is_stable(self):
        a = derive_session_id("c" * 64, "r" * 64)
        assert a == derive_session_id("c" * 64, "r" * 64)
        assert len(a) == 32
        assert a != derive_session_id("c" * 64, "x" * 64)


class TestFlush:
    def make_spooled(self, tmp_path):
        store = SpoolStore(tmp_path)
        config = short_config()
        stats = SessionStats.collect(SessionObserver(), config, "ab" * 32)
        store.spool(stats)
        return store, stats

    def test_delivery_removes_payload(self, tmp_path):
        store, stats = self.make_spooled(tmp_path)
        with CollectStub() as stub:
            results = flush(store, stub.url)
        assert results[0].delivered and results[0].status == 200
        assert store.pending() == []
        assert list(stub.records) == [stats.session_id]

    def test_endpoint_down_keeps_payload_with_backoff(self, tmp_path):
        store, stats = self.make_spooled(tmp_path)
        clock = lambda: 1000.0  # noqa: E731
        results = flush(store, "http://127.0.0.1:1", clock=clock)
        assert not results[0].delivered
        assert results[0].attempts == 1
        assert results[0].next_due_s == 1001.0  # base backoff 1 s
        assert store.pending() == [stats.session_id]
        # Not due yet: skipped with a backoff marker.
        again = flush(store, "http://127.0.0.1:1", clock=clock)
        assert again[0].error == "backoff"

    def test_backoff_schedule_doubles_to_cap(self, tmp_path):
        policy = RetryPolicy()
        assert [policy.delay(n) for n in (1, 2, 3, 4)] == [1.0, 2.0, 4.0, 8.0]
        assert policy.delay(20) == 300.0

    def test_http_error_counts_as_failure(self, tmp_path):
        store, stats = self.make_spooled(tmp_path)
        with CollectStub(fail_with=503) as stub:
            results = flush(store, stub.url, clock=lambda: 0.0)
        assert not results[0].delivered and results[0].status == 503
        assert store.pending() == [stats.session_id]

    def test_crash_before_ack_delivers_at_least_once(self, tmp_path):
        # The request reaches the server but the client dies before
        # processing the ack; the retry delivers again and the server
        # dedupes by session id.
        store, stats = self.make_spooled(tmp_path)
        from dansedoigts.telemetry import _http_post

        def dying_post(url, body, headers):
            _http_post(url, body, headers)
            raise ConnectionResetError("simulated crash before ack")

        with CollectStub() as stub:
            first = flush(store, stub.url, clock=lambda: 0.0, post=dying_post)
            assert not first[0].delivered
            assert store.pending() == [stats.session_id]
            second = flush(store, stub.url, clock=lambda: 10.0)
            assert second[0].delivered
            assert store.pending() == []
            assert len(stub.posts) == 2  # delivered twice
            assert len(stub.records) == 1  # but recorded once
