from __future__ import annotations

import math

import pytest

from dansedoigts.config import Circular, GameSpec, Linear, Static
from dansedoigts.rng import Pcg32
from dansedoigts.session import (
    FINGERS,
    Finger,
    TrialRecord,
    new_finger_scheduler,
    next_finger,
    progress_fraction,
    spawn_target,
    target_from_payload,
    target_hit_test,
    trajectory_position,
)
from dansedoigts.touch import Rect

PLAY = Rect(0.2, 0.1, 0.7, 0.6)


def game(radius=0.05, motion=Static(), timeout_ms=1000):
    return GameSpec("g", radius, motion, duration_s=10, timeout_ms=timeout_ms, cue="g")


class TestFingerScheduler:
    def test_every_aligned_window_is_a_permutation(self):
        sched = new_finger_scheduler(123)
        draws = []
        for _ in range(5 * 200):
            f, sched = next_finger(sched)
            draws.append(f)
        for i in range(0, len(draws), 5):
            assert set(draws[i : i + 5]) == set(FINGERS)

    def test_no_consecutive_repeats(self):
        sched = new_finger_scheduler(7)
        prev = None
        for _ in range(10_000):
            f, sched = next_finger(sched)
            assert f is not prev
            prev = f

    def test_fixed_seed_reproduces_sequence(self):
        def draw(n):
            sched = new_finger_scheduler(99)
            out = []
            for _ in range(n):
                f, sched = next_finger(sched)
                out.append(f)
            return out

        assert draw(50) == draw(50)

    def test_pure_function_of_state(self):
        sched = new_finger_scheduler(5)
        a1, s1 = next_finger(sched)
        a2, s2 = next_finger(sched)
        assert a1 == a2 and s1 == s2


class TestSpawn:
    def test_first_spawn_lands_inside_inset_area(self):
        rng = Pcg32(1)
        for _ in range(500):
            t = spawn_target(game(), PLAY, None, rng, 0, 60)
            assert PLAY.x + t.radius <= t.x <= PLAY.x + PLAY.w - t.radius
            assert PLAY.y + t.radius <= t.y <= PLAY.y + PLAY.h - t.radius

    def test_never_within_two_radii_of_previous(self):
        rng = Pcg32(2)
        g = game(radius=0.05)
        prev = None
        for _ in range(10_000):
            t = spawn_target(g, PLAY, prev, rng, 0, 60)
            if prev is not None:
                assert math.hypot(t.x - prev.x, t.y - prev.y) >= 2 * g.target_radius
            prev = t

    def test_fixed_seed_reproducible(self):
        def centers(seed):
            rng = Pcg32(seed)
            prev = None
            out = []
            for _ in range(20):
                prev = spawn_target(game(), PLAY, prev, rng, 0, 60)
                out.append((prev.x, prev.y))
            return out

        assert centers(42) == centers(42)

    def test_crowded_area_accepts_farthest_candidate(self):
        # Play area barely larger than the target: the two-radii rule cannot
        # be satisfied, so after 64 draws the farthest candidate wins.
        tiny = Rect(0.4, 0.4, 0.22, 0.22)
        g = game(radius=0.1)
        rng = Pcg32(3)
        prev = spawn_target(g, tiny, None, rng, 0, 60)
        t = spawn_target(g, tiny, prev, rng, 0, 60)
        assert tiny.x + 0.1 <= t.x <= tiny.x + 0.12

    def test_circular_spawn_keeps_whole_orbit_inside(self):
        g = game(radius=0.04, motion=Circular(0.08, 2.0))
        rng = Pcg32(4)
        for _ in range(200):
            t = spawn_target(g, PLAY, None, rng, 0, 60)
            for tick in range(0, 200, 7):
                x, y = trajectory_position(t, tick)
                assert PLAY.x + t.radius - 1e-9 <= x <= PLAY.x + PLAY.w - t.radius + 1e-9
                assert PLAY.y + t.radius - 1e-9 <= y <= PLAY.y + PLAY.h - t.radius + 1e-9


class TestTrajectory:
    def test_static_stays_put(self):
        rng = Pcg32(1)
        t = spawn_target(game(motion=Static()), PLAY, None, rng, 0, 60)
        assert trajectory_position(t, 0) == (t.x, t.y)
        assert trajectory_position(t, 12345) == (t.x, t.y)

    def test_circular_quarter_turn(self):
        # omega = pi/2 per second at 60 Hz: a quarter period is exactly 60
        # ticks, taking the disc from (cx + r, cy) to (cx, cy + r).
        g = game(radius=0.03, motion=Circular(0.05, math.pi / 2))
        rng = Pcg32(2)
        t = spawn_target(g, PLAY, None, rng, 0, 60)
        x0, y0 = trajectory_position(t, 0)
        assert (x0, y0) == pytest.approx((t.x + 0.05, t.y))
        x1, y1 = trajectory_position(t, 60)
        assert (x1, y1) == pytest.approx((t.x, t.y + 0.05))

    def test_linear_reflects_and_stays_in_bounds(self):
        g = game(radius=0.05, motion=Linear(0.37, -0.23, bounce=True))
        rng = Pcg32(3)
        t = spawn_target(g, PLAY, None, rng, 0, 60)
        lo_x, hi_x = PLAY.x + t.radius, PLAY.x + PLAY.w - t.radius
        lo_y, hi_y = PLAY.y + t.radius, PLAY.y + PLAY.h - t.radius
        for tick in range(100_000):
            x, y = trajectory_position(t, tick)
            assert lo_x - 1e-9 <= x <= hi_x + 1e-9
            assert lo_y - 1e-9 <= y <= hi_y + 1e-9

    def test_linear_without_bounce_clamps(self):
        g = game(radius=0.05, motion=Linear(0.5, 0.0, bounce=False))
        rng = Pcg32(4)
        t = spawn_target(g, PLAY, None, rng, 0, 60)
        x, y = trajectory_position(t, 10_000)
        assert x == t.bounds.x + t.bounds.w

    def test_payload_round_trip(self):
        g = game(radius=0.04, motion=Linear(0.2, 0.1))
        rng = Pcg32(5)
        t = spawn_target(g, PLAY, None, rng, 3, 60)
        payload = {"x": t.x, "y": t.y, "radius": t.radius, "motion": dict(t.motion)}
        clone = target_from_payload(payload, 3, PLAY)
        for tick in (0, 17, 250):
            assert trajectory_position(clone, tick) == trajectory_position(t, tick)


class TestHitTest:
    def make(self):
        # Exactly representable center and radius so the rim case is exact.
        from dansedoigts.session import Target

        return Target(0.5, 0.375, 0.25, {"kind": "static"}, 0, PLAY.inset(0.25))

    def test_center_hits(self):
        t = self.make()
        assert target_hit_test(t, 0, t.x, t.y)

    def test_rim_is_inside(self):
        t = self.make()
        assert target_hit_test(t, 0, t.x + 0.25, t.y)

    def test_just_outside_misses(self):
        t = self.make()
        assert not target_hit_test(t, 0, t.x + 0.25 * 1.01, t.y)


class TestProgress:
    def test_boundaries(self):
        assert progress_fraction(0, 9000) == 0.0
        assert progress_fraction(9000, 9000) == 1.0

    def test_midpoint(self):
        # 75 s of 150 s at 60 Hz.
        assert progress_fraction(4500, 9000) == 0.5

    def test_clamps(self):
        assert progress_fraction(9500, 9000) == 1.0

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError):
            progress_fraction(1, 0)


class TestTrialRecord:
    def test_payload_round_trip_hit(self):
        record = TrialRecord(
            game="rain",
            finger=Finger.INDEX.value,
            prompt_tick=10,
            crown_tap_tick=14,
            target_x=0.5,
            target_y=0.4,
            target_radius=0.05,
            motion={"kind": "static"},
            outcome_kind="hit",
            hit_tick=20,
            hit_x=0.51,
            hit_y=0.41,
            reaction_ticks=6,
            unexpected_contacts=1,
            tick_hz=60,
        )
        payload = record.to_payload()
        assert payload["outcome"]["reaction_ms"] == pytest.approx(100.0)
        assert TrialRecord.from_payload(payload) == record

    def test_payload_round_trip_timeout(self):
        record = TrialRecord(
            game="sun",
            finger=Finger.THUMB.value,
            prompt_tick=0,
            crown_tap_tick=3,
            target_x=0.3,
            target_y=0.3,
            target_radius=0.02,
            motion={"kind": "static"},
            outcome_kind="timeout",
            hit_tick=None,
            hit_x=None,
            hit_y=None,
            reaction_ticks=None,
            unexpected_contacts=0,
            tick_hz=30,
        )
        assert TrialRecord.from_payload(record.to_payload()) == record
        assert record.reaction_ms is None
