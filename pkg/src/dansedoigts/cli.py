"""Headless harness: run sessions from trace files, synthesize traces from
behavior models, verify determinism, export spooled stats.

stdout carries machine-readable output only (JSON, or JSONL for traces);
diagnostics go to stderr. Exit codes: 0 ok, 1 assertion failure, 2 input
error. Every path option accepts ``-`` for stdio.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import List, Optional

from .config import ConfigError, SessionConfig, load_config
from .driver import SessionDriver
from .rng import Pcg32
from .session import (
    EV_SHOW_CROWN,
    EV_SHOW_TARGET,
    target_from_payload,
    target_hit_test,
    trajectory_position,
)
from .telemetry import (
    COLLECT_URL_ENV,
    SessionObserver,
    SessionStats,
    SpoolStore,
    flush,
)
from .touch import Phase, TouchSample, TraceError, read_trace, write_trace

__all__ = ["main", "BehaviorModel", "SyntheticPlayer", "ModelError"]

RUN_SCHEMA_ID = "danse-doigts/run@1"
VERIFY_SCHEMA_ID = "danse-doigts/verify@1"
EXPORT_SCHEMA_ID = "danse-doigts/export@1"


class ModelError(ValueError):
    """Invalid behavior-model document."""


@dataclass(frozen=True)
class BehaviorModel:
    """A synthetic player: reaction latency, accuracy, and hold reliability."""

    latency_kind: str  # "fixed" | "uniform"
    latency_ms: float
    latency_min_ms: float
    latency_max_ms: float
    accuracy: float
    miss_scatter_radius: float
    drop_rate_per_min: float
    drop_duration_ms: float
    seed: int

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BehaviorModel":
        if not isinstance(obj, dict):
            raise ModelError("model: expected a JSON object")
        latency = obj.get("latency", {"kind": "fixed", "ms": 300})
        if not isinstance(latency, dict):
            raise ModelError("model.latency: expected an object")
        kind = latency.get("kind", "fixed")
        if kind == "fixed":
            ms = float(latency.get("ms", 300))
            lo = hi = ms
        elif kind == "uniform":
            lo = float(latency.get("min_ms", 200))
            hi = float(latency.get("max_ms", 600))
            ms = (lo + hi) / 2
            if lo > hi:
                raise ModelError("model.latency: min_ms > max_ms")
        else:
            raise ModelError(f"model.latency.kind: unknown kind {kind!r}")
        if min(lo, hi) < 0:
            raise ModelError("model.latency: latencies must be >= 0")
        accuracy = float(obj.get("accuracy", 1.0))
        if not 0.0 <= accuracy <= 1.0:
            raise ModelError("model.accuracy: must be within [0,1]")
        drop_rate = float(obj.get("drop_rate_per_min", 0.0))
        if drop_rate < 0:
            raise ModelError("model.drop_rate_per_min: must be >= 0")
        return cls(
            latency_kind=kind,
            latency_ms=ms,
            latency_min_ms=lo,
            latency_max_ms=hi,
            accuracy=accuracy,
            miss_scatter_radius=float(obj.get("miss_scatter_radius", 0.08)),
            drop_rate_per_min=drop_rate,
            drop_duration_ms=float(obj.get("drop_duration_ms", 800)),
            seed=int(obj.get("seed", 0)),
        )


class SyntheticPlayer:
    """Closed-loop simulated child: holds the stop signs, taps the crown,
    then taps (or misses) the target after a sampled latency; occasionally
    drops a sign finger. Fully determined by the model seed."""

    def __init__(self, config: SessionConfig, model: BehaviorModel):
        self.config = config
        self.model = model
        self.rng = Pcg32(model.seed, stream=7)
        self.tick_hz = config.tick_hz
        self.ms_per_tick = 1000.0 / config.tick_hz
        self.pending: dict = {}
        self.next_pointer = 2
        self.dropped_until: Optional[int] = None
        signs = config.layout.ordered_signs()
        self.sign_positions = (signs[0].center(), signs[1].center())
        self._schedule(0, 0, Phase.DOWN, *self.sign_positions[0])
        self._schedule(0, 1, Phase.DOWN, *self.sign_positions[1])

    def _schedule(self, tick: int, pid: int, phase: Phase, x: float, y: float) -> None:
        x = min(1.0, max(0.0, x))
        y = min(1.0, max(0.0, y))
        self.pending.setdefault(tick, []).append(
            TouchSample(tick * self.ms_per_tick, pid, phase, x, y)
        )

    def _latency_ticks(self) -> int:
        if self.model.latency_kind == "fixed":
            ms = self.model.latency_ms
        else:
            ms = self.rng.uniform(self.model.latency_min_ms, self.model.latency_max_ms)
        return max(1, int(round(ms / self.ms_per_tick)))

    def _tap(self, tick: int, x: float, y: float) -> None:
        pid = self.next_pointer
        self.next_pointer += 1
        self._schedule(tick, pid, Phase.DOWN, x, y)
        self._schedule(tick + 1, pid, Phase.UP, x, y)

    def _miss_point(self, target, t_ticks: float):
        cx, cy = trajectory_position(target, t_ticks)
        play = self.config.layout.play_area
        for _ in range(8):
            angle = self.rng.uniform(0.0, 2.0 * math.pi)
            dist = target.radius * 1.5 + self.rng.uniform(0.0, self.model.miss_scatter_radius)
            x = min(play.x + play.w, max(play.x, cx + dist * math.cos(angle)))
            y = min(play.y + play.h, max(play.y, cy + dist * math.sin(angle)))
            if not target_hit_test(target, t_ticks, x, y):
                return (x, y)
        return (play.x, play.y)  # degenerate layouts: give up and touch a corner

    def samples_for_tick(self, tick: int) -> List[TouchSample]:
        if self.model.drop_rate_per_min > 0 and self.dropped_until is None:
            per_tick = self.model.drop_rate_per_min / (60.0 * self.tick_hz)
            if self.rng.random() < per_tick:
                duration = max(1, int(round(self.model.drop_duration_ms / self.ms_per_tick)))
                self._schedule(tick, 1, Phase.UP, *self.sign_positions[1])
                self._schedule(tick + duration, 1, Phase.DOWN, *self.sign_positions[1])
                self.dropped_until = tick + duration
        if self.dropped_until is not None and tick >= self.dropped_until:
            self.dropped_until = None
        return self.pending.pop(tick, [])

    def observe(self, report) -> None:
        tick = report.instant
        if EV_SHOW_CROWN in report.emitted and self.config.layout.crown_zone:
            cx, cy = self.config.layout.crown_zone.center()
            self._tap(tick + self._latency_ticks(), cx, cy)
        if EV_SHOW_TARGET in report.emitted:
            payload = report.emitted[EV_SHOW_TARGET][0]
            target = target_from_payload(payload, tick, self.config.layout.play_area)
            tap_tick = tick + self._latency_ticks()
            if self.rng.random() < self.model.accuracy:
                x, y = trajectory_position(target, tap_tick - tick)
            else:
                x, y = self._miss_point(target, tap_tick - tick)
            self._tap(tap_tick, x, y)


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fp:
        return fp.read()


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _load_config_arg(path: str) -> SessionConfig:
    return load_config(_read_text(path))


def _load_trace_arg(path: str) -> list:
    import io

    return read_trace(io.StringIO(_read_text(path)))


def _print_json(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def _run_once(
    config: SessionConfig,
    samples: list,
    with_observer: bool = True,
    trace_sink=None,
    keep_lines: bool = False,
):
    observer = SessionObserver() if with_observer else None
    driver = SessionDriver(
        config,
        observer_program=observer.program if observer else None,
        trace_sink=trace_sink,
    )
    lines: List[str] = []
    on_report = (lambda r: lines.append(r.canonical_line())) if keep_lines else None
    result = driver.run(samples, keep_reports=False, on_report=on_report)
    return result, observer, lines


def cmd_run(args) -> int:
    config = _load_config_arg(args.config)
    samples = _load_trace_arg(args.trace)
    sink = None
    if args.instants:
        sink = _open_out(args.instants)
    try:
        result, observer, _ = _run_once(config, samples, trace_sink=sink)
    finally:
        if sink is not None and sink is not sys.stdout:
            sink.close()
    stats = SessionStats.collect(observer, config, result.digest)
    if args.spool:
        store = SpoolStore(args.spool)
        store.spool(stats)
        collect_url = args.collect or os.environ.get(COLLECT_URL_ENV)
        if collect_url:
            flush(store, collect_url)
    _print_json(
        {
            "schema": RUN_SCHEMA_ID,
            "session_id": stats.session_id,
            "completed": result.completed,
            "digest": result.digest,
            "instants": result.ticks_run,
            "stats": stats.to_json_obj(),
        }
    )
    return 0


def cmd_synth(args) -> int:
    config = _load_config_arg(args.config)
    try:
        model_obj = json.loads(_read_text(args.model))
    except json.JSONDecodeError as exc:
        raise ModelError(f"model: invalid JSON: {exc.msg}") from exc
    model = BehaviorModel.from_json_obj(model_obj)
    player = SyntheticPlayer(config, model)
    driver = SessionDriver(config)
    budget = config.session_ticks() * 2 + 20 * config.tick_hz + 64
    result = driver.run_live(player, max_ticks=budget, keep_reports=False)
    out = _open_out(args.out)
    try:
        write_trace(result.samples, out)
    finally:
        if out is not sys.stdout:
            out.close()
    if not result.completed:
        sys.stderr.write("synth: session did not complete within budget\n")
    return 0


def cmd_verify(args) -> int:
    if args.runs < 2:
        sys.stderr.write("verify: --runs must be >= 2\n")
        return 2
    config = _load_config_arg(args.config)
    samples = _load_trace_arg(args.trace)
    digests = []
    all_lines = []
    for i in range(args.runs):
        # Alternate observer attachment: it must not change anything.
        result, _, lines = _run_once(
            config, samples, with_observer=(i % 2 == 0), keep_lines=True
        )
        digests.append(result.digest)
        all_lines.append(lines)
    if len(set(digests)) == 1:
        _print_json(
            {
                "schema": VERIFY_SCHEMA_ID,
                "ok": True,
                "runs": args.runs,
                "digest": digests[0],
            }
        )
        return 0
    baseline = all_lines[0]
    divergent_run = next(i for i, d in enumerate(digests) if d != digests[0])
    other = all_lines[divergent_run]
    first = next(
        (
            idx
            for idx, (a, b) in enumerate(zip(baseline, other))
            if a != b
        ),
        min(len(baseline), len(other)),
    )
    sys.stderr.write(
        f"verify: divergence at instant {first} between run 0 and run {divergent_run}\n"
    )
    if first < len(baseline):
        sys.stderr.write(f"  run 0: {baseline[first]}\n")
    if first < len(other):
        sys.stderr.write(f"  run {divergent_run}: {other[first]}\n")
    _print_json(
        {
            "schema": VERIFY_SCHEMA_ID,
            "ok": False,
            "runs": args.runs,
            "first_divergent_instant": first,
        }
    )
    return 1


def cmd_export(args) -> int:
    store = SpoolStore(args.spool)
    payloads = [store.load(sid) for sid in store.pending()]
    out = _open_out(args.out)
    try:
        out.write(
            json.dumps(
                {"schema": EXPORT_SCHEMA_ID, "payloads": payloads},
                sort_keys=True,
                separators=(",", ":"),
            )
            + "\n"
        )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dansedoigts",
        description="Headless session runner and replay harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="replay a touch trace through a session")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--trace", required=True)
    p_run.add_argument("--collect", help="collect endpoint URL (overridden by $%s)" % COLLECT_URL_ENV)
    p_run.add_argument("--spool", help="spool directory for the session stats")
    p_run.add_argument("--instants", help="write per-instant JSONL to this file")
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="synthesize a trace from a behavior model")
    p_synth.add_argument("--config", required=True)
    p_synth.add_argument("--model", required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_verify = sub.add_parser("verify", help="check replay determinism")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--trace", required=True)
    p_verify.add_argument("--runs", type=int, default=3)
    p_verify.set_defaults(func=cmd_verify)

    p_export = sub.add_parser("export", help="dump pending spool payloads")
    p_export.add_argument("--spool", required=True)
    p_export.add_argument("--out", default="-")
    p_export.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TraceError as exc:
        sys.stderr.write(f"trace error: {exc}\n")
        return 2
    except (ConfigError, ModelError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except FileNotFoundError as exc:
        sys.stderr.write(f"file not found: {exc.filename}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
