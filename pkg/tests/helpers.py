"""Shared builders for session-level tests."""

from __future__ import annotations

from dansedoigts.cli import BehaviorModel, SyntheticPlayer
from dansedoigts.config import SessionConfig, load_config
from dansedoigts.driver import SessionDriver
from dansedoigts.telemetry import SessionObserver


def short_config(
    duration_s=1.0,
    tick_hz=20,
    timeout_ms=400,
    seed=7,
    motions=None,
    **overrides,
) -> SessionConfig:
    games = []
    for i, name in enumerate(["clouds", "flakes", "sun", "rain"]):
        game = {"name": name, "duration_s": duration_s, "timeout_ms": timeout_ms}
        if motions and motions[i] is not None:
            game["motion"] = motions[i]
        games.append(game)
    doc = {
        "schema": "danse-doigts/1",
        "theme": "nature",
        "subthemes": [{"name": "sky", "games": games}],
        "trained_hand": "right",
        "tick_hz": tick_hz,
        "rng_seed": seed,
    }
    doc.update(overrides)
    return load_config(doc)


def perfect_model(seed=1, latency_ms=250) -> BehaviorModel:
    return BehaviorModel.from_json_obj(
        {"latency": {"kind": "fixed", "ms": latency_ms}, "accuracy": 1.0, "seed": seed}
    )


def model_from(obj) -> BehaviorModel:
    return BehaviorModel.from_json_obj(obj)


def synth_samples(config, model):
    """Runs the closed-loop player once and returns the recorded samples."""
    player = SyntheticPlayer(config, model)
    driver = SessionDriver(config)
    budget = config.session_ticks() * 2 + 20 * config.tick_hz + 64
    result = driver.run_live(player, max_ticks=budget, keep_reports=False)
    return result.samples, result


def replay(config, samples, observer=True, **kwargs):
    obs = SessionObserver() if observer else None
    driver = SessionDriver(
        config, observer_program=obs.program if obs else None, **kwargs
    )
    result = driver.run(samples)
    return result, obs


def emitted_at(reports, name):
    """[(instant, values tuple)] for every instant where the event fired."""
    return [(r.instant, r.emitted[name]) for r in reports if name in r.emitted]
