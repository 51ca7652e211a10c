"""Session configuration: schema `danse-doigts/1`.

A config describes a theme made of subthemes, each holding exactly four
games; one session plays the four games of the selected subtheme. Loading
validates everything up front (game count, geometry, timings) and fills
documented defaults so the rest of the system never re-checks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

from .touch import Rect, ZoneLayout

__all__ = [
    "Hand",
    "Static",
    "Linear",
    "Circular",
    "GameSpec",
    "Subtheme",
    "SessionConfig",
    "ConfigError",
    "load_config",
    "default_layout",
    "config_digest",
    "CONFIG_SCHEMA_ID",
]

CONFIG_SCHEMA_ID = "danse-doigts/1"

DEFAULT_DURATION_S = 150.0
DEFAULT_TIMEOUT_MS = 5000.0
DEFAULT_TICK_HZ = 60
DEFAULT_MIN_SIGN_SEPARATION = 0.15
# Four games per subtheme, decreasing default target sizes.
DEFAULT_TARGET_RADII = (0.06, 0.045, 0.03, 0.02)
GAMES_PER_SUBTHEME = 4


class ConfigError(ValueError):
    """Validation failure, carrying the JSON path of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class Hand(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class Static:
    def to_json_obj(self):
        return {"kind": "static"}


@dataclass(frozen=True)
class Linear:
    """Constant velocity (normalized units per second), reflecting off the
    play-area walls when bounce is set, clamping otherwise."""

    vx: float
    vy: float
    bounce: bool = True

    def to_json_obj(self):
        return {"kind": "linear", "vx": self.vx, "vy": self.vy, "bounce": self.bounce}


@dataclass(frozen=True)
class Circular:
    """Orbit of the given radius at angular_velocity rad/s. Without an
    explicit center each target orbits its own spawn point."""

    radius: float
    angular_velocity: float
    center: Optional[tuple] = None

    def to_json_obj(self):
        obj = {
            "kind": "circular",
            "radius": self.radius,
            "angular_velocity": self.angular_velocity,
        }
        if self.center is not None:
            obj["center"] = {"x": self.center[0], "y": self.center[1]}
        return obj


Motion = Union[Static, Linear, Circular]


@dataclass(frozen=True)
class GameSpec:
    name: str
    target_radius: float
    motion: Motion
    duration_s: float
    timeout_ms: float
    cue: str

    def duration_ticks(self, tick_hz: int) -> int:
        return int(round(self.duration_s * tick_hz))

    def timeout_ticks(self, tick_hz: int) -> int:
        return int(round(self.timeout_ms * tick_hz / 1000.0))

    def to_json_obj(self):
        return {
            "name": self.name,
            "target_radius": self.target_radius,
            "motion": self.motion.to_json_obj(),
            "duration_s": self.duration_s,
            "timeout_ms": self.timeout_ms,
            "cue": self.cue,
        }


@dataclass(frozen=True)
class Subtheme:
    name: str
    games: tuple

    def to_json_obj(self):
        return {"name": self.name, "games": [g.to_json_obj() for g in self.games]}


@dataclass(frozen=True)
class SessionConfig:
    theme: str
    subthemes: tuple
    subtheme: str
    trained_hand: Hand
    tick_hz: int
    rng_seed: int
    layout: ZoneLayout
    cues: dict = field(default_factory=dict)
    count_paused_play: bool = False

    def active_subtheme(self) -> Subtheme:
        for st in self.subthemes:
            if st.name == self.subtheme:
                return st
        raise KeyError(self.subtheme)

    def active_games(self) -> tuple:
        return self.active_subtheme().games

    def session_ticks(self) -> int:
        return sum(g.duration_ticks(self.tick_hz) for g in self.active_games())

    def to_json_obj(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA_ID,
            "theme": self.theme,
            "subthemes": [st.to_json_obj() for st in self.subthemes],
            "subtheme": self.subtheme,
            "trained_hand": self.trained_hand.value,
            "tick_hz": self.tick_hz,
            "rng_seed": self.rng_seed,
            "layout": self.layout.to_json_obj(),
            "assets": {"cues": self.cues},
            "count_paused_play": self.count_paused_play,
        }


def config_digest(config: SessionConfig) -> str:
    canonical = json.dumps(config.to_json_obj(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_layout(trained_hand: Hand) -> ZoneLayout:
    """Signs sit on the resting hand's side, opposite the trained hand."""
    if trained_hand is Hand.RIGHT:
        signs = (Rect(0.02, 0.10, 0.14, 0.24), Rect(0.02, 0.56, 0.14, 0.24))
        play = Rect(0.24, 0.04, 0.72, 0.58)
        crown = Rect(0.24, 0.68, 0.72, 0.28)
    else:
        signs = (Rect(0.84, 0.10, 0.14, 0.24), Rect(0.84, 0.56, 0.14, 0.24))
        play = Rect(0.04, 0.04, 0.72, 0.58)
        crown = Rect(0.04, 0.68, 0.72, 0.28)
    return ZoneLayout(
        sign_zones=signs,
        play_area=play,
        min_sign_separation=DEFAULT_MIN_SIGN_SEPARATION,
        crown_zone=crown,
    )


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _expect(obj: Any, path: str, kind: type, kind_name: str):
    if not isinstance(obj, kind) or (kind is not bool and isinstance(obj, bool) and kind in (int, float)):
        raise ConfigError(path, f"expected {kind_name}")
    return obj


def _number(obj: Any, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, "expected a number")
    return float(obj)


def _positive(value: float, path: str) -> float:
    if value <= 0:
        raise ConfigError(path, f"must be > 0, got {value}")
    return value


def _parse_rect(obj: Any, path: str) -> Rect:
    _expect(obj, path, dict, "an object {x,y,w,h}")
    vals = {}
    for key in ("x", "y", "w", "h"):
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing")
        vals[key] = _number(obj[key], f"{path}.{key}")
    try:
        return Rect(**vals)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_motion(obj: Any, path: str) -> Motion:
    if obj is None:
        return Static()
    _expect(obj, path, dict, "a motion object")
    kind = obj.get("kind", "static")
    if kind == "static":
        return Static()
    if kind == "linear":
        vx = _number(obj.get("vx", 0.0), f"{path}.vx")
        vy = _number(obj.get("vy", 0.0), f"{path}.vy")
        bounce = obj.get("bounce", True)
        _expect(bounce, f"{path}.bounce", bool, "a boolean")
        return Linear(vx, vy, bounce)
    if kind == "circular":
        radius = _positive(_number(obj.get("radius", 0.0), f"{path}.radius"), f"{path}.radius")
        omega = _number(obj.get("angular_velocity", 0.0), f"{path}.angular_velocity")
        center = None
        if "center" in obj and obj["center"] is not None:
            c = obj["center"]
            _expect(c, f"{path}.center", dict, "an object {x,y}")
            center = (_number(c.get("x"), f"{path}.center.x"), _number(c.get("y"), f"{path}.center.y"))
        return Circular(radius, omega, center)
    raise ConfigError(f"{path}.kind", f"unknown motion kind {kind!r}")


def _check_target_geometry(game: GameSpec, play: Rect, path: str) -> None:
    margin = game.target_radius
    if isinstance(game.motion, Circular):
        margin += game.motion.radius
    inset = play.inset(margin) if margin * 2 < min(play.w, play.h) else None
    if inset is None or inset.w <= 0 or inset.h <= 0:
        raise ConfigError(
            f"{path}.target_radius",
            f"target (radius {game.target_radius}"
            + (f" + orbit {game.motion.radius}" if isinstance(game.motion, Circular) else "")
            + f") does not fit inside the play area {play.w}x{play.h}",
        )
    if isinstance(game.motion, Circular) and game.motion.center is not None:
        cx, cy = game.motion.center
        reach = game.motion.radius + game.target_radius
        if not (
            play.x + reach <= cx <= play.x + play.w - reach
            and play.y + reach <= cy <= play.y + play.h - reach
        ):
            raise ConfigError(f"{path}.motion.center", "orbit leaves the play area")


def _parse_game(obj: Any, path: str, index: int, tick_hz: int, play: Rect) -> GameSpec:
    _expect(obj, path, dict, "a game object")
    name = _expect(obj.get("name"), f"{path}.name", str, "a string")
    radius = obj.get("target_radius")
    if radius is None:
        radius = DEFAULT_TARGET_RADII[index % len(DEFAULT_TARGET_RADII)]
    radius = _positive(_number(radius, f"{path}.target_radius"), f"{path}.target_radius")
    motion = _parse_motion(obj.get("motion"), f"{path}.motion")
    duration_s = _positive(
        _number(obj.get("duration_s", DEFAULT_DURATION_S), f"{path}.duration_s"),
        f"{path}.duration_s",
    )
    timeout_ms = _positive(
        _number(obj.get("timeout_ms", DEFAULT_TIMEOUT_MS), f"{path}.timeout_ms"),
        f"{path}.timeout_ms",
    )
    cue = obj.get("cue", name)
    _expect(cue, f"{path}.cue", str, "a string")
    game = GameSpec(name, radius, motion, duration_s, timeout_ms, cue)
    if game.duration_ticks(tick_hz) <= 0:
        raise ConfigError(f"{path}.duration_s", "duration shorter than one tick")
    if game.timeout_ticks(tick_hz) <= 0:
        raise ConfigError(f"{path}.timeout_ms", "timeout shorter than one tick")
    _check_target_geometry(game, play, path)
    return game


def load_config(data: Union[bytes, str, dict]) -> SessionConfig:
    """Parses and fully validates a session config document."""
    if isinstance(data, (bytes, str)):
        try:
            obj = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    else:
        obj = data
    _expect(obj, "$", dict, "a JSON object")

    schema = obj.get("schema", CONFIG_SCHEMA_ID)
    if schema != CONFIG_SCHEMA_ID:
        raise ConfigError("$.schema", f"unsupported schema {schema!r}")

    theme = _expect(obj.get("theme"), "$.theme", str, "a string")

    hand_raw = obj.get("trained_hand", "right")
    try:
        trained_hand = Hand(hand_raw)
    except ValueError:
        raise ConfigError("$.trained_hand", f"expected 'left' or 'right', got {hand_raw!r}")

    tick_hz = obj.get("tick_hz", DEFAULT_TICK_HZ)
    if isinstance(tick_hz, bool) or not isinstance(tick_hz, int) or tick_hz <= 0:
        raise ConfigError("$.tick_hz", "expected a positive integer")

    seed = obj.get("rng_seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("$.rng_seed", "expected an integer")

    if "layout" in obj and obj["layout"] is not None:
        lay_obj = obj["layout"]
        _expect(lay_obj, "$.layout", dict, "an object")
        zones = lay_obj.get("sign_zones")
        if not isinstance(zones, list) or len(zones) != 2:
            raise ConfigError("$.layout.sign_zones", "expected a list of two rectangles")
        signs = tuple(
            _parse_rect(z, f"$.layout.sign_zones[{i}]") for i, z in enumerate(zones)
        )
        play = _parse_rect(lay_obj.get("play_area"), "$.layout.play_area")
        sep = _number(
            lay_obj.get("min_sign_separation", DEFAULT_MIN_SIGN_SEPARATION),
            "$.layout.min_sign_separation",
        )
        crown = None
        if lay_obj.get("crown_zone") is not None:
            crown = _parse_rect(lay_obj["crown_zone"], "$.layout.crown_zone")
        try:
            layout = ZoneLayout(signs, play, sep, crown)
        except ValueError as exc:
            raise ConfigError("$.layout", str(exc)) from exc
    else:
        layout = default_layout(trained_hand)

    subthemes_raw = obj.get("subthemes")
    if not isinstance(subthemes_raw, list) or not subthemes_raw:
        raise ConfigError("$.subthemes", "expected a non-empty list")
    subthemes = []
    for i, st_obj in enumerate(subthemes_raw):
        st_path = f"$.subthemes[{i}]"
        _expect(st_obj, st_path, dict, "an object")
        st_name = _expect(st_obj.get("name"), f"{st_path}.name", str, "a string")
        games_raw = st_obj.get("games")
        if not isinstance(games_raw, list):
            raise ConfigError(f"{st_path}.games", "expected a list of games")
        if len(games_raw) != GAMES_PER_SUBTHEME:
            raise ConfigError(
                f"{st_path}.games",
                f"exactly {GAMES_PER_SUBTHEME} games required, got {len(games_raw)}",
            )
        games = tuple(
            _parse_game(g, f"{st_path}.games[{j}]", j, tick_hz, layout.play_area)
            for j, g in enumerate(games_raw)
        )
        names = [g.name for g in games]
        if len(set(names)) != len(names):
            raise ConfigError(f"{st_path}.games", "game names must be unique")
        subthemes.append(Subtheme(st_name, games))
    if len({st.name for st in subthemes}) != len(subthemes):
        raise ConfigError("$.subthemes", "subtheme names must be unique")

    active = obj.get("subtheme", subthemes[0].name)
    _expect(active, "$.subtheme", str, "a string")
    if active not in {st.name for st in subthemes}:
        raise ConfigError("$.subtheme", f"unknown subtheme {active!r}")

    cues = {}
    assets = obj.get("assets")
    if assets is not None:
        _expect(assets, "$.assets", dict, "an object")
        cues_obj = assets.get("cues", {})
        _expect(cues_obj, "$.assets.cues", dict, "an object")
        for cue_id, entry in cues_obj.items():
            _expect(entry, f"$.assets.cues.{cue_id}", dict, "an object")
            cues[cue_id] = {
                "image": entry.get("image", f"img/{cue_id}.png"),
                "sound": entry.get("sound", f"snd/{cue_id}.mp3"),
            }
    config = SessionConfig(
        theme=theme,
        subthemes=tuple(subthemes),
        subtheme=active,
        trained_hand=trained_hand,
        tick_hz=tick_hz,
        rng_seed=seed,
        layout=layout,
        cues=cues,
        count_paused_play=bool(obj.get("count_paused_play", False)),
    )
    # Placeholder manifest entries for cues the file did not describe.
    for st in config.subthemes:
        for g in st.games:
            if g.cue not in config.cues:
                config.cues[g.cue] = {
                    "image": f"img/{g.cue}.png",
                    "sound": f"snd/{g.cue}.mp3",
                }
    return config
