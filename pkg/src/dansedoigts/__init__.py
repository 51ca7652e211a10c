"""Danse-doigts: a deterministic synchronous-reactive runtime and, on top of
it, a fine-motor pointing game with multi-touch gating, offline telemetry,
and a headless replay harness."""

from .reactive import (
    Atom,
    Await,
    EventId,
    Generate,
    InstantReport,
    LocalEvent,
    Loop,
    Machine,
    Nothing,
    Par,
    Pause,
    Program,
    ProgramHandle,
    Repeat,
    Seq,
    Until,
    WhenPresentElse,
    make_machine,
    read_values,
)
from .config import SessionConfig, load_config
from .driver import SessionDriver
from .session import build_session_program
from .telemetry import SessionObserver, SessionStats, SpoolStore, flush

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Await",
    "EventId",
    "Generate",
    "InstantReport",
    "LocalEvent",
    "Loop",
    "Machine",
    "Nothing",
    "Par",
    "Pause",
    "Program",
    "ProgramHandle",
    "Repeat",
    "Seq",
    "Until",
    "WhenPresentElse",
    "make_machine",
    "read_values",
    "SessionConfig",
    "load_config",
    "SessionDriver",
    "build_session_program",
    "SessionObserver",
    "SessionStats",
    "SpoolStore",
    "flush",
    "__version__",
]
