"""Seeded random program generator for engine property suites.

Generated programs are well formed by construction: loop bodies always pass
through a Pause, atoms are pure recorders, and every event comes from a
small shared pool, so any two runs of the same (program, injection
schedule) must produce identical instant traces.
"""

from __future__ import annotations

from dansedoigts.reactive import (
    Atom,
    Await,
    Generate,
    LocalEvent,
    Loop,
    Nothing,
    Par,
    Pause,
    Repeat,
    Seq,
    Until,
    WhenPresentElse,
)
from dansedoigts.rng import Pcg32

EVENT_POOL = tuple(f"e{i}" for i in range(6))


def _leaf(rng, recorders):
    roll = rng.randrange(10)
    if roll < 3:
        return Generate(EVENT_POOL[rng.randrange(len(EVENT_POOL))], rng.randrange(100))
    if roll < 5:
        return Generate(EVENT_POOL[rng.randrange(len(EVENT_POOL))])
    if roll < 7:
        return Pause()
    if roll < 8:
        return Nothing()
    if roll < 9:
        return Await(EVENT_POOL[rng.randrange(len(EVENT_POOL))])
    if recorders is None:
        return Nothing()
    event = EVENT_POOL[rng.randrange(len(EVENT_POOL))]

    def record(env, _event=event):
        vals = env.values(_event)
        recorders.append((env.instant, _event, vals))

    return Atom(record)


def random_program(rng: Pcg32, depth: int = 3, recorders=None):
    """One random combinator tree; `recorders` collects atom observations."""
    if depth <= 0:
        return _leaf(rng, recorders)
    roll = rng.randrange(12)
    child = lambda: random_program(rng, depth - 1, recorders)  # noqa: E731
    if roll < 4:
        return Seq(*[child() for _ in range(2 + rng.randrange(2))])
    if roll < 7:
        return Par(*[child() for _ in range(2 + rng.randrange(2))])
    if roll < 8:
        # A pause inside the loop body keeps it non-instantaneous.
        return Loop(Seq(child(), Pause()))
    if roll < 9:
        return Repeat(rng.randrange(4), child())
    if roll < 10:
        event = EVENT_POOL[rng.randrange(len(EVENT_POOL))]
        return WhenPresentElse(event, child(), child())
    if roll < 11:
        event = EVENT_POOL[rng.randrange(len(EVENT_POOL))]
        return Until(event, child(), child())
    return LocalEvent(f"l{rng.randrange(3)}", child())


def random_injections(rng: Pcg32, instants: int, per_instant: int = 2):
    """{instant: [(event, value), ...]} schedule over the shared pool."""
    schedule = {}
    for i in range(instants):
        n = rng.randrange(per_instant + 1)
        if n:
            schedule[i] = [
                (EVENT_POOL[rng.randrange(len(EVENT_POOL))], rng.randrange(100))
                for _ in range(n)
            ]
    return schedule


def run_generated(program_seed: int, instants: int, recorders=None, programs=2):
    """Builds a fresh machine from the seed and reacts `instants` times.
    Returns the list of canonical report lines."""
    from dansedoigts.reactive import make_machine

    rng = Pcg32(program_seed)
    machine = make_machine()
    for name in EVENT_POOL:
        machine.event(name)
    for _ in range(programs):
        machine.add_program(random_program(rng, depth=3, recorders=recorders))
    schedule = random_injections(rng, instants)
    lines = []
    for i in range(instants):
        for event, value in schedule.get(i, ()):
            machine.inject(event, value)
        lines.append(machine.react().canonical_line())
    return lines
