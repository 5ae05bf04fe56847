"""Reference Turing machine: data model, validator, interpreter, random instances.

The machine model used throughout the package:

* ``states[0]`` is always the absorbing halting state (the "dead" state).
  Once entered, every rule is the fixed point ``(symbol, halt, stay)``.
* ``symbols[0]`` is always the blank.
* Rules map ``(symbol, state) -> (write, next_state, move)`` and must cover
  every symbol for every non-final working state.  Missing rows for final
  states are filled with an absorbing drop into the halting state so that
  stepping past a final is indistinguishable from halting.
* Tape cells are indexed from 1.  The tape grows with blanks when the head
  walks off either end; growing left re-indexes cells (the trace records the
  accumulated offset), and a configurable cap raises :class:`TapeOverflow`.

Everything here is immutable after construction and safe to share between
workers.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

from .errors import AlphabetError, HeadUnderflow, TapeOverflow

HALT = 0          # index of the halting state in every state enumeration
BLANK = 0         # index of the blank in every symbol enumeration
DEFAULT_TAPE_CAP = 256

Rule = tuple[int, int, int]  # (write symbol, next state, move in {-1, 0, +1})


@dataclass(frozen=True)
class TmSpec:
    """A Turing machine as data.

    ``rules`` is keyed by ``(symbol index, state index)`` and is total over
    the alphabet times all states after normalization (see :func:`make_spec`).
    """

    states: tuple[str, ...]
    symbols: tuple[str, ...]
    input_alphabet: tuple[int, ...]
    start: int
    finals: frozenset[int]
    rules: dict[tuple[int, int], Rule] = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    def rule(self, symbol: int, state: int) -> Rule:
        return self.rules[(symbol, state)]

    def state_index(self, name: str) -> int:
        return self.states.index(name)

    def symbol_index(self, name: str) -> int:
        return self.symbols.index(name)

    def canonical_bytes(self) -> bytes:
        """Canonical serialization: sorted rule rows, compact JSON."""
        return json.dumps(spec_to_dict(self), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")

    def spec_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()


@dataclass(frozen=True)
class Configuration:
    """One machine instant: tape contents, controller state, head position.

    ``tape`` holds symbol indices, ``head`` is 1-based and always points at
    an existing cell, ``step`` counts applied transitions.
    """

    tape: tuple[int, ...]
    state: int
    head: int
    step: int = 0

    def __post_init__(self):
        if not 1 <= self.head <= len(self.tape):
            raise ValueError(f"head {self.head} outside tape of length {len(self.tape)}")


@dataclass(frozen=True)
class TmTrace:
    spec_hash: str
    configs: tuple[Configuration, ...]
    halt_reason: str                    # reached-final | entered-q0 | step-budget | tape-overflow
    offsets: tuple[int, ...] = ()       # cumulative left-growth re-index at each step

    @property
    def steps(self) -> int:
        return len(self.configs) - 1


def make_spec(states, symbols, rules, start, finals=(), input_alphabet=None) -> TmSpec:
    """Build a TmSpec from names, normalizing the rule table.

    ``rules`` rows are ``(state, symbol, next_state, write_symbol, move)`` in
    names.  Rows for the halting state are forced to the fixed point; missing
    rows for final states become absorbing drops into the halting state.
    Structural problems (unknown names, duplicate rows) raise ``ValueError``;
    semantic violations are left for :func:`validate_spec` to report.
    """
    states = tuple(states)
    symbols = tuple(symbols)
    s_idx = {name: i for i, name in enumerate(states)}
    y_idx = {name: i for i, name in enumerate(symbols)}
    if len(s_idx) != len(states):
        raise ValueError("duplicate state names")
    if len(y_idx) != len(symbols):
        raise ValueError("duplicate symbol names")

    table: dict[tuple[int, int], Rule] = {}
    for state, symbol, nxt, write, move in rules:
        key = (y_idx[symbol], s_idx[state])
        if key in table:
            raise ValueError(f"duplicate rule for ({symbol!r}, {state!r})")
        table[key] = (y_idx[write], s_idx[nxt], int(move))

    final_idx = frozenset(s_idx[f] for f in finals)
    for j in range(len(symbols)):
        table[(j, HALT)] = (j, HALT, 0)         # halting fixed point
        for k in final_idx:
            table.setdefault((j, k), (j, HALT, 0))  # absorb past finals

    if input_alphabet is None:
        input_idx = tuple(range(1, len(symbols)))   # everything but blank
    else:
        input_idx = tuple(y_idx[s] for s in input_alphabet)

    return TmSpec(states=states, symbols=symbols, input_alphabet=input_idx,
                  start=s_idx[start], finals=final_idx, rules=table)


def validate_spec(spec: TmSpec) -> list[str]:
    """Return every violated invariant; an empty report means well-formed."""
    report = []
    n, m = spec.n_states, spec.n_symbols
    if n < 1:
        report.append("no states")
    if m < 1:
        report.append("no symbols")
    if not 0 <= spec.start < n:
        report.append("start state unknown")
    elif spec.start == HALT:
        report.append("start state is the halting state")
    if not all(0 <= k < n for k in spec.finals):
        report.append("final state unknown")
    if HALT in spec.finals:
        report.append("halting state listed as final")
    if not all(0 < j < m for j in spec.input_alphabet):
        report.append("input alphabet escapes the tape alphabet or includes blank")

    missing = [(j, k) for j in range(m) for k in range(n) if (j, k) not in spec.rules]
    if missing:
        report.append(f"rules not total: {len(missing)} missing rows")
    for (j, k), (write, nxt, move) in sorted(spec.rules.items()):
        if not (0 <= write < m and 0 <= nxt < n):
            report.append(f"rule ({j},{k}) targets unknown symbol or state")
            continue
        if move not in (-1, 0, 1):
            report.append(f"rule ({j},{k}) has move {move}")
        elif move == 0 and nxt != HALT:
            report.append(f"move 0 outside q0 rules: ({j},{k})")
        if k == HALT and (write, nxt, move) != (j, HALT, 0):
            report.append(f"halting row ({j},{k}) is not the fixed point")
    return report


def initial_configuration(spec: TmSpec, input_symbols: list[int] | tuple[int, ...]) -> Configuration:
    """Input on the tape starting at cell 1, head on cell 1, start state."""
    bad = [j for j in input_symbols if j not in spec.input_alphabet]
    if bad:
        raise AlphabetError(f"input symbols outside the input alphabet: {bad}")
    tape = tuple(input_symbols) if input_symbols else (BLANK,)
    return Configuration(tape=tape, state=spec.start, head=1, step=0)


def _apply_rule(spec: TmSpec, c: Configuration, l_max: int,
                grow_left: bool) -> tuple[Configuration, int]:
    """One transition; returns the new configuration and the left re-index shift."""
    write, nxt, move = spec.rule(c.tape[c.head - 1], c.state)
    tape = list(c.tape)
    tape[c.head - 1] = write
    head = c.head + move
    shift = 0
    if head < 1:
        if not grow_left:
            raise HeadUnderflow(f"head would reach cell {head} at step {c.step}")
        tape.insert(0, BLANK)
        head = 1
        shift = 1
    elif head > len(tape):
        tape.append(BLANK)
    if len(tape) > l_max:
        raise TapeOverflow(f"tape needs {len(tape)} cells, cap is {l_max}")
    return Configuration(tape=tuple(tape), state=nxt, head=head, step=c.step + 1), shift


def tm_step(spec: TmSpec, c: Configuration, l_max: int = DEFAULT_TAPE_CAP,
            grow_left: bool = True) -> Configuration:
    """Apply the unique rule for (symbol under head, state).

    In the halting state this is the identity apart from the step counter.
    """
    return _apply_rule(spec, c, l_max, grow_left)[0]


def tm_run(spec: TmSpec, input_symbols, max_steps: int,
           l_max: int = DEFAULT_TAPE_CAP, grow_left: bool = True) -> TmTrace:
    """Run from the initial configuration until final state, q0, or budget."""
    c = initial_configuration(spec, input_symbols)
    configs = [c]
    offsets = [0]
    reason = "step-budget"
    while True:
        if c.state in spec.finals:
            reason = "reached-final"
            break
        if c.state == HALT:
            reason = "entered-q0"
            break
        if c.step - configs[0].step >= max_steps:
            break
        try:
            c, shift = _apply_rule(spec, c, l_max, grow_left)
        except TapeOverflow:
            reason = "tape-overflow"
            break
        configs.append(c)
        offsets.append(offsets[-1] + shift)
    return TmTrace(spec_hash=spec.spec_hash(), configs=tuple(configs),
                   halt_reason=reason, offsets=tuple(offsets))


def random_tm(seed: int, n_states: int, n_symbols: int,
              halt_fraction: float = 0.3, final_fraction: float = 0.1) -> TmSpec:
    """Deterministic random machine with `n_states` working states.

    Every generated rule moves left or right; `halt_fraction` of rules drop
    into the halting state so random runs keep enough halting mass to stay
    on a bounded tape.  On top of the per-rule fraction, any cycle in the
    blank-rule successor graph is broken toward the halting state: a machine
    marching over fresh tape then always halts within one pass through its
    states, which is what keeps long random runs inside a finite cell cap.
    """
    if n_states < 1 or n_symbols < 1:
        raise ValueError("need at least one working state and one symbol")
    rng = random.Random(seed)
    states = ["q0"] + [f"q{i}" for i in range(1, n_states + 1)]
    symbols = ["b"] + [f"s{i}" for i in range(1, n_symbols)]
    finals = [s for s in states[2:] if rng.random() < final_fraction]
    table = {}
    for state in states[1:]:
        if state in finals:
            continue                      # finals absorb; no outgoing rules
        for symbol in symbols:
            write = rng.choice(symbols)
            if rng.random() < halt_fraction:
                nxt = "q0"
            else:
                nxt = rng.choice(states[1:])
            move = rng.choice((-1, 1))
            table[(state, symbol)] = (nxt, write, move)

    # break blank-successor cycles that reach neither q0 nor a final
    blank = symbols[0]
    stopping = set(finals) | {"q0"}
    color = {}
    for state in states[1:]:
        if state in stopping or color.get(state) == "done":
            continue
        path = []
        cur = state
        while cur not in stopping and color.get(cur) != "done":
            if color.get(cur) == "open":          # found a fresh cycle
                cycle = path[path.index(cur):]
                victim = min(cycle)
                nxt, write, move = table[(victim, blank)]
                table[(victim, blank)] = ("q0", write, move)
                break
            color[cur] = "open"
            path.append(cur)
            cur = table[(cur, blank)][0]
        for visited in path:
            color[visited] = "done"

    rows = [(state, symbol, nxt, write, move)
            for (state, symbol), (nxt, write, move) in table.items()]
    start = rng.choice([s for s in states[1:] if s not in finals] or states[1:2])
    return make_spec(states, symbols, rows, start=start, finals=finals)


def random_input(rng: random.Random, spec: TmSpec, max_len: int) -> tuple[int, ...]:
    """Random word over the input alphabet, possibly empty."""
    if not spec.input_alphabet:
        return ()
    length = rng.randint(0, max_len)
    return tuple(rng.choice(spec.input_alphabet) for _ in range(length))


# -- JSON interchange ---------------------------------------------------------

def spec_to_dict(spec: TmSpec) -> dict:
    rows = sorted(
        [spec.states[k], spec.symbols[j], spec.states[nxt], spec.symbols[w], mv]
        for (j, k), (w, nxt, mv) in spec.rules.items()
    )
    return {
        "states": list(spec.states),
        "symbols": list(spec.symbols),
        "blank": spec.symbols[BLANK],
        "start": spec.states[spec.start],
        "finals": sorted(spec.states[k] for k in spec.finals),
        "rules": rows,
    }


def spec_from_dict(data: dict) -> TmSpec:
    states = list(data["states"])
    symbols = list(data["symbols"])
    if symbols and data.get("blank", symbols[0]) != symbols[0]:
        raise ValueError("blank must be the first symbol")
    rows = [tuple(r) for r in data["rules"]]
    # normalization re-adds the forced rows, so drop them from the input
    rows = [r for r in rows if r[0] != states[0] or (r[2], r[3], r[4]) != (states[0], r[1], 0)]
    return make_spec(states, symbols, rows, start=data["start"],
                     finals=data.get("finals", ()),
                     input_alphabet=data.get("input_alphabet"))


def load_spec(path) -> TmSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def save_spec(spec: TmSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def flip_machine() -> TmSpec:
    """Three-rule workhorse: flips bits rightward, accepts on the first blank."""
    return make_spec(
        states=["q0", "q1", "qf"],
        symbols=["b", "0", "1"],
        rules=[
            ("q1", "0", "q1", "1", 1),
            ("q1", "1", "q1", "0", 1),
            ("q1", "b", "qf", "b", 1),
        ],
        start="q1",
        finals=["qf"],
    )
