"""Rule compiler: machine configurations <-> characteristic state tensors,
transition tables -> binary action tensors.

Encoding convention
-------------------
A configuration with tape ``t``, controller state ``q`` and head cell ``h``
becomes a rank-4 binary tensor over axes ``(cell i, symbol j, state k,
head l)`` with exactly one entry per tape cell:

* the head cell carries the controller state:  ``(h, t[h], q, h) = 1``
* every other cell carries only local content:  ``(i, t[i], 0, h) = 1``

State index 0 is the absorbing halting state, so passive cells "borrow" it
to mean "state unknown here".  A halted machine therefore has no ``k != 0``
entry at all; its head cell is still identifiable as the unique entry with
``i == l``.  Decoding reads the controller state and head from the ``k != 0``
entry when one exists and falls back to the ``i == l`` rule otherwise.

Action tensor
-------------
The full rank-8 action tensor has a 1 at ``(i,j,k,l) -> (i',j',k',l')``
exactly when one of two conditions holds:

* passive:  ``i != l``, ``k != 0``  ->  ``(i, j, 0, l)``  (stale controller
  marks vanish, content is kept), or
* active:   ``i == l``  ->  ``(i, d1(j,k), d2(j,k), l + d3(j,k))`` where
  ``(d1, d2, d3)`` are the write/next-state/move projections of the rule
  table (omitted when the moved head would leave the cell range).

Each source pattern has at most one target, so the tensor is the graph of a
partial function.  For the factored product the compiler also exposes a
*local* factor over ``(i', j')`` targets and a *global* factor over
``(k', l')`` targets.  The local factor additionally copies passive cells
whose ``k`` is 0 - freshly encoded configurations keep their state-0 passive
entries only through this copy rule, which the strict rank-8 form cannot
express (its passive condition requires a nonzero source state).

Programs are immutable; ``flip_entry`` returns a variant with one action
entry toggled, used by mutation testing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import IllegalState, TapeOverflow
from .machine import HALT, Configuration, TmSpec, validate_spec
from .tensor import EXACT, MultiIndexTensor

StateTensor = MultiIndexTensor
Src = tuple[int, int, int, int]
Out = tuple[int, int, int, int]


@dataclass(frozen=True)
class NstmProgram:
    """Compiled transition table plus dimension metadata.

    ``kernel`` maps ``(symbol j, state k)`` to ``(write, next, move)`` and
    fully determines the action tensor families; ``overlay`` carries
    per-source target replacements created by :meth:`flip_entry`.
    """

    spec_hash: str
    l_max: int
    n_symbols: int
    n_states: int
    kernel: dict[tuple[int, int], tuple[int, int, int]] = field(repr=False)
    start: int = 1
    finals: frozenset[int] = frozenset()
    state_names: tuple[str, ...] = ()
    symbol_names: tuple[str, ...] = ()
    overlay: dict[Src, frozenset[Out]] = field(default_factory=dict, repr=False)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.l_max, self.n_symbols, self.n_states, self.l_max)

    # -- action tensor views --------------------------------------------------

    def default_targets(self, src: Src) -> tuple[Out, ...]:
        """Targets of the rank-8 action tensor for one source pattern."""
        i, j, k, l = src
        if i == l:
            write, nxt, move = self.kernel[(j, k)]
            l2 = l + move
            if 0 <= l2 < self.l_max:
                return ((i, write, nxt, l2),)
            return ()
        if k != HALT:
            return ((i, j, HALT, l),)
        return ()

    def source_targets(self, src: Src) -> tuple[Out, ...]:
        hit = self.overlay.get(src)
        if hit is not None:
            return tuple(sorted(hit))
        return self.default_targets(src)

    def flat_targets(self, src: Src) -> tuple[Out, ...]:
        """Targets for the flat (single-contraction) step: the rank-8 tensor
        plus the state-0 copy rows shared with the local factor."""
        i, j, k, l = src
        if src not in self.overlay and i != l and k == HALT:
            return ((i, j, HALT, l),)
        return self.source_targets(src)

    def flip_entry(self, src: Src, out: Out) -> "NstmProgram":
        """Toggle one action-tensor entry (symmetric difference on targets)."""
        current = set(self.source_targets(src))
        current ^= {out}
        overlay = dict(self.overlay)
        overlay[src] = frozenset(current)
        return NstmProgram(
            spec_hash=self.spec_hash, l_max=self.l_max,
            n_symbols=self.n_symbols, n_states=self.n_states,
            kernel=self.kernel, start=self.start, finals=self.finals,
            state_names=self.state_names, symbol_names=self.symbol_names,
            overlay=overlay)

    def encode(self, c: Configuration) -> StateTensor:
        return _encode(c, self.dims)

    def iter_sources(self):
        for i in range(self.l_max):
            for j in range(self.n_symbols):
                for k in range(self.n_states):
                    for l in range(self.l_max):
                        yield (i, j, k, l)

    def iter_action_entries(self):
        """Every 1-entry of the rank-8 action tensor (bounded enumeration)."""
        for src in self.iter_sources():
            for out in self.source_targets(src):
                yield src, out

    def action_full_tensor(self) -> MultiIndexTensor:
        entries = {src + out: 1 for src, out in self.iter_action_entries()}
        return MultiIndexTensor(dims=self.dims + self.dims, entries=entries)

    def action_local_tensor(self) -> MultiIndexTensor:
        """Factor over ``(i', j')`` targets, including the state-0 copy rule."""
        entries = {}
        for src in self.iter_sources():
            i, j, k, l = src
            if src in self.overlay or i == l:
                for out in self.source_targets(src):
                    entries[src + out[:2]] = 1
            else:
                entries[src + (i, j)] = 1
        dims = self.dims + (self.l_max, self.n_symbols)
        return MultiIndexTensor(dims=dims, entries=entries)

    def action_global_tensor(self) -> MultiIndexTensor:
        """Factor over ``(k', l')`` targets; only head cells contribute."""
        entries = {}
        for src in self.iter_sources():
            i, j, k, l = src
            if src in self.overlay or i == l:
                for out in self.source_targets(src):
                    entries[src + out[2:]] = 1
        dims = self.dims + (self.n_states, self.l_max)
        return MultiIndexTensor(dims=dims, entries=entries)

    # -- identity --------------------------------------------------------------

    def canonical_dict(self) -> dict:
        return {
            "spec_hash": self.spec_hash,
            "l_max": self.l_max,
            "n_symbols": self.n_symbols,
            "n_states": self.n_states,
            "kernel": sorted([j, k, w, n, m] for (j, k), (w, n, m) in self.kernel.items()),
            "start": self.start,
            "finals": sorted(self.finals),
            "state_names": list(self.state_names),
            "symbol_names": list(self.symbol_names),
            "overlay": sorted(
                [list(src), sorted(list(o) for o in outs)]
                for src, outs in self.overlay.items()),
        }

    def program_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def compile_tm(spec: TmSpec, l_max: int) -> NstmProgram:
    """Compile a validated machine into its action-tensor program.

    Rules whose move could run past ``l_max`` at runtime are not a compile
    error; the corresponding boundary entries are simply absent.
    """
    report = validate_spec(spec)
    if report:
        raise ValueError("cannot compile an invalid machine: " + "; ".join(report))
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    kernel = {(j, k): rule for (j, k), rule in spec.rules.items()}
    return NstmProgram(
        spec_hash=spec.spec_hash(), l_max=l_max,
        n_symbols=spec.n_symbols, n_states=spec.n_states,
        kernel=kernel, start=spec.start, finals=spec.finals,
        state_names=spec.states, symbol_names=spec.symbols)


def _encode(c: Configuration, dims: tuple[int, int, int, int]) -> StateTensor:
    l_max = dims[0]
    if len(c.tape) > l_max or c.head > l_max:
        raise TapeOverflow(f"tape of {len(c.tape)} cells with head {c.head} "
                           f"does not fit {l_max} cells")
    h = c.head - 1
    entries = {}
    for cell, symbol in enumerate(c.tape):
        if cell == h:
            entries[(cell, symbol, c.state, h)] = 1
        else:
            entries[(cell, symbol, HALT, h)] = 1
    return MultiIndexTensor(dims=dims, entries=entries, value_kind=EXACT)


def encode_config(spec: TmSpec, c: Configuration, l_max: int) -> StateTensor:
    """Characteristic tensor of a configuration (cells re-based to 0)."""
    return _encode(c, (l_max, spec.n_symbols, spec.n_states, l_max))


def decode_state(st: StateTensor, step: int = 0) -> Configuration:
    """Read a configuration back off a binary state tensor.

    Raises :class:`IllegalState` when the tensor does not describe one:
    multiple controller marks, a missing or duplicated cell, or no
    identifiable head.  The head index is read from the controller mark
    alone; the replicated head index on passive entries is bookkeeping and
    may lag one step behind under the flat stepping semantics.
    """
    if not st.entries:
        raise IllegalState("empty state tensor")
    by_cell: dict[int, tuple[int, int, int]] = {}
    marked = []
    for (i, j, k, l), value in st.entries.items():
        if value != 1:
            raise IllegalState(f"non-binary entry {value!r} at {(i, j, k, l)}")
        if i in by_cell:
            raise IllegalState(f"duplicate entries for cell {i}")
        by_cell[i] = (j, k, l)
        if k != HALT:
            marked.append((i, j, k, l))

    length = max(by_cell) + 1
    missing = [i for i in range(length) if i not in by_cell]
    if missing:
        raise IllegalState(f"cells {missing} of 0..{length - 1} have no entry")

    if len(marked) > 1:
        raise IllegalState(f"{len(marked)} controller marks, expected at most one")
    if marked:
        _, _, k, l = marked[0]
        if l >= length:
            raise IllegalState(f"head index {l} points outside the {length}-cell tape")
        head, state = l, k
    else:
        # halted: every entry carries state 0; the head is the replicated l
        heads = {l for (_, _, l) in by_cell.values()}
        if len(heads) != 1:
            raise IllegalState(f"halted tensor with inconsistent head indices {sorted(heads)}")
        head = heads.pop()
        if head not in by_cell:
            raise IllegalState(f"head index {head} points outside the tape")
        state = HALT

    tape = tuple(by_cell[i][0] for i in range(length))
    return Configuration(tape=tape, state=state, head=head + 1, step=step)
