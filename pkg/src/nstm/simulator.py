"""Executes a compiled program one machine step per network step.

The workhorse is the factored product: the state tensor is contracted with
the program's local factor to collect the next tape content over ``(i', j')``
and with its global factor to collect the next controller state and head
over ``(k', l')``.  The two factors recombine into a rank-4 state tensor:

* every tape pair ``(i', j')`` is emitted with the fresh head carrier
  ``k' = 0`` at cells away from the head (``i' != l'``),
* the head cell alone receives the ``k' != 0`` controller mark, and
* when the transition drops into the halting state the head cell receives
  its ``k' = 0`` entry from the global factor's state-0 slice instead, so a
  halted tensor is a literal fixed point of the product.

This recombination is the one output indexing under which the decoded next
tensor equals the interpreter's next configuration for every reachable
input; a blind outer product of the two factors cannot couple the mark to
the head cell (see the module tests, which check the commutation directly).

``full_contraction_step`` is the flat alternative: one Einstein contraction
of the state against the rank-8 action tensor (plus the shared state-0 copy
rows).  It propagates the head only through the controller mark, so its
passive entries keep a stale head index and the two semantics agree on the
decoded configuration for every step that keeps the controller out of the
halting state.  The factored product is the authoritative path.

Tape growth is a run-level policy exactly mirroring the interpreter: when
the peeked move walks off the right end the simulator first materializes a
blank cell; walking off cell 1 re-indexes every cell one step right and
records the offset.  Growth past ``l_max`` raises :class:`TapeOverflow`.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .errors import DimMismatch, IllegalState, TapeOverflow
from .machine import BLANK, HALT, Configuration
from .encoder import NstmProgram, StateTensor, decode_state
from .tensor import EXACT, FLOAT, ActivationKind, MultiIndexTensor

EXACT_KIND = ActivationKind(ActivationKind.SATURATED)
THRESHOLD_KIND = ActivationKind(ActivationKind.THRESHOLD, theta=0.5)

# off-support sigmoid outputs below this are dropped; well under the 1/2
# decision line but above the scale of h_H(-1/2) so injected noise survives
SIGMOID_FLOOR = 1e-9
NOISE_SAMPLES = 8


def sigmoid_kind(scale: float) -> ActivationKind:
    """Denoiser activation: ``h_H(x - 1/2)`` on raw values."""
    return ActivationKind(ActivationKind.SIGMOID, scale=scale, center=0.5)


@dataclass(frozen=True)
class NstmTrace:
    program_hash: str
    tensors: tuple[StateTensor, ...]
    configs: tuple[Configuration | None, ...]  # None marks an illegal decode
    halt_reason: str       # reached-final | entered-q0 | step-budget | illegal-state | tape-overflow
    offsets: tuple[int, ...]
    mode: str

    @property
    def steps(self) -> int:
        return len(self.tensors) - 1


def _check_dims(s: StateTensor, prog: NstmProgram):
    if s.dims != prog.dims:
        raise DimMismatch(f"state dims {s.dims} vs program dims {prog.dims}")


def _factors(s: StateTensor, prog: NstmProgram):
    """Local (i',j') and global (k',l') contractions of one state tensor."""
    local: dict[tuple[int, int], object] = {}
    globl: dict[tuple[int, int], object] = {}
    overlay = prog.overlay
    for src, v in s.entries.items():
        i, j, k, l = src
        if src in overlay or i == l:
            for out in prog.source_targets(src):
                lo, gl = out[:2], out[2:]
                local[lo] = local.get(lo, 0) + v
                globl[gl] = globl.get(gl, 0) + v
        else:
            lo = (i, j)
            local[lo] = local.get(lo, 0) + v
    return local, globl


def _recombine(local, globl, dims, kind: ActivationKind,
               noise: float = 0.0, rng: random.Random | None = None):
    """Assemble the rank-4 output from the two factors and activate."""
    pre: dict[tuple[int, int, int, int], object] = {}
    head_carrier: dict[int, object] = {}
    for (kq, lq), gv in globl.items():
        head_carrier[lq] = head_carrier.get(lq, 0) + gv

    by_cell: dict[int, list] = {}
    for (iq, jq), lv in local.items():
        by_cell.setdefault(iq, []).append((jq, lv))

    for (kq, lq), gv in globl.items():
        if kq == HALT:
            continue
        for jq, lv in by_cell.get(lq, ()):    # mark only at the head cell
            idx = (lq, jq, kq, lq)
            pre[idx] = pre.get(idx, 0) + lv * gv

    for (iq, jq), lv in local.items():
        for lq, hv in head_carrier.items():
            if iq != lq:
                idx = (iq, jq, HALT, lq)
                pre[idx] = pre.get(idx, 0) + lv * hv
            else:
                gz = globl.get((HALT, lq))
                if gz:
                    idx = (iq, jq, HALT, lq)
                    pre[idx] = pre.get(idx, 0) + lv * gz

    if noise:
        for idx in list(pre):
            pre[idx] += rng.uniform(-noise, noise)
        for _ in range(NOISE_SAMPLES):
            idx = tuple(rng.randrange(d) for d in dims)
            if idx not in pre:
                pre[idx] = rng.uniform(-noise, noise)

    out = {}
    for idx, value in pre.items():
        act = kind(value)
        if kind.name == ActivationKind.SIGMOID and act < SIGMOID_FLOOR:
            continue
        if act != 0:
            out[idx] = act
    value_kind = FLOAT if kind.name == ActivationKind.SIGMOID else EXACT
    return MultiIndexTensor(dims=dims, entries=out, value_kind=value_kind)


def type1_product(s: StateTensor, prog: NstmProgram,
                  kind: ActivationKind = EXACT_KIND,
                  noise: float = 0.0, rng: random.Random | None = None) -> StateTensor:
    """One step of the factored product; see the module docstring.

    ``noise`` perturbs every assembled value (and a small sample of zero
    coordinates) uniformly by up to its magnitude before activation.
    """
    _check_dims(s, prog)
    local, globl = _factors(s, prog)
    return _recombine(local, globl, s.dims, kind, noise, rng)


def full_contraction_step(s: StateTensor, prog: NstmProgram,
                          kind: ActivationKind = EXACT_KIND) -> StateTensor:
    """Flat Einstein contraction of the state against the action tensor."""
    _check_dims(s, prog)
    pre: dict[tuple[int, int, int, int], object] = {}
    for src, v in s.entries.items():
        for out in prog.flat_targets(src):
            pre[out] = pre.get(out, 0) + v
    entries = {}
    for idx, value in pre.items():
        act = kind(value)
        if act != 0:
            entries[idx] = act
    value_kind = FLOAT if kind.name == ActivationKind.SIGMOID else s.value_kind
    return MultiIndexTensor(dims=s.dims, entries=entries, value_kind=value_kind)


def thresholded(s: StateTensor, theta: float = 0.5) -> StateTensor:
    """Binary support of a (possibly noisy) state tensor."""
    entries = {idx: 1 for idx, v in s.entries.items() if v >= theta}
    return MultiIndexTensor(dims=s.dims, entries=entries, value_kind=EXACT)


def _decode_mode(s: StateTensor, mode: str, step: int) -> Configuration:
    if mode == "sigmoid":
        return decode_state(thresholded(s), step=step)
    return decode_state(s, step=step)


def _shift_right(s: StateTensor) -> StateTensor:
    """Re-index every cell one step right (left tape growth).

    Entries shifted past the cap are fatal when they are load-bearing
    (value at or above the decision line) and noise otherwise.
    """
    entries = {}
    for (i, j, k, l), v in s.entries.items():
        if i + 1 >= s.dims[0] or l + 1 >= s.dims[3]:
            if v >= 0.5:
                raise TapeOverflow("left growth would push cells past the cap")
            continue
        entries[(i + 1, j, k, l + 1)] = v
    return MultiIndexTensor(dims=s.dims, entries=entries, value_kind=s.value_kind)


def _pad_cell(s: StateTensor, cell: int, head0: int, value) -> StateTensor:
    entries = dict(s.entries)
    entries[(cell, BLANK, HALT, head0)] = value
    return MultiIndexTensor(dims=s.dims, entries=entries, value_kind=s.value_kind)


def nstm_run(prog: NstmProgram, input_symbols, budget: int,
             kind: ActivationKind = EXACT_KIND,
             noise: float = 0.0, noise_seed: int = 0) -> NstmTrace:
    """Run the compiled program: exactly one product application per step.

    Stops on a decoded final state, the halting state, the step budget, or
    an undecodable tensor (recorded, not suppressed).  Raises
    :class:`TapeOverflow` when the peeked head move would leave the cell
    range, mirroring the interpreter's tape cap.
    """
    mode = ("sigmoid" if kind.name == ActivationKind.SIGMOID
            else "threshold" if kind.name == ActivationKind.THRESHOLD
            else "exact")
    rng = random.Random(noise_seed) if noise else None

    for j in input_symbols:
        if not 0 <= j < prog.n_symbols:
            raise IllegalState(f"input symbol index {j} outside the alphabet")
    tape = tuple(input_symbols) if input_symbols else (BLANK,)
    c = Configuration(tape=tape, state=prog.start, head=1, step=0)
    s = prog.encode(c)
    if mode == "sigmoid":
        s = MultiIndexTensor(dims=s.dims, entries={i: float(v) for i, v in s.entries.items()},
                             value_kind=FLOAT)

    tensors = [s]
    configs: list[Configuration | None] = [c]
    offsets = [0]
    reason = "step-budget"
    while True:
        if c.state in prog.finals:
            reason = "reached-final"
            break
        if c.state == HALT:
            reason = "entered-q0"
            break
        if c.step >= budget:
            break

        # growth policy: peek the rule's move and make room before stepping
        j, k, h0 = c.tape[c.head - 1], c.state, c.head - 1
        move = prog.kernel[(j, k)][2]
        shift = 0
        new_h0 = h0 + move
        one = 1.0 if mode == "sigmoid" else 1
        if new_h0 < 0:
            s = _shift_right(s)
            s = _pad_cell(s, 0, h0 + 1, one)
            shift = 1
        elif new_h0 >= len(c.tape):
            if new_h0 >= prog.l_max:
                raise TapeOverflow(
                    f"head would reach cell {new_h0 + 1}, cap is {prog.l_max}")
            s = _pad_cell(s, new_h0, h0, one)

        s = type1_product(s, prog, kind, noise=noise, rng=rng)
        tensors.append(s)
        offsets.append(offsets[-1] + shift)
        try:
            c = _decode_mode(s, mode, step=c.step + 1)
        except IllegalState:
            configs.append(None)
            reason = "illegal-state"
            break
        configs.append(c)

    return NstmTrace(program_hash=prog.program_hash(), tensors=tuple(tensors),
                     configs=tuple(configs), halt_reason=reason,
                     offsets=tuple(offsets), mode=mode)


def render_trace(trace: NstmTrace, state_names, symbol_names,
                 emit_tensors: bool = False) -> str:
    """Line-oriented trace: ``t=<n> state=<name> head=<l> tape=<symbols>``."""
    lines = []
    for t, c in enumerate(trace.configs):
        if c is None:
            lines.append(f"t={t} state=? head=? tape=? (illegal state tensor)")
            continue
        tape = ",".join(symbol_names[j] for j in c.tape)
        lines.append(f"t={t} state={state_names[c.state]} head={c.head} tape={tape}")
        if emit_tensors:
            lines.append(json.dumps(trace.tensors[t].to_exchange(),
                                    separators=(",", ":")))
    lines.append(f"halt={trace.halt_reason}")
    return "\n".join(lines)
