"""Side-by-side execution of the interpreter and the compiled network.

A trial is *equivalent* when the decoded network configuration equals the
interpreter configuration at every step, both sides stop at the same step,
and they stop for the same reason (final state, halting state, or budget).
Trials where both sides outgrow the cell cap in the same step are *aborted*
(the machine needs more tape than configured; within the window it still
tracked).  Everything else - a mismatched configuration, an undecodable
tensor, or asymmetric behavior - is a *divergence*.

The fuzzer derives one sub-seed per trial from the master seed, so trial
results never depend on execution order and may be sharded freely.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .errors import HashMismatch, IllegalState, TapeOverflow
from .machine import (
    HALT,
    Configuration,
    TmSpec,
    _apply_rule,
    initial_configuration,
    random_input,
    random_tm,
)
from .encoder import NstmProgram, compile_tm
from .simulator import (
    EXACT_KIND,
    ActivationKind,
    _decode_mode,
    _pad_cell,
    _shift_right,
    type1_product,
)
from .tensor import FLOAT, MultiIndexTensor


@dataclass(frozen=True)
class BisimReport:
    spec_hash: str
    program_hash: str
    input_symbols: tuple[int, ...]
    steps_compared: int
    verdict: str                                  # equivalent | diverged | aborted
    mode: str
    first_divergence: dict | None = None          # step, tm, nstm, detail

    def to_dict(self) -> dict:
        data = {
            "spec_hash": self.spec_hash,
            "program_hash": self.program_hash,
            "input": list(self.input_symbols),
            "steps_compared": self.steps_compared,
            "verdict": self.verdict,
            "mode": self.mode,
        }
        if self.first_divergence is not None:
            data["first_divergence"] = self.first_divergence
        return data


def _config_view(c: Configuration) -> tuple:
    return (c.tape, c.state, c.head)


def _mode_name(kind: ActivationKind) -> str:
    if kind.name == ActivationKind.SIGMOID:
        return "sigmoid"
    if kind.name == ActivationKind.THRESHOLD:
        return "threshold"
    return "exact"


def bisimulate(spec: TmSpec, prog: NstmProgram, input_symbols, budget: int,
               kind: ActivationKind = EXACT_KIND, noise: float = 0.0,
               noise_seed: int = 0, force: bool = False) -> BisimReport:
    """Step interpreter and network in lockstep, comparing decoded configs.

    One network product per interpreter step; the step counters therefore
    agree 1:1 by construction and the comparison asserts it.
    """
    if not force and prog.spec_hash != spec.spec_hash():
        raise HashMismatch("program was compiled from a different machine "
                           "(pass force=True to compare anyway)")
    mode = _mode_name(kind)
    rng = random.Random(noise_seed) if noise else None

    tm_c = initial_configuration(spec, input_symbols)
    s = prog.encode(tm_c)
    if mode == "sigmoid":
        s = MultiIndexTensor(dims=s.dims,
                             entries={i: float(v) for i, v in s.entries.items()},
                             value_kind=FLOAT)
    nstm_c = tm_c

    def report(verdict, steps, detail=None):
        return BisimReport(
            spec_hash=spec.spec_hash(), program_hash=prog.program_hash(),
            input_symbols=tuple(input_symbols), steps_compared=steps,
            verdict=verdict, mode=mode, first_divergence=detail)

    step = 0
    while True:
        if _config_view(tm_c) != _config_view(nstm_c) or tm_c.step != nstm_c.step:
            return report("diverged", step, {
                "step": step, "tm": _config_view(tm_c), "nstm": _config_view(nstm_c)})
        if tm_c.state in spec.finals or tm_c.state == HALT or step >= budget:
            return report("equivalent", step)

        try:
            tm_c, _ = _apply_rule(spec, tm_c, prog.l_max, grow_left=True)
        except TapeOverflow:
            return report("aborted", step, {"step": step, "detail": "tape cap"})

        j, k, h0 = nstm_c.tape[nstm_c.head - 1], nstm_c.state, nstm_c.head - 1
        move = prog.kernel[(j, k)][2]
        new_h0 = h0 + move
        one = 1.0 if mode == "sigmoid" else 1
        try:
            if new_h0 < 0:
                s = _shift_right(s)
                s = _pad_cell(s, 0, h0 + 1, one)
            elif new_h0 >= len(nstm_c.tape):
                if new_h0 >= prog.l_max:
                    raise TapeOverflow("head past the cap")
                s = _pad_cell(s, new_h0, h0, one)
        except TapeOverflow:
            # interpreter above already survived this step only if the cap
            # still had room, so reaching here means the network hit it first
            return report("aborted", step, {"step": step, "detail": "tape cap"})

        s = type1_product(s, prog, kind, noise=noise, rng=rng)
        step += 1
        try:
            nstm_c = _decode_mode(s, mode, step=step)
        except IllegalState as err:
            return report("diverged", step, {
                "step": step, "tm": _config_view(tm_c), "nstm": None,
                "detail": f"illegal state tensor: {err}"})


def exercised_entries(prog: NstmProgram, configs) -> list[tuple]:
    """Action-tensor entries (source, target) the given run actually uses.

    One active-family entry per stepped configuration: the head cell is the
    only source with a transition target, so flipping any returned entry
    must derail the run at the step that consumed it.
    """
    used = []
    seen = set()
    for c in configs[:-1]:
        j, k, h0 = c.tape[c.head - 1], c.state, c.head - 1
        if h0 + prog.kernel[(j, k)][2] < 0:
            h0 += 1                      # the step re-indexes before stepping
        src = (h0, j, k, h0)
        for out in prog.source_targets(src):
            if (src, out) not in seen:
                seen.add((src, out))
                used.append((src, out))
    return used


@dataclass
class FuzzSummary:
    trials: int = 0
    equivalent: int = 0
    diverged: int = 0
    aborted: int = 0
    first_failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "equivalent": self.equivalent,
            "diverged": self.diverged,
            "aborted": self.aborted,
            "first_failures": self.first_failures,
        }


def trial_seed(master_seed: int, trial: int) -> int:
    """Stable per-trial sub-seed, independent of execution order."""
    blob = f"{master_seed}/{trial}".encode("ascii")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def fuzz_bisim(seed: int, trials: int, max_states: int = 5, max_symbols: int = 4,
               max_input_len: int = 16, budget: int = 200, l_max: int = 64,
               kind: ActivationKind = EXACT_KIND, noise: float = 0.0,
               max_failures: int = 5) -> FuzzSummary:
    """Random (machine, input) pairs, compiled and bisimulated."""
    summary = FuzzSummary(trials=trials)
    for t in range(trials):
        sub = trial_seed(seed, t)
        rng = random.Random(sub)
        n_states = rng.randint(1, max_states)
        n_symbols = rng.randint(1, max_symbols)
        spec = random_tm(sub, n_states, n_symbols)
        word = random_input(rng, spec, max_input_len)
        prog = compile_tm(spec, l_max)
        rep = bisimulate(spec, prog, word, budget, kind,
                         noise=noise, noise_seed=sub)
        if rep.verdict == "equivalent":
            summary.equivalent += 1
        elif rep.verdict == "aborted":
            summary.aborted += 1
        else:
            summary.diverged += 1
        if rep.verdict != "equivalent" and len(summary.first_failures) < max_failures:
            summary.first_failures.append(
                {"trial": t, "seed": sub, "verdict": rep.verdict,
                 "detail": rep.first_divergence})
    return summary
