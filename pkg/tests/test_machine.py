import json

import pytest
from hypothesis import given, settings, strategies as st

from nstm.errors import AlphabetError, HeadUnderflow, TapeOverflow
from nstm.machine import (
    Configuration,
    HALT,
    flip_machine,
    initial_configuration,
    make_spec,
    random_input,
    random_tm,
    spec_from_dict,
    spec_to_dict,
    tm_run,
    tm_step,
    validate_spec,
)

import random


def sym(spec, text):
    return [spec.symbol_index(c) for c in text]


def tape_text(spec, config):
    return "".join(spec.symbols[j] for j in config.tape)


class TestValidate:
    def test_flip_machine_is_clean(self):
        assert validate_spec(flip_machine()) == []

    def test_missing_rule_reported(self):
        spec = flip_machine()
        rules = dict(spec.rules)
        del rules[(spec.symbol_index("1"), spec.state_index("q1"))]
        broken = type(spec)(states=spec.states, symbols=spec.symbols,
                            input_alphabet=spec.input_alphabet, start=spec.start,
                            finals=spec.finals, rules=rules)
        assert any("rules not total" in line for line in validate_spec(broken))

    def test_move_zero_outside_halting_reported(self):
        spec = make_spec(
            states=["q0", "q1"], symbols=["b"],
            rules=[("q1", "b", "q1", "b", 0)],
            start="q1")
        assert any("move 0 outside q0" in line for line in validate_spec(spec))

    def test_move_zero_into_halting_allowed(self):
        spec = make_spec(
            states=["q0", "q1"], symbols=["b"],
            rules=[("q1", "b", "q0", "b", 0)],
            start="q1")
        assert validate_spec(spec) == []

    def test_halting_row_is_forced(self):
        spec = flip_machine()
        for j in range(spec.n_symbols):
            assert spec.rule(j, HALT) == (j, HALT, 0)


class TestStep:
    def test_flip_first_step(self):
        spec = flip_machine()
        c = Configuration(tape=tuple(sym(spec, "010")), state=spec.state_index("q1"), head=1)
        out = tm_step(spec, c)
        assert tape_text(spec, out) == "110"
        assert out.head == 2
        assert out.state == spec.state_index("q1")
        assert out.step == 1

    def test_halting_is_fixed_point(self):
        spec = flip_machine()
        c = Configuration(tape=tuple(sym(spec, "01")), state=HALT, head=2, step=5)
        out = tm_step(spec, c)
        assert (out.tape, out.state, out.head) == (c.tape, c.state, c.head)
        assert out.step == 6

    def test_grow_right_appends_blank(self):
        spec = flip_machine()
        c = Configuration(tape=tuple(sym(spec, "0")), state=spec.state_index("q1"), head=1)
        out = tm_step(spec, c)
        assert tape_text(spec, out) == "1b"
        assert out.head == 2

    def test_grow_left_reindexes(self):
        spec = make_spec(
            states=["q0", "q1"], symbols=["b", "x"],
            rules=[("q1", "x", "q0", "x", -1), ("q1", "b", "q0", "b", -1)],
            start="q1")
        c = Configuration(tape=(spec.symbol_index("x"),), state=1, head=1)
        out = tm_step(spec, c)
        assert tape_text(spec, out) == "bx"
        assert out.head == 1

    def test_head_underflow_when_growth_disabled(self):
        spec = make_spec(
            states=["q0", "q1"], symbols=["b"],
            rules=[("q1", "b", "q1", "b", -1)],
            start="q1")
        c = Configuration(tape=(0,), state=1, head=1)
        with pytest.raises(HeadUnderflow):
            tm_step(spec, c, grow_left=False)

    def test_tape_cap_overflows(self):
        spec = flip_machine()
        c = Configuration(tape=tuple(sym(spec, "00")), state=1, head=2)
        with pytest.raises(TapeOverflow):
            tm_step(spec, c, l_max=2)

    def test_step_is_pure(self):
        spec = flip_machine()
        c = Configuration(tape=tuple(sym(spec, "010")), state=1, head=1)
        assert tm_step(spec, c) == tm_step(spec, c)


class TestRun:
    def test_flip_run_halts_after_four_steps(self):
        spec = flip_machine()
        trace = tm_run(spec, sym(spec, "010"), 10)
        assert trace.steps == 4
        assert trace.halt_reason == "reached-final"
        final = trace.configs[-1]
        # the flipped word plus the blanks grown while walking off the end
        assert tape_text(spec, final) == "101bb"
        assert tape_text(spec, final).rstrip("b") == "101"
        assert final.state == spec.state_index("qf")

    def test_zero_budget_empty_input(self):
        spec = flip_machine()
        trace = tm_run(spec, [], 0)
        assert len(trace.configs) == 1
        assert trace.halt_reason == "step-budget"
        assert trace.configs[0].tape == (0,)

    def test_immediate_halt_two_configs(self):
        spec = make_spec(
            states=["q0", "q1"], symbols=["b"],
            rules=[("q1", "b", "q0", "b", 1)],
            start="q1")
        trace = tm_run(spec, [], 10)
        assert len(trace.configs) == 2
        assert trace.halt_reason == "entered-q0"

    def test_budget_bounds_transitions(self):
        spec = make_spec(
            states=["q0", "q1", "q2"], symbols=["b"],
            rules=[("q1", "b", "q2", "b", 1), ("q2", "b", "q1", "b", -1)],
            start="q1")
        for budget in (0, 1, 7, 30):
            trace = tm_run(spec, [], budget)
            assert trace.steps == budget
            assert len(trace.configs) == budget + 1

    def test_input_outside_alphabet_rejected(self):
        spec = flip_machine()
        with pytest.raises(AlphabetError):
            initial_configuration(spec, [0])  # blank is not an input symbol

    def test_offsets_track_left_growth(self):
        spec = make_spec(
            states=["q0", "q1", "q2"], symbols=["b", "x"],
            rules=[("q1", "x", "q2", "x", -1), ("q1", "b", "q2", "b", -1),
                   ("q2", "x", "q0", "x", 1), ("q2", "b", "q0", "b", 1)],
            start="q1")
        trace = tm_run(spec, sym(spec, "x"), 10)
        assert trace.offsets == (0, 1, 1)


class TestRandom:
    def test_deterministic_in_seed(self):
        a = random_tm(42, 3, 3)
        b = random_tm(42, 3, 3)
        assert spec_to_dict(a) == spec_to_dict(b)
        assert a.spec_hash() == b.spec_hash()

    def test_seeds_differ(self):
        assert spec_to_dict(random_tm(42, 3, 3)) != spec_to_dict(random_tm(43, 3, 3))

    @pytest.mark.parametrize("seed", range(25))
    def test_output_always_validates(self, seed):
        rng = random.Random(seed)
        spec = random_tm(seed, rng.randint(1, 5), rng.randint(1, 4))
        assert validate_spec(spec) == []

    def test_generated_moves_are_lateral(self):
        spec = random_tm(7, 4, 3)
        for (j, k), (_, nxt, move) in spec.rules.items():
            if k == HALT or k in spec.finals:
                continue
            assert move in (-1, 1)

    def test_random_input_stays_in_alphabet(self):
        spec = random_tm(5, 3, 3)
        rng = random.Random(0)
        for _ in range(50):
            word = random_input(rng, spec, 16)
            assert all(j in spec.input_alphabet for j in word)
            assert len(word) <= 16


class TestSerialization:
    def test_roundtrip(self):
        spec = random_tm(11, 4, 3)
        again = spec_from_dict(spec_to_dict(spec))
        assert spec_to_dict(again) == spec_to_dict(spec)
        assert again.spec_hash() == spec.spec_hash()

    def test_canonical_bytes_sorted_and_stable(self):
        spec = flip_machine()
        data = json.loads(spec.canonical_bytes())
        assert data["rules"] == sorted(data["rules"])
        assert spec.canonical_bytes() == spec.canonical_bytes()

    def test_rule_row_layout(self):
        # rows are [state, symbol, next_state, write_symbol, move]
        spec = flip_machine()
        rows = spec_to_dict(spec)["rules"]
        assert ["q1", "0", "q1", "1", 1] in rows


@settings(max_examples=60, deadline=None)
@given(tape=st.lists(st.integers(0, 2), min_size=1, max_size=6),
       head=st.integers(1, 6), extra=st.integers(1, 5))
def test_halting_absorption(tape, head, extra):
    spec = flip_machine()
    head = min(head, len(tape))
    c = Configuration(tape=tuple(tape), state=HALT, head=head)
    for n in range(extra):
        before = c
        c = tm_step(spec, c)
        assert (c.tape, c.state, c.head) == (before.tape, before.state, before.head)
        assert c.step == before.step + 1
