import random

import pytest

from nstm.errors import MemoryCapExceeded
from nstm.machine import Configuration, flip_machine, random_tm, tm_step
from nstm.encoder import compile_tm, decode_state, encode_config
from nstm.feedforward import (
    build_ff,
    check_associativity,
    pair_blocks,
    type2_product,
)
from nstm.simulator import THRESHOLD_KIND, type1_product, sigmoid_kind
from nstm.tensor import MultiIndexTensor, min_scale_for

from oracles import dense_contract


def rand_binary(rng, dims, density):
    entries = {}
    def walk(prefix, rest):
        if not rest:
            if rng.random() < density:
                entries[prefix] = 1
            return
        for i in range(rest[0]):
            walk(prefix + (i,), rest[1:])
    walk((), dims)
    return MultiIndexTensor(dims=dims, entries=entries)


class TestBuild:
    def test_horizon_one_reproduces_a_step(self):
        spec = flip_machine()
        net = build_ff(spec, 1, 1, l_max=8)
        c = Configuration(tape=(1, 2, 1), state=1, head=1)
        st = encode_config(spec, c, 8)
        out = net.apply(st)
        stepped = tm_step(spec, c, l_max=8)
        got = decode_state(out, 1)
        assert (got.tape, got.state, got.head) == \
            (stepped.tape, stepped.state, stepped.head)

    @pytest.mark.parametrize("seed", range(10))
    def test_horizon_one_matches_recurrent_product(self, seed):
        rng = random.Random(seed)
        spec = random_tm(seed, rng.randint(1, 4), rng.randint(1, 3))
        net = build_ff(spec, 1, 1, l_max=16)
        prog = compile_tm(spec, 16)
        tape = tuple(rng.randrange(spec.n_symbols) for _ in range(rng.randint(1, 8)))
        c = Configuration(tape=tape, state=rng.randrange(1, spec.n_states),
                          head=rng.randint(1, len(tape)))
        st = encode_config(spec, c, 16)
        assert net.apply(st) == type1_product(st, prog)

    def test_memory_cap_exceeded(self):
        spec = random_tm(0, 3, 4)  # four tape symbols
        with pytest.raises(MemoryCapExceeded):
            build_ff(spec, 3, 3, l_max=32)

    def test_bundle_metadata(self):
        net = build_ff(flip_machine(), 2, 1, l_max=4)
        assert [name for name, _ in net.action_bundles] == \
            ["source1", "source2", "target"]
        assert net.action_bundles[1][1] == (4, 5, 6, 7)
        assert net.action_order == 12
        assert net.state_order == 8
        assert net.composed_order == 4 * (2 * 2 * 1 + 1)

    def test_bad_horizons_rejected(self):
        with pytest.raises(ValueError):
            build_ff(flip_machine(), 0, 1, l_max=4)

    def test_apply_checks_block_count(self):
        net = build_ff(flip_machine(), 2, 1, l_max=4)
        spec = flip_machine()
        st = encode_config(spec, Configuration(tape=(1, 2), state=1, head=1), 4)
        out = net.apply([st, st])       # newest block drives the transition
        assert decode_state(out, 1).head == 2
        from nstm.errors import DimMismatch
        with pytest.raises(DimMismatch):
            net.apply([st])

    def test_materialized_action_tensor_small(self):
        net = build_ff(flip_machine(), 1, 1, l_max=3)
        t = net.action_tensor()
        assert t.rank == 8
        # graph of the flat step map: one target per source that has one
        for src in net.program.iter_sources():
            outs = [e[4:] for e in t.entries if e[:4] == src]
            assert sorted(outs) == sorted(net.program.flat_targets(src))


class TestType2:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dense_oracle(self, seed):
        rng = random.Random(seed)
        dims4 = (2, 2, 2, 2)
        a = rand_binary(rng, dims4 + dims4, 0.12)
        z = rand_binary(rng, dims4 + dims4, 0.12)
        pairing = pair_blocks(1, 0)
        out = type2_product(a, z, pairing)
        expect = dense_contract(a.dims, a.entries, z.dims, z.entries, pairing)
        assert {i: float(v) for i, v in out.entries.items()} == expect

    def test_zero_annihilates(self):
        dims = (2, 2, 2, 2, 2, 2, 2, 2)
        zero = MultiIndexTensor(dims=dims, entries={})
        rng = random.Random(0)
        z = rand_binary(rng, dims, 0.2)
        assert type2_product(zero, z, pair_blocks(1, 0)).entries == {}
        assert type2_product(z, zero, pair_blocks(1, 0)).entries == {}

    def test_copy_map_reindexes_unchanged(self):
        dims4 = (2, 2, 2, 2)
        eye = MultiIndexTensor(
            dims=dims4 + dims4,
            entries={idx + idx: 1 for idx in
                     ((i, j, k, l) for i in range(2) for j in range(2)
                      for k in range(2) for l in range(2))})
        rng = random.Random(1)
        z = rand_binary(rng, dims4 + dims4, 0.2)
        out = type2_product(eye, z, pair_blocks(1, 0))
        assert out == z

    def test_activation_applied_when_given(self):
        dims4 = (1, 1, 1, 2)
        a = MultiIndexTensor(dims=dims4 + dims4, entries={
            (0, 0, 0, 0, 0, 0, 0, 0): 1, (0, 0, 0, 1, 0, 0, 0, 0): 1})
        z = MultiIndexTensor(dims=dims4 + dims4, entries={
            (0, 0, 0, 0, 0, 0, 0, 1): 1})
        raw = type2_product(a, z, pair_blocks(1, 0))
        gated = type2_product(a, z, pair_blocks(1, 0), THRESHOLD_KIND)
        assert set(raw.entries.values()) == {1}
        assert gated.entries == raw.entries


class TestAssociativity:
    def test_all_zero_triple(self):
        dims4 = (2, 2, 2, 2)
        zero4 = MultiIndexTensor(dims=dims4, entries={})
        zero8 = MultiIndexTensor(dims=dims4 + dims4, entries={})
        assert check_associativity(zero4, zero8, zero8, THRESHOLD_KIND) == 0.0

    def test_binary_triples_threshold_exact(self):
        rng = random.Random(42)
        dims4 = (2, 2, 2, 2)
        for _ in range(200):
            s = rand_binary(rng, dims4, 0.4)
            a = rand_binary(rng, dims4 + dims4, 0.1)
            z = rand_binary(rng, dims4 + dims4, 0.1)
            assert check_associativity(s, a, z, THRESHOLD_KIND) == 0.0

    def test_binary_triples_sigmoid_within_tolerance(self):
        rng = random.Random(43)
        h = min_scale_for(0.25, 1e-6)
        kind = sigmoid_kind(h)
        dims4 = (2, 2, 2, 2)
        worst = 0.0
        for _ in range(100):
            s = rand_binary(rng, dims4, 0.4)
            a = rand_binary(rng, dims4 + dims4, 0.1)
            z = rand_binary(rng, dims4 + dims4, 0.1)
            worst = max(worst, check_associativity(s, a, z, kind))
        assert worst <= 1e-6
