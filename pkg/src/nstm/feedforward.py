"""Recurrence-free form: history-indexed action/state tensors at small horizons.

The recurrence-free network replaces the recurrent action tensor with one
indexed by ``p`` past configuration blocks (and the final-state tensor by one
indexed by ``q`` blocks).  Each block is a full ``(cell, symbol, state,
head)`` index group, so tensor orders grow as ``4(p+1)``, ``4(q+1)`` and the
composed object reaches ``4(2pq+1)`` axes; anything beyond tiny horizons is
exponentially large.  ``build_ff`` therefore enforces a dense-size cap and
only certifies behavior, not the largest constructions.

At horizon ``p = q = 1`` a single application of the net is exactly one step
of the compiled recurrent program (the machine is Markov: the newest block
determines the transition).  The bundled product ``type2_product`` contracts
an action tensor's target blocks against a state tensor's source blocks; the
associativity of gated products is checked numerically by
``check_associativity``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimMismatch, MemoryCapExceeded
from .machine import TmSpec
from .encoder import NstmProgram, StateTensor, compile_tm
from .simulator import EXACT_KIND, type1_product
from .tensor import ActivationKind, MultiIndexTensor, apply_activation, contract

DEFAULT_DENSE_CAP = 2 ** 26

Bundle = tuple[str, tuple[int, ...]]


def _block_axes(block: int) -> tuple[int, ...]:
    base = 4 * block
    return (base, base + 1, base + 2, base + 3)


@dataclass(frozen=True)
class FeedforwardNet:
    """Program wrapper carrying horizon and axis-bundle bookkeeping."""

    program: NstmProgram
    p: int
    q: int
    action_bundles: tuple[Bundle, ...]     # p source blocks + 1 target block
    state_bundles: tuple[Bundle, ...]      # q source blocks + 1 target block

    @property
    def block_size(self) -> int:
        d = self.program.dims
        return d[0] * d[1] * d[2] * d[3]

    @property
    def action_order(self) -> int:
        return 4 * (self.p + 1)

    @property
    def state_order(self) -> int:
        return 4 * (self.q + 1)

    @property
    def composed_order(self) -> int:
        return 4 * (2 * self.p * self.q + 1)

    def apply(self, states) -> StateTensor:
        """One application: newest configuration block in, next block out."""
        if isinstance(states, MultiIndexTensor):
            newest = states
        else:
            states = list(states)
            if len(states) != self.p:
                raise DimMismatch(f"net of horizon {self.p} takes {self.p} blocks, "
                                  f"got {len(states)}")
            newest = states[-1]
        return type1_product(newest, self.program, EXACT_KIND)

    def action_tensor(self, cap: int = DEFAULT_DENSE_CAP) -> MultiIndexTensor:
        """Materialized history-indexed action tensor (guarded, small dims only).

        Earlier source blocks are free indices: the transition reads only the
        newest block, so each stored entry is replicated across the older
        blocks' diagonalizable patterns.  Materialization enumerates the
        newest-block map and leaves older blocks implicit at horizon 1.
        """
        if self.p != 1:
            raise MemoryCapExceeded(
                "materialization is only supported at horizon p=1; "
                f"order-{self.action_order} tensors are exponentially large")
        dims = self.program.dims + self.program.dims
        _check_dense(dims, cap)
        entries = {}
        for src in self.program.iter_sources():
            for out in self.program.flat_targets(src):
                entries[src + out] = 1
        return MultiIndexTensor(dims=dims, entries=entries)


def _check_dense(dims, cap):
    size = 1
    for d in dims:
        size *= d
        if size > cap:
            raise MemoryCapExceeded(
                f"dense-equivalent size {size}+ exceeds the cap {cap}")


def build_ff(spec: TmSpec, p: int, q: int, l_max: int,
             cap: int = DEFAULT_DENSE_CAP) -> FeedforwardNet:
    """Compile a machine into its recurrence-free wrapper at horizon (p, q)."""
    if p < 1 or q < 1:
        raise ValueError("horizons must be at least 1")
    prog = compile_tm(spec, l_max)
    block = prog.dims
    # the cap covers the net's stored tensors; the composed product's order
    # (exponentially larger again) is exposed as metadata for the caller
    _check_dense(block * (p + 1), cap)
    _check_dense(block * (q + 1), cap)
    action_bundles = tuple(
        (f"source{i + 1}", _block_axes(i)) for i in range(p)
    ) + (("target", _block_axes(p)),)
    state_bundles = tuple(
        (f"source{i + 1}", _block_axes(i)) for i in range(q)
    ) + (("target", _block_axes(q)),)
    return FeedforwardNet(program=prog, p=p, q=q,
                          action_bundles=action_bundles,
                          state_bundles=state_bundles)


def type2_product(a: MultiIndexTensor, z: MultiIndexTensor,
                  bundles: list[tuple[int, int]],
                  kind: ActivationKind | None = None) -> MultiIndexTensor:
    """Contract an action tensor's target axes against a state tensor's
    source axes, pairing per the explicit bundle list.

    ``bundles`` pairs axes of ``a`` with axes of ``z``; activation is applied
    when a kind is given, matching how a gated network would evaluate the
    product.
    """
    out = contract(a, z, bundles)
    if kind is not None:
        out = apply_activation(out, kind)
    return out


def pair_blocks(a_block: int, z_block: int) -> list[tuple[int, int]]:
    """Axis pairing that contracts one 4-axis block against another."""
    return list(zip(_block_axes(a_block), _block_axes(z_block)))


def check_associativity(s: MultiIndexTensor, a: MultiIndexTensor,
                        z: MultiIndexTensor, kind: ActivationKind) -> float:
    """Max entrywise deviation between the two gated parenthesizations.

    Evaluates ``act(act(s x1 a) x1 z)`` against ``act(s x1 (a x2 z))`` where
    ``x1`` contracts a state against an action tensor's source block and
    ``x2`` chains an action tensor into a state tensor.  Zero under the
    threshold gate on binary inputs; within the denoising tolerance under
    the scaled sigmoid.
    """
    if s.rank != 4 or a.rank != 8 or z.rank != 8:
        raise DimMismatch("expected a rank-4 state and rank-8 action/state tensors")

    s_in_a = list(zip(range(4), range(4)))          # s axes vs a source block
    left_inner = apply_activation(contract(s, a, s_in_a), kind)
    left = apply_activation(contract(left_inner, z, s_in_a), kind)

    a_tail_z = pair_blocks(1, 0)                    # a target block vs z source block
    right_inner = apply_activation(contract(a, z, a_tail_z), kind)
    right = apply_activation(contract(s, right_inner, s_in_a), kind)

    worst = 0.0
    for idx in set(left.entries) | set(right.entries):
        dev = abs(float(left.value_at(idx)) - float(right.value_at(idx)))
        worst = max(worst, dev)
    return worst
