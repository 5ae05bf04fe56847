"""Sparse multi-index tensors, contraction, and the activation family.

Tensors are maps from index tuples to nonzero values; an absent tuple is an
exact zero.  Two value kinds are supported: ``exact`` (ints and
``fractions.Fraction``, closed under the clamp activation, so simulation in
this mode is literal) and ``float`` (binary64).

Activations:

* ``saturated_linear`` - identity clamped to [0, 1].
* ``scaled_sigmoid``   - ``1 / (1 + exp(-H * (x - center)))``.  With
  ``center=0.5`` this is the denoiser form: the shift happens inside the
  activation, callers pass raw values.
* ``threshold_gate``   - ``{0, 1}`` by comparison with a positive cutoff.

``min_scale_for`` solves for the smallest sigmoid scale that pushes values
within ``eps0`` of a binary pattern back to within ``eps`` of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DimMismatch, DomainError

EXACT = "exact"
FLOAT = "float"


def _check_value_kind(value, kind: str):
    if kind == EXACT and isinstance(value, float):
        raise ValueError("float value in an exact tensor")


@dataclass(frozen=True)
class MultiIndexTensor:
    """Sparse tensor keyed by index tuples; absent means zero."""

    dims: tuple[int, ...]
    entries: dict[tuple[int, ...], object]
    value_kind: str = EXACT

    def __post_init__(self):
        clean = {}
        for idx, value in self.entries.items():
            idx = tuple(idx)
            if len(idx) != len(self.dims) or any(
                    not 0 <= i < d for i, d in zip(idx, self.dims)):
                raise DimMismatch(f"index {idx} outside dims {self.dims}")
            _check_value_kind(value, self.value_kind)
            if value != 0:
                clean[idx] = value
        object.__setattr__(self, "entries", clean)

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def value_at(self, idx) -> object:
        return self.entries.get(tuple(idx), 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiIndexTensor):
            return NotImplemented
        return self.dims == other.dims and self.entries == other.entries

    def to_exchange(self) -> dict:
        """JSON-ready form; exact values serialize as ``p/q`` strings."""
        rows = []
        for idx in sorted(self.entries):
            value = self.entries[idx]
            if self.value_kind == EXACT:
                frac = Fraction(value)
                rows.append([list(idx), f"{frac.numerator}/{frac.denominator}"])
            else:
                rows.append([list(idx), repr(float(value))])
        return {"dims": list(self.dims), "entries": rows}

    @classmethod
    def from_exchange(cls, data: dict) -> "MultiIndexTensor":
        entries = {}
        kind = EXACT
        for idx, text in data["entries"]:
            if "/" in text:
                frac = Fraction(text)
                entries[tuple(idx)] = int(frac) if frac.denominator == 1 else frac
            else:
                entries[tuple(idx)] = float(text)
                kind = FLOAT
        return cls(dims=tuple(data["dims"]), entries=entries, value_kind=kind)


def zeros(dims, value_kind: str = EXACT) -> MultiIndexTensor:
    return MultiIndexTensor(dims=tuple(dims), entries={}, value_kind=value_kind)


def contract(a: MultiIndexTensor, b: MultiIndexTensor,
             pairing: list[tuple[int, int]]) -> MultiIndexTensor:
    """Sum-over-paired-axes contraction of two sparse tensors.

    Result axes are a's free axes followed by b's free axes.  Bilinear in
    both arguments; exact zeros are never stored.
    """
    ax_a = [p[0] for p in pairing]
    ax_b = [p[1] for p in pairing]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise DimMismatch("pairing axes must be distinct")
    for pa, pb in pairing:
        if not (0 <= pa < a.rank and 0 <= pb < b.rank):
            raise DimMismatch(f"pairing ({pa},{pb}) outside ranks ({a.rank},{b.rank})")
        if a.dims[pa] != b.dims[pb]:
            raise DimMismatch(f"paired extents differ: {a.dims[pa]} vs {b.dims[pb]}")

    free_a = [i for i in range(a.rank) if i not in ax_a]
    free_b = [i for i in range(b.rank) if i not in ax_b]

    groups: dict[tuple, list] = {}
    for idx, value in b.entries.items():
        key = tuple(idx[i] for i in ax_b)
        groups.setdefault(key, []).append((tuple(idx[i] for i in free_b), value))

    out: dict[tuple, object] = {}
    for idx, value in a.entries.items():
        key = tuple(idx[i] for i in ax_a)
        hits = groups.get(key)
        if not hits:
            continue
        head = tuple(idx[i] for i in free_a)
        for tail, bval in hits:
            where = head + tail
            out[where] = out.get(where, 0) + value * bval

    kind = FLOAT if FLOAT in (a.value_kind, b.value_kind) else EXACT
    dims = tuple(a.dims[i] for i in free_a) + tuple(b.dims[i] for i in free_b)
    return MultiIndexTensor(dims=dims, entries=out, value_kind=kind)


# -- activations --------------------------------------------------------------

@dataclass(frozen=True)
class ActivationKind:
    """One of ``saturated-linear``, ``scaled-sigmoid``, ``threshold-gate``."""

    name: str
    scale: float = 1.0       # H for the sigmoid
    theta: float = 0.5       # cutoff for the gate
    center: float = 0.0      # subtracted before the sigmoid; 0.5 = denoiser form

    SATURATED = "saturated-linear"
    SIGMOID = "scaled-sigmoid"
    THRESHOLD = "threshold-gate"

    def __post_init__(self):
        if self.name not in (self.SATURATED, self.SIGMOID, self.THRESHOLD):
            raise ValueError(f"unknown activation {self.name!r}")
        if self.name == self.SIGMOID and self.scale <= 0:
            raise DomainError("sigmoid scale must be positive")
        if self.name == self.THRESHOLD and self.theta <= 0:
            raise DomainError("threshold must be positive to keep zeros sparse")

    def __call__(self, x):
        if self.name == self.SATURATED:
            return saturated_linear(x)
        if self.name == self.SIGMOID:
            return scaled_sigmoid(x, self.scale, self.center)
        return threshold_gate(x, self.theta)


def saturated_linear(x):
    """Identity clamped to [0, 1]; exact on rational input."""
    if x < 0:
        return 0
    if x > 1:
        return 1
    return x


def scaled_sigmoid(x, scale: float, center: float = 0.0) -> float:
    z = scale * (float(x) - center)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def threshold_gate(x, theta: float = 0.5) -> int:
    return 1 if x >= theta else 0


def apply_activation(t: MultiIndexTensor, kind: ActivationKind) -> MultiIndexTensor:
    """Elementwise activation over stored entries.

    Absent coordinates stay absent: the clamp and the gate both fix zero, and
    the sigmoid path relies on the caller treating the implicit off-support
    value ``h_H(-center)`` as noise below its tolerance.
    """
    out = {idx: kind(value) for idx, value in t.entries.items()}
    if kind.name == ActivationKind.SIGMOID:
        value_kind = FLOAT
    elif kind.name == ActivationKind.THRESHOLD:
        value_kind = EXACT
    else:
        value_kind = t.value_kind
    return MultiIndexTensor(dims=t.dims, entries=out, value_kind=value_kind)


def min_scale_for(eps0: float, eps: float) -> float:
    """Smallest sigmoid scale H with ``h_H(-(1/2 - eps0)) <= eps``.

    Any value within ``eps0 < 1/2`` of a binary pattern then denoises to
    within ``eps`` of it under ``h_H(x - 1/2)``:
    ``H = ln(1/eps - 1) / (1/2 - eps0)``.
    """
    if not 0 <= eps0 < 0.5:
        raise DomainError(f"eps0 must lie in [0, 1/2), got {eps0}")
    if not 0 < eps <= 0.5:
        raise DomainError(f"eps must lie in (0, 1/2], got {eps}")
    return math.log(1.0 / eps - 1.0) / (0.5 - eps0)
