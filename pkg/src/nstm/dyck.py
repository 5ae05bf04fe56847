"""Balanced-bracket language: oracle, samplers, dataset builder.

Words use paired ASCII brackets, one pair per type: ``()`` ``[]`` ``{}``
``<>``.  Positive samples come from a depth-biased balanced walk (early in
the word the sampler prefers opening, so long samples are not trivially
shallow).  Negative samples perturb a positive with a single edit - swap,
deletion, insertion, or a cross-type closing bracket - and are rejection
checked against the oracle.

Dataset files hold one sample per line, ``<label 0|1>\\t<word>``, with a
sidecar metadata JSON recording the generating config, seed, and sampler
version so files are exactly reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AlphabetError, DataFormatError, InfeasibleWindow

OPEN = "([{<"
CLOSE = ")]}>"
MAX_PAIRS = 4
SAMPLER_VERSION = 1

PERTURBATIONS = ("swap", "delete", "insert", "mismatch")


def alphabet(k: int) -> str:
    if not 1 <= k <= MAX_PAIRS:
        raise ValueError(f"bracket pair count must be 1..{MAX_PAIRS}, got {k}")
    return OPEN[:k] + CLOSE[:k]


def is_dyck(s: str, k: int) -> bool:
    """Stack oracle: balanced and properly nested over k pair types."""
    opens = OPEN[:k]
    closes = CLOSE[:k]
    stack = []
    for ch in s:
        if ch in opens:
            stack.append(ch)
        elif ch in closes:
            if not stack or OPEN.index(stack.pop()) != CLOSE.index(ch):
                return False
        else:
            raise AlphabetError(f"symbol {ch!r} outside the {k}-pair alphabet")
    return not stack


@dataclass(frozen=True)
class Sample:
    word: str
    label: int

    @property
    def length(self) -> int:
        return len(self.word)


def _even_lengths(lo: int, hi: int) -> list[int]:
    lo = max(lo, 0)
    return [n for n in range(lo, hi + 1) if n % 2 == 0]


def gen_positive(k: int, window: tuple[int, int], rng: random.Random) -> Sample:
    """Balanced word with length drawn from the even part of the window."""
    lengths = _even_lengths(*window)
    if not lengths:
        raise InfeasibleWindow(f"no even length in {window}")
    n = rng.choice(lengths)
    word = []
    depth = 0
    stack = []
    # prefer opening while shallow relative to sqrt of the remaining budget,
    # so nesting depth grows with length instead of hugging zero
    for pos in range(n):
        remaining = n - pos
        if depth == 0:
            opening = True
        elif depth >= remaining:
            opening = False
        else:
            bias = 0.62 if depth <= math.isqrt(remaining) else 0.38
            opening = rng.random() < bias
        if opening:
            t = rng.randrange(k)
            stack.append(t)
            word.append(OPEN[t])
            depth += 1
        else:
            word.append(CLOSE[stack.pop()])
            depth -= 1
    return Sample("".join(word), 1)


def _perturb(word: str, op: str, k: int, rng: random.Random) -> str:
    if op == "swap" and len(word) >= 2:
        i, j = rng.sample(range(len(word)), 2)
        chars = list(word)
        chars[i], chars[j] = chars[j], chars[i]
        return "".join(chars)
    if op == "delete" and word:
        i = rng.randrange(len(word))
        return word[:i] + word[i + 1:]
    if op == "insert":
        i = rng.randint(0, len(word))
        return word[:i] + rng.choice(alphabet(k)) + word[i:]
    if op == "mismatch" and k >= 2:
        closes = [i for i, ch in enumerate(word) if ch in CLOSE[:k]]
        if closes:
            i = rng.choice(closes)
            others = [c for c in CLOSE[:k] if c != word[i]]
            return word[:i] + rng.choice(others) + word[i + 1:]
    return word


def gen_negative(k: int, window: tuple[int, int], rng: random.Random,
                 mix: tuple[str, ...] = PERTURBATIONS,
                 max_tries: int = 200) -> Sample:
    """Single-edit corruption of a positive, rejection-checked to fail."""
    lo, hi = window
    seed_window = (max(lo - 1, 0), hi + 1)
    if not _even_lengths(*seed_window):
        raise InfeasibleWindow(f"no perturbable length near {window}")
    for _ in range(max_tries):
        base = gen_positive(k, seed_window, rng)
        op = rng.choice(mix)
        word = _perturb(base.word, op, k, rng)
        if not lo <= len(word) <= hi:
            continue
        if word and not is_dyck(word, k):
            return Sample(word, 0)
    raise InfeasibleWindow(f"could not corrupt into window {window}")


@dataclass(frozen=True)
class DyckConfig:
    """Split sizes, length windows, perturbation mix, and the master seed."""

    k: int = 4
    seed: int = 0
    sizes: dict = field(default_factory=lambda: {
        "train": 5000, "val": 500, "test": 3000, "long500": 1000, "long1000": 1000})
    windows: dict = field(default_factory=lambda: {
        "train": (2, 52), "val": (21, 70), "test": (53, 120),
        "long500": (121, 500), "long1000": (501, 1000)})
    mix: tuple[str, ...] = PERTURBATIONS

    def __post_init__(self):
        for name in self.sizes:
            if name not in self.windows:
                raise ValueError(f"split {name!r} has a size but no window")
            lo, hi = self.windows[name]
            if lo > hi or self.sizes[name] < 0:
                raise ValueError(f"split {name!r} has an empty window or size")


def _split_seed(master: int, name: str) -> int:
    blob = f"{master}/{name}".encode("ascii")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def gen_split(cfg: DyckConfig, name: str) -> list[Sample]:
    """Deterministic 50/50 split (odd sizes give the extra row to positives)."""
    rng = random.Random(_split_seed(cfg.seed, name))
    size = cfg.sizes[name]
    window = cfg.windows[name]
    n_pos = (size + 1) // 2
    samples = [gen_positive(cfg.k, window, rng) for _ in range(n_pos)]
    samples += [gen_negative(cfg.k, window, rng, cfg.mix)
                for _ in range(size - n_pos)]
    rng.shuffle(samples)
    return samples


def build_splits(cfg: DyckConfig, out_dir) -> dict[str, Path]:
    """Write every configured split plus the metadata sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in sorted(cfg.sizes):
        samples = gen_split(cfg, name)
        path = out_dir / f"{name}.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for sample in samples:
                fh.write(f"{sample.label}\t{sample.word}\n")
        paths[name] = path
    meta = {
        "k": cfg.k,
        "seed": cfg.seed,
        "sizes": cfg.sizes,
        "windows": {name: list(w) for name, w in cfg.windows.items()},
        "mix": list(cfg.mix),
        "sampler_version": SAMPLER_VERSION,
    }
    meta_path = out_dir / "metadata.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["metadata"] = meta_path
    return paths


def load_dataset(path) -> list[Sample]:
    """Read a split file, checking the two-column layout."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[0] not in ("0", "1"):
                raise DataFormatError(f"{path}:{lineno}: expected '<0|1>\\t<word>'")
            samples.append(Sample(parts[1], int(parts[0])))
    return samples
