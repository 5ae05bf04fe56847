"""Differentiable network with forward-mode gradient training.

The trainable network keeps the two-path structure of the compiled form at
real-valued weights: a state path and an action path, each a third-order
contraction of the previous activations ``z`` with the (constant) read
neuron and the one-hot input, combined multiplicatively,

    s[i] = sig(H * (sum_jkl Ws[i,j,k,l] z[j] r[k] x[l] + bs[i]))
    a[i] = sig(H * (sum_jkl Wa[i,j,k,l] z[j] r[k] x[l] + ba[i]))
    z'[i] = sig(H * (s[i] * a[i] + bz[i]))

Gradients are computed with real-time recurrent learning: a sensitivity
matrix dz/dtheta is carried forward through the sequence,

    S' = (dz'/dz) S + dz'/dtheta|_explicit,

and the squared-error loss on the acceptance neuron (index 0) at the final
step projects it to a parameter gradient.  Training is plain per-sequence
stochastic gradient descent with patience-based halving of the step size and
early stopping on validation accuracy; fixed seeds give bit-identical runs.

Bracket words are presented one symbol at a time as one-hot vectors over
``2k + 1`` channels (k open types, k close types, end marker); the label is
read off the acceptance neuron after the end marker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DimMismatch
from .dyck import CLOSE, OPEN, Sample

ACCEPT = 0            # acceptance neuron index
Z0 = 0.5              # initial state value for every neuron


@dataclass
class TrainableNstm:
    """Real-valued two-path network; arrays are float64 throughout."""

    ws: np.ndarray        # (N, N, R, X) state-path weights
    wa: np.ndarray        # (N, N, R, X) action-path weights
    bs: np.ndarray        # (N,)
    ba: np.ndarray        # (N,)
    bz: np.ndarray        # (N,)
    scale: float = 1.0    # sigmoid sensitivity H

    @property
    def n(self) -> int:
        return self.ws.shape[0]

    @property
    def r_width(self) -> int:
        return self.ws.shape[2]

    @property
    def x_width(self) -> int:
        return self.ws.shape[3]

    @property
    def n_params(self) -> int:
        return 2 * self.ws.size + 3 * self.n

    def copy(self) -> "TrainableNstm":
        return TrainableNstm(self.ws.copy(), self.wa.copy(), self.bs.copy(),
                             self.ba.copy(), self.bz.copy(), self.scale)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.ws.ravel(), self.wa.ravel(),
                               self.bs, self.ba, self.bz])

    def add_flat(self, delta: np.ndarray) -> None:
        nw = self.ws.size
        n = self.n
        self.ws += delta[:nw].reshape(self.ws.shape)
        self.wa += delta[nw:2 * nw].reshape(self.wa.shape)
        self.bs += delta[2 * nw:2 * nw + n]
        self.ba += delta[2 * nw + n:2 * nw + 2 * n]
        self.bz += delta[2 * nw + 2 * n:]


def init_model(seed: int, n_neurons: int = 8, x_width: int = 5,
               r_width: int = 1, init_scale: float = 0.5,
               scale: float = 1.0) -> TrainableNstm:
    """Uniform init in [-init_scale, init_scale], seed-controlled."""
    rng = np.random.default_rng(seed)
    shape = (n_neurons, n_neurons, r_width, x_width)
    return TrainableNstm(
        ws=rng.uniform(-init_scale, init_scale, shape),
        wa=rng.uniform(-init_scale, init_scale, shape),
        bs=rng.uniform(-init_scale, init_scale, n_neurons),
        ba=rng.uniform(-init_scale, init_scale, n_neurons),
        bz=rng.uniform(-init_scale, init_scale, n_neurons),
        scale=scale,
    )


def encode_word(word: str, k: int) -> list[int]:
    """Channel indices for a bracket word, end marker appended."""
    idx = []
    for ch in word:
        if ch in OPEN[:k]:
            idx.append(OPEN.index(ch))
        elif ch in CLOSE[:k]:
            idx.append(k + CLOSE.index(ch))
        else:
            raise DataFormatError(f"symbol {ch!r} outside the {k}-pair alphabet")
    idx.append(2 * k)
    return idx


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def _effective(model: TrainableNstm, x_idx: int):
    """Contract the constant read vector and the one-hot input away."""
    if not 0 <= x_idx < model.x_width:
        raise DimMismatch(f"input channel {x_idx} outside width {model.x_width}")
    ws_eff = model.ws[:, :, :, x_idx].sum(axis=2)
    wa_eff = model.wa[:, :, :, x_idx].sum(axis=2)
    return ws_eff, wa_eff


def forward_step(model: TrainableNstm, z: np.ndarray, x_idx: int):
    """One network step; returns (s, a, z_next), all in (0, 1)."""
    ws_eff, wa_eff = _effective(model, x_idx)
    h = model.scale
    s = _sig(h * (ws_eff @ z + model.bs))
    a = _sig(h * (wa_eff @ z + model.ba))
    z_next = _sig(h * (s * a + model.bz))
    return s, a, z_next


def run_word(model: TrainableNstm, word: str, k: int) -> np.ndarray:
    """Final state after the whole word plus end marker."""
    z = np.full(model.n, Z0)
    for x_idx in encode_word(word, k):
        _, _, z = forward_step(model, z, x_idx)
    return z


def accepts(model: TrainableNstm, word: str, k: int) -> bool:
    return bool(run_word(model, word, k)[ACCEPT] >= 0.5)


@dataclass
class RtrlState:
    """Carried state: activations and the sensitivity matrix dz/dtheta."""

    z: np.ndarray
    sens: np.ndarray       # (N, P)
    step: int = 0

    @classmethod
    def fresh(cls, model: TrainableNstm) -> "RtrlState":
        return cls(z=np.full(model.n, Z0),
                   sens=np.zeros((model.n, model.n_params)), step=0)


def rtrl_step(model: TrainableNstm, state: RtrlState, x_idx: int,
              target: float | None = None):
    """Advance one step; with a target, also return the loss gradient.

    The sensitivity update is the exact chain rule for the two-path step:
    new sensitivities are the state Jacobian applied to the old ones plus
    the explicit parameter derivatives of this step.
    """
    n, r, x_width = model.n, model.r_width, model.x_width
    h = model.scale
    z = state.z
    ws_eff, wa_eff = _effective(model, x_idx)

    s = _sig(h * (ws_eff @ z + model.bs))
    a = _sig(h * (wa_eff @ z + model.ba))
    z_next = _sig(h * (s * a + model.bz))

    sp = h * s * (1.0 - s)              # ds/du
    ap = h * a * (1.0 - a)
    zp = h * z_next * (1.0 - z_next)    # dz'/dw

    coef_s = zp * a * sp                # dz'_i/du_i
    coef_a = zp * s * ap

    jac = coef_s[:, None] * ws_eff + coef_a[:, None] * wa_eff
    sens = jac @ state.sens

    # explicit derivatives: weight rows i touch only sensitivity row i
    nw = model.ws.size
    rows = np.arange(n)
    # flat index of W[i, j, kk, x_idx] within one weight tensor
    widx = (rows[:, None, None] * n + rows[None, :, None]) * r \
        + np.arange(r)[None, None, :]
    widx = widx * x_width + x_idx
    zr = np.broadcast_to(z[:, None], (n, r))            # z_j * r_kk with r = 1
    sens[rows[:, None, None], widx] += coef_s[:, None, None] * zr[None, :, :]
    sens[rows[:, None, None], nw + widx] += coef_a[:, None, None] * zr[None, :, :]
    sens[rows, 2 * nw + rows] += coef_s
    sens[rows, 2 * nw + n + rows] += coef_a
    sens[rows, 2 * nw + 2 * n + rows] += zp

    new_state = RtrlState(z=z_next, sens=sens, step=state.step + 1)
    if target is None:
        return new_state, None
    err = z_next[ACCEPT] - target
    grad = 2.0 * err * sens[ACCEPT]
    return new_state, grad


def sequence_gradient(model: TrainableNstm, word: str, k: int, label: int):
    """Loss and gradient for one word (squared error at the end marker)."""
    state = RtrlState.fresh(model)
    channels = encode_word(word, k)
    for x_idx in channels[:-1]:
        state, _ = rtrl_step(model, state, x_idx)
    state, grad = rtrl_step(model, state, channels[-1], target=float(label))
    loss = (state.z[ACCEPT] - label) ** 2
    return loss, grad, state.z[ACCEPT]


@dataclass(frozen=True)
class TrainConfig:
    """Plain SGD at batch size one with patience halving and early stopping.

    ``ramp`` turns on incremental presentation: training starts on the
    shortest words, and the admitted length window widens by one group
    whenever the current pool is nearly mastered (``open_threshold``),
    opening fully at epoch ``ramp`` at the latest.  Short words are where
    the acceptance dynamics are learnable from scratch; flooding in long
    words any faster systematically overwrites them with suffix guessing,
    because the end-of-word loss reaches back only as far as the state
    dynamics avoid contracting.  Learning-rate halving and early stopping
    engage once the window is fully open.
    """

    epochs: int = 400
    lr: float = 1e-2
    patience: int = 10          # epochs without val improvement before halving
    early_stop: int = 30        # epochs without val improvement before stopping
    seed: int = 0
    ramp: int | None = None     # latest epoch at which the window is full
    open_threshold: float = 0.93
    open_step: int = 2          # window growth per mastered pool
    clip: float | None = 1.0    # per-sequence gradient norm cap; None disables

    def __post_init__(self):
        if self.epochs < 1 or self.lr < 0:
            raise ValueError("epochs must be >= 1 and lr nonnegative")
        if self.ramp is not None and self.ramp < 1:
            raise ValueError("ramp must be at least 1 epoch")
        if self.clip is not None and self.clip <= 0:
            raise ValueError("clip must be positive when set")


def evaluate(model: TrainableNstm, samples: list[Sample], k: int) -> dict:
    """Accuracy plus a per-length-decile breakdown."""
    if not samples:
        raise DataFormatError("empty dataset")
    hits = []
    lengths = []
    for sample in samples:
        pred = accepts(model, sample.word, k)
        hits.append(pred == bool(sample.label))
        lengths.append(sample.length)
    hits = np.asarray(hits)
    lengths = np.asarray(lengths)
    edges = np.unique(np.quantile(lengths, np.linspace(0, 1, 11)).astype(int))
    if len(edges) < 2:
        edges = np.array([edges[0], edges[0]])
    buckets = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (lengths >= lo) & (lengths <= hi if hi == edges[-1] else lengths < hi)
        if mask.any():
            buckets.append({"min_len": int(lo), "max_len": int(hi),
                            "n": int(mask.sum()),
                            "accuracy": float(hits[mask].mean())})
    return {"accuracy": float(hits.mean()), "n": len(samples), "by_length": buckets}


def train(cfg: TrainConfig, model: TrainableNstm, datasets: dict, k: int,
          log=None):
    """SGD over the train split; returns (best model, per-epoch history).

    ``datasets`` maps split names to sample lists and must contain ``train``
    and ``val``.  The checkpoint with the best validation accuracy is kept.
    """
    for name in ("train", "val"):
        if not datasets.get(name):
            raise DataFormatError(f"missing or empty {name!r} split")
    rng = np.random.default_rng(cfg.seed)
    model = model.copy()
    best = model.copy()
    best_val = -1.0
    stale = 0
    lr = cfg.lr
    history = []

    train_set = list(datasets["train"])
    lo = min(s.length for s in train_set)
    hi = max(s.length for s in train_set)
    cur = min(lo + 6, hi) if cfg.ramp else hi
    for epoch in range(1, cfg.epochs + 1):
        if cfg.ramp and epoch >= cfg.ramp:
            cur = hi
        pool = [s for s in train_set if s.length <= cur] or train_set
        order = rng.permutation(len(pool))
        correct = 0
        loss_sum = 0.0
        for idx in order:
            sample = pool[idx]
            loss, grad, out = sequence_gradient(model, sample.word, k, sample.label)
            if cfg.clip is not None:
                norm = float(np.linalg.norm(grad))
                if norm > cfg.clip:
                    grad = grad * (cfg.clip / norm)
            model.add_flat(-lr * grad)
            loss_sum += loss
            correct += (out >= 0.5) == bool(sample.label)
        train_acc = correct / len(pool)
        val_acc = evaluate(model, datasets["val"], k)["accuracy"]
        history.append({"epoch": epoch, "train_acc": train_acc,
                        "val_acc": val_acc, "loss": loss_sum / len(pool),
                        "lr": lr, "window": cur})
        if log:
            log(history[-1])
        if val_acc > best_val:
            best_val = val_acc
            best = model.copy()
            stale = 0
        elif cur >= hi:
            # scheduling engages once the length window is fully open
            stale += 1
            if stale % cfg.patience == 0:
                lr *= 0.5
            if stale >= cfg.early_stop:
                break
        if cfg.ramp and cur < hi and train_acc >= cfg.open_threshold:
            cur += cfg.open_step
    return best, history


# -- checkpoints ---------------------------------------------------------------

def _array_to_json(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "values": [repr(float(v)) for v in arr.ravel()]}


def _array_from_json(data: dict) -> np.ndarray:
    arr = np.array([float(v) for v in data["values"]], dtype=np.float64)
    return arr.reshape(data["shape"])


def save_model(model: TrainableNstm, path, extra: dict | None = None) -> None:
    payload = {
        "ws": _array_to_json(model.ws), "wa": _array_to_json(model.wa),
        "bs": _array_to_json(model.bs), "ba": _array_to_json(model.ba),
        "bz": _array_to_json(model.bz), "scale": repr(model.scale),
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainableNstm:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        return TrainableNstm(
            ws=_array_from_json(data["ws"]), wa=_array_from_json(data["wa"]),
            bs=_array_from_json(data["bs"]), ba=_array_from_json(data["ba"]),
            bz=_array_from_json(data["bz"]), scale=float(data["scale"]))
    except (KeyError, TypeError, ValueError) as err:
        raise DataFormatError(f"bad checkpoint {path}: {err}") from err
