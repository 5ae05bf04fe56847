"""Single entry point exposing every workflow as a subcommand.

Exit codes: 0 success, 1 verification failure (divergence, failed property,
validation violations), 2 usage or data errors.  All randomness flows from
``--seed``.  Each run writes one manifest (subcommand, resolved config,
seeds, paths, version, wall clock) next to its outputs; ``--manifest`` moves
it, ``--no-manifest`` suppresses it.  ``NSTM_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import NstmError
from .machine import Configuration, load_spec, random_tm, tm_run, validate_spec
from .encoder import NstmProgram, compile_tm, decode_state, encode_config
from .simulator import (
    EXACT_KIND,
    THRESHOLD_KIND,
    nstm_run,
    render_trace,
    sigmoid_kind,
    type1_product,
)
from .bisim import bisimulate, fuzz_bisim
from .feedforward import build_ff, check_associativity
from .dyck import DyckConfig, build_splits, load_dataset
from .tensor import MultiIndexTensor, min_scale_for
from .trainer import TrainConfig, evaluate, init_model, load_model, save_model, train

log = logging.getLogger("nstm")

OK, VERIFY_FAILED, USAGE = 0, 1, 2


def _setup_logging():
    level = os.environ.get("NSTM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _mode_kind(args):
    if args.mode == "sigmoid":
        scale = args.scale if args.scale else min_scale_for(0.25, 1e-6)
        return sigmoid_kind(scale)
    if args.mode == "threshold":
        return THRESHOLD_KIND
    return EXACT_KIND


def _parse_input(text: str, symbols) -> list[int]:
    """Symbol names, comma-separated; single characters may be run together."""
    if not text:
        return []
    names = text.split(",") if "," in text else list(text)
    index = {name: i for i, name in enumerate(symbols)}
    try:
        return [index[name] for name in names]
    except KeyError as err:
        raise NstmError(f"unknown tape symbol {err.args[0]!r}") from err


def _write_manifest(args, extra: dict, outputs: list, t0: float):
    if getattr(args, "no_manifest", False):
        return
    path = getattr(args, "manifest", None)
    if path is None:
        out_dir = getattr(args, "out", None)
        base = Path(out_dir) if out_dir else Path(".")
        if base.suffix:                       # --out was a file path
            base = base.parent
        base.mkdir(parents=True, exist_ok=True)
        path = base / f"nstm-{args.command}-manifest.json"
    manifest = {
        "subcommand": args.command,
        "argv": sys.argv[1:],
        "config": extra,
        "seed": getattr(args, "seed", None),
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "started_utc": datetime.fromtimestamp(t0, tz=timezone.utc).isoformat(),
        "wall_clock_s": round(time.time() - t0, 6),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(args, payload: dict, human: str):
    if getattr(args, "emit_json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human)


# -- subcommands ---------------------------------------------------------------

def cmd_validate(args, t0):
    spec = load_spec(args.spec)
    report = validate_spec(spec)
    payload = {"spec": str(args.spec), "violations": report}
    _emit(args, payload, "\n".join(report) if report else "ok")
    _write_manifest(args, payload, [], t0)
    return VERIFY_FAILED if report else OK


def cmd_run_tm(args, t0):
    spec = load_spec(args.spec)
    word = _parse_input(args.input, spec.symbols)
    trace = tm_run(spec, word, args.budget, l_max=args.l_max)
    for c in trace.configs:
        tape = ",".join(spec.symbols[j] for j in c.tape)
        print(f"t={c.step} state={spec.states[c.state]} head={c.head} tape={tape}")
    print(f"halt={trace.halt_reason}")
    _write_manifest(args, {"budget": args.budget, "l_max": args.l_max,
                           "steps": trace.steps, "halt": trace.halt_reason}, [], t0)
    return OK


def cmd_compile(args, t0):
    spec = load_spec(args.spec)
    prog = compile_tm(spec, args.l_max)
    payload = {
        "spec_hash": prog.spec_hash,
        "program_hash": prog.program_hash(),
        "dims": list(prog.dims),
        "start": prog.start,
        "finals": sorted(prog.finals),
        "state_names": list(prog.state_names),
        "symbol_names": list(prog.symbol_names),
        "kernel": sorted([j, k, w, n, m] for (j, k), (w, n, m) in prog.kernel.items()),
        "action_full": prog.action_full_tensor().to_exchange(),
        "action_local": prog.action_local_tensor().to_exchange(),
        "action_global": prog.action_global_tensor().to_exchange(),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
    print(f"compiled {args.spec} -> {out} (program {prog.program_hash()[:12]})")
    _write_manifest(args, {"l_max": args.l_max, "spec_hash": prog.spec_hash},
                    [out], t0)
    return OK


def load_program(path) -> NstmProgram:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    kernel = {(j, k): (w, n, m) for j, k, w, n, m in data["kernel"]}
    prog = NstmProgram(
        spec_hash=data["spec_hash"], l_max=data["dims"][0],
        n_symbols=data["dims"][1], n_states=data["dims"][2],
        kernel=kernel, start=data["start"], finals=frozenset(data["finals"]),
        state_names=tuple(data["state_names"]),
        symbol_names=tuple(data["symbol_names"]))
    stored = MultiIndexTensor.from_exchange(data["action_full"])
    if stored != prog.action_full_tensor():
        raise NstmError(f"{path}: stored action tensor disagrees with its kernel")
    return prog


def _program_for(args):
    if getattr(args, "program", None):
        return load_program(args.program)
    spec = load_spec(args.spec)
    return compile_tm(spec, args.l_max)


def cmd_run_nstm(args, t0):
    prog = _program_for(args)
    word = _parse_input(args.input, prog.symbol_names)
    kind = _mode_kind(args)
    trace = nstm_run(prog, word, args.budget, kind,
                     noise=args.noise, noise_seed=args.seed)
    print(render_trace(trace, prog.state_names, prog.symbol_names,
                       emit_tensors=args.emit_tensors))
    _write_manifest(args, {"mode": args.mode, "budget": args.budget,
                           "steps": trace.steps, "halt": trace.halt_reason}, [], t0)
    return OK if trace.halt_reason != "illegal-state" else VERIFY_FAILED


def cmd_bisim(args, t0):
    spec = load_spec(args.spec)
    if getattr(args, "program", None):
        prog = load_program(args.program)
    else:
        prog = compile_tm(spec, args.l_max)
    word = _parse_input(args.input, spec.symbols)
    rep = bisimulate(spec, prog, word, args.budget, _mode_kind(args),
                     noise=args.noise, noise_seed=args.seed, force=args.force)
    human = (f"verdict={rep.verdict} steps={rep.steps_compared} mode={rep.mode}"
             + (f" divergence={rep.first_divergence}" if rep.first_divergence else ""))
    _emit(args, rep.to_dict(), human)
    _write_manifest(args, rep.to_dict(), [], t0)
    return OK if rep.verdict == "equivalent" else VERIFY_FAILED


def cmd_fuzz(args, t0):
    summary = fuzz_bisim(
        seed=args.seed, trials=args.trials, max_states=args.max_states,
        max_symbols=args.max_symbols, max_input_len=args.max_input_len,
        budget=args.budget, l_max=args.l_max, kind=_mode_kind(args),
        noise=args.noise)
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    _write_manifest(args, summary.to_dict(), [], t0)
    return OK if summary.equivalent == summary.trials else VERIFY_FAILED


def cmd_ff_check(args, t0):
    rng = random.Random(args.seed)
    kind = _mode_kind(args) if args.mode != "exact" else THRESHOLD_KIND
    dims4 = (2, 2, 2, 2)
    dims8 = dims4 + dims4
    worst = 0.0
    for _ in range(args.triples):
        s = _random_binary(rng, dims4, 0.4)
        a = _random_binary(rng, dims8, 0.1)
        z = _random_binary(rng, dims8, 0.1)
        worst = max(worst, check_associativity(s, a, z, kind))
    tol = 0.0 if kind.name == "threshold-gate" else 1e-6
    assoc_ok = worst <= tol

    mismatches = 0
    for t in range(args.pairs):
        spec = random_tm(args.seed * 1000 + t, rng.randint(1, 4), rng.randint(1, 3))
        net = build_ff(spec, 1, 1, l_max=16)
        tape = tuple(rng.randrange(spec.n_symbols) for _ in range(rng.randint(1, 8)))
        c = Configuration(tape=tape, state=rng.randint(1, spec.n_states - 1),
                          head=rng.randint(1, len(tape)))
        st = encode_config(spec, c, 16)
        via_net = net.apply(st)
        via_sim = type1_product(st, net.program)
        if via_net != via_sim or _try_decode(via_net) != _try_decode(via_sim):
            mismatches += 1
    payload = {"associativity_max_deviation": worst, "associativity_ok": assoc_ok,
               "horizon1_pairs": args.pairs, "horizon1_mismatches": mismatches}
    _emit(args, payload,
          f"associativity max deviation {worst:.3g} (ok={assoc_ok}); "
          f"horizon-1 mismatches {mismatches}/{args.pairs}")
    _write_manifest(args, payload, [], t0)
    return OK if assoc_ok and mismatches == 0 else VERIFY_FAILED


def _try_decode(tensor):
    """Decoded configuration, or None when the step walked off the tape."""
    from .errors import IllegalState
    try:
        return decode_state(tensor, 1)
    except IllegalState:
        return None


def _random_binary(rng, dims, density):
    total = 1
    for d in dims:
        total *= d
    entries = {}
    for flat in range(total):
        if rng.random() < density:
            idx = []
            rem = flat
            for d in reversed(dims):
                idx.append(rem % d)
                rem //= d
            entries[tuple(reversed(idx))] = 1
    return MultiIndexTensor(dims=dims, entries=entries)


def cmd_gen_dyck(args, t0):
    if args.preset == "paper":
        cfg = DyckConfig(k=args.k, seed=args.seed)
    else:
        sizes = {"train": args.train_size, "val": args.val_size, "test": args.test_size}
        windows = {"train": (2, 52), "val": (21, 70), "test": (53, 120)}
        cfg = DyckConfig(k=args.k, seed=args.seed, sizes=sizes, windows=windows)
    paths = build_splits(cfg, args.out)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    _write_manifest(args, {"k": args.k, "preset": args.preset},
                    list(paths.values()), t0)
    return OK


def cmd_train(args, t0):
    data_dir = Path(args.data)
    datasets = {name: load_dataset(data_dir / f"{name}.txt")
                for name in ("train", "val")}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ramp = args.ramp if args.ramp >= 0 else None
    results = []
    outputs = []
    for run in range(args.runs):
        seed = args.seed + run
        model = init_model(seed, n_neurons=args.n_neurons,
                           x_width=2 * args.k + 1, scale=args.scale)
        run_cfg = TrainConfig(epochs=args.epochs, lr=args.lr,
                              patience=args.patience,
                              early_stop=args.early_stop, seed=seed, ramp=ramp)
        best, history = train(run_cfg, model, datasets, args.k,
                              log=lambda row: log.info("seed %s %s", seed, row))
        ckpt = out / f"model-seed{seed}.json"
        save_model(best, ckpt, extra={"k": args.k, "seed": seed,
                                      "n_neurons": args.n_neurons})
        csv = out / f"metrics-seed{seed}.csv"
        with open(csv, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_acc,val_acc,loss,lr\n")
            for row in history:
                fh.write(f"{row['epoch']},{row['train_acc']:.6f},"
                         f"{row['val_acc']:.6f},{row['loss']:.8f},{row['lr']:.8g}\n")
        best_val = max(row["val_acc"] for row in history)
        results.append({"seed": seed, "best_val_acc": best_val,
                        "epochs_run": len(history),
                        "checkpoint": str(ckpt), "metrics": str(csv)})
        outputs += [ckpt, csv]
        print(f"seed {seed}: best val acc {best_val:.4f} "
              f"({len(history)} epochs) -> {ckpt}")
    best_run = max(results, key=lambda r: r["best_val_acc"])
    summary = {"runs": results, "best": best_run}
    summary_path = out / "training-summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(summary_path)
    print(f"best: seed {best_run['seed']} val acc {best_run['best_val_acc']:.4f}")
    _write_manifest(args, {"k": args.k, "runs": args.runs, "epochs": args.epochs,
                           "lr": args.lr, "n_neurons": args.n_neurons,
                           "scale": args.scale, "ramp": ramp}, outputs, t0)
    return OK


def cmd_eval(args, t0):
    model = load_model(args.model)
    samples = load_dataset(args.data)
    result = evaluate(model, samples, args.k)
    human = [f"accuracy {result['accuracy']:.4f} on {result['n']} samples"]
    for bucket in result["by_length"]:
        human.append(f"  len {bucket['min_len']:>4}-{bucket['max_len']:<4} "
                     f"n={bucket['n']:<5} acc={bucket['accuracy']:.4f}")
    _emit(args, result, "\n".join(human))
    _write_manifest(args, {"model": str(args.model), "data": str(args.data),
                           "accuracy": result["accuracy"]}, [], t0)
    return OK


# -- parser --------------------------------------------------------------------

def _add_common(p, seed=True, json_flag=True):
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if json_flag:
        p.add_argument("--emit-json", action="store_true")
    p.add_argument("--manifest", type=Path, default=None,
                   help="manifest path (default: next to outputs)")
    p.add_argument("--no-manifest", action="store_true")


def _add_mode(p):
    p.add_argument("--mode", choices=("exact", "threshold", "sigmoid"),
                   default="exact")
    p.add_argument("--scale", type=float, default=None,
                   help="sigmoid sensitivity (default: solved for 1e-6 at noise 1/4)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="per-step pre-activation noise bound (sigmoid mode)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nstm", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a machine file's invariants")
    p.add_argument("--spec", type=Path, required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run-tm", help="run the reference interpreter")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--input", default="")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--l-max", type=int, default=256)
    _add_common(p, seed=False, json_flag=False)
    p.set_defaults(func=cmd_run_tm)

    p = sub.add_parser("compile", help="compile a machine into weight tensors")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--l-max", type=int, default=64)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, seed=False, json_flag=False)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run-nstm", help="run a compiled program")
    p.add_argument("--spec", type=Path)
    p.add_argument("--program", type=Path)
    p.add_argument("--input", default="")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--l-max", type=int, default=64)
    p.add_argument("--emit-tensors", action="store_true")
    _add_mode(p)
    _add_common(p)
    p.set_defaults(func=cmd_run_nstm)

    p = sub.add_parser("bisim", help="compare interpreter and network step by step")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--program", type=Path)
    p.add_argument("--input", default="")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--l-max", type=int, default=64)
    p.add_argument("--force", action="store_true",
                   help="compare even when the program hash disagrees")
    _add_mode(p)
    _add_common(p)
    p.set_defaults(func=cmd_bisim)

    p = sub.add_parser("fuzz", help="bisimulate random machines")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--max-states", type=int, default=5)
    p.add_argument("--max-symbols", type=int, default=4)
    p.add_argument("--max-input-len", type=int, default=16)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--l-max", type=int, default=64)
    _add_mode(p)
    _add_common(p)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("ff-check", help="associativity and horizon-1 equivalence")
    p.add_argument("--triples", type=int, default=500)
    p.add_argument("--pairs", type=int, default=50)
    _add_mode(p)
    _add_common(p)
    p.set_defaults(func=cmd_ff_check)

    p = sub.add_parser("gen-dyck", help="generate bracket-language datasets")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--preset", choices=("paper", "custom"), default="paper")
    p.add_argument("--train-size", type=int, default=5000)
    p.add_argument("--val-size", type=int, default=500)
    p.add_argument("--test-size", type=int, default=3000)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, json_flag=False)
    p.set_defaults(func=cmd_gen_dyck)

    p = sub.add_parser("train", help="train the differentiable network")
    p.add_argument("--data", type=Path, required=True,
                   help="directory with train.txt and val.txt")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--preset", choices=("paper", "custom"), default="paper",
                   help="paper: 8 neurons, SGD at 1e-2, 400 epochs, 3 runs, "
                        "sensitivity 4, incremental windows until epoch 320")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--early-stop", type=int, default=30)
    p.add_argument("--n-neurons", type=int, default=8)
    p.add_argument("--scale", type=float, default=4.0,
                   help="sigmoid sensitivity of the trainable network")
    p.add_argument("--ramp", type=int, default=320,
                   help="latest epoch at which the length window opens fully "
                        "(-1 disables incremental presentation)")
    _add_common(p, json_flag=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--k", type=int, default=2)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_eval)

    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "run-nstm" and not (args.spec or args.program):
        ap.error("run-nstm needs --spec or --program")
    t0 = time.time()
    try:
        return args.func(args, t0)
    except NstmError as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
