"""Command-line interface: data generation, training, attacks and evaluation.

Subcommands: gen-data, train, attack, transfer, grid, defend-eval, report.
A JSON config file (``--config``) may supply any flag; explicit flags win.
The seed resolves as: ``--seed`` flag, then config file, then the NUDGE_SEED
environment variable, then 0. Runs with identical flags and seed write
byte-identical report payloads (timestamps live in a quarantined ``meta``
field).

Exit codes: 0 success, 1 missing/unreadable files, 2 bad flags or values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import attack_de, attack_grad, evalharness, storage
from .defense import random_noise_attack
from .errors import NudgeError
from .models import (
    ARCH_DGCNN,
    ARCH_POINTNET,
    TrainConfig,
    checkpoint_digest,
    evaluate_accuracy,
    load_model,
    predict_probs,
    save_model,
    train_model,
    write_training_log,
)
from .pointcloud import SYNTH_CLASS_NAMES, synth_dataset

# paper-strength adversaries crossed with the weak/moderate/strong budgets
ATTACKER_PRESETS = {
    "weak": attack_grad.GradAttackConfig(epsilon=0.05, iterations=10, budget=1),
    "moderate": attack_grad.GradAttackConfig(epsilon=0.2, iterations=50, budget=10),
    "strong": attack_grad.GradAttackConfig(epsilon=0.5, iterations=200, budget=150),
}

DEFAULT_SEED = 0


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nudge3d",
                                     description="Nudge attacks on point-cloud classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="global seed")
        p.add_argument("--config", type=Path, default=None, help="JSON file supplying flags")

    p = sub.add_parser("gen-data", help="generate a synthetic NPC1 dataset")
    common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--train-per-class", type=int, default=None)
    p.add_argument("--test-per-class", type=int, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--jitter", type=float, default=None)

    p = sub.add_parser("train", help="train a classifier on an NPC1 dataset")
    common(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--arch", choices=[ARCH_POINTNET, ARCH_DGCNN], required=True)
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.add_argument("--log", type=Path, default=None, help="training log CSV path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="neighbor count (mini-dgcnn)")

    p = sub.add_parser("attack", help="run an attack over a test slice")
    common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--method", choices=["grad", "de", "noise"], default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--targeted", action="store_true")
    p.add_argument("--target-class", default=None,
                   help="'random' or a fixed class index (targeted mode)")
    p.add_argument("--pool", type=int, default=None, help="DE pool size")
    p.add_argument("--cr", type=float, default=None, help="DE crossover rate")
    p.add_argument("--mutation", type=float, default=None, help="DE mutation factor")
    p.add_argument("--offset-bound", type=float, default=None)
    p.add_argument("--noise-l2", type=float, default=None, help="matched L2 for noise attacks")

    p = sub.add_parser("transfer", help="replay a prior attack run against other models")
    common(p)
    p.add_argument("--run", type=Path, required=True, help="attack output directory")
    p.add_argument("--targets", type=Path, nargs="+", required=True, help="target checkpoints")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("grid", help="success-rate surface over (epsilon, iterations, budget)")
    common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--eps", default=None, help="comma list, e.g. 0.01,0.05,0.2")
    p.add_argument("--iters", default=None, help="comma list, e.g. 10,100,500")
    p.add_argument("--budgets", default=None, help="comma list, e.g. 1,150")

    p = sub.add_parser("defend-eval", help="point-removal defense sweep")
    common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--attackers", default=None, help="comma subset of weak,moderate,strong")
    p.add_argument("--remove-k", default=None, help="comma list of removal budgets")

    p = sub.add_parser("report", help="verify and pretty-print a run report")
    common(p)
    p.add_argument("--run", type=Path, required=True)

    return parser


class _Options:
    """Flag resolution: explicit flag > config file > NUDGE_SEED (seed) > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = {}
        if args.config is not None:
            self.config = json.loads(Path(args.config).read_text())
            if not isinstance(self.config, dict):
                raise NudgeError("config file must hold a JSON object")

    def get(self, name: str, default=None):
        val = getattr(self.args, name, None)
        if val is not None and val is not False:
            return val
        if name in self.config:
            return self.config[name]
        return default

    @property
    def seed(self) -> int:
        val = self.get("seed")
        if val is not None:
            return int(val)
        env = os.environ.get("NUDGE_SEED")
        return int(env) if env else DEFAULT_SEED


def cmd_gen_data(opt: _Options) -> int:
    out = Path(opt.get("out"))
    classes = int(opt.get("classes", 5))
    if not (1 <= classes <= len(SYNTH_CLASS_NAMES)):
        raise NudgeError(f"--classes must be in [1, {len(SYNTH_CLASS_NAMES)}]")
    points = int(opt.get("points", 256))
    jitter = float(opt.get("jitter", 0.02))
    seed = opt.seed
    train = synth_dataset(int(opt.get("train_per_class", 40)), points, seed,
                          jitter=jitter, split="train", n_classes=classes)
    test = synth_dataset(int(opt.get("test_per_class", 10)), points, seed,
                         jitter=jitter, split="test", n_classes=classes)
    out.mkdir(parents=True, exist_ok=True)
    storage.save_dataset(out, train, test,
                         manifest_extra={"seed": seed, "jitter": jitter})
    print(f"wrote {len(train)} train + {len(test)} test clouds to {out}")
    return 0


def cmd_train(opt: _Options) -> int:
    data_dir = Path(opt.get("data"))
    train_set = storage.load_split(data_dir, "train")
    test_set = storage.load_split(data_dir, "test")
    config = TrainConfig(
        epochs=int(opt.get("epochs", 60)),
        learning_rate=float(opt.get("lr", 0.01)),
        batch_size=int(opt.get("batch_size", 16)),
        seed=opt.seed,
        momentum=float(opt.get("momentum", 0.9)),
    )
    arch = opt.get("arch")
    model, log = train_model(arch, train_set, config, test_set=test_set,
                             k=int(opt.get("k", 8)))
    out = Path(opt.get("out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, model)
    log_path = Path(opt.get("log") or f"{out}.log.csv")
    write_training_log(log_path, log)
    final = log[-1]
    print(f"{arch}: train_acc={final['train_acc']:.4f} test_acc={final['test_acc']:.4f} "
          f"({config.epochs} epochs) -> {out}")
    return 0


def _resolve_target(opt: _Options, n_classes: int):
    """Returns (mode, target_spec) after validating the targeted flags."""
    targeted = bool(opt.get("targeted", False))
    raw = opt.get("target_class")
    if not targeted:
        if raw is not None:
            raise NudgeError("--target-class requires --targeted")
        return attack_grad.MODE_UNTARGETED, None
    if raw is None:
        raise NudgeError("--targeted requires --target-class random|<index>")
    if str(raw) == "random":
        return attack_grad.MODE_TARGETED, "random"
    target = int(raw)
    if not (0 <= target < n_classes):
        raise NudgeError(f"target class {target} out of range for {n_classes} classes")
    return attack_grad.MODE_TARGETED, target


def _build_attack(opt: _Options, model):
    """Returns (attack_fn, config echo dict) for the chosen method."""
    method = opt.get("method", "grad")
    mode, target_spec = _resolve_target(opt, model.n_classes)
    budget = int(opt.get("budget", 1))

    if method == "grad":
        eps = float(opt.get("eps", 0.05))
        iters = int(opt.get("iters", 10))
        fn = evalharness.make_grad_attack_fn(eps, iters, budget, mode, target_spec)
        echo = {"method": "grad", "epsilon": eps, "iterations": iters, "budget": budget,
                "mode": mode, "target_class": target_spec}
        return fn, echo

    if method == "de":
        pool = int(opt.get("pool", 100))
        iters = int(opt.get("iters", 10))
        cr = float(opt.get("cr", 0.7))
        mutation = float(opt.get("mutation", 0.5))
        bound = float(opt.get("offset_bound", 0.5))

        def fn(mdl, cloud, seed):
            target = target_spec
            if target == "random":
                target = evalharness.pick_target_class(seed, cloud.label, mdl.n_classes)
            cfg = attack_de.DEConfig(pool_size=pool, budget=budget, crossover_rate=cr,
                                     mutation_factor=mutation, iterations=iters,
                                     offset_bound=bound, mode=mode, target_class=target,
                                     seed=seed)
            return attack_de.nudge_de(lambda pts: predict_probs(mdl, pts),
                                      cloud.points, cloud.label, cfg)

        echo = {"method": "de", "pool_size": pool, "iterations": iters, "budget": budget,
                "crossover_rate": cr, "mutation_factor": mutation, "offset_bound": bound,
                "mode": mode, "target_class": target_spec}
        return fn, echo

    if method == "noise":
        if mode == attack_grad.MODE_TARGETED:
            raise NudgeError("the noise baseline is untargeted")
        target_l2 = opt.get("noise_l2")
        if target_l2 is None:
            raise NudgeError("--method noise requires --noise-l2")
        target_l2 = float(target_l2)

        def fn(mdl, cloud, seed):
            return random_noise_attack(mdl, cloud, budget, target_l2, seed)

        return fn, {"method": "noise", "budget": budget, "target_l2": target_l2}

    raise NudgeError(f"unknown method {method!r}")


def _load_slice(opt: _Options, default_samples: int = 100):
    data_dir = Path(opt.get("data"))
    split = opt.get("split", "test")
    dataset = storage.load_split(data_dir, split)
    count = min(int(opt.get("samples", default_samples)), len(dataset))
    samples = evalharness.select_slice(dataset, count, opt.seed)
    return dataset, samples


def cmd_attack(opt: _Options) -> int:
    model_path = Path(opt.get("model"))
    if not model_path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {model_path}")
    model = load_model(model_path)
    dataset, samples = _load_slice(opt)
    attack_fn, echo = _build_attack(opt, model)

    started = time.perf_counter()
    summary, results = evalharness.evaluate_attack_batch(
        model, samples, attack_fn, tag=echo["method"], config=echo,
        run_seed=opt.seed, jobs=int(opt.get("jobs", 1)))
    elapsed = time.perf_counter() - started

    out = Path(opt.get("out"))
    clouds_dir = out / "clouds"
    clouds_dir.mkdir(parents=True, exist_ok=True)
    by_id = {r.sample_id: r for r in results}
    for sid, cloud in samples:
        storage.save_cloud(clouds_dir / f"{sid:04d}_orig.npc", cloud)
        res = by_id[sid]
        if res.adversarial is not None:
            storage.save_cloud(clouds_dir / f"{sid:04d}_adv.npc",
                               cloud.with_points(res.adversarial))

    run = {
        "command": "attack",
        "seed": opt.seed,
        "dataset": {"path": str(opt.get("data")), "split": opt.get("split", "test")},
        "model": {"path": str(model_path), "digest": checkpoint_digest(model_path)},
        "config": echo,
        "slice": [sid for sid, _ in samples],
        "summary": summary.record(),
        "samples": [r.record() for r in results],
    }
    meta = {
        "created_utc": _utc_now(),
        "elapsed_seconds": elapsed,
        "per_sample_seconds": {str(r.sample_id): r.seconds for r in results},
    }
    evalharness.write_run_report(out / "report.json", run, meta)
    summary_row = summary.record()
    summary_row["config"] = json.dumps(summary_row["config"], sort_keys=True)
    evalharness.write_summary_csv(out / "summary.csv", [summary_row])
    print(f"{echo['method']}: success_rate={summary.success_rate:.4f} "
          f"adv_accuracy={summary.adv_accuracy:.4f} over {summary.n_samples} samples -> {out}")
    return 0


def _load_transfer_set(run_dir: Path):
    report = json.loads((run_dir / "report.json").read_text())
    clouds_dir = run_dir / "clouds"
    pairs = []
    for sid in report["run"]["slice"]:
        orig = storage.load_cloud(clouds_dir / f"{sid:04d}_orig.npc")
        adv_path = clouds_dir / f"{sid:04d}_adv.npc"
        if adv_path.is_file():
            pairs.append(evalharness.TransferSample(sid, orig, storage.load_cloud(adv_path)))
    if not pairs:
        raise NudgeError(f"no adversarial clouds under {clouds_dir}")
    return report, pairs


def cmd_transfer(opt: _Options) -> int:
    run_dir = Path(opt.get("run"))
    if not (run_dir / "report.json").is_file():
        raise FileNotFoundError(f"no report.json under {run_dir}")
    report, pairs = _load_transfer_set(run_dir)
    targets = {}
    for path in opt.get("targets"):
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        targets[path.name] = load_model(path)
    rates = evalharness.transfer_eval(pairs, targets)

    out = Path(opt.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    run = {
        "command": "transfer",
        "seed": opt.seed,
        "source_run": str(run_dir),
        "source_model": report["run"]["model"],
        "n_samples": len(pairs),
        "rates": rates,
    }
    evalharness.write_run_report(out / "transfer.json", run, {"created_utc": _utc_now()})
    evalharness.write_summary_csv(
        out / "transfer.csv",
        [{"target": name, "success_rate": rate, "n_samples": len(pairs)}
         for name, rate in sorted(rates.items())])
    for name, rate in sorted(rates.items()):
        print(f"transfer -> {name}: {rate:.4f}")
    return 0


def cmd_grid(opt: _Options) -> int:
    model_path = Path(opt.get("model"))
    if not model_path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {model_path}")
    model = load_model(model_path)
    _, samples = _load_slice(opt)
    spec = evalharness.GridSpec(
        epsilons=tuple(_float_list(str(opt.get("eps", "0.01,0.05,0.2,0.5")))),
        iterations=tuple(_int_list(str(opt.get("iters", "10,100,500")))),
        budgets=tuple(_int_list(str(opt.get("budgets", "1,150")))),
    )
    rows = evalharness.grid_search(model, samples, spec, run_seed=opt.seed)

    out = Path(opt.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    flat = [{"budget": r["budget"], "epsilon": r["epsilon"], "iterations": r["iterations"],
             "success_rate": r["summary"].success_rate,
             "adv_accuracy": r["summary"].adv_accuracy,
             "mean_l2": r["summary"].mean_l2, "mean_linf": r["summary"].mean_linf,
             "mean_edited": r["summary"].mean_edited}
            for r in rows]
    run = {
        "command": "grid",
        "seed": opt.seed,
        "model": {"path": str(model_path), "digest": checkpoint_digest(model_path)},
        "grid": {"epsilons": list(spec.epsilons), "iterations": list(spec.iterations),
                 "budgets": list(spec.budgets), "mode": spec.mode},
        "cells": flat,
    }
    evalharness.write_run_report(out / "grid.json", run, {"created_utc": _utc_now()})
    evalharness.write_summary_csv(out / "grid.csv", flat)
    print(f"grid: {len(flat)} cells -> {out}")
    return 0


def cmd_defend_eval(opt: _Options) -> int:
    model_path = Path(opt.get("model"))
    if not model_path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {model_path}")
    model = load_model(model_path)
    _, samples = _load_slice(opt)
    names = [t.strip() for t in str(opt.get("attackers", "weak,moderate,strong")).split(",") if t.strip()]
    unknown = [n for n in names if n not in ATTACKER_PRESETS]
    if unknown:
        raise NudgeError(f"unknown attacker presets {unknown}; known: {sorted(ATTACKER_PRESETS)}")
    configs = {n: ATTACKER_PRESETS[n] for n in names}
    remove_ks = _int_list(str(opt.get("remove_k", "0,8,16,32")))
    rows = evalharness.defense_sweep(model, samples, configs, remove_ks, run_seed=opt.seed)

    out = Path(opt.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    flat = [{"remove_k": r["remove_k"], "clean_accuracy": r["clean_accuracy"],
             **{f"rate_{tag}": rate for tag, rate in sorted(r["success_rates"].items())}}
            for r in rows]
    run = {
        "command": "defend-eval",
        "seed": opt.seed,
        "model": {"path": str(model_path), "digest": checkpoint_digest(model_path)},
        "attackers": {n: asdict(c) for n, c in configs.items()},
        "rows": flat,
    }
    evalharness.write_run_report(out / "defense.json", run, {"created_utc": _utc_now()})
    evalharness.write_summary_csv(out / "defense.csv", flat)
    print(f"defend-eval: {len(flat)} removal budgets -> {out}")
    return 0


def cmd_report(opt: _Options) -> int:
    run_dir = Path(opt.get("run"))
    path = run_dir / "report.json"
    if not path.is_file():
        raise FileNotFoundError(f"no report.json under {run_dir}")
    doc = json.loads(path.read_text())
    run = doc["run"]
    samples = [s for s in run["samples"] if s["error"] is None]
    success = float(np.mean([s["success"] for s in samples]))
    adv_acc = float(np.mean([s["pred_after"] == s["true_label"] for s in samples]))
    stored = run["summary"]
    if success != stored["success_rate"] or adv_acc != stored["adv_accuracy"]:
        print("report mismatch: stored summary does not match per-sample records",
              file=sys.stderr)
        return 1
    print(f"attack={stored['attack']} samples={stored['n_samples']} "
          f"failed={stored['n_failed']}")
    print(f"success_rate={stored['success_rate']:.4f} adv_accuracy={stored['adv_accuracy']:.4f}")
    print(f"mean_l2={stored['mean_l2']:.4f} max_l2={stored['max_l2']:.4f} "
          f"mean_linf={stored['mean_linf']:.4f} mean_edited={stored['mean_edited']:.2f}")
    print("summary matches per-sample records")
    return 0


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "attack": cmd_attack,
    "transfer": cmd_transfer,
    "grid": cmd_grid,
    "defend-eval": cmd_defend_eval,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opt = _Options(args)
        return _HANDLERS[args.command](opt)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NudgeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
