"""Batch attack evaluation, transfer testing, grid search and defense sweeps.

Aggregation is a deterministic fold over sample-id order. Every run report
is a JSON document with a ``run`` subtree that is byte-reproducible for a
fixed seed and a ``meta`` subtree quarantining timestamps and wall times.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidInput
from .pointcloud import Dataset, PointCloud
from .results import AttackResult, SummaryReport
from . import attack_grad

AttackFn = Callable[[object, PointCloud, int], AttackResult]


@dataclass(frozen=True)
class GridSpec:
    epsilons: tuple[float, ...]
    iterations: tuple[int, ...]
    budgets: tuple[int, ...]
    mode: str = "untargeted"
    target_class: int | None = None  # fixed target when mode is targeted

    def __post_init__(self):
        if not (self.epsilons and self.iterations and self.budgets):
            raise InvalidInput("grid lists must be nonempty")


class Sample(NamedTuple):
    sample_id: int
    cloud: PointCloud


def select_slice(dataset: Dataset, count: int, seed: int) -> list[Sample]:
    """Deterministic evaluation slice; ids are dataset indices, kept sorted."""
    if count < 1 or count > len(dataset):
        raise InvalidInput(f"slice of {count} from dataset of {len(dataset)}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x51]))
    idx = np.sort(rng.choice(len(dataset), size=count, replace=False))
    return [Sample(int(i), dataset.clouds[i]) for i in idx]


def sample_seed(run_seed: int, sample_id: int) -> int:
    """Stable per-sample seed, independent of processing order."""
    return int(np.random.SeedSequence([run_seed, sample_id]).generate_state(1)[0])


def pick_target_class(rng_seed: int, true_label: int, n_classes: int) -> int:
    """Seeded uniform choice among the classes other than the true label."""
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 0x7a]))
    choices = [c for c in range(n_classes) if c != true_label]
    return int(choices[rng.integers(len(choices))])


def summarize(tag: str, config: dict, results: Sequence[AttackResult]) -> SummaryReport:
    ok = [r for r in results if r.error is None]
    n_failed = len(results) - len(ok)
    if not ok:
        raise InvalidInput("no successful attack runs to summarize")
    adv_acc = float(np.mean([r.pred_after == r.true_label for r in ok]))
    success = float(np.mean([r.success for r in ok]))
    init_err = float(np.mean([r.pred_before != r.true_label for r in ok]))
    # sanity relation: a correct adversarial prediction on an initially
    # correct sample can never count as success
    assert adv_acc <= 1.0 - success + init_err + 1e-12
    l2s = [r.l2 for r in ok]
    linfs = [r.linf for r in ok]
    return SummaryReport(
        attack=tag, config=config, n_samples=len(ok), n_failed=n_failed,
        adv_accuracy=adv_acc, success_rate=success,
        mean_l2=float(np.mean(l2s)), max_l2=float(np.max(l2s)),
        mean_linf=float(np.mean(linfs)), max_linf=float(np.max(linfs)),
        mean_edited=float(np.mean([r.edited for r in ok])),
    )


def evaluate_attack_batch(model, samples: Sequence[Sample], attack_fn: AttackFn,
                          tag: str, config: dict, run_seed: int = 0, jobs: int = 1):
    """Attack every sample in the slice; per-sample failures are recorded.

    Samples are independent (per-sample seeds, pure attacks), so ``jobs > 1``
    fans them out over a thread pool without changing any result. Returns
    (summary, per-sample results ordered by sample id).
    """
    if not samples:
        raise InvalidInput("empty evaluation slice")

    def run_one(item: Sample) -> AttackResult:
        sid, cloud = item
        started = time.perf_counter()
        try:
            res = attack_fn(model, cloud, sample_seed(run_seed, sid))
        except Exception as exc:  # record, don't abort the batch
            res = AttackResult(pred_before=-1, pred_after=-1, true_label=cloud.label,
                               success=False, l2=float("nan"), linf=float("nan"),
                               edited=0, error=f"{type(exc).__name__}: {exc}")
        res.sample_id = sid
        res.seconds = time.perf_counter() - started
        if res.true_label is None:
            res.true_label = cloud.label
        return res

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, samples))
    else:
        results = [run_one(s) for s in samples]
    results.sort(key=lambda r: r.sample_id)
    return summarize(tag, config, results), results


class TransferSample(NamedTuple):
    sample_id: int
    original: PointCloud
    adversarial: PointCloud


def transfer_eval(adv_set: Sequence[TransferSample], target_models: dict[str, object]) -> dict[str, float]:
    """Untargeted transfer rate per target model.

    A sample transfers when the target model's prediction on the adversarial
    cloud differs from its own prediction on the original cloud.
    """
    if not adv_set:
        raise InvalidInput("empty adversarial set")
    for ts in adv_set:
        if ts.original.n_points != ts.adversarial.n_points:
            raise InvalidInput(f"sample {ts.sample_id}: original and adversarial sizes differ")
    rates = {}
    for name, model in target_models.items():
        flipped = [
            int(np.argmax(model.logits(ts.adversarial.points)))
            != int(np.argmax(model.logits(ts.original.points)))
            for ts in adv_set
        ]
        rates[name] = float(np.mean(flipped))
    return rates


def grid_search(model, samples: Sequence[Sample], grid: GridSpec, run_seed: int = 0):
    """One untargeted/targeted summary per (budget, epsilon, iterations) cell."""
    rows = []
    for budget in grid.budgets:
        for epsilon in grid.epsilons:
            for iters in grid.iterations:
                cfg = attack_grad.GradAttackConfig(epsilon=epsilon, iterations=iters,
                                                   budget=budget, mode=grid.mode,
                                                   target_class=grid.target_class)
                summary, _ = evaluate_attack_batch(
                    model, samples, bind_grad_attack(cfg),
                    tag="grad", config=attack_grad.config_echo(cfg), run_seed=run_seed)
                rows.append({"budget": budget, "epsilon": epsilon, "iterations": iters,
                             "summary": summary})
    return rows


def argmax_cell(rows: Sequence[dict], budget: int) -> dict:
    """Highest success-rate cell for one budget; first cell wins exact ties."""
    cells = [r for r in rows if r["budget"] == budget]
    if not cells:
        raise InvalidInput(f"no grid cells for budget {budget}")
    best = max(cells, key=lambda r: r["summary"].success_rate)
    return best


def defense_sweep(model, samples: Sequence[Sample],
                  attacker_configs: dict[str, attack_grad.GradAttackConfig],
                  remove_ks: Sequence[int], run_seed: int = 0):
    """Clean accuracy and per-attacker success rate at each removal budget.

    Attacks are crafted once against the undefended model (the defense is
    blind). The remove_k = 0 row is the undefended baseline: raw predictions,
    no normalization.
    """
    from .defense import defended_predict

    remove_ks = list(remove_ks)
    if 0 not in remove_ks:
        remove_ks = [0, *remove_ks]
    adv_clouds: dict[str, list[AttackResult]] = {}
    for tag, cfg in attacker_configs.items():
        _, results = evaluate_attack_batch(
            model, samples, bind_grad_attack(cfg),
            tag=tag, config=attack_grad.config_echo(cfg), run_seed=run_seed)
        adv_clouds[tag] = results

    rows = []
    for k in sorted(set(remove_ks)):
        if k == 0:
            predict = lambda pts: int(np.argmax(model.logits(pts)))
        else:
            predict = lambda pts, _k=k: int(np.argmax(defended_predict(model, pts, _k)))
        clean_acc = float(np.mean([predict(c.points) == c.label for _, c in samples]))
        success = {}
        for tag, results in adv_clouds.items():
            by_id = {r.sample_id: r for r in results}
            flips = []
            for sid, cloud in samples:
                res = by_id[sid]
                if res.error is not None:
                    continue
                flips.append(predict(res.adversarial) != predict(cloud.points))
            success[tag] = float(np.mean(flips))
        rows.append({"remove_k": k, "clean_accuracy": clean_acc, "success_rates": success})
    return rows


# --- attack callbacks used by the CLI and sweeps ----------------------------

def model_classes(model) -> int:
    n = getattr(model, "n_classes", None)
    if n is None:
        raise InvalidInput("model does not expose n_classes")
    return int(n)


def bind_grad_attack(config: attack_grad.GradAttackConfig) -> AttackFn:
    """Bind a fixed gradient-attack config into the batch-eval callback shape."""

    def fn(model, cloud: PointCloud, seed: int) -> AttackResult:
        return attack_grad.nudge_grad(model, cloud.points, cloud.label, config)

    return fn


def make_grad_attack_fn(epsilon: float, iterations: int, budget: int,
                        mode: str = "untargeted",
                        target_spec: int | str | None = None) -> AttackFn:
    """Like :func:`bind_grad_attack`, but ``target_spec="random"`` draws a
    seeded per-sample target class distinct from the true label."""

    def fn(model, cloud: PointCloud, seed: int) -> AttackResult:
        target = target_spec
        if mode == attack_grad.MODE_TARGETED and target_spec == "random":
            target = pick_target_class(seed, cloud.label, model_classes(model))
        cfg = attack_grad.GradAttackConfig(epsilon, iterations, budget, mode, target)
        return attack_grad.nudge_grad(model, cloud.points, cloud.label, cfg)

    return fn


def write_summary_csv(path: str | Path, rows: Sequence[dict]) -> None:
    """Flat CSV for plotting; column order follows the first row's keys."""
    if not rows:
        raise InvalidInput("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_run_report(path: str | Path, run: dict, meta: dict) -> None:
    """Persist {"meta": ..., "run": ...}; only ``run`` is determinism-checked."""
    text = json.dumps({"meta": meta, "run": run}, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def run_bytes(path: str | Path) -> bytes:
    """Canonical bytes of a report's deterministic subtree."""
    doc = json.loads(Path(path).read_text())
    return json.dumps(doc["run"], indent=2, sort_keys=True).encode()
