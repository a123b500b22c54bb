"""Grey-box differential-evolution nudge attack.

The optimizer sees the model only through a probability callable
``prob_fn(points) -> (C,) probabilities`` -- no logits, no gradients. A
candidate encodes which points move and by how much: ``budget`` pairs of
(point index, absolute 3D offset from the original cloud), mirroring the
(position, value) encoding of single-pixel evolutionary attacks.

Each iteration mutates against the current pool best, t = best + m*(r1 - r2),
applies per-entry binomial crossover at rate CR, and replaces an incumbent
only on strict fitness improvement, so the best-of-pool fitness is
non-decreasing. Fitness is 1 - p(true class) untargeted, or p(target class)
targeted. Exactly one probability query per initial member and one per trial:
N + iterations*N queries in total.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInput
from .pointcloud import as_points, perturbation_norms
from .results import AttackResult, targeted_success, untargeted_success

MODE_UNTARGETED = "untargeted"
MODE_TARGETED = "targeted"


@dataclass(frozen=True)
class Candidate:
    """One pool member: edited point indices plus absolute offsets."""

    indices: np.ndarray  # (budget,) int64 in [0, P)
    offsets: np.ndarray  # (budget, 3) float64

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=np.float64))
        if self.indices.ndim != 1 or self.offsets.shape != (self.indices.shape[0], 3):
            raise InvalidInput("candidate needs (budget,) indices and (budget, 3) offsets")
        if not np.isfinite(self.offsets).all():
            raise InvalidInput("candidate offsets must be finite")


@dataclass(frozen=True)
class DEConfig:
    pool_size: int = 100
    budget: int = 1
    crossover_rate: float = 0.7
    mutation_factor: float = 0.5
    iterations: int = 10
    offset_bound: float = 0.5
    mode: str = MODE_UNTARGETED
    target_class: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.pool_size < 4:
            raise InvalidInput("pool_size must be >= 4")
        if self.budget < 1:
            raise InvalidInput("budget must be >= 1")
        if not (0.0 <= self.crossover_rate <= 1.0):
            raise InvalidInput("crossover_rate must be in [0, 1]")
        if self.iterations < 1:
            raise InvalidInput("iterations must be >= 1")
        if self.offset_bound <= 0:
            raise InvalidInput("offset_bound must be > 0")
        if self.mode not in (MODE_UNTARGETED, MODE_TARGETED):
            raise InvalidInput(f"unknown mode {self.mode!r}")
        if self.mode == MODE_TARGETED and self.target_class is None:
            raise InvalidInput("targeted mode requires target_class")


def apply_candidate(x, candidate: Candidate) -> np.ndarray:
    """Apply offsets to the original cloud; duplicate indices: last entry wins."""
    pts = as_points(x)
    if candidate.indices.size and (candidate.indices.min() < 0
                                   or candidate.indices.max() >= pts.shape[0]):
        raise InvalidInput("candidate point index out of range")
    adv = pts.copy()
    for idx, off in zip(candidate.indices, candidate.offsets):
        adv[idx] = pts[idx] + off
    return adv


def fitness_of(prob_fn, x, y: int, candidate: Candidate, mode: str = MODE_UNTARGETED,
               target_class: int | None = None) -> float:
    """Higher is better: 1 - p(true) untargeted, p(target) targeted."""
    probs = prob_fn(apply_candidate(x, candidate))
    if mode == MODE_TARGETED:
        return float(probs[target_class])
    return float(1.0 - probs[y])


def _mutate(best: Candidate, r1: Candidate, r2: Candidate, m: float, n_points: int) -> Candidate:
    raw = best.indices + m * (r1.indices - r2.indices)
    idx = np.clip(np.rint(raw), 0, n_points - 1).astype(np.int64)
    off = best.offsets + m * (r1.offsets - r2.offsets)
    return Candidate(idx, off)


def evolve_step(pool: list[Candidate], fitness: np.ndarray, best_index: int,
                prob_fn, x, y: int, config: DEConfig, rng: np.random.Generator):
    """One DE generation: mutate against the best, crossover, greedy replace.

    Returns (new pool, new fitness). Draws come from per-member child streams
    of ``rng``, so trial generation is independent of evaluation order.
    """
    n = len(pool)
    pts = as_points(x)
    best = pool[best_index]
    new_pool: list[Candidate] = []
    new_fitness = fitness.copy()
    member_rngs = rng.spawn(n)
    for j, mr in enumerate(member_rngs):
        r1 = pool[mr.integers(n)]
        r2 = pool[mr.integers(n)]
        trial = _mutate(best, r1, r2, config.mutation_factor, pts.shape[0])
        cross = mr.random(config.budget) < config.crossover_rate
        merged = Candidate(np.where(cross, trial.indices, pool[j].indices),
                           np.where(cross[:, None], trial.offsets, pool[j].offsets))
        f_trial = fitness_of(prob_fn, pts, y, merged, config.mode, config.target_class)
        if f_trial > new_fitness[j]:
            new_pool.append(merged)
            new_fitness[j] = f_trial
        else:
            new_pool.append(pool[j])
    return new_pool, new_fitness


def random_pool(rng: np.random.Generator, n_points: int, config: DEConfig) -> list[Candidate]:
    return [
        Candidate(rng.integers(0, n_points, size=config.budget),
                  rng.uniform(-config.offset_bound, config.offset_bound,
                              size=(config.budget, 3)))
        for _ in range(config.pool_size)
    ]


def nudge_de(prob_fn, x, y: int, config: DEConfig,
             initial_pool: list[Candidate] | None = None) -> AttackResult:
    """Full DE nudge attack; the result records the exact model query count."""
    pts = as_points(x)
    if config.budget > pts.shape[0]:
        raise InvalidInput(f"budget {config.budget} exceeds cloud size {pts.shape[0]}")
    if config.mode == MODE_TARGETED and config.target_class == y:
        raise InvalidInput("target_class must differ from the true label")

    queries = 0

    def counted(points):
        nonlocal queries
        queries += 1
        return prob_fn(points)

    root = np.random.default_rng(config.seed)
    init_rng, evolve_rng = root.spawn(2)
    pool = initial_pool if initial_pool is not None else random_pool(init_rng, pts.shape[0], config)
    if len(pool) != config.pool_size:
        raise InvalidInput(f"initial pool size {len(pool)} != configured {config.pool_size}")
    fitness = np.array([fitness_of(counted, pts, y, c, config.mode, config.target_class)
                        for c in pool])
    for _ in range(config.iterations):
        best_index = int(np.argmax(fitness))  # refreshed once per iteration
        pool, fitness = evolve_step(pool, fitness, best_index, counted, pts, y,
                                    config, evolve_rng)

    best = pool[int(np.argmax(fitness))]
    adv = apply_candidate(pts, best)
    # bookkeeping predictions sit outside the optimizer's query budget
    pred_before = int(np.argmax(prob_fn(pts)))
    pred_after = int(np.argmax(prob_fn(adv)))
    if config.mode == MODE_UNTARGETED:
        success = untargeted_success(pred_before, pred_after)
    else:
        success = targeted_success(pred_after, config.target_class)
    norms = perturbation_norms(pts, adv)
    return AttackResult(pred_before=pred_before, pred_after=pred_after, true_label=y,
                        success=success, l2=norms.l2, linf=norms.linf,
                        edited=norms.edited, queries=queries, adversarial=adv)


def config_echo(config: DEConfig) -> dict:
    return {"method": "de", **asdict(config)}
