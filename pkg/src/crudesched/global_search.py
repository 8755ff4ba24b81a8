"""Global stage: pairwise-competition swarm search over full genomes.

Each generation the swarm is shuffled into pairs; the better-ranked member
of a pair survives untouched while the loser moves toward the winner and
(optionally) the swarm mean, with per-dimension random gains.  Only losers
are re-evaluated, so a generation costs half a swarm of evaluations.
Moves that leave the decode bounds are clamped and the offending velocity
component is zeroed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Instance, genome_bounds
from .simulate import Evaluator, Fitness, better, compare_fitness

__all__ = [
    "GlobalStageConfig",
    "GlobalResult",
    "TracePoint",
    "cso_step",
    "run_global",
    "compare_fitness",
]


@dataclass(frozen=True)
class GlobalStageConfig:
    swarm_size: int = 100
    max_evals: int = 100_000
    #: gain on the attraction toward the swarm mean position
    phi: float = 0.0
    #: number of best-so-far individuals handed to the local stage
    elite_size: int = 10

    def __post_init__(self):
        if self.swarm_size < 2 or self.swarm_size % 2:
            raise ValueError("swarm_size must be even and >= 2")
        if self.max_evals < self.swarm_size:
            raise ValueError("max_evals must cover the initial evaluation")
        if self.elite_size < 1:
            raise ValueError("elite_size must be >= 1")


class TracePoint(tuple):
    """(evaluations, cvn, cv, objective) of the best-so-far solution."""

    __slots__ = ()

    def __new__(cls, evals: int, fit: Fitness):
        return super().__new__(cls, (evals, fit.cvn, fit.cv, fit.objective))

    @property
    def evals(self) -> int:
        return self[0]

    @property
    def fitness(self) -> Fitness:
        return Fitness(self[1], self[2], self[3])


@dataclass
class GlobalResult:
    best_genome: np.ndarray
    best_fitness: Fitness
    #: top elite_size genomes with their fitnesses, best first
    elites: list[tuple[np.ndarray, Fitness]]
    population: list[np.ndarray]
    fitnesses: list[Fitness]
    trace: list[TracePoint]
    evals: int


def cso_step(
    positions: np.ndarray,
    velocities: np.ndarray,
    fitnesses: list[Fitness],
    lo: np.ndarray,
    hi: np.ndarray,
    phi: float,
    rng: np.random.Generator,
) -> list[int]:
    """One generation of pairwise competitions, updating losers in place.

    Returns the loser indices (the only rows modified); winner rows are left
    bit-identical.  Ties go to the first of the pair.
    """
    m, d = positions.shape
    mean = positions.mean(axis=0)
    perm = rng.permutation(m)
    losers: list[int] = []
    for i in range(0, m - 1, 2):
        a, b = int(perm[i]), int(perm[i + 1])
        w, l = (a, b) if compare_fitness(fitnesses[a], fitnesses[b]) <= 0 else (b, a)
        r1 = rng.random(d)
        r2 = rng.random(d)
        v = r1 * velocities[l] + r2 * (positions[w] - positions[l])
        if phi != 0.0:
            r3 = rng.random(d)
            v += phi * r3 * (mean - positions[l])
        x = positions[l] + v
        out = (x < lo) | (x > hi)
        np.clip(x, lo, hi, out=x)
        v[out] = 0.0
        positions[l] = x
        velocities[l] = v
        losers.append(l)
    return losers


def _merge_elites(
    elites: list[tuple[np.ndarray, Fitness]],
    candidates: list[tuple[np.ndarray, Fitness]],
    size: int,
) -> list[tuple[np.ndarray, Fitness]]:
    pool = elites + [(g.copy(), f) for g, f in candidates]
    pool.sort(key=lambda e: e[1].key())  # stable: earlier entries win ties
    return pool[:size]


def run_global(
    instance: Instance,
    initial_population: list[np.ndarray],
    config: GlobalStageConfig,
    rng: np.random.Generator,
    evaluator: Evaluator | None = None,
) -> GlobalResult:
    """Run the swarm stage to its evaluation budget and collect the elites."""
    ev = evaluator or Evaluator(instance)
    lo, hi = genome_bounds(instance)
    m = config.swarm_size
    if len(initial_population) != m:
        raise ValueError(
            f"initial population has {len(initial_population)} individuals, "
            f"config says {m}"
        )
    X = np.array([np.clip(g, lo, hi) for g in initial_population], dtype=float)
    V = np.zeros_like(X)
    fits = [ev.evaluate(X[i]) for i in range(m)]
    evals = m

    order = sorted(range(m), key=lambda i: fits[i].key())
    elites = _merge_elites(
        [], [(X[i], fits[i]) for i in order[: config.elite_size]], config.elite_size
    )
    best_g, best_f = elites[0][0].copy(), elites[0][1]
    trace = [TracePoint(evals, best_f)]

    while evals + m // 2 <= config.max_evals:
        losers = cso_step(X, V, fits, lo, hi, config.phi, rng)
        improved = []
        for l in losers:
            fits[l] = ev.evaluate(X[l])
            evals += 1
            improved.append((X[l], fits[l]))
        elites = _merge_elites(elites, improved, config.elite_size)
        if better(elites[0][1], best_f):
            best_g, best_f = elites[0][0].copy(), elites[0][1]
        trace.append(TracePoint(evals, best_f))

    return GlobalResult(
        best_genome=best_g,
        best_fitness=best_f,
        elites=elites,
        population=[X[i].copy() for i in range(m)],
        fitnesses=list(fits),
        trace=trace,
        evals=evals,
    )
