"""Local stage: differential-evolution refinement of the charge flows.

The discrete skeleton (which tanks receive, which tanks feed which CDU) of
the best global-stage solutions is frozen; only the continuous charging-flow
entries evolve.  Each individual breeds three trial flow vectors per
generation — one per mutation strategy, each paired with a parameter setting
drawn from a small pool — and is replaced only by a strictly better trial.
Out-of-bound trial components are pulled back to the midpoint between the
parent value and the violated bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .global_search import TracePoint
from .model import Instance, genome_bounds
from .simulate import Evaluator, Fitness, better

__all__ = [
    "LocalStageConfig",
    "LocalResult",
    "PARAMETER_POOL",
    "needs_repair",
    "make_trials",
    "run_local",
]

#: (scale factor, crossover rate) settings the strategies draw from
PARAMETER_POOL: tuple[tuple[float, float], ...] = (
    (1.0, 0.1),
    (1.0, 0.9),
    (0.8, 0.2),
)


@dataclass(frozen=True)
class LocalStageConfig:
    pop_size: int = 60
    max_evals: int = 30_000

    def __post_init__(self):
        if self.pop_size < 5:
            raise ValueError("pop_size must be >= 5 (mutation needs 5 peers)")
        if self.max_evals < 0:
            raise ValueError("max_evals must be >= 0")


@dataclass
class LocalResult:
    best_genome: np.ndarray
    best_fitness: Fitness
    trace: list[TracePoint]
    evals: int


def needs_repair(fitness: Fitness) -> bool:
    """The local stage doubles as repair whenever constraints are violated."""
    return fitness.cvn > 0


def _bound_repair(trial: np.ndarray, parent: np.ndarray,
                  lo: np.ndarray, hi: np.ndarray) -> None:
    low = trial < lo
    high = trial > hi
    trial[low] = 0.5 * (parent[low] + lo[low])
    trial[high] = 0.5 * (parent[high] + hi[high])


def make_trials(
    flows: np.ndarray,
    i: int,
    lo: np.ndarray,
    hi: np.ndarray,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Three trial flow vectors for individual ``i`` (one per strategy)."""
    ps, d = flows.shape
    peers = [j for j in range(ps) if j != i]
    trials = []

    # rand/1 with binomial crossover
    f, cr = PARAMETER_POOL[rng.integers(len(PARAMETER_POOL))]
    r = rng.choice(peers, size=3, replace=False)
    mutant = flows[r[0]] + f * (flows[r[1]] - flows[r[2]])
    mask = rng.random(d) < cr
    mask[rng.integers(d)] = True
    t = np.where(mask, mutant, flows[i])
    _bound_repair(t, flows[i], lo, hi)
    trials.append(t)

    # rand/2 with binomial crossover
    f, cr = PARAMETER_POOL[rng.integers(len(PARAMETER_POOL))]
    r = rng.choice(peers, size=5, replace=False)
    mutant = (flows[r[0]] + f * (flows[r[1]] - flows[r[2]])
              + f * (flows[r[3]] - flows[r[4]]))
    mask = rng.random(d) < cr
    mask[rng.integers(d)] = True
    t = np.where(mask, mutant, flows[i])
    _bound_repair(t, flows[i], lo, hi)
    trials.append(t)

    # current-to-rand/1 (rotation-invariant, no crossover)
    f, _ = PARAMETER_POOL[rng.integers(len(PARAMETER_POOL))]
    r = rng.choice(peers, size=3, replace=False)
    t = (flows[i] + rng.random() * (flows[r[0]] - flows[i])
         + f * (flows[r[1]] - flows[r[2]]))
    _bound_repair(t, flows[i], lo, hi)
    trials.append(t)
    return trials


def run_local(
    instance: Instance,
    elites: list[tuple[np.ndarray, Fitness]],
    config: LocalStageConfig,
    rng: np.random.Generator,
    evaluator: Evaluator | None = None,
) -> LocalResult:
    """Refine the elite solutions' flows under their frozen skeletons.

    The population seeds one individual per elite verbatim (so the incumbent
    best is never lost) and fills the rest with elite skeletons carrying
    re-randomized flows in [0, feed_hi/slots] per charging slot.
    """
    if not elites:
        raise ValueError("local stage needs at least one elite")
    ev = evaluator or Evaluator(instance)
    lay = instance.layout
    cf_idx = lay.cf_indices()
    lo_full, hi_full = genome_bounds(instance)
    lo, hi = lo_full[cf_idx], hi_full[cf_idx]
    # fresh flows start below feed_hi/slots so a full slot set stays chargeable
    slot_hi = np.empty_like(hi)
    k = 0
    for _ in range(lay.horizon):
        for u in range(len(lay.mt)):
            for _j in range(lay.mt[u]):
                slot_hi[k] = hi[k] / lay.mt[u]
                k += 1

    ps = config.pop_size
    genomes = []
    flows = np.empty((ps, len(cf_idx)))
    fits: list[Fitness] = []
    evals = 0
    for i in range(ps):
        g = elites[i % len(elites)][0].copy()
        if i < len(elites):
            f = elites[i % len(elites)][1]  # carried over, not re-evaluated
        else:
            g[cf_idx] = rng.uniform(lo, slot_hi)
            f = ev.evaluate(g)
            evals += 1
        genomes.append(g)
        flows[i] = g[cf_idx]
        fits.append(f)

    best_i = min(range(ps), key=lambda j: fits[j].key())
    best_g, best_f = genomes[best_i].copy(), fits[best_i]
    trace = [TracePoint(evals, best_f)]

    i = 0
    while evals + 3 <= config.max_evals:
        for trial_flows in make_trials(flows, i, lo, hi, rng):
            g = genomes[i].copy()
            g[cf_idx] = trial_flows
            f = ev.evaluate(g)
            evals += 1
            if better(f, fits[i]):
                genomes[i], flows[i], fits[i] = g, trial_flows, f
        if better(fits[i], best_f):
            best_g, best_f = genomes[i].copy(), fits[i]
            trace.append(TracePoint(evals, best_f))
        i = (i + 1) % ps

    trace.append(TracePoint(evals, best_f))
    return LocalResult(
        best_genome=best_g, best_fitness=best_f, trace=trace, evals=evals
    )
