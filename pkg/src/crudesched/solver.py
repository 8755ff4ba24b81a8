"""Dual-stage solver orchestration, run reports, and multi-run aggregation.

Variants:

* ``dsea-hr``  — rule-guided initialization, swarm stage, flow refinement
* ``v1``       — like dsea-hr but with uniform-random initialization
* ``v2``       — like dsea-hr but without the flow-refinement stage
* ``cso-only`` — uniform-random initialization, swarm stage only

A run is fully determined by (instance, variant, seed, budgets): the master
seed spawns one independent stream per stage, so changing one stage's
consumption never perturbs the others.
"""
from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field

import numpy as np

from .global_search import GlobalStageConfig, TracePoint, run_global
from .heuristics import initialize_population, random_population
from .local_search import LocalStageConfig, run_local
from .model import Instance
from .simulate import Evaluator, Fitness

VARIANTS = ("dsea-hr", "v1", "v2", "cso-only")

__all__ = ["VARIANTS", "SolveSettings", "RunReport", "AggregateStats",
           "solve", "aggregate"]


@dataclass(frozen=True)
class SolveSettings:
    variant: str = "dsea-hr"
    seed: int = 0
    global_evals: int = 100_000
    local_evals: int = 30_000
    swarm_size: int = 100
    pop_size: int = 60
    elite_size: int = 10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; choose from {VARIANTS}"
            )

    @property
    def heuristic_init(self) -> bool:
        return self.variant in ("dsea-hr", "v2")

    @property
    def local_stage(self) -> bool:
        return self.variant in ("dsea-hr", "v1")


@dataclass
class RunReport:
    """Outcome of one solver run.  Serialized content is byte-deterministic
    for fixed inputs; wall time is tracked by callers, never stored here."""

    variant: str
    seed: int
    cvn: int
    cv: float
    objective: float
    feasible: bool
    evals_global: int
    evals_local: int
    trace_global: list[TracePoint]
    trace_local: list[TracePoint]
    best_genome: list[float] = field(repr=False)

    @property
    def fitness(self) -> Fitness:
        return Fitness(self.cvn, self.cv, self.objective)

    def to_doc(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "cvn": self.cvn,
            "cv": self.cv,
            "objective": self.objective,
            "feasible": self.feasible,
            "evals_global": self.evals_global,
            "evals_local": self.evals_local,
            "trace_global": [list(t) for t in self.trace_global],
            "trace_local": [list(t) for t in self.trace_local],
            "best_genome": self.best_genome,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), indent=2, sort_keys=False) + "\n"


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("init", "global", "local", "generator")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def solve(instance: Instance, settings: SolveSettings | None = None) -> RunReport:
    s = settings or SolveSettings()
    streams = _streams(s.seed)
    ev = Evaluator(instance)

    if s.heuristic_init:
        pop = initialize_population(instance, s.swarm_size, streams["init"])
    else:
        pop = random_population(instance, s.swarm_size, streams["init"])

    gconf = GlobalStageConfig(
        swarm_size=s.swarm_size, max_evals=s.global_evals, elite_size=s.elite_size
    )
    gres = run_global(instance, pop, gconf, streams["global"], evaluator=ev)

    best_g, best_f = gres.best_genome, gres.best_fitness
    trace_local: list[TracePoint] = []
    evals_local = 0
    if s.local_stage and s.local_evals > 0:
        lconf = LocalStageConfig(pop_size=s.pop_size, max_evals=s.local_evals)
        lres = run_local(instance, gres.elites, lconf, streams["local"],
                         evaluator=ev)
        trace_local = lres.trace
        evals_local = lres.evals
        if lres.best_fitness.key() <= best_f.key():
            best_g, best_f = lres.best_genome, lres.best_fitness

    return RunReport(
        variant=s.variant,
        seed=s.seed,
        cvn=best_f.cvn,
        cv=best_f.cv,
        objective=best_f.objective,
        feasible=best_f.feasible,
        evals_global=gres.evals,
        evals_local=evals_local,
        trace_global=gres.trace,
        trace_local=trace_local,
        best_genome=[float(x) for x in best_g],
    )


@dataclass
class AggregateStats:
    runs: int
    feasible_runs: int
    feasibility_rate: float
    objective_mean: float | None
    objective_std: float | None
    objective_min: float | None
    objective_max: float | None

    def to_doc(self) -> dict:
        return {
            "runs": self.runs,
            "feasible_runs": self.feasible_runs,
            "feasibility_rate": self.feasibility_rate,
            "objective_mean": self.objective_mean,
            "objective_std": self.objective_std,
            "objective_min": self.objective_min,
            "objective_max": self.objective_max,
        }


def aggregate(reports: list[RunReport]) -> AggregateStats:
    """Feasibility rate plus objective statistics over the feasible runs.

    The standard deviation is the population form (ddof 0); objective fields
    are None when no run was feasible.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    objs = [r.objective for r in reports if r.feasible]
    stats = AggregateStats(
        runs=len(reports),
        feasible_runs=len(objs),
        feasibility_rate=len(objs) / len(reports),
        objective_mean=None, objective_std=None,
        objective_min=None, objective_max=None,
    )
    if objs:
        stats.objective_mean = statistics.fmean(objs)
        stats.objective_std = statistics.pstdev(objs)
        stats.objective_min = min(objs)
        stats.objective_max = max(objs)
    return stats
