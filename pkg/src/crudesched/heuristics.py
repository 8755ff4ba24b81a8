"""Knowledge-based population initialization.

Two empirical rules seed the global search:

* Receiving rule: a vessel discharges into an empty tank if one exists;
  otherwise into the tank whose stored crudes share the most producible
  residue types with the unloaded crude (highest similarity), ties broken
  by available capacity, then by lowest id.
* Charging rule: charging tanks are sampled with probability inversely
  proportional to the number of residue types their contents can produce,
  keeping versatile tanks in reserve for later periods.

Each individual is built period by period against a light forward model of
tank and vessel state, so the sampled decisions stay mutually consistent.
"""
from __future__ import annotations

from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .model import CrudeType, Instance

TOL = 1e-9


class ChargingProbability(NamedTuple):
    tank_id: int
    probability: float


def _producible_count(
    crude_ids: Sequence[int], crude_types: Sequence[CrudeType], n_residues: int
) -> int:
    """Size of the intersection of producible-residue sets over the crudes.

    An empty crude list (empty tank) intersects nothing and counts the full
    residue universe.
    """
    if not crude_ids:
        return n_residues
    acc = None
    for cid in crude_ids:
        s = crude_types[cid - 1].producible_residues
        acc = s if acc is None else acc & s
    return len(acc)


def similarity(
    unloading_crude: int,
    tank_contents: Mapping[int, float],
    crude_types: Sequence[CrudeType],
    n_residues: int | None = None,
) -> int:
    """Residue-set overlap between the unloaded crude and the tank mixture."""
    crudes = [unloading_crude] + [c for c, m in tank_contents.items() if m > TOL]
    if n_residues is None:
        n_residues = max(max(ct.producible_residues) for ct in crude_types)
    return _producible_count(crudes, crude_types, n_residues)


def charging_probabilities(
    eligible_tanks: Sequence[int],
    tank_contents: Mapping[int, Mapping[int, float]],
    crude_types: Sequence[CrudeType],
    n_residues: int,
) -> list[ChargingProbability]:
    """Selection weights over the eligible set, inverse to residue versatility."""
    if not eligible_tanks:
        raise ValueError("eligible tank set is empty")
    weights = []
    for tid in eligible_tanks:
        crudes = [c for c, m in tank_contents[tid].items() if m > TOL]
        count = _producible_count(crudes, crude_types, n_residues)
        weights.append(1.0 / max(count, 1))
    total = sum(weights)
    return [
        ChargingProbability(tid, w / total)
        for tid, w in zip(eligible_tanks, weights)
    ]


def select_receiving_tanks(
    unloading_crude: int,
    remaining_cargo: float,
    candidates: Sequence[int],
    tank_totals: Mapping[int, float],
    tank_contents: Mapping[int, Mapping[int, float]],
    capacity_hi: Mapping[int, float],
    crude_types: Sequence[CrudeType],
    n_residues: int,
) -> list[tuple[int, float]]:
    """Pick up to two receiving tanks with their max-rate amounts.

    Priority: empty tanks, then highest similarity; ties by available
    capacity, then lowest id.  The second tank is chosen after
    hypothetically filling the first.
    """
    chosen: list[tuple[int, float]] = []
    cargo = remaining_cargo
    pool = list(candidates)
    for _ in range(2):
        if cargo <= TOL:
            break
        best = None
        for tid in pool:
            headroom = capacity_hi[tid] - tank_totals[tid]
            if headroom <= TOL:
                continue
            empty = tank_totals[tid] <= TOL
            sim = similarity(unloading_crude, tank_contents[tid], crude_types,
                             n_residues)
            # sort key: empties first, then similarity, then headroom, then id
            key = (0 if empty else 1, -sim, -headroom, tid)
            if best is None or key < best[0]:
                best = (key, tid, headroom)
        if best is None:
            break
        _, tid, headroom = best
        amount = min(cargo, headroom)
        chosen.append((tid, amount))
        cargo -= amount
        pool.remove(tid)
        # hypothetical fill so the second pick sees the updated level
        tank_totals = dict(tank_totals)
        tank_totals[tid] += amount
    return chosen


class _State:
    """Forward model used while sampling one individual."""

    def __init__(self, inst: Instance):
        self.contents: dict[int, dict[int, float]] = {
            t.id: dict(t.initial_contents) for t in inst.tanks
        }
        self.cargo: dict[int, dict[int, float]] = {
            v.id: dict(v.cargo) for v in inst.vessels
        }

    def total(self, tid: int) -> float:
        return sum(self.contents[tid].values())


def initialize_individual(inst: Instance, rng: np.random.Generator) -> np.ndarray:
    lay = inst.layout
    nR = len(inst.residues)
    g = np.zeros(lay.dimension)
    state = _State(inst)
    for n in range(lay.horizon):
        snapshot = {t.id: dict(state.contents[t.id]) for t in inst.tanks}
        tot0 = {tid: sum(c.values()) for tid, c in snapshot.items()}
        committed = {t.id: 0.0 for t in inst.tanks}
        cdu_count = {t.id: 0 for t in inst.tanks}
        charges: list[tuple[int, int, float]] = []  # (cdu pos, tank id, amount)

        # charge amounts then charging tanks (Rule II)
        for u, cdu in enumerate(inst.cdus):
            taken: set[int] = set()
            for j in range(lay.mt[u]):
                cf = rng.uniform(0.0, cdu.feed_hi / lay.mt[u])
                tank_id = None
                for _ in range(3):
                    eligible = [
                        t.id
                        for t in inst.tanks
                        if t.id not in taken
                        and cdu_count[t.id] < 2
                        and tot0[t.id] - committed[t.id] - cf >= t.capacity_lo - TOL
                        and tot0[t.id] - committed[t.id] > TOL
                    ]
                    if eligible:
                        probs = charging_probabilities(
                            eligible, snapshot, inst.crude_types, nR
                        )
                        tank_id = int(
                            rng.choice([p.tank_id for p in probs],
                                       p=[p.probability for p in probs])
                        )
                        break
                    cf /= 2.0
                if tank_id is None:
                    continue
                taken.add(tank_id)
                committed[tank_id] += cf
                cdu_count[tank_id] += 1
                charges.append((u, tank_id, cf))
                g[lay.ct_index(n, u, j)] = tank_id
                g[lay.cf_index(n, u, j)] = cf

        # receiving tanks (Rule I) and max-rate amounts
        charging_now = {tid for _, tid, _ in charges}
        incoming: list[tuple[int, int, float]] = []  # (tank id, crude id, amount)
        totals_now = {t.id: state.total(t.id) for t in inst.tanks}
        for v, ves in enumerate(inst.vessels):
            if ves.arrival_period > n + 1:
                continue
            cargo = state.cargo[ves.id]
            crude = next((c for c in sorted(cargo) if cargo[c] > TOL), None)
            if crude is None:
                continue
            candidates = [t.id for t in inst.tanks if t.id not in charging_now]
            picks = select_receiving_tanks(
                crude, sum(cargo.values()), candidates, totals_now,
                state.contents, {t.id: t.capacity_hi for t in inst.tanks},
                inst.crude_types, nR,
            )
            for s, (tid, amount) in enumerate(picks):
                g[lay.rt_index(n, v, s)] = tid
                g[lay.rf_index(n, v, s)] = amount
                # deplete crudes in index order, as the simulator unloads
                left = amount
                for c in sorted(cargo):
                    if left <= TOL:
                        break
                    take = min(cargo[c], left)
                    if take > TOL:
                        cargo[c] -= take
                        incoming.append((tid, c, take))
                        left -= take
                totals_now[tid] += amount

        # advance state: charges draw on the period-start composition
        pool = dict(tot0)
        for _, tid, cf in charges:
            draw = min(cf, pool[tid])
            if draw <= 0.0:
                continue
            pool[tid] -= draw
            frac = draw / tot0[tid]
            for c, m in snapshot[tid].items():
                state.contents[tid][c] = state.contents[tid].get(c, 0.0) - frac * m
        for tid, c, amt in incoming:
            state.contents[tid][c] = state.contents[tid].get(c, 0.0) + amt
        for tid in state.contents:
            state.contents[tid] = {
                c: m for c, m in state.contents[tid].items() if m > TOL
            }
    return g


def initialize_population(
    inst: Instance, population_size: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Rule-guided initial population; one independent stream per individual."""
    if population_size < 1:
        raise ValueError("population_size must be >= 1")
    streams = rng.spawn(population_size)
    return [initialize_individual(inst, s) for s in streams]


def random_population(
    inst: Instance, population_size: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Uniform-random population over the genome bounds (no heuristic rules)."""
    from .model import genome_bounds

    lo, hi = genome_bounds(inst)
    streams = rng.spawn(population_size)
    return [s.uniform(lo, hi) for s in streams]
