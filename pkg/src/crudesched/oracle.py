"""Reference checker and exhaustive search for small instances.

This module re-derives the fitness triple from first principles with plain
Python dicts — deliberately sharing no code with the simulation kernel — so
the two implementations can cross-validate each other.  The exhaustive
search enumerates every genome over a caller-chosen value lattice and
returns the true optimum under the feasibility-first ordering.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterator, Sequence

import numpy as np

from .model import Instance
from .simulate import Fitness

TOL = 1e-9

#: enumeration hard stop: refuse lattices with more points than this
ENUMERATION_GUARD = 10_000_000


class OracleSizeError(RuntimeError):
    """The requested enumeration lattice is too large to walk."""


def _slot(x: float, n_tanks: int) -> int:
    if math.isnan(x) or x < 0.5:
        return 0
    if x >= n_tanks - 0.5:
        return n_tanks
    return int(x + 0.5)


def _flow(x: float, hi: float) -> float:
    if math.isnan(x) or x < 0.0:
        return 0.0
    return min(x, hi)


def oracle_fitness(instance: Instance, genome: Sequence[float]) -> Fitness:
    """Violation count, normalized violation degree, and changeover cost.

    Independent reimplementation of the schedule semantics; see the kernel
    docstring for the shared rules.  Violations are accumulated as
    (count, degree) only — no per-record detail.
    """
    inst = instance
    lay = inst.layout
    g = list(map(float, genome))
    if len(g) != lay.dimension:
        raise ValueError(f"genome length {len(g)}, expected {lay.dimension}")
    T = lay.n_tanks
    nC = len(inst.crude_types)
    records: list[float] = []  # normalized magnitudes, one entry per violation

    def hit(normalized: float) -> None:
        records.append(normalized)

    def span(lo: float, hi: float) -> float:
        s = hi - lo if math.isfinite(hi) else 0.0
        return s if s > 0.0 else 1.0

    tank = {t.id: dict(t.initial_contents) for t in inst.tanks}
    cargo = {v.id: dict(v.cargo) for v in inst.vessels}
    inv = {r.id: r.initial_inventory for r in inst.residues}
    prev_state: dict[int, tuple[frozenset[int], int | None] | None] = {}
    for cdu in inst.cdus:
        if cdu.initial_charging_tanks is None and cdu.initial_residue_mode is None:
            prev_state[cdu.id] = None
        else:
            prev_state[cdu.id] = (
                frozenset(cdu.initial_charging_tanks or ()),
                cdu.initial_residue_mode,
            )
    changeovers = 0

    for n in range(lay.horizon):
        start = {tid: dict(content) for tid, content in tank.items()}
        start_tot = {tid: sum(content.values()) for tid, content in start.items()}
        avail = dict(start_tot)

        # decode this period's charging connections
        charge: dict[int, dict[int, float]] = {}
        for u, cdu in enumerate(inst.cdus):
            charge[cdu.id] = {}
            for j in range(lay.mt[u]):
                tid = _slot(g[lay.ct_index(n, u, j)], T)
                amt = _flow(g[lay.cf_index(n, u, j)], cdu.feed_hi)
                if tid and amt > 0.0:
                    charge[cdu.id][tid] = charge[cdu.id].get(tid, 0.0) + amt
        connected = {
            tid: [uid for uid, ch in charge.items() if tid in ch]
            for tid in range(1, T + 1)
        }

        # unloading: max rate, berth-limited, lowest-index crude first
        berth_used = 0
        recv_crude: dict[int, int] = {}
        inout_hit: set[int] = set()
        for v, ves in enumerate(inst.vessels):
            if ves.arrival_period > n + 1:
                continue
            hold = cargo[ves.id]
            if sum(hold.values()) <= TOL:
                continue
            slots = [_slot(g[lay.rt_index(n, v, s)], T) for s in (0, 1)]
            if slots[0] == 0 and slots[1] == 0:
                continue
            if berth_used >= inst.berth_count:
                hit(1.0)  # blocked at the berth
                continue
            berth_used += 1
            for si, tid in enumerate(slots):
                if tid == 0 or (si == 1 and slots[1] == slots[0]):
                    continue
                crude = next(
                    (c for c in sorted(hold) if hold[c] > TOL), None
                )
                if crude is None:
                    break
                headroom = inst.tank(tid).capacity_hi - sum(tank[tid].values())
                amt = min(hold[crude], headroom)
                if amt <= TOL:
                    continue
                if tid not in inout_hit and connected[tid]:
                    inout_hit.add(tid)
                    hit(1.0)  # receiving while charge-connected
                if tid not in recv_crude:
                    recv_crude[tid] = crude
                elif recv_crude[tid] != crude:
                    hit(1.0)  # second crude type into one tank
                hold[crude] -= amt
                tank[tid][crude] = tank[tid].get(crude, 0.0) + amt

        for tid in range(1, T + 1):
            if len(connected[tid]) > 2:
                hit(float(len(connected[tid]) - 2))

        # charging, blended-feed checks, residue mode, products
        res_add = {r.id: 0.0 for r in inst.residues}
        modes: dict[int, int | None] = {}
        for cdu in inst.cdus:
            feed: dict[int, float] = {}
            fu = 0.0
            for tid in sorted(charge[cdu.id]):
                req = charge[cdu.id][tid]
                draw = max(min(req, avail[tid]), 0.0)
                tk = inst.tank(tid)
                if req > draw + TOL:
                    hit((req - draw) / span(tk.capacity_lo, tk.capacity_hi))
                if draw > 0.0:
                    avail[tid] -= draw
                    frac = draw / start_tot[tid]
                    for c, m in start[tid].items():
                        taken = frac * m
                        tank[tid][c] = tank[tid].get(c, 0.0) - taken
                        feed[c] = feed.get(c, 0.0) + taken
                    fu += draw
            fspan = span(cdu.feed_lo, cdu.feed_hi)
            if fu <= TOL:
                if cdu.feed_lo > TOL:
                    hit(cdu.feed_lo / fspan)
            else:
                if fu < cdu.feed_lo - TOL:
                    hit((cdu.feed_lo - fu) / fspan)
                elif fu > cdu.feed_hi + TOL:
                    hit((fu - cdu.feed_hi) / fspan)
                for k in range(len(inst.property_names)):
                    pk = sum(
                        m * inst.crude(c).properties[k] for c, m in feed.items()
                    ) / fu
                    plo, phi = cdu.property_bounds[k]
                    if pk < plo - TOL:
                        hit((plo - pk) / span(plo, phi))
                    elif pk > phi + TOL:
                        hit((pk - phi) / span(plo, phi))

            mode: int | None = None
            fed = [c for c, m in feed.items() if m > TOL]
            if fu > TOL:
                compatible = [
                    r.id
                    for r in inst.residues
                    if all(r.id in inst.crude(c).producible_residues for c in fed)
                ]
                if compatible:
                    mode = min(
                        compatible,
                        key=lambda rid: (
                            inv[rid] - inst.residues[rid - 1].inventory_lo,
                            rid,
                        ),
                    )
                else:
                    hit(fu / fspan)  # blend can produce no residue type
            modes[cdu.id] = mode

            for s in range(len(inst.product_names)):
                fo = sum(
                    inst.crude(c).yields[cdu.id][s] * m for c, m in feed.items()
                )
                if fu > TOL:
                    olo, ohi = cdu.product_bounds[s]
                    if fo < olo - TOL:
                        hit((olo - fo) / span(olo, ohi))
                    elif fo > ohi + TOL:
                        hit((fo - ohi) / span(olo, ohi))
                if s == inst.residue_product and mode is not None:
                    res_add[mode] += fo

        for r in inst.residues:
            inv[r.id] += res_add[r.id] - r.consumption[n]
            ispan = span(r.inventory_lo, r.inventory_hi)
            if inv[r.id] < r.inventory_lo - TOL:
                hit((r.inventory_lo - inv[r.id]) / ispan)
            elif inv[r.id] > r.inventory_hi + TOL:
                hit((inv[r.id] - r.inventory_hi) / ispan)

        for tk in inst.tanks:
            tot = sum(tank[tk.id].values())
            tspan = span(tk.capacity_lo, tk.capacity_hi)
            if tot < tk.capacity_lo - TOL:
                hit((tk.capacity_lo - tot) / tspan)
            elif tot > tk.capacity_hi + TOL:
                hit((tot - tk.capacity_hi) / tspan)

        for cdu in inst.cdus:
            state = (frozenset(charge[cdu.id]), modes[cdu.id])
            prev = prev_state[cdu.id]
            if prev is not None and state != prev:
                changeovers += 1
            prev_state[cdu.id] = state

    return Fitness(
        cvn=len(records),
        cv=float(sum(records)),
        objective=instance.changeover_cost * changeovers,
    )


def lattice_size(domains: Sequence[Sequence[float]]) -> int:
    size = 1
    for d in domains:
        size *= len(d)
    return size


def genome_domains(
    instance: Instance,
    receive_tanks: Sequence[int] | None = None,
    receive_flows: Sequence[float] = (0.0,),
    charge_tanks: Sequence[int] | None = None,
    charge_flows: Sequence[float] = (0.0,),
) -> list[list[float]]:
    """Per-dimension value sets for exhaustive enumeration.

    Defaults cover every tank for the slot dimensions; flow dimensions must
    be given an explicit level set.
    """
    lay = instance.layout
    rt = list(receive_tanks) if receive_tanks is not None else list(range(lay.n_tanks + 1))
    ct = list(charge_tanks) if charge_tanks is not None else list(range(lay.n_tanks + 1))
    domains: list[list[float]] = [[0.0]] * lay.dimension
    for n in range(lay.horizon):
        for v in range(lay.n_vessels):
            for s in (0, 1):
                domains[lay.rt_index(n, v, s)] = [float(x) for x in rt]
                domains[lay.rf_index(n, v, s)] = [float(x) for x in receive_flows]
        for u in range(len(lay.mt)):
            for j in range(lay.mt[u]):
                domains[lay.ct_index(n, u, j)] = [float(x) for x in ct]
                domains[lay.cf_index(n, u, j)] = [float(x) for x in charge_flows]
    return domains


def enumerate_genomes(
    domains: Sequence[Sequence[float]], guard: int = ENUMERATION_GUARD
) -> Iterator[np.ndarray]:
    size = lattice_size(domains)
    if size > guard:
        raise OracleSizeError(
            f"lattice has {size} points, refusing to enumerate more than {guard}"
        )
    for combo in itertools.product(*domains):
        yield np.asarray(combo, dtype=float)


def oracle_search(
    instance: Instance,
    domains: Sequence[Sequence[float]],
    guard: int = ENUMERATION_GUARD,
) -> tuple[np.ndarray, Fitness, int]:
    """Exhaustively minimize the fitness triple over the lattice.

    Returns (best genome, best fitness, points examined); ties keep the
    first genome in enumeration order.
    """
    best_g: np.ndarray | None = None
    best_f: Fitness | None = None
    count = 0
    for g in enumerate_genomes(domains, guard=guard):
        f = oracle_fitness(instance, g)
        count += 1
        if best_f is None or f.key() < best_f.key():
            best_g, best_f = g, f
    if best_g is None:
        raise ValueError("empty lattice")
    return best_g, best_f, count
