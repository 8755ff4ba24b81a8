"""Random instance generator biased toward feasibility.

Instances are built backward from a planted witness schedule: each CDU gets
a dedicated tank group charged at constant rates for the whole horizon, and
every bound (feed, property, product, inventory, capacity) is derived from
that schedule's envelope with margins.  Vessels discharge into spare tanks
that never feed a CDU, staggered so the berth limit holds.  The witness is
simulated before the instance is returned; generation fails loudly if it is
not feasible with zero changeover cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance, parse_instance, plan_genome
from .simulate import Evaluator


class GenerationError(RuntimeError):
    """The generated instance failed its own witness check."""


@dataclass(frozen=True)
class GeneratorSettings:
    n_cdus: int = 1
    tanks_per_cdu: int = 3
    n_vessels: int = 1
    horizon: int = 6
    n_residues: int = 2
    crudes_per_residue: int = 2
    berth_count: int = 1

    def __post_init__(self):
        if min(self.n_cdus, self.tanks_per_cdu, self.horizon,
               self.n_residues, self.crudes_per_residue) < 1:
            raise ValueError("all size parameters must be >= 1")
        if self.n_vessels < 0:
            raise ValueError("n_vessels must be >= 0")

    @property
    def n_crudes(self) -> int:
        return self.n_residues * self.crudes_per_residue

    @property
    def n_tanks(self) -> int:
        return self.n_cdus * self.tanks_per_cdu + self.n_vessels


def generate_instance(
    settings: GeneratorSettings, seed: int
) -> tuple[Instance, dict]:
    """Build an instance plus its witness document.

    The witness document records the feasible genome and its fitness triple
    so downstream tooling can re-verify the instance without re-deriving the
    schedule.
    """
    s = settings
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    nC, nR, nT = s.n_crudes, s.n_residues, s.n_tanks
    products = ["residue", "distillate", "naphtha"]

    # crude classes: crude c produces exactly residue (c-1) % nR + 1, which
    # pins the simulator's residue-mode choice on single-class blends
    res_of_crude = {c: (c - 1) % nR + 1 for c in range(1, nC + 1)}
    properties = rng.uniform(0.2, 3.0, size=(nC, 2))  # density-like, sulfur-like
    yields = rng.uniform(0.1, 0.3, size=(nC, len(products)))

    # one residue class per CDU; its tank group holds crudes of that class
    cdu_res = [rng.integers(1, nR + 1) for _ in range(s.n_cdus)]
    feed_slot = rng.uniform(2.0, 6.0, size=(s.n_cdus, s.tanks_per_cdu))
    group = {
        u: list(range(u * s.tanks_per_cdu + 1, (u + 1) * s.tanks_per_cdu + 1))
        for u in range(s.n_cdus)
    }
    tank_crude: dict[int, int] = {}
    for u in range(s.n_cdus):
        cls = [c for c in range(1, nC + 1) if res_of_crude[c] == cdu_res[u]]
        for j, tid in enumerate(group[u]):
            tank_crude[tid] = cls[int(rng.integers(len(cls)))]

    tanks = []
    for u in range(s.n_cdus):
        for j, tid in enumerate(group[u]):
            need = feed_slot[u, j] * s.horizon
            init = need + rng.uniform(1.0, 10.0)
            tanks.append({
                "id": tid,
                "capacity": [0.0, round(init + rng.uniform(5.0, 20.0), 6)],
                "initial_contents": {str(tank_crude[tid]): round(init, 6)},
            })

    # spare receiving tanks and their vessels, one unload per arrival period
    vessels = []
    for v in range(s.n_vessels):
        tid = s.n_cdus * s.tanks_per_cdu + v + 1
        crude = int(rng.integers(1, nC + 1))
        cargo = round(float(rng.uniform(10.0, 40.0)), 6)
        arrival = min(1 + (v // s.berth_count), s.horizon)
        vessels.append({"id": v + 1, "arrival_period": arrival,
                        "cargo": {str(crude): cargo}})
        tanks.append({
            "id": tid,
            "capacity": [0.0, round(cargo + rng.uniform(5.0, 15.0), 6)],
            "initial_contents": {},
        })
    tanks.sort(key=lambda d: d["id"])

    # feed, property, and product envelopes around the witness schedule
    cdus = []
    res_prod_rate = {r: 0.0 for r in range(1, nR + 1)}
    for u in range(s.n_cdus):
        fu = float(feed_slot[u].sum())
        blend = np.zeros(2)
        prod = np.zeros(len(products))
        for j, tid in enumerate(group[u]):
            c = tank_crude[tid]
            blend += feed_slot[u, j] * properties[c - 1]
            prod += feed_slot[u, j] * yields[c - 1]
        blend /= fu
        res_prod_rate[cdu_res[u]] += float(prod[0])
        cdus.append({
            "id": u + 1,
            "feed_bounds": [round(fu * 0.5, 6), round(fu * 1.5, 6)],
            "max_charging_tanks": s.tanks_per_cdu,
            "property_bounds": [
                [round(b * 0.7, 6), round(b * 1.3, 6)] for b in blend
            ],
            "product_bounds": {
                p: [0.0, round(float(prod[k]) * 2.0, 6)]
                for k, p in enumerate(products)
            },
        })

    # residue stock sits still under the witness: consumption == production
    residues = []
    for r in range(1, nR + 1):
        init = round(float(rng.uniform(10.0, 30.0)), 6)
        hi = round(init + res_prod_rate[r] + rng.uniform(10.0, 30.0), 6)
        residues.append({
            "id": r,
            "allowed_crudes": [c for c in range(1, nC + 1)
                               if res_of_crude[c] == r],
            "inventory_bounds": [0.0, hi],
            "initial_inventory": init,
            "consumption": round(res_prod_rate[r], 6),
        })

    doc = {
        "format_version": 1,
        "horizon_periods": s.horizon,
        "berth_count": s.berth_count,
        "changeover_cost": 1.0,
        "properties": ["density", "sulfur"],
        "products": products,
        "residue_product": "residue",
        "crudes": [
            {
                "id": c,
                "name": f"C{c}",
                "properties": [round(float(x), 6) for x in properties[c - 1]],
                "yields": {
                    str(u + 1): {
                        p: round(float(yields[c - 1][k]), 6)
                        for k, p in enumerate(products)
                    }
                    for u in range(s.n_cdus)
                },
            }
            for c in range(1, nC + 1)
        ],
        "vessels": vessels,
        "tanks": tanks,
        "cdus": cdus,
        "residues": residues,
    }
    inst = parse_instance(doc)

    charging = {
        n: {
            u + 1: [(tid, round(float(feed_slot[u, j]), 6))
                    for j, tid in enumerate(group[u])]
            for u in range(s.n_cdus)
        }
        for n in range(1, s.horizon + 1)
    }
    receiving = {}
    for v, vd in enumerate(vessels):
        tid = s.n_cdus * s.tanks_per_cdu + v + 1
        cargo = sum(vd["cargo"].values())
        receiving.setdefault(vd["arrival_period"], {})[vd["id"]] = [(tid, cargo)]
    witness = plan_genome(inst, receiving=receiving, charging=charging)

    fit = Evaluator(inst).evaluate(witness)
    if not fit.feasible or fit.objective != 0.0:
        raise GenerationError(
            f"witness schedule is not clean: cvn={fit.cvn} cv={fit.cv} "
            f"objective={fit.objective}"
        )
    witness_doc = {
        "seed": seed,
        "genome": [float(x) for x in witness],
        "fitness": {"cvn": fit.cvn, "cv": fit.cv, "objective": fit.objective},
    }
    return inst, witness_doc
