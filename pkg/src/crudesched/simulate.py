"""Forward simulation of decoded schedules and the constrained fitness triple.

The heavy lifting happens in :mod:`crudesched.engine.core`; this module owns
buffer management, the Fitness/Trajectory views, the feasibility comparator,
and small standalone operations (proportional withdrawal, blended feed
properties, residue-mode selection) that the kernel inlines for speed.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .engine import core
from .model import (
    CrudeType,
    EncodingError,
    Instance,
    PeriodDecision,
    ResidueSpec,
    encode_decisions,
)

VIOLATION_NAMES = {
    core.V_RECEIPT_MIX: "receipt-mix",
    core.V_IN_OUT: "in-out-clash",
    core.V_TANK_SHARED: "tank-shared",
    core.V_BERTH: "berth-limit",
    core.V_TANK_LO: "tank-level-low",
    core.V_TANK_HI: "tank-level-high",
    core.V_OVERDRAW: "overdraw",
    core.V_FEED_LO: "feed-low",
    core.V_FEED_HI: "feed-high",
    core.V_PROP_LO: "property-low",
    core.V_PROP_HI: "property-high",
    core.V_PROD_LO: "product-low",
    core.V_PROD_HI: "product-high",
    core.V_RES_COMPAT: "residue-incompatible",
    core.V_RES_LO: "residue-low",
    core.V_RES_HI: "residue-high",
}


class Violation(NamedTuple):
    code: int
    name: str
    period: int  # 1-based
    entity: int  # 1-based id of the tank/CDU/vessel/residue concerned
    sub: int  # secondary index (crude/property/product/CDU) or 0
    magnitude: float  # raw, in the constraint's own units
    normalized: float  # magnitude divided by the constraint's bound span


@dataclass(frozen=True, order=False)
class Fitness:
    """(CVN, CV, objective): violation count, violation degree, changeover cost."""

    cvn: int
    cv: float
    objective: float

    @property
    def feasible(self) -> bool:
        return self.cvn == 0

    def key(self) -> tuple[int, float, float]:
        return (self.cvn, self.cv, self.objective)


def compare_fitness(a: Fitness, b: Fitness) -> int:
    """Feasibility-first ordering: -1 if a is better, 1 if b is, 0 on a tie.

    Lower violation count wins; ties break on lower violation degree, then
    on lower objective.
    """
    ka, kb = a.key(), b.key()
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


def better(a: Fitness, b: Fitness) -> bool:
    """True iff a strictly beats b."""
    return a.key() < b.key()


@dataclass(frozen=True)
class Trajectory:
    """Per-period time series produced by one simulation run.

    Periods are axis 0 everywhere; entity axes use 0-based positions while
    the id-typed integer arrays (receive tanks/crudes, modes) carry 1-based
    ids with 0 / -1 as "none".
    """

    instance: Instance
    tank_contents: np.ndarray  # [N, T, C]
    charge_by_crude: np.ndarray  # [N, U, T, C]
    charge_total: np.ndarray  # [N, U, T]
    feed_by_crude: np.ndarray  # [N, U, C]
    feed_total: np.ndarray  # [N, U]
    feed_properties: np.ndarray  # [N, U, K]
    product_out: np.ndarray  # [N, U, S]
    residue_mode: np.ndarray  # [N, U], 0-based residue index or -1
    residue_inventory: np.ndarray  # [N, R]
    vessel_inventory: np.ndarray  # [N, V, C]
    receive_tank: np.ndarray  # [N, V, 2], 1-based tank id or 0
    receive_amount: np.ndarray  # [N, V, 2]
    receive_crude: np.ndarray  # [N, V, 2], 1-based crude id or 0
    connections: np.ndarray  # [N, U, T] uint8
    changeover: np.ndarray  # [N, U] uint8
    violations: tuple[Violation, ...]

    @property
    def tank_totals(self) -> np.ndarray:  # [N, T]
        return self.tank_contents.sum(axis=2)

    @property
    def changeover_count(self) -> int:
        return int(self.changeover.sum())


def count_changeovers(trajectory: Trajectory) -> int:
    """Recount changeovers from the connection/mode series.

    Independent of the kernel's flags: a CDU incurs one changeover at a
    period boundary when its connected-tank set or its residue mode differs
    from the previous period; the boundary into period 1 compares against
    the instance's declared initial state, or is free if none is declared.
    """
    inst = trajectory.instance
    packed = inst.packed
    conn = trajectory.connections
    mode = trajectory.residue_mode
    total = 0
    for u in range(packed.n_cdus):
        for n in range(packed.horizon):
            if n == 0:
                if not packed.has_init_conn[u]:
                    continue
                prev_c, prev_m = packed.init_conn[u], packed.init_mode[u]
            else:
                prev_c, prev_m = conn[n - 1, u], mode[n - 1, u]
            if mode[n, u] != prev_m or np.any(conn[n, u] != prev_c):
                total += 1
    return total


class Evaluator:
    """Reusable simulation context for one instance.

    ``evaluate`` is a pure function of the genome; the evaluation counter is
    the only mutable state.  Use one Evaluator per thread/process when
    running concurrently.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        p = instance.packed
        self._p = p
        self.eval_count = 0
        N, V, T, C = p.horizon, p.n_vessels, p.n_tanks, p.n_crudes
        K, U, R, S = p.n_props, p.n_cdus, p.n_residues, p.n_products
        slots = int(p.ct_off[-1])
        self._cap = N * (3 * V + 3 * T + slots + U * (2 + K + S) + R) + 8
        z = np.zeros
        self._st = dict(
            tank_c=z((T, C)), prev_c=z((T, C)), prev_tot=z(T), avail=z(T),
            cargo=z((max(V, 1), C)), ir=z(R),
            conn=z((U, T), dtype=np.uint8), charge_amt=z((U, T)),
            prev_conn=z((U, T), dtype=np.uint8),
            prev_mode=z(U, dtype=np.int32),
            recv_crude=z(T, dtype=np.int32), inout_flag=z(T, dtype=np.uint8),
            res_add=z(R),
        )
        self._out = dict(
            records=z((self._cap, 6)),
            tr_tank=z((N, T, C)), tr_ftc=z((N, U, T, C)), tr_ft=z((N, U, T)),
            tr_fuc=z((N, U, C)), tr_fu=z((N, U)), tr_props=z((N, U, K)),
            tr_fo=z((N, U, S)), tr_mode=z((N, U), dtype=np.int32),
            tr_ir=z((N, R)), tr_vessel=z((N, max(V, 1), C)),
            tr_recv_tank=z((N, max(V, 1), 2), dtype=np.int32),
            tr_recv_amt=z((N, max(V, 1), 2)),
            tr_recv_crude=z((N, max(V, 1), 2), dtype=np.int32),
            tr_conn=z((N, U, T), dtype=np.uint8),
            tr_co=z((N, U), dtype=np.uint8),
        )
        # vessel axes are padded to length >= 1 so buffers stay non-empty
        # when V == 0; the kernel never touches the padding row

    def _run(self, genome: np.ndarray) -> int:
        p = self._p
        g = np.ascontiguousarray(genome, dtype=float)
        if g.shape != (self.instance.layout.dimension,):
            raise EncodingError(
                f"genome has shape {g.shape}, expected "
                f"({self.instance.layout.dimension},)"
            )
        st = self._st
        st["tank_c"][:] = p.tank0
        st["cargo"][: p.n_vessels] = p.cargo0
        st["ir"][:] = p.ir0
        nrec = core.run_schedule(
            g,
            p.n_vessels, p.n_tanks, p.n_crudes, p.n_props, p.n_cdus,
            p.n_residues, p.n_products, p.horizon, p.berths, p.residue_product,
            p.arrival, p.cap_lo, p.cap_hi, p.props, p.cp_mask, p.yields,
            p.feed_lo, p.feed_hi, p.mt, p.ct_off,
            p.prop_lo, p.prop_hi, p.prod_lo, p.prod_hi,
            p.ir_lo, p.ir_hi, p.cr,
            p.has_init_conn, p.init_conn, p.init_mode,
            p.norm_tank, p.norm_feed, p.norm_prop, p.norm_prod, p.norm_ir,
            st["tank_c"], st["prev_c"], st["prev_tot"], st["avail"],
            st["cargo"], st["ir"], st["conn"], st["charge_amt"],
            st["prev_conn"], st["prev_mode"], st["recv_crude"],
            st["inout_flag"], st["res_add"],
            **self._out,
        )
        if nrec >= self._cap:
            raise RuntimeError("violation record buffer overflow")
        return nrec

    def evaluate(self, genome: np.ndarray) -> Fitness:
        nrec = self._run(genome)
        self.eval_count += 1
        cv = float(self._out["records"][:nrec, 5].sum())
        obj = self._p.omega * float(self._out["tr_co"].sum())
        return Fitness(cvn=nrec, cv=cv, objective=obj)

    def simulate(self, genome: np.ndarray) -> Trajectory:
        nrec = self._run(genome)
        o = self._out
        recs = tuple(
            Violation(
                code=int(row[0]), name=VIOLATION_NAMES[int(row[0])],
                period=int(row[1]), entity=int(row[2]), sub=int(row[3]),
                magnitude=float(row[4]), normalized=float(row[5]),
            )
            for row in o["records"][:nrec]
        )
        return Trajectory(
            instance=self.instance,
            tank_contents=o["tr_tank"].copy(),
            charge_by_crude=o["tr_ftc"].copy(),
            charge_total=o["tr_ft"].copy(),
            feed_by_crude=o["tr_fuc"].copy(),
            feed_total=o["tr_fu"].copy(),
            feed_properties=o["tr_props"].copy(),
            product_out=o["tr_fo"].copy(),
            residue_mode=o["tr_mode"].copy(),
            residue_inventory=o["tr_ir"].copy(),
            vessel_inventory=o["tr_vessel"][:, : self._p.n_vessels].copy(),
            receive_tank=o["tr_recv_tank"][:, : self._p.n_vessels].copy(),
            receive_amount=o["tr_recv_amt"][:, : self._p.n_vessels].copy(),
            receive_crude=o["tr_recv_crude"][:, : self._p.n_vessels].copy(),
            connections=o["tr_conn"].copy(),
            changeover=o["tr_co"].copy(),
            violations=recs,
        )

    def simulate_decisions(self, decisions: Sequence[PeriodDecision]) -> Trajectory:
        return self.simulate(encode_decisions(decisions, self.instance))


def evaluate(instance: Instance, genome: np.ndarray) -> Fitness:
    """One-shot evaluation; allocate an Evaluator for repeated calls."""
    return Evaluator(instance).evaluate(genome)


def simulate(instance: Instance, decisions: Sequence[PeriodDecision]) -> Trajectory:
    return Evaluator(instance).simulate_decisions(decisions)


# ---------------------------------------------------------------------------
# Standalone operations (the kernel inlines equivalents of these)


def proportional_withdrawal(
    tank_contents: Mapping[int, float], total_draw: float
) -> dict[int, float]:
    """Split a draw across the tank's crudes in proportion to its contents.

    The output sums to the draw exactly (or to the truncated draw when the
    tank holds less than requested; the caller scores that shortfall).
    """
    if total_draw < 0:
        raise ValueError("total_draw must be >= 0")
    total = sum(tank_contents.values())
    if total <= 0.0 or total_draw == 0.0:
        return {c: 0.0 for c in tank_contents}
    draw = min(total_draw, total)
    return {c: draw * m / total for c, m in tank_contents.items()}


class ZeroFeedError(ValueError):
    """Feed properties are undefined for an empty blend."""


def feed_properties(
    feed_by_crude: Mapping[int, float], crude_types: Sequence[CrudeType]
) -> tuple[float, ...]:
    """Mass-weighted mean of each crude property over the blend."""
    total = sum(feed_by_crude.values())
    if total <= 0.0:
        raise ZeroFeedError("no feed: blended properties are undefined")
    n_props = len(crude_types[0].properties)
    out = []
    for k in range(n_props):
        out.append(
            sum(
                mass * crude_types[cid - 1].properties[k]
                for cid, mass in feed_by_crude.items()
            )
            / total
        )
    return tuple(out)


def select_residue_mode(
    feed_by_crude: Mapping[int, float],
    residues: Sequence[ResidueSpec],
    residue_inventory: Mapping[int, float],
) -> int | None:
    """Pick the residue type a CDU runs this period, or None if incompatible.

    Candidates are the residues every fed crude may produce; among them the
    one closest to its inventory lower bound wins (refill urgency), ties to
    the lowest id.
    """
    fed = [cid for cid, mass in feed_by_crude.items() if mass > core.TOL]
    if not fed:
        return None
    candidates = [
        r.id for r in residues if all(cid in r.allowed_crudes for cid in fed)
    ]
    if not candidates:
        return None
    by_r = {r.id: r for r in residues}
    return min(
        candidates, key=lambda rid: (residue_inventory[rid] - by_r[rid].inventory_lo, rid)
    )


def check_operating_constraints(
    decisions: Sequence[PeriodDecision], instance: Instance
) -> list[Violation]:
    """Static scan of the discrete operating rules over decoded decisions.

    Covers the tank in/out clash, the two-CDUs-per-tank cap, the berth
    limit, and the shared-receiving-tank case; the charging-tank count per
    CDU and the one-residue-mode rule hold by construction of the decoder
    and are asserted.  Dynamic rules (levels, properties, inventories) are
    the simulator's job.
    """
    out: list[Violation] = []
    vessels = {v.id: v for v in instance.vessels}
    for n, dec in enumerate(decisions, start=1):
        for cdu in instance.cdus:
            d = dec.charging.get(cdu.id)
            assert d is None or len(d.tank_ids) <= cdu.max_charging_tanks
        charging_tanks: dict[int, list[int]] = {}
        for uid, d in dec.charging.items():
            for tid in d.tank_ids:
                charging_tanks.setdefault(tid, []).append(uid)
        receiving_tanks: dict[int, list[int]] = {}
        for vid, d in dec.receiving.items():
            for tid in d.tank_ids:
                receiving_tanks.setdefault(tid, []).append(vid)
        for tid in sorted(set(receiving_tanks) & set(charging_tanks)):
            out.append(Violation(core.V_IN_OUT, VIOLATION_NAMES[core.V_IN_OUT],
                                 n, tid, 0, 1.0, 1.0))
        for tid, uids in sorted(charging_tanks.items()):
            if len(uids) > 2:
                excess = float(len(uids) - 2)
                out.append(Violation(core.V_TANK_SHARED,
                                     VIOLATION_NAMES[core.V_TANK_SHARED],
                                     n, tid, 0, excess, excess))
        unloading = [vid for vid, d in dec.receiving.items() if d.tank_ids]
        for vid in sorted(unloading)[instance.berth_count:]:
            out.append(Violation(core.V_BERTH, VIOLATION_NAMES[core.V_BERTH],
                                 n, vid, 0, 1.0, 1.0))
        for tid, vids in sorted(receiving_tanks.items()):
            if len(vids) > 1:
                crudes = set()
                for vid in vids:
                    crudes.update(vessels[vid].cargo)
                if len(crudes) > 1:
                    out.append(Violation(core.V_RECEIPT_MIX,
                                         VIOLATION_NAMES[core.V_RECEIPT_MIX],
                                         n, tid, 0, 1.0, 1.0))
    return out


# ---------------------------------------------------------------------------
# Exports


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def trajectory_to_csv(traj: Trajectory, fh: io.TextIOBase) -> None:
    """Long-format dump: one row per period per entity per field."""
    inst = traj.instance
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["period", "entity", "id", "field", "value"])
    N = inst.horizon_periods
    for n in range(N):
        for t, tank in enumerate(inst.tanks):
            w.writerow([n + 1, "tank", tank.id, "level",
                        _fmt(traj.tank_contents[n, t].sum())])
            for c, crude in enumerate(inst.crude_types):
                mass = traj.tank_contents[n, t, c]
                if mass > core.TOL:
                    w.writerow([n + 1, "tank", tank.id, f"crude:{crude.name}",
                                _fmt(mass)])
        for u, cdu in enumerate(inst.cdus):
            w.writerow([n + 1, "cdu", cdu.id, "feed", _fmt(traj.feed_total[n, u])])
            for k, pname in enumerate(inst.property_names):
                w.writerow([n + 1, "cdu", cdu.id, f"property:{pname}",
                            _fmt(traj.feed_properties[n, u, k])])
            for s, sname in enumerate(inst.product_names):
                w.writerow([n + 1, "cdu", cdu.id, f"product:{sname}",
                            _fmt(traj.product_out[n, u, s])])
            mode = traj.residue_mode[n, u]
            w.writerow([n + 1, "cdu", cdu.id, "residue_mode",
                        int(mode) + 1 if mode >= 0 else ""])
            w.writerow([n + 1, "cdu", cdu.id, "changeover",
                        int(traj.changeover[n, u])])
        for r, res in enumerate(inst.residues):
            w.writerow([n + 1, "residue", res.id, "inventory",
                        _fmt(traj.residue_inventory[n, r])])
        for v, ves in enumerate(inst.vessels):
            w.writerow([n + 1, "vessel", ves.id, "remaining",
                        _fmt(traj.vessel_inventory[n, v].sum())])


def gantt_description(traj: Trajectory) -> dict:
    """Tank-occupancy and CDU-connection intervals for the SVG emitter."""
    inst = traj.instance
    N = inst.horizon_periods
    receive = []
    for n in range(N):
        for v, ves in enumerate(inst.vessels):
            for si in range(2):
                tid = int(traj.receive_tank[n, v, si])
                if tid:
                    receive.append({
                        "tank": tid, "period": n + 1, "vessel": ves.id,
                        "crude": int(traj.receive_crude[n, v, si]),
                        "amount": round(float(traj.receive_amount[n, v, si]), 9),
                    })
    charge = []
    for u, cdu in enumerate(inst.cdus):
        for t, tank in enumerate(inst.tanks):
            start = None
            for n in range(N + 1):
                on = n < N and traj.connections[n, u, t]
                if on and start is None:
                    start = n + 1
                elif not on and start is not None:
                    charge.append({"tank": tank.id, "cdu": cdu.id,
                                   "start": start, "end": n})
                    start = None
    markers = [
        {"cdu": inst.cdus[u].id, "period": n + 1}
        for n in range(N)
        for u in range(len(inst.cdus))
        if traj.changeover[n, u]
    ]
    modes = [
        {"cdu": inst.cdus[u].id, "period": n + 1,
         "residue": int(traj.residue_mode[n, u]) + 1}
        for n in range(N)
        for u in range(len(inst.cdus))
        if traj.residue_mode[n, u] >= 0
    ]
    return {
        "horizon": N,
        "tanks": [t.id for t in inst.tanks],
        "cdus": [u.id for u in inst.cdus],
        "receive": receive,
        "charge": charge,
        "changeovers": markers,
        "modes": modes,
    }
