"""Problem data model: instances, the flat genome encoding, and the file format.

An instance describes a marine-access refinery over a discrete horizon:
vessels deliver crude parcels into tanks, tanks blend and charge crude
distillation units (CDUs), and each CDU produces one residue type per period
that feeds downstream inventory.  A candidate schedule is a flat real vector
(the genome) whose per-period block holds, in order: receiving-tank slots and
receiving-flow slots for every vessel, then charging-tank slots and
charging-flow slots grouped by CDU.  Tank slots decode by round-then-clamp
with 0 meaning "inactive".

Entity ids in instance files are 1-based and contiguous; genome tank slots
carry those same ids directly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FORMAT_VERSION = 1

#: Tank-slot sentinel: a slot decoding to 0 selects no tank.
INACTIVE = 0


class InstanceError(ValueError):
    """Raised when an instance file fails validation.

    ``problems`` lists every failing field, one message each.
    """

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid instance:\n  " + "\n  ".join(self.problems))


class EncodingError(ValueError):
    """Raised on genome/instance dimension mismatch."""


@dataclass(frozen=True)
class CrudeType:
    id: int
    name: str
    #: one value per instance property (density g/cm3, sulfur %, TAN, ...)
    properties: tuple[float, ...]
    #: residue ids this crude may produce (inverse image of the residues'
    #: allowed-crude sets)
    producible_residues: frozenset[int]
    #: per CDU id, per product, yield fraction in [0, 1]
    yields: Mapping[int, tuple[float, ...]]


@dataclass(frozen=True)
class Vessel:
    id: int
    arrival_period: int
    cargo: Mapping[int, float]  # crude id -> mass (kt)

    @property
    def total_cargo(self) -> float:
        return sum(self.cargo.values())


@dataclass(frozen=True)
class Tank:
    id: int
    capacity_lo: float
    capacity_hi: float
    initial_contents: Mapping[int, float]  # crude id -> mass (kt)

    @property
    def initial_total(self) -> float:
        return sum(self.initial_contents.values())


@dataclass(frozen=True)
class CduSpec:
    id: int
    feed_lo: float
    feed_hi: float
    max_charging_tanks: int
    property_bounds: tuple[tuple[float, float], ...]
    product_bounds: tuple[tuple[float, float], ...]
    #: connection state before period 1; None means period 1 is changeover-free
    initial_charging_tanks: tuple[int, ...] | None = None
    initial_residue_mode: int | None = None


@dataclass(frozen=True)
class ResidueSpec:
    id: int
    allowed_crudes: frozenset[int]
    inventory_lo: float
    inventory_hi: float
    initial_inventory: float
    consumption: tuple[float, ...]  # kt per period, one entry per period


@dataclass(frozen=True)
class Instance:
    vessels: tuple[Vessel, ...]
    tanks: tuple[Tank, ...]
    crude_types: tuple[CrudeType, ...]
    cdus: tuple[CduSpec, ...]
    residues: tuple[ResidueSpec, ...]
    horizon_periods: int
    berth_count: int
    changeover_cost: float
    property_names: tuple[str, ...]
    product_names: tuple[str, ...]
    #: index into product_names of the residue stream
    residue_product: int

    @cached_property
    def layout(self) -> "GenomeLayout":
        return GenomeLayout.for_instance(self)

    @cached_property
    def packed(self) -> "PackedInstance":
        return pack_instance(self)

    def crude(self, crude_id: int) -> CrudeType:
        return self.crude_types[crude_id - 1]

    def tank(self, tank_id: int) -> Tank:
        return self.tanks[tank_id - 1]


# ---------------------------------------------------------------------------
# Genome layout


@dataclass(frozen=True)
class GenomeLayout:
    """Index arithmetic for the flat per-period genome blocks."""

    horizon: int
    n_vessels: int
    n_tanks: int
    mt: tuple[int, ...]  # max charging tanks per CDU
    ct_off: tuple[int, ...]  # prefix offsets of each CDU's slots, len U+1

    @classmethod
    def for_instance(cls, inst: Instance) -> "GenomeLayout":
        mt = tuple(u.max_charging_tanks for u in inst.cdus)
        off = [0]
        for m in mt:
            off.append(off[-1] + m)
        return cls(
            horizon=inst.horizon_periods,
            n_vessels=len(inst.vessels),
            n_tanks=len(inst.tanks),
            mt=mt,
            ct_off=tuple(off),
        )

    @property
    def total_slots(self) -> int:
        return self.ct_off[-1]

    @property
    def period_len(self) -> int:
        return 4 * self.n_vessels + 2 * self.total_slots

    @property
    def dimension(self) -> int:
        return self.horizon * self.period_len

    # Per-period offsets: RT | RF | CT | CF
    def rt_index(self, period: int, vessel: int, slot: int) -> int:
        return period * self.period_len + 2 * vessel + slot

    def rf_index(self, period: int, vessel: int, slot: int) -> int:
        return period * self.period_len + 2 * self.n_vessels + 2 * vessel + slot

    def ct_index(self, period: int, cdu: int, slot: int) -> int:
        return period * self.period_len + 4 * self.n_vessels + self.ct_off[cdu] + slot

    def cf_index(self, period: int, cdu: int, slot: int) -> int:
        return (
            period * self.period_len
            + 4 * self.n_vessels
            + self.total_slots
            + self.ct_off[cdu]
            + slot
        )

    def cf_indices(self) -> np.ndarray:
        """Positions of every charging-flow entry, the local-refinement subspace."""
        idx = []
        for n in range(self.horizon):
            base = n * self.period_len + 4 * self.n_vessels + self.total_slots
            idx.extend(range(base, base + self.total_slots))
        return np.asarray(idx, dtype=np.intp)


def genome_dimension(instance: Instance) -> int:
    """N x (4|V| + 2 sum(MT_u))."""
    return instance.layout.dimension


def genome_bounds(instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension decode bounds (lo, hi) used for clamping search moves."""
    lay = instance.layout
    lo = np.zeros(lay.dimension)
    hi = np.zeros(lay.dimension)
    rf_cap = [v.total_cargo for v in instance.vessels]
    for n in range(lay.horizon):
        for v in range(lay.n_vessels):
            for s in (0, 1):
                hi[lay.rt_index(n, v, s)] = lay.n_tanks
                hi[lay.rf_index(n, v, s)] = rf_cap[v]
        for u, cdu in enumerate(instance.cdus):
            for j in range(lay.mt[u]):
                hi[lay.ct_index(n, u, j)] = lay.n_tanks
                hi[lay.cf_index(n, u, j)] = cdu.feed_hi
    return lo, hi


def decode_tank_slot(value: float, n_tanks: int) -> int:
    """Round to the nearest integer, clamp to [0, T]; 0 means inactive."""
    if math.isnan(value) or value < 0.5:
        return INACTIVE
    if value >= n_tanks - 0.5:
        return n_tanks
    return math.floor(value + 0.5)


def _clamp_flow(value: float, hi: float) -> float:
    if math.isnan(value) or value < 0.0:
        return 0.0
    return min(value, hi)


# ---------------------------------------------------------------------------
# Decoded decisions


@dataclass(frozen=True)
class VesselDecision:
    tank_ids: tuple[int, ...]  # active, duplicate second slot dropped
    amounts: tuple[float, ...]  # requested flows; the simulator applies max rate


@dataclass(frozen=True)
class CduDecision:
    tank_ids: tuple[int, ...]  # connected tanks (active slot, flow > 0)
    amounts: tuple[float, ...]  # requested charge per tank, duplicates merged


@dataclass(frozen=True)
class PeriodDecision:
    receiving: Mapping[int, VesselDecision]  # vessel id -> decision
    charging: Mapping[int, CduDecision]  # cdu id -> decision
    # Raw slot values, kept so re-encoding reproduces the genome exactly.
    rt_slots: tuple[int, ...]
    rf_slots: tuple[float, ...]
    ct_slots: tuple[int, ...]
    cf_slots: tuple[float, ...]

    @property
    def empty(self) -> bool:
        return not self.receiving and not self.charging


def decode_genome(genome: np.ndarray, instance: Instance) -> list[PeriodDecision]:
    """Map a genome onto per-period decisions.

    Total on any in-dimension input: tank slots decode by round-then-clamp
    with 0/out-of-range meaning inactive, flow slots clamp to their bounds.
    Receiving entries appear for vessels that have arrived; whether a vessel
    still holds cargo is dynamic state and is resolved by the simulator.
    """
    lay = instance.layout
    g = np.asarray(genome, dtype=float)
    if g.shape != (lay.dimension,):
        raise EncodingError(
            f"genome has shape {g.shape}, expected ({lay.dimension},)"
        )
    T = lay.n_tanks
    rf_cap = [v.total_cargo for v in instance.vessels]
    out = []
    for n in range(lay.horizon):
        rt, rf, ct, cf = [], [], [], []
        receiving: dict[int, VesselDecision] = {}
        for v, vessel in enumerate(instance.vessels):
            pair = [decode_tank_slot(g[lay.rt_index(n, v, s)], T) for s in (0, 1)]
            amts = [_clamp_flow(g[lay.rf_index(n, v, s)], rf_cap[v]) for s in (0, 1)]
            rt.extend(pair)
            rf.extend(amts)
            if vessel.arrival_period > n + 1:
                continue
            tanks, flows = [], []
            for s in (0, 1):
                if pair[s] == INACTIVE or pair[s] in tanks:
                    continue
                tanks.append(pair[s])
                flows.append(amts[s])
            if tanks:
                receiving[vessel.id] = VesselDecision(tuple(tanks), tuple(flows))
        charging: dict[int, CduDecision] = {}
        for u, cdu in enumerate(instance.cdus):
            tanks: list[int] = []
            flows: list[float] = []
            for j in range(lay.mt[u]):
                tid = decode_tank_slot(g[lay.ct_index(n, u, j)], T)
                amt = _clamp_flow(g[lay.cf_index(n, u, j)], cdu.feed_hi)
                ct.append(tid)
                cf.append(amt)
                if tid == INACTIVE or amt <= 0.0:
                    continue
                if tid in tanks:
                    flows[tanks.index(tid)] += amt
                else:
                    tanks.append(tid)
                    flows.append(amt)
            if tanks:
                charging[cdu.id] = CduDecision(tuple(tanks), tuple(flows))
        out.append(
            PeriodDecision(
                receiving=receiving,
                charging=charging,
                rt_slots=tuple(rt),
                rf_slots=tuple(rf),
                ct_slots=tuple(ct),
                cf_slots=tuple(cf),
            )
        )
    return out


def encode_decisions(
    decisions: Sequence[PeriodDecision], instance: Instance
) -> np.ndarray:
    """Inverse of :func:`decode_genome` on the raw slot values."""
    lay = instance.layout
    if len(decisions) != lay.horizon:
        raise EncodingError(
            f"{len(decisions)} period decisions, expected {lay.horizon}"
        )
    g = np.zeros(lay.dimension)
    for n, dec in enumerate(decisions):
        for v in range(lay.n_vessels):
            for s in (0, 1):
                g[lay.rt_index(n, v, s)] = dec.rt_slots[2 * v + s]
                g[lay.rf_index(n, v, s)] = dec.rf_slots[2 * v + s]
        for u in range(len(lay.mt)):
            for j in range(lay.mt[u]):
                g[lay.ct_index(n, u, j)] = dec.ct_slots[lay.ct_off[u] + j]
                g[lay.cf_index(n, u, j)] = dec.cf_slots[lay.ct_off[u] + j]
    return g


def decisions_from_plan(
    instance: Instance,
    receiving: Mapping[int, Mapping[int, Sequence[tuple[int, float]]]] | None = None,
    charging: Mapping[int, Mapping[int, Sequence[tuple[int, float]]]] | None = None,
) -> list[PeriodDecision]:
    """Build decisions from sparse plans keyed by 1-based period.

    ``receiving[period][vessel_id]`` and ``charging[period][cdu_id]`` are
    sequences of (tank_id, amount).  Convenience for tests, fixtures, and the
    instance generator.
    """
    lay = instance.layout
    receiving = receiving or {}
    charging = charging or {}
    out = []
    for n in range(lay.horizon):
        rt = [0] * (2 * lay.n_vessels)
        rf = [0.0] * (2 * lay.n_vessels)
        ct = [0] * lay.total_slots
        cf = [0.0] * lay.total_slots
        for v, vessel in enumerate(instance.vessels):
            for s, (tid, amt) in enumerate(
                receiving.get(n + 1, {}).get(vessel.id, [])[:2]
            ):
                rt[2 * v + s] = tid
                rf[2 * v + s] = amt
        for u, cdu in enumerate(instance.cdus):
            entries = list(charging.get(n + 1, {}).get(cdu.id, []))
            if len(entries) > lay.mt[u]:
                raise EncodingError(
                    f"period {n + 1}: CDU {cdu.id} given {len(entries)} tanks, "
                    f"MT is {lay.mt[u]}"
                )
            for j, (tid, amt) in enumerate(entries):
                ct[lay.ct_off[u] + j] = tid
                cf[lay.ct_off[u] + j] = amt
        g_period = PeriodDecision(
            receiving={}, charging={}, rt_slots=tuple(rt), rf_slots=tuple(rf),
            ct_slots=tuple(ct), cf_slots=tuple(cf),
        )
        out.append(g_period)
    # Round-trip through the decoder so derived views are consistent.
    return decode_genome(encode_decisions(out, instance), instance)


def plan_genome(instance: Instance, receiving=None, charging=None) -> np.ndarray:
    return encode_decisions(
        decisions_from_plan(instance, receiving, charging), instance
    )


# ---------------------------------------------------------------------------
# Packed numeric form (what the simulation kernel consumes)


@dataclass(frozen=True)
class PackedInstance:
    n_vessels: int
    n_tanks: int
    n_crudes: int
    n_props: int
    n_cdus: int
    n_residues: int
    n_products: int
    horizon: int
    berths: int
    residue_product: int
    omega: float
    arrival: np.ndarray  # int32[V], 1-based period
    cargo0: np.ndarray  # double[V, C]
    rf_cap: np.ndarray  # double[V]
    cap_lo: np.ndarray  # double[T]
    cap_hi: np.ndarray  # double[T]
    tank0: np.ndarray  # double[T, C]
    props: np.ndarray  # double[C, K]
    cp_mask: np.ndarray  # uint8[C, R]
    yields: np.ndarray  # double[U, C, S]
    feed_lo: np.ndarray  # double[U]
    feed_hi: np.ndarray  # double[U]
    mt: np.ndarray  # int32[U]
    ct_off: np.ndarray  # int32[U+1]
    prop_lo: np.ndarray  # double[U, K]
    prop_hi: np.ndarray  # double[U, K]
    prod_lo: np.ndarray  # double[U, S]
    prod_hi: np.ndarray  # double[U, S]
    ir_lo: np.ndarray  # double[R]
    ir_hi: np.ndarray  # double[R]
    ir0: np.ndarray  # double[R]
    cr: np.ndarray  # double[R, N]
    has_init_conn: np.ndarray  # uint8[U]
    init_conn: np.ndarray  # uint8[U, T]
    init_mode: np.ndarray  # int32[U], 0-based residue index or -1
    # Violation-normalization scales (bound span, or 1 where degenerate)
    norm_tank: np.ndarray  # double[T]
    norm_feed: np.ndarray  # double[U]
    norm_prop: np.ndarray  # double[U, K]
    norm_prod: np.ndarray  # double[U, S]
    norm_ir: np.ndarray  # double[R]


def _span_scale(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = np.where(np.isfinite(hi), hi - lo, 0.0)
    return np.where(span > 0.0, span, 1.0)


def pack_instance(inst: Instance) -> PackedInstance:
    V, T, C = len(inst.vessels), len(inst.tanks), len(inst.crude_types)
    K, U = len(inst.property_names), len(inst.cdus)
    R, S, N = len(inst.residues), len(inst.product_names), inst.horizon_periods
    cargo0 = np.zeros((V, C))
    for v, ves in enumerate(inst.vessels):
        for cid, mass in ves.cargo.items():
            cargo0[v, cid - 1] = mass
    tank0 = np.zeros((T, C))
    for t, tk in enumerate(inst.tanks):
        for cid, mass in tk.initial_contents.items():
            tank0[t, cid - 1] = mass
    props = np.array([c.properties for c in inst.crude_types], dtype=float).reshape(
        C, K
    )
    cp = np.zeros((C, R), dtype=np.uint8)
    for c, crude in enumerate(inst.crude_types):
        for rid in crude.producible_residues:
            cp[c, rid - 1] = 1
    yields = np.zeros((U, C, S))
    for c, crude in enumerate(inst.crude_types):
        for uid, ys in crude.yields.items():
            yields[uid - 1, c, :] = ys
    prop_lo = np.array([[b[0] for b in u.property_bounds] for u in inst.cdus]).reshape(
        U, K
    )
    prop_hi = np.array([[b[1] for b in u.property_bounds] for u in inst.cdus]).reshape(
        U, K
    )
    prod_lo = np.array([[b[0] for b in u.product_bounds] for u in inst.cdus]).reshape(
        U, S
    )
    prod_hi = np.array([[b[1] for b in u.product_bounds] for u in inst.cdus]).reshape(
        U, S
    )
    cap_lo = np.array([t.capacity_lo for t in inst.tanks], dtype=float)
    cap_hi = np.array([t.capacity_hi for t in inst.tanks], dtype=float)
    feed_lo = np.array([u.feed_lo for u in inst.cdus], dtype=float)
    feed_hi = np.array([u.feed_hi for u in inst.cdus], dtype=float)
    ir_lo = np.array([r.inventory_lo for r in inst.residues], dtype=float)
    ir_hi = np.array([r.inventory_hi for r in inst.residues], dtype=float)
    has_init = np.zeros(U, dtype=np.uint8)
    init_conn = np.zeros((U, T), dtype=np.uint8)
    init_mode = np.full(U, -1, dtype=np.int32)
    for u, cdu in enumerate(inst.cdus):
        if cdu.initial_charging_tanks is not None or cdu.initial_residue_mode is not None:
            has_init[u] = 1
            for tid in cdu.initial_charging_tanks or ():
                init_conn[u, tid - 1] = 1
            if cdu.initial_residue_mode is not None:
                init_mode[u] = cdu.initial_residue_mode - 1
    lay = inst.layout
    return PackedInstance(
        n_vessels=V, n_tanks=T, n_crudes=C, n_props=K, n_cdus=U, n_residues=R,
        n_products=S, horizon=N, berths=inst.berth_count,
        residue_product=inst.residue_product, omega=inst.changeover_cost,
        arrival=np.array([v.arrival_period for v in inst.vessels], dtype=np.int32),
        cargo0=cargo0,
        rf_cap=cargo0.sum(axis=1),
        cap_lo=cap_lo, cap_hi=cap_hi, tank0=tank0, props=props, cp_mask=cp,
        yields=yields, feed_lo=feed_lo, feed_hi=feed_hi,
        mt=np.array(lay.mt, dtype=np.int32),
        ct_off=np.array(lay.ct_off, dtype=np.int32),
        prop_lo=prop_lo, prop_hi=prop_hi, prod_lo=prod_lo, prod_hi=prod_hi,
        ir_lo=ir_lo, ir_hi=ir_hi,
        ir0=np.array([r.initial_inventory for r in inst.residues], dtype=float),
        cr=np.array([r.consumption for r in inst.residues], dtype=float).reshape(R, N),
        has_init_conn=has_init, init_conn=init_conn, init_mode=init_mode,
        norm_tank=_span_scale(cap_lo, cap_hi),
        norm_feed=_span_scale(feed_lo, feed_hi),
        norm_prop=_span_scale(prop_lo, prop_hi),
        norm_prod=_span_scale(prod_lo, prod_hi),
        norm_ir=_span_scale(ir_lo, ir_hi),
    )


# ---------------------------------------------------------------------------
# Instance file I/O (JSON syntax)


def _check(problems: list[str], ok: bool, msg: str) -> bool:
    if not ok:
        problems.append(msg)
    return ok


def _ids_ok(problems: list[str], items: list[dict], kind: str) -> bool:
    ids = [it.get("id") for it in items]
    return _check(
        problems,
        ids == list(range(1, len(items) + 1)),
        f"{kind}: ids must be 1..{len(items)} in order, got {ids}",
    )


def _bound_pair(problems, raw, what, allow_open=False):
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or raw[0] is None
        or not all(isinstance(x, (int, float)) or x is None for x in raw)
    ):
        problems.append(f"{what}: expected [lo, hi], got {raw!r}")
        return (0.0, 0.0)
    lo = float(raw[0])
    hi = math.inf if (raw[1] is None and allow_open) else float(raw[1])
    _check(problems, lo <= hi, f"{what}: lower bound {lo} exceeds upper {hi}")
    return (lo, hi)


def parse_instance(doc: dict) -> Instance:
    """Validate and build an Instance from a parsed JSON document.

    Collects every violation before raising so diagnostics are field-level
    and complete.
    """
    problems: list[str] = []
    if doc.get("format_version") != FORMAT_VERSION:
        problems.append(
            f"format_version: expected {FORMAT_VERSION}, got {doc.get('format_version')!r}"
        )
    horizon = doc.get("horizon_periods", 0)
    _check(problems, isinstance(horizon, int) and horizon >= 1,
           f"horizon_periods: must be an integer >= 1, got {horizon!r}")
    berths = doc.get("berth_count", 1)
    _check(problems, isinstance(berths, int) and berths >= 1,
           f"berth_count: must be an integer >= 1, got {berths!r}")
    omega = doc.get("changeover_cost", 1.0)
    _check(problems, isinstance(omega, (int, float)) and omega >= 0,
           f"changeover_cost: must be >= 0, got {omega!r}")
    prop_names = tuple(doc.get("properties", []))
    prod_names = tuple(doc.get("products", []))
    _check(problems, len(prop_names) >= 1, "properties: at least one required")
    _check(problems, len(prod_names) >= 1, "products: at least one required")
    res_prod_name = doc.get("residue_product", prod_names[0] if prod_names else "")
    if res_prod_name in prod_names:
        residue_product = prod_names.index(res_prod_name)
    else:
        problems.append(f"residue_product: {res_prod_name!r} not in products")
        residue_product = 0

    crude_docs = doc.get("crudes", [])
    tank_docs = doc.get("tanks", [])
    cdu_docs = doc.get("cdus", [])
    residue_docs = doc.get("residues", [])
    vessel_docs = doc.get("vessels", [])
    _check(problems, len(crude_docs) >= 1, "crudes: at least one required")
    _check(problems, len(tank_docs) >= 1, "tanks: at least one required")
    _check(problems, len(cdu_docs) >= 1, "cdus: at least one required")
    _check(problems, len(residue_docs) >= 1, "residues: at least one required")
    for kind, items in (
        ("crudes", crude_docs), ("tanks", tank_docs), ("cdus", cdu_docs),
        ("residues", residue_docs), ("vessels", vessel_docs),
    ):
        _ids_ok(problems, items, kind)
    if problems:
        raise InstanceError(problems)

    C, T, U, R = len(crude_docs), len(tank_docs), len(cdu_docs), len(residue_docs)

    def _crude_map(raw: dict, what: str) -> dict[int, float]:
        out = {}
        for key, mass in (raw or {}).items():
            cid = int(key)
            if not 1 <= cid <= C:
                problems.append(f"{what}: unknown crude id {cid}")
                continue
            if not isinstance(mass, (int, float)) or mass <= 0:
                problems.append(f"{what}: crude {cid} mass must be > 0, got {mass!r}")
                continue
            out[cid] = float(mass)
        return out

    residues = []
    allowed_by_residue: dict[int, frozenset[int]] = {}
    for rd in residue_docs:
        rid = rd["id"]
        what = f"residue {rid}"
        allowed = frozenset(int(c) for c in rd.get("allowed_crudes", []))
        _check(problems, bool(allowed), f"{what}: allowed_crudes must be non-empty")
        for cid in allowed:
            _check(problems, 1 <= cid <= C, f"{what}: unknown crude id {cid}")
        lo, hi = _bound_pair(problems, rd.get("inventory_bounds", [0, 0]),
                             f"{what}: inventory_bounds")
        init = float(rd.get("initial_inventory", 0.0))
        _check(problems, lo <= init <= hi,
               f"{what}: initial_inventory {init} outside bounds [{lo}, {hi}]")
        cons = rd.get("consumption", 0.0)
        if isinstance(cons, (int, float)):
            cons_t = (float(cons),) * horizon
        else:
            cons_t = tuple(float(x) for x in cons)
            _check(problems, len(cons_t) == horizon,
                   f"{what}: consumption needs {horizon} entries, got {len(cons_t)}")
        _check(problems, all(x >= 0 for x in cons_t),
               f"{what}: consumption must be >= 0")
        allowed_by_residue[rid] = allowed
        residues.append(ResidueSpec(rid, allowed, lo, hi, init, cons_t))

    crudes = []
    for cd in crude_docs:
        cid = cd["id"]
        what = f"crude {cid}"
        pvals = tuple(float(x) for x in cd.get("properties", []))
        _check(problems, len(pvals) == len(prop_names),
               f"{what}: needs {len(prop_names)} property values, got {len(pvals)}")
        _check(problems, all(math.isfinite(x) and x >= 0 for x in pvals),
               f"{what}: property values must be finite and non-negative")
        producible = frozenset(
            rid for rid, allowed in allowed_by_residue.items() if cid in allowed
        )
        _check(problems, bool(producible),
               f"{what}: not allowed by any residue type (empty producible set)")
        ydoc = cd.get("yields", {})
        ymap = {}
        for uid_key, per_prod in ydoc.items():
            uid = int(uid_key)
            if not 1 <= uid <= U:
                problems.append(f"{what}: yields reference unknown CDU {uid}")
                continue
            ys = tuple(float(per_prod.get(p, 0.0)) for p in prod_names)
            _check(problems, all(0.0 <= y <= 1.0 for y in ys),
                   f"{what}: CDU {uid} yields must lie in [0, 1]")
            _check(problems, sum(ys) <= 1.0 + 1e-12,
                   f"{what}: CDU {uid} yields sum to {sum(ys):.4f} > 1")
            ymap[uid] = ys
        for uid in range(1, U + 1):
            ymap.setdefault(uid, (0.0,) * len(prod_names))
        crudes.append(CrudeType(cid, cd.get("name", f"C{cid}"), pvals, producible, ymap))

    tanks = []
    for td in tank_docs:
        tid = td["id"]
        what = f"tank {tid}"
        lo, hi = _bound_pair(problems, td.get("capacity", [0, 0]), f"{what}: capacity")
        contents = _crude_map(td.get("initial_contents"), f"{what}: initial_contents")
        total = sum(contents.values())
        _check(problems, total <= hi + 1e-9,
               f"{what}: initial mass {total} exceeds capacity_hi {hi}")
        _check(problems, total == 0 or total >= lo - 1e-9,
               f"{what}: initial mass {total} below capacity_lo {lo}")
        tanks.append(Tank(tid, lo, hi, contents))

    cdus = []
    for ud in cdu_docs:
        uid = ud["id"]
        what = f"cdu {uid}"
        flo, fhi = _bound_pair(problems, ud.get("feed_bounds", [0, 0]),
                               f"{what}: feed_bounds")
        mt = ud.get("max_charging_tanks", 1)
        _check(problems, isinstance(mt, int) and mt >= 1,
               f"{what}: max_charging_tanks must be an integer >= 1, got {mt!r}")
        pb_raw = ud.get("property_bounds", [])
        _check(problems, len(pb_raw) == len(prop_names),
               f"{what}: needs {len(prop_names)} property_bounds, got {len(pb_raw)}")
        pbounds = tuple(
            _bound_pair(problems, b, f"{what}: property_bounds[{k}]")
            for k, b in enumerate(pb_raw)
        )
        ob_doc = ud.get("product_bounds", {})
        obounds = []
        for p in prod_names:
            if p in ob_doc:
                obounds.append(_bound_pair(problems, ob_doc[p],
                                           f"{what}: product_bounds[{p}]",
                                           allow_open=True))
            else:
                obounds.append((0.0, math.inf))
        init_ct = ud.get("initial_charging_tanks")
        if init_ct is not None:
            init_ct = tuple(int(t) for t in init_ct)
            for t in init_ct:
                _check(problems, 1 <= t <= T,
                       f"{what}: initial_charging_tanks has unknown tank {t}")
        init_mode = ud.get("initial_residue_mode")
        if init_mode is not None:
            _check(problems, 1 <= int(init_mode) <= R,
                   f"{what}: initial_residue_mode {init_mode} is not a residue id")
            init_mode = int(init_mode)
        cdus.append(CduSpec(uid, flo, fhi, int(mt) if isinstance(mt, int) else 1,
                            pbounds, tuple(obounds), init_ct, init_mode))

    vessels = []
    for vd in vessel_docs:
        vid = vd["id"]
        what = f"vessel {vid}"
        ap = vd.get("arrival_period", 1)
        _check(problems, isinstance(ap, int) and 1 <= ap <= horizon,
               f"{what}: arrival_period {ap!r} outside horizon 1..{horizon}")
        cargo = _crude_map(vd.get("cargo"), f"{what}: cargo")
        _check(problems, bool(cargo), f"{what}: cargo must be non-empty")
        vessels.append(Vessel(vid, ap if isinstance(ap, int) else 1, cargo))

    if problems:
        raise InstanceError(problems)
    return Instance(
        vessels=tuple(vessels), tanks=tuple(tanks), crude_types=tuple(crudes),
        cdus=tuple(cdus), residues=tuple(residues), horizon_periods=horizon,
        berth_count=berths, changeover_cost=float(omega),
        property_names=prop_names, product_names=prod_names,
        residue_product=residue_product,
    )


def load_instance(path: str | Path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError([f"parse error: {exc}"]) from exc
    return parse_instance(doc)


def instance_to_doc(inst: Instance) -> dict:
    """Serialize back to the file schema (used by the generator)."""

    def num(x: float):
        return None if math.isinf(x) else x

    return {
        "format_version": FORMAT_VERSION,
        "horizon_periods": inst.horizon_periods,
        "berth_count": inst.berth_count,
        "changeover_cost": inst.changeover_cost,
        "properties": list(inst.property_names),
        "products": list(inst.product_names),
        "residue_product": inst.product_names[inst.residue_product],
        "crudes": [
            {
                "id": c.id,
                "name": c.name,
                "properties": list(c.properties),
                "yields": {
                    str(uid): dict(zip(inst.product_names, ys))
                    for uid, ys in sorted(c.yields.items())
                },
            }
            for c in inst.crude_types
        ],
        "vessels": [
            {"id": v.id, "arrival_period": v.arrival_period,
             "cargo": {str(c): m for c, m in sorted(v.cargo.items())}}
            for v in inst.vessels
        ],
        "tanks": [
            {"id": t.id, "capacity": [t.capacity_lo, t.capacity_hi],
             "initial_contents": {str(c): m for c, m in sorted(t.initial_contents.items())}}
            for t in inst.tanks
        ],
        "cdus": [
            {
                "id": u.id,
                "feed_bounds": [u.feed_lo, u.feed_hi],
                "max_charging_tanks": u.max_charging_tanks,
                "property_bounds": [list(b) for b in u.property_bounds],
                "product_bounds": {
                    p: [b[0], num(b[1])]
                    for p, b in zip(inst.product_names, u.product_bounds)
                },
                **(
                    {"initial_charging_tanks": list(u.initial_charging_tanks)}
                    if u.initial_charging_tanks is not None
                    else {}
                ),
                **(
                    {"initial_residue_mode": u.initial_residue_mode}
                    if u.initial_residue_mode is not None
                    else {}
                ),
            }
            for u in inst.cdus
        ],
        "residues": [
            {
                "id": r.id,
                "allowed_crudes": sorted(r.allowed_crudes),
                "inventory_bounds": [r.inventory_lo, r.inventory_hi],
                "initial_inventory": r.initial_inventory,
                "consumption": list(r.consumption),
            }
            for r in inst.residues
        ],
    }


def save_instance(inst: Instance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_doc(inst), fh, indent=2, sort_keys=False)
        fh.write("\n")


def bundled_instance_path(name: str = "refinery") -> Path:
    """Path of an instance shipped with the package."""
    return Path(__file__).parent / "data" / f"{name}.instance"
