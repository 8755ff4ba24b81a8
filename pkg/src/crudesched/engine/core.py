"""Hot simulation kernel: one genome in, trajectory + violation records out.

Written in Cython pure-Python mode: this file runs unmodified under CPython
(the fallback) and compiles to a C extension for ~50x faster evaluation.
All array arguments are preallocated by the caller and overwritten here;
nothing is allocated in this module.

Semantics, shared with the reference checker in ``crudesched.oracle``:

* Per period, in order: decode slots -> unload vessels -> charge CDUs ->
  pick residue mode -> products -> advance residue inventories -> bound scan.
* A charging-tank slot is "connected" iff it decodes to a tank and its flow
  slot is > 0; duplicate slots within one CDU merge their flows.
* Unloading runs at maximum rate: min(remaining cargo of the lowest-index
  crude on board, tank headroom), first slot then second, duplicate second
  slot ignored.  At most ``berths`` vessels unload per period; later vessels
  are blocked and scored.
* Charging draws proportionally from the start-of-period tank composition,
  capped by the start-of-period total not yet drawn this period, so the
  blending identity holds exactly and mass is conserved.  Material received
  this period becomes available next period.
* Violations never abort: the feasible part executes and the shortfall is
  recorded.  Each record is (code, period, entity1, entity2, raw magnitude,
  normalized magnitude); CVN is the record count, CV the normalized sum.
* A changeover for a CDU is any change of its connected-tank set or residue
  mode across a period boundary; the boundary into period 1 is free unless
  the instance declares an initial connection state.
"""
import cython

KERNEL_COMPILED = cython.compiled

# Violation record codes
V_RECEIPT_MIX = 1  # tank received a second crude type in one period
V_IN_OUT = 2  # tank received while charge-connected
V_TANK_SHARED = 3  # tank connected to more than two CDUs
V_BERTH = 4  # vessel blocked: berths exhausted
V_TANK_LO = 5  # tank level below lower bound at period end
V_TANK_HI = 6  # tank level above upper bound at period end
V_OVERDRAW = 7  # charge request exceeded available inventory
V_FEED_LO = 8  # CDU feed below lower bound
V_FEED_HI = 9  # CDU feed above upper bound
V_PROP_LO = 10  # blended feed property below bound
V_PROP_HI = 11  # blended feed property above bound
V_PROD_LO = 12  # product outflow below bound
V_PROD_HI = 13  # product outflow above bound
V_RES_COMPAT = 14  # fed crudes share no producible residue type
V_RES_LO = 15  # residue inventory below lower bound
V_RES_HI = 16  # residue inventory above upper bound

TOL = 1e-9


@cython.cfunc
@cython.inline
@cython.exceptval(check=False)
def _decode_slot(x: cython.double, n_tanks: cython.int) -> cython.int:
    if x != x:  # NaN
        return 0
    if x < 0.5:
        return 0
    # Compare before casting: a double far above INT_MAX must clamp, not
    # overflow the C conversion.
    if x >= n_tanks - 0.5:
        return n_tanks
    return cython.cast(cython.int, x + 0.5)


@cython.cfunc
@cython.inline
@cython.exceptval(check=False)
def _clampf(x: cython.double, hi: cython.double) -> cython.double:
    if x != x or x < 0.0:
        return 0.0
    if x > hi:
        return hi
    return x


@cython.ccall
def run_schedule(
    genome: cython.double[::1],
    n_vessels: cython.int,
    n_tanks: cython.int,
    n_crudes: cython.int,
    n_props: cython.int,
    n_cdus: cython.int,
    n_residues: cython.int,
    n_products: cython.int,
    horizon: cython.int,
    berths: cython.int,
    residue_product: cython.int,
    arrival: cython.int[::1],
    cap_lo: cython.double[::1],
    cap_hi: cython.double[::1],
    props: cython.double[:, ::1],
    cp_mask: cython.uchar[:, ::1],
    yields: cython.double[:, :, ::1],
    feed_lo: cython.double[::1],
    feed_hi: cython.double[::1],
    mt: cython.int[::1],
    ct_off: cython.int[::1],
    prop_lo: cython.double[:, ::1],
    prop_hi: cython.double[:, ::1],
    prod_lo: cython.double[:, ::1],
    prod_hi: cython.double[:, ::1],
    ir_lo: cython.double[::1],
    ir_hi: cython.double[::1],
    cr: cython.double[:, ::1],
    has_init_conn: cython.uchar[::1],
    init_conn: cython.uchar[:, ::1],
    init_mode: cython.int[::1],
    norm_tank: cython.double[::1],
    norm_feed: cython.double[::1],
    norm_prop: cython.double[:, ::1],
    norm_prod: cython.double[:, ::1],
    norm_ir: cython.double[::1],
    # state scratch, preloaded by the caller: tank_c <- tank0, cargo <- cargo0,
    # ir <- ir0; everything else is overwritten before use
    tank_c: cython.double[:, ::1],
    prev_c: cython.double[:, ::1],
    prev_tot: cython.double[::1],
    avail: cython.double[::1],
    cargo: cython.double[:, ::1],
    ir: cython.double[::1],
    conn: cython.uchar[:, ::1],
    charge_amt: cython.double[:, ::1],
    prev_conn: cython.uchar[:, ::1],
    prev_mode: cython.int[::1],
    recv_crude: cython.int[::1],
    inout_flag: cython.uchar[::1],
    res_add: cython.double[::1],
    # outputs
    records: cython.double[:, ::1],
    tr_tank: cython.double[:, :, ::1],
    tr_ftc: cython.double[:, :, :, ::1],
    tr_ft: cython.double[:, :, ::1],
    tr_fuc: cython.double[:, :, ::1],
    tr_fu: cython.double[:, ::1],
    tr_props: cython.double[:, :, ::1],
    tr_fo: cython.double[:, :, ::1],
    tr_mode: cython.int[:, ::1],
    tr_ir: cython.double[:, ::1],
    tr_vessel: cython.double[:, :, ::1],
    tr_recv_tank: cython.int[:, :, ::1],
    tr_recv_amt: cython.double[:, :, ::1],
    tr_recv_crude: cython.int[:, :, ::1],
    tr_conn: cython.uchar[:, :, ::1],
    tr_co: cython.uchar[:, ::1],
) -> cython.int:
    n: cython.int
    v: cython.int
    t: cython.int
    c: cython.int
    k: cython.int
    u: cython.int
    r: cython.int
    s: cython.int
    j: cython.int
    si: cython.int
    cap: cython.int = cython.cast(cython.int, records.shape[0])
    nrec: cython.int = 0
    total_slots: cython.int = ct_off[n_cdus]
    period_len: cython.int = 4 * n_vessels + 2 * total_slots
    base: cython.int
    slot1: cython.int
    slot2: cython.int
    berth_used: cython.int
    cnt: cython.int
    mode_u: cython.int
    changed: cython.int
    rem: cython.double
    headroom: cython.double
    amt: cython.double
    tot: cython.double
    req: cython.double
    draw: cython.double
    frac: cython.double
    fu: cython.double
    pk: cython.double
    fo_s: cython.double
    x: cython.double

    for n in range(horizon):
        base = n * period_len

        # snapshot start-of-period tank state: the charging pool
        for t in range(n_tanks):
            tot = 0.0
            for c in range(n_crudes):
                prev_c[t, c] = tank_c[t, c]
                tot += tank_c[t, c]
            prev_tot[t] = tot
            avail[t] = tot
            recv_crude[t] = 0
            inout_flag[t] = 0
        for r in range(n_residues):
            res_add[r] = 0.0

        # decode charging connections for this period
        for u in range(n_cdus):
            for t in range(n_tanks):
                conn[u, t] = 0
                charge_amt[u, t] = 0.0
        for u in range(n_cdus):
            for j in range(mt[u]):
                slot1 = _decode_slot(genome[base + 4 * n_vessels + ct_off[u] + j],
                                     n_tanks)
                x = _clampf(
                    genome[base + 4 * n_vessels + total_slots + ct_off[u] + j],
                    feed_hi[u],
                )
                if slot1 > 0 and x > 0.0:
                    conn[u, slot1 - 1] = 1
                    charge_amt[u, slot1 - 1] += x

        # (a) unloading, at maximum rate, berth-limited
        berth_used = 0
        for v in range(n_vessels):
            for si in range(2):
                tr_recv_tank[n, v, si] = 0
                tr_recv_amt[n, v, si] = 0.0
                tr_recv_crude[n, v, si] = 0
            if arrival[v] > n + 1:
                continue
            rem = 0.0
            for c in range(n_crudes):
                rem += cargo[v, c]
            if rem <= TOL:
                continue
            slot1 = _decode_slot(genome[base + 2 * v], n_tanks)
            slot2 = _decode_slot(genome[base + 2 * v + 1], n_tanks)
            if slot1 == 0 and slot2 == 0:
                continue
            if berth_used >= berths:
                if nrec < cap:
                    records[nrec, 0] = V_BERTH
                    records[nrec, 1] = n + 1
                    records[nrec, 2] = v + 1
                    records[nrec, 3] = 0
                    records[nrec, 4] = 1.0
                    records[nrec, 5] = 1.0
                    nrec += 1
                continue
            berth_used += 1
            for si in range(2):
                t = (slot1 if si == 0 else slot2) - 1
                if t < 0:
                    continue
                if si == 1 and slot2 == slot1:
                    continue
                c = -1
                for j in range(n_crudes):
                    if cargo[v, j] > TOL:
                        c = j
                        break
                if c < 0:
                    break
                tot = 0.0
                for j in range(n_crudes):
                    tot += tank_c[t, j]
                headroom = cap_hi[t] - tot
                amt = cargo[v, c]
                if headroom < amt:
                    amt = headroom
                if amt <= TOL:
                    continue
                if inout_flag[t] == 0:
                    for u in range(n_cdus):
                        if conn[u, t] != 0:
                            inout_flag[t] = 1
                            if nrec < cap:
                                records[nrec, 0] = V_IN_OUT
                                records[nrec, 1] = n + 1
                                records[nrec, 2] = t + 1
                                records[nrec, 3] = 0
                                records[nrec, 4] = 1.0
                                records[nrec, 5] = 1.0
                                nrec += 1
                            break
                if recv_crude[t] == 0:
                    recv_crude[t] = c + 1
                elif recv_crude[t] != c + 1:
                    if nrec < cap:
                        records[nrec, 0] = V_RECEIPT_MIX
                        records[nrec, 1] = n + 1
                        records[nrec, 2] = t + 1
                        records[nrec, 3] = c + 1
                        records[nrec, 4] = 1.0
                        records[nrec, 5] = 1.0
                        nrec += 1
                cargo[v, c] -= amt
                tank_c[t, c] += amt
                tr_recv_tank[n, v, si] = t + 1
                tr_recv_amt[n, v, si] = amt
                tr_recv_crude[n, v, si] = c + 1

        # tank shared by more than two CDUs
        for t in range(n_tanks):
            cnt = 0
            for u in range(n_cdus):
                if conn[u, t] != 0:
                    cnt += 1
            if cnt > 2:
                if nrec < cap:
                    records[nrec, 0] = V_TANK_SHARED
                    records[nrec, 1] = n + 1
                    records[nrec, 2] = t + 1
                    records[nrec, 3] = 0
                    records[nrec, 4] = cnt - 2
                    records[nrec, 5] = cnt - 2
                    nrec += 1

        # (b) charging: proportional withdrawal from the period-start pool
        for u in range(n_cdus):
            fu = 0.0
            for c in range(n_crudes):
                tr_fuc[n, u, c] = 0.0
            for t in range(n_tanks):
                tr_ft[n, u, t] = 0.0
                for c in range(n_crudes):
                    tr_ftc[n, u, t, c] = 0.0
                if conn[u, t] == 0:
                    continue
                req = charge_amt[u, t]
                draw = req
                if avail[t] < draw:
                    draw = avail[t]
                if draw < 0.0:
                    draw = 0.0
                if req > draw + TOL:
                    if nrec < cap:
                        records[nrec, 0] = V_OVERDRAW
                        records[nrec, 1] = n + 1
                        records[nrec, 2] = t + 1
                        records[nrec, 3] = u + 1
                        records[nrec, 4] = req - draw
                        records[nrec, 5] = (req - draw) / norm_tank[t]
                        nrec += 1
                if draw > 0.0:
                    avail[t] -= draw
                    frac = draw / prev_tot[t]
                    for c in range(n_crudes):
                        x = frac * prev_c[t, c]
                        tank_c[t, c] -= x
                        tr_ftc[n, u, t, c] = x
                        tr_fuc[n, u, c] += x
                    tr_ft[n, u, t] = draw
                    fu += draw
            tr_fu[n, u] = fu

            # feed-rate and blended-property checks
            if fu <= TOL:
                for k in range(n_props):
                    tr_props[n, u, k] = 0.0
                if feed_lo[u] > TOL:
                    if nrec < cap:
                        records[nrec, 0] = V_FEED_LO
                        records[nrec, 1] = n + 1
                        records[nrec, 2] = u + 1
                        records[nrec, 3] = 0
                        records[nrec, 4] = feed_lo[u]
                        records[nrec, 5] = feed_lo[u] / norm_feed[u]
                        nrec += 1
            else:
                if fu < feed_lo[u] - TOL:
                    if nrec < cap:
                        records[nrec, 0] = V_FEED_LO
                        records[nrec, 1] = n + 1
                        records[nrec, 2] = u + 1
                        records[nrec, 3] = 0
                        records[nrec, 4] = feed_lo[u] - fu
                        records[nrec, 5] = (feed_lo[u] - fu) / norm_feed[u]
                        nrec += 1
                elif fu > feed_hi[u] + TOL:
                    if nrec < cap:
                        records[nrec, 0] = V_FEED_HI
                        records[nrec, 1] = n + 1
                        records[nrec, 2] = u + 1
                        records[nrec, 3] = 0
                        records[nrec, 4] = fu - feed_hi[u]
                        records[nrec, 5] = (fu - feed_hi[u]) / norm_feed[u]
                        nrec += 1
                for k in range(n_props):
                    pk = 0.0
                    for c in range(n_crudes):
                        pk += tr_fuc[n, u, c] * props[c, k]
                    pk /= fu
                    tr_props[n, u, k] = pk
                    if pk < prop_lo[u, k] - TOL:
                        if nrec < cap:
                            records[nrec, 0] = V_PROP_LO
                            records[nrec, 1] = n + 1
                            records[nrec, 2] = u + 1
                            records[nrec, 3] = k + 1
                            records[nrec, 4] = prop_lo[u, k] - pk
                            records[nrec, 5] = (prop_lo[u, k] - pk) / norm_prop[u, k]
                            nrec += 1
                    elif pk > prop_hi[u, k] + TOL:
                        if nrec < cap:
                            records[nrec, 0] = V_PROP_HI
                            records[nrec, 1] = n + 1
                            records[nrec, 2] = u + 1
                            records[nrec, 3] = k + 1
                            records[nrec, 4] = pk - prop_hi[u, k]
                            records[nrec, 5] = (pk - prop_hi[u, k]) / norm_prop[u, k]
                            nrec += 1

            # (c) residue mode: intersection of producible sets, refill urgency
            mode_u = -1
            if fu > TOL:
                cnt = 0
                for r in range(n_residues):
                    changed = 1
                    for c in range(n_crudes):
                        if tr_fuc[n, u, c] > TOL and cp_mask[c, r] == 0:
                            changed = 0
                            break
                    if changed != 0:
                        cnt += 1
                        if mode_u < 0:
                            mode_u = r
                        elif ir[r] - ir_lo[r] < ir[mode_u] - ir_lo[mode_u]:
                            mode_u = r
                if cnt == 0:
                    if nrec < cap:
                        records[nrec, 0] = V_RES_COMPAT
                        records[nrec, 1] = n + 1
                        records[nrec, 2] = u + 1
                        records[nrec, 3] = 0
                        records[nrec, 4] = fu
                        records[nrec, 5] = fu / norm_feed[u]
                        nrec += 1
            tr_mode[n, u] = mode_u

            # (d) product outputs
            for s in range(n_products):
                fo_s = 0.0
                for c in range(n_crudes):
                    fo_s += yields[u, c, s] * tr_fuc[n, u, c]
                tr_fo[n, u, s] = fo_s
                if fu > TOL:
                    if fo_s < prod_lo[u, s] - TOL:
                        if nrec < cap:
                            records[nrec, 0] = V_PROD_LO
                            records[nrec, 1] = n + 1
                            records[nrec, 2] = u + 1
                            records[nrec, 3] = s + 1
                            records[nrec, 4] = prod_lo[u, s] - fo_s
                            records[nrec, 5] = (prod_lo[u, s] - fo_s) / norm_prod[u, s]
                            nrec += 1
                    elif fo_s > prod_hi[u, s] + TOL:
                        if nrec < cap:
                            records[nrec, 0] = V_PROD_HI
                            records[nrec, 1] = n + 1
                            records[nrec, 2] = u + 1
                            records[nrec, 3] = s + 1
                            records[nrec, 4] = fo_s - prod_hi[u, s]
                            records[nrec, 5] = (fo_s - prod_hi[u, s]) / norm_prod[u, s]
                            nrec += 1
            if mode_u >= 0:
                res_add[mode_u] += tr_fo[n, u, residue_product]

        # (e) residue inventories advance and are bounded
        for r in range(n_residues):
            ir[r] += res_add[r] - cr[r, n]
            tr_ir[n, r] = ir[r]
            if ir[r] < ir_lo[r] - TOL:
                if nrec < cap:
                    records[nrec, 0] = V_RES_LO
                    records[nrec, 1] = n + 1
                    records[nrec, 2] = r + 1
                    records[nrec, 3] = 0
                    records[nrec, 4] = ir_lo[r] - ir[r]
                    records[nrec, 5] = (ir_lo[r] - ir[r]) / norm_ir[r]
                    nrec += 1
            elif ir[r] > ir_hi[r] + TOL:
                if nrec < cap:
                    records[nrec, 0] = V_RES_HI
                    records[nrec, 1] = n + 1
                    records[nrec, 2] = r + 1
                    records[nrec, 3] = 0
                    records[nrec, 4] = ir[r] - ir_hi[r]
                    records[nrec, 5] = (ir[r] - ir_hi[r]) / norm_ir[r]
                    nrec += 1

        # tank level bounds at period end
        for t in range(n_tanks):
            tot = 0.0
            for c in range(n_crudes):
                tr_tank[n, t, c] = tank_c[t, c]
                tot += tank_c[t, c]
            if tot < cap_lo[t] - TOL:
                if nrec < cap:
                    records[nrec, 0] = V_TANK_LO
                    records[nrec, 1] = n + 1
                    records[nrec, 2] = t + 1
                    records[nrec, 3] = 0
                    records[nrec, 4] = cap_lo[t] - tot
                    records[nrec, 5] = (cap_lo[t] - tot) / norm_tank[t]
                    nrec += 1
            elif tot > cap_hi[t] + TOL:
                if nrec < cap:
                    records[nrec, 0] = V_TANK_HI
                    records[nrec, 1] = n + 1
                    records[nrec, 2] = t + 1
                    records[nrec, 3] = 0
                    records[nrec, 4] = tot - cap_hi[t]
                    records[nrec, 5] = (tot - cap_hi[t]) / norm_tank[t]
                    nrec += 1

        for v in range(n_vessels):
            for c in range(n_crudes):
                tr_vessel[n, v, c] = cargo[v, c]

        # changeover flags against the previous connection state
        for u in range(n_cdus):
            changed = 0
            if n == 0 and has_init_conn[u] == 0:
                changed = 0
            else:
                if n == 0:
                    for t in range(n_tanks):
                        if conn[u, t] != init_conn[u, t]:
                            changed = 1
                            break
                    if tr_mode[n, u] != init_mode[u]:
                        changed = 1
                else:
                    for t in range(n_tanks):
                        if conn[u, t] != prev_conn[u, t]:
                            changed = 1
                            break
                    if tr_mode[n, u] != prev_mode[u]:
                        changed = 1
            tr_co[n, u] = changed
            for t in range(n_tanks):
                prev_conn[u, t] = conn[u, t]
                tr_conn[n, u, t] = conn[u, t]
            prev_mode[u] = tr_mode[n, u]

    return nrec
