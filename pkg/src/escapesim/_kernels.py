"""Numba event-loop kernels shared by the simulator, coupling and experiments.

Replica r of a batch draws from an xoshiro256+ stream seeded by
(seed, stream0 + r), so results are bit-identical for any thread count.
State vectors are float64 counts of length d+1; the extra slot holds the
constant 1.0 used by the padded monomial factors (see _compile).

Terminal codes: 0 horizon, 1 absorbed (zero total rate), 2 event cap,
3 weighted level hit, 4 second block hit zero, 5 invalid (negative rate or
state), 6 event-record overflow, 7 watched coordinate fell to threshold.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
_GOLD = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_HALF53 = 2.0 ** -53

TERM_HORIZON = 0
TERM_ABSORBED = 1
TERM_CAP = 2
TERM_LEVEL = 3
TERM_BLOCK2_ZERO = 4
TERM_INVALID = 5
TERM_OVERFLOW = 6
TERM_COORD_LOW = 7
TERM_DIVERGED = 8
TERM_Z_DEAD = 9

CAUSE_NONE = -1
CAUSE_RATE_MISMATCH = 0
CAUSE_EXTRA_X = 1
CAUSE_EXTRA_Z = 2


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@njit(cache=True)
def _rng_init(seed, stream, rs):
    z = _mix64(U64(seed) + _GOLD) ^ (_mix64(U64(stream)) * _MIX1)
    allzero = True
    for i in range(4):
        z = z + _GOLD
        rs[i] = _mix64(z)
        if rs[i] != U64(0):
            allzero = False
    if allzero:
        rs[0] = _GOLD


@njit(cache=True, inline="always")
def _next_u64(rs):
    result = rs[0] + rs[3]
    t = rs[1] << U64(17)
    rs[2] ^= rs[0]
    rs[3] ^= rs[1]
    rs[1] ^= rs[2]
    rs[0] ^= rs[3]
    rs[2] ^= t
    rs[3] = (rs[3] << U64(45)) | (rs[3] >> U64(19))
    return result


@njit(cache=True, inline="always")
def _u01(rs):
    # strictly inside (0, 1), so exponential waiting times are finite positive
    return (np.float64(_next_u64(rs) >> U64(11)) + 0.5) * _HALF53


@njit(cache=True)
def sim_core(rs, Xe, t_start,
             jumps, mstart, mcoeff, mfac, s_idx, gbar0,
             d1, invN, x0, theta,
             vlev, level, stop_block2_zero, low_coord, low_level,
             horizon, cap,
             ev_t, ev_j, rec_on,
             grid, snap, intf, want_mart,
             rates):
    """One replica of the exact jump chain; mutates rs and Xe in place.

    Returns (terminal, t_end, n_events, tau_level, tau_zero2, nu_level, n_rec).
    tau_level / tau_zero2 are nan when the event did not occur.  Snapshots of
    the count state are taken at the absolute times in grid (caller must keep
    grid within [t_start, horizon]); with want_mart, intf receives the exact
    integral of the density drift along the piecewise-constant path.
    """
    d = jumps.shape[1]
    nj = jumps.shape[0]
    G = grid.shape[0]
    d2 = d - d1

    t = t_start
    nev = 0
    nrec = 0
    g = 0
    tau_level = np.nan
    tau_zero2 = np.nan
    nu_level = -1
    intF = np.zeros(d)
    terminal = TERM_HORIZON

    # stops that may already hold at the initial state
    if level < np.inf:
        w = 0.0
        for i in range(d2):
            w += vlev[i] * Xe[d1 + i]
        if w >= level:
            return (TERM_LEVEL, t, 0, t, tau_zero2, 0, 0)
    zs = 0.0
    for i in range(d1, d):
        zs += Xe[i]
    if zs == 0.0:
        tau_zero2 = t
        if stop_block2_zero == 1:
            return (TERM_BLOCK2_ZERO, t, 0, tau_level, tau_zero2, nu_level, 0)
    if low_coord >= 0 and Xe[low_coord] <= low_level:
        return (TERM_COORD_LOW, t, 0, tau_level, tau_zero2, nu_level, 0)

    while True:
        if nev >= cap:
            terminal = TERM_CAP
            break

        trunc = False
        if theta < np.inf:
            s2 = 0.0
            for i in range(d):
                dd = Xe[i] * invN - x0[i]
                s2 += dd * dd
            trunc = s2 > theta * theta

        tot = 0.0
        bad = False
        for j in range(nj):
            if trunc and s_idx[j] >= 0:
                r = gbar0[j] * Xe[s_idx[j]]
            else:
                r = 0.0
                for m in range(mstart[j], mstart[j + 1]):
                    r += mcoeff[m] * Xe[mfac[m, 0]] * Xe[mfac[m, 1]] * Xe[mfac[m, 2]] * Xe[mfac[m, 3]]
            if r < 0.0:
                if r > -1e-12:
                    r = 0.0
                else:
                    bad = True
                    break
            rates[j] = r
            tot += r
        if bad:
            terminal = TERM_INVALID
            break
        if tot <= 0.0:
            while g < G:
                for i in range(d):
                    snap[g, i] = Xe[i]
                if want_mart == 1:
                    for i in range(d):
                        intf[g, i] = intF[i]
                g += 1
            terminal = TERM_ABSORBED
            break

        dt = -np.log(_u01(rs)) / tot
        tnew = t + dt

        while g < G and grid[g] < tnew:
            for i in range(d):
                snap[g, i] = Xe[i]
            if want_mart == 1:
                for i in range(d):
                    f = 0.0
                    for j in range(nj):
                        f += rates[j] * jumps[j, i]
                    intf[g, i] = intF[i] + f * invN * (grid[g] - t)
            g += 1

        if tnew > horizon:
            t = horizon
            terminal = TERM_HORIZON
            break

        if want_mart == 1:
            for i in range(d):
                f = 0.0
                for j in range(nj):
                    f += rates[j] * jumps[j, i]
                intF[i] += f * invN * dt
        t = tnew

        u2 = _u01(rs) * tot
        c = 0.0
        pick = nj - 1
        for j in range(nj):
            c += rates[j]
            if u2 < c:
                pick = j
                break

        nev += 1
        if rec_on == 1:
            if nrec >= ev_t.shape[0]:
                terminal = TERM_OVERFLOW
                break
            ev_t[nrec] = t
            ev_j[nrec] = pick
            nrec += 1

        neg = False
        for i in range(d):
            Xe[i] += jumps[pick, i]
            if Xe[i] < 0.0:
                neg = True
        if neg:
            terminal = TERM_INVALID
            break

        zs = 0.0
        for i in range(d1, d):
            zs += Xe[i]
        if zs == 0.0:
            if tau_zero2 != tau_zero2:
                tau_zero2 = t
            if stop_block2_zero == 1:
                terminal = TERM_BLOCK2_ZERO
                break
        if level < np.inf:
            w = 0.0
            for i in range(d2):
                w += vlev[i] * Xe[d1 + i]
            if w >= level:
                tau_level = t
                nu_level = nev
                terminal = TERM_LEVEL
                break
        if low_coord >= 0 and Xe[low_coord] <= low_level:
            terminal = TERM_COORD_LOW
            break

    return (terminal, t, nev, tau_level, tau_zero2, nu_level, nrec)


@njit(cache=True, parallel=True)
def batch_escape(seed, stream0, R,
                 jumps, mstart, mcoeff, mfac, s_idx, gbar0,
                 d1, invN, x0, theta,
                 X0, vlev, level, stop_block2_zero, horizon, cap,
                 win_offsets,
                 out_term, out_t, out_nev, out_tau, out_tau0, out_nu,
                 out_end, out_win):
    """Replicas run to the weighted level / absorption; optional post-crossing
    window snapshots at tau + win_offsets (win_offsets[0] should be 0)."""
    d = jumps.shape[1]
    nj = jumps.shape[0]
    G = win_offsets.shape[0]
    empty_t = np.empty(0)
    empty_j = np.empty(0, np.int64)
    empty_grid = np.empty(0)
    empty_snap = np.empty((0, d))
    for r in prange(R):
        rs = np.empty(4, np.uint64)
        _rng_init(seed, stream0 + r, rs)
        Xe = np.empty(d + 1)
        for i in range(d):
            Xe[i] = X0[i]
        Xe[d] = 1.0
        rates = np.empty(nj)
        term, t, nev, tau, tau0, nu, _ = sim_core(
            rs, Xe, 0.0, jumps, mstart, mcoeff, mfac, s_idx, gbar0,
            d1, invN, x0, theta, vlev, level, stop_block2_zero, -1, 0.0,
            horizon, cap, empty_t, empty_j, 0,
            empty_grid, empty_snap, empty_snap, 0, rates)
        if G > 0 and term == TERM_LEVEL:
            grid = np.empty(G)
            for k in range(G):
                grid[k] = tau + win_offsets[k]
            term2, t2, nev2, _, tau0b, _, _ = sim_core(
                rs, Xe, tau, jumps, mstart, mcoeff, mfac, s_idx, gbar0,
                d1, invN, x0, theta, empty_grid, np.inf, 0, -1, 0.0,
                grid[G - 1], cap, empty_t, empty_j, 0,
                grid, out_win[r], empty_snap, 0, rates)
            nev += nev2
            t = t2
            if tau0 != tau0:
                tau0 = tau0b
        out_term[r] = term
        out_t[r] = t
        out_nev[r] = nev
        out_tau[r] = tau
        out_tau0[r] = tau0
        out_nu[r] = nu
        for i in range(d):
            out_end[r, i] = Xe[i]


@njit(cache=True, parallel=True)
def batch_grid(seed, stream0, R,
               jumps, mstart, mcoeff, mfac, s_idx, gbar0,
               d1, invN, x0, theta,
               X0, grid, want_mart, cap,
               out_states, out_intf, out_term, out_nev):
    """Snapshots (and optionally the exact drift integral) on an absolute grid."""
    d = jumps.shape[1]
    nj = jumps.shape[0]
    empty_t = np.empty(0)
    empty_j = np.empty(0, np.int64)
    empty_vlev = np.empty(0)
    for r in prange(R):
        rs = np.empty(4, np.uint64)
        _rng_init(seed, stream0 + r, rs)
        Xe = np.empty(d + 1)
        for i in range(d):
            Xe[i] = X0[i]
        Xe[d] = 1.0
        rates = np.empty(nj)
        term, t, nev, _, _, _, _ = sim_core(
            rs, Xe, 0.0, jumps, mstart, mcoeff, mfac, s_idx, gbar0,
            d1, invN, x0, theta, empty_vlev, np.inf, 0, -1, 0.0,
            grid[grid.shape[0] - 1], cap, empty_t, empty_j, 0,
            grid, out_states[r], out_intf[r], want_mart, rates)
        out_term[r] = term
        out_nev[r] = nev


@njit(cache=True, parallel=True)
def batch_three_phase(seed, stream0, R,
                      jumps, mstart, mcoeff, mfac, s_idx, gbar0,
                      d1, invN, x0,
                      X0, vlev, level, delta_counts, horizon, cap,
                      out_surv, out_tau1, out_tau2, out_tau3, out_nev, out_term):
    """Escape, approach of the swapped equilibrium, and final absorption.

    Phase 1 ends at the weighted-level crossing (or at second-block
    extinction, in which case the replica is marked non-surviving); phase 2
    when the watched coordinate 0 falls to delta_counts; phase 3 when it
    hits zero.
    """
    d = jumps.shape[1]
    nj = jumps.shape[0]
    empty_t = np.empty(0)
    empty_j = np.empty(0, np.int64)
    empty_grid = np.empty(0)
    empty_snap = np.empty((0, d))
    empty_vlev = np.empty(0)
    for r in prange(R):
        rs = np.empty(4, np.uint64)
        _rng_init(seed, stream0 + r, rs)
        Xe = np.empty(d + 1)
        for i in range(d):
            Xe[i] = X0[i]
        Xe[d] = 1.0
        rates = np.empty(nj)
        out_tau1[r] = np.nan
        out_tau2[r] = np.nan
        out_tau3[r] = np.nan
        term, t, nev, tau, tau0, _, _ = sim_core(
            rs, Xe, 0.0, jumps, mstart, mcoeff, mfac, s_idx, gbar0,
            d1, invN, x0, np.inf, vlev, level, 1, -1, 0.0,
            horizon, cap, empty_t, empty_j, 0,
            empty_grid, empty_snap, empty_snap, 0, rates)
        if term == TERM_BLOCK2_ZERO:
            out_surv[r] = 0
            out_tau1[r] = tau0
            out_term[r] = term
            out_nev[r] = nev
            continue
        if term != TERM_LEVEL:
            out_surv[r] = 0
            out_term[r] = term
            out_nev[r] = nev
            continue
        out_surv[r] = 1
        out_tau1[r] = tau
        term, t, nev2, _, _, _, _ = sim_core(
            rs, Xe, t, jumps, mstart, mcoeff, mfac, s_idx, gbar0,
            d1, invN, x0, np.inf, empty_vlev, np.inf, 0, 0, delta_counts,
            horizon, cap, empty_t, empty_j, 0,
            empty_grid, empty_snap, empty_snap, 0, rates)
        nev += nev2
        if term != TERM_COORD_LOW:
            out_term[r] = term
            out_nev[r] = nev
            continue
        out_tau2[r] = t
        term, t, nev3, _, _, _, _ = sim_core(
            rs, Xe, t, jumps, mstart, mcoeff, mfac, s_idx, gbar0,
            d1, invN, x0, np.inf, empty_vlev, np.inf, 0, 0, 0.0,
            horizon, cap, empty_t, empty_j, 0,
            empty_grid, empty_snap, empty_snap, 0, rates)
        nev += nev3
        if term == TERM_COORD_LOW:
            out_tau3[r] = t
        out_term[r] = term
        out_nev[r] = nev


@njit(cache=True, parallel=True)
def batch_couple(seed, stream0, R,
                 jumps, mstart, mcoeff, mfac, s_idx, gbar0,
                 gstart, gcoeff, gfac,
                 d1, invN, X0, Z0,
                 vlev, level, horizon, cap, stop_at_div,
                 out_term, out_div_t, out_cause, out_tau, out_zext,
                 out_nev, out_zT):
    """Joint run of the full chain and its constant-rate branching companion.

    While the second blocks agree, each second-block jump fires at
    max(q_N, q); with probability min/max both sides jump, otherwise only
    the larger-rate side does and the first divergence is recorded.  With
    stop_at_div=0 the two sides continue independently to the horizon
    (used to check that the branching marginal is undistorted).
    """
    d = jumps.shape[1]
    nj = jumps.shape[0]
    d2 = d - d1
    for r in prange(R):
        rs = np.empty(4, np.uint64)
        _rng_init(seed, stream0 + r, rs)
        Xe = np.empty(d + 1)
        for i in range(d):
            Xe[i] = X0[i]
        Xe[d] = 1.0
        Z = np.empty(d2)
        for i in range(d2):
            Z[i] = X0[d1 + i]
        rx = np.empty(nj)
        rz = np.empty(nj)
        t = 0.0
        nev = 0
        diverged = False
        div_t = np.nan
        cause = CAUSE_NONE
        tau = np.nan
        zext = 0
        term = TERM_HORIZON

        zsum = 0.0
        for i in range(d2):
            zsum += Z[i]
        if zsum == 0.0:
            out_term[r] = TERM_BLOCK2_ZERO
            out_div_t[r] = div_t
            out_cause[r] = cause
            out_tau[r] = tau
            out_zext[r] = 1
            out_nev[r] = 0
            for i in range(d2):
                out_zT[r, i] = Z[i]
            continue

        while True:
            if nev >= cap:
                term = TERM_CAP
                break
            tot = 0.0
            if not diverged:
                for j in range(nj):
                    if s_idx[j] >= 0:
                        gv = 0.0
                        for m in range(gstart[j], gstart[j + 1]):
                            gv += gcoeff[m] * Xe[gfac[m, 0]] * Xe[gfac[m, 1]] * Xe[gfac[m, 2]] * Xe[gfac[m, 3]]
                        zsv = Z[s_idx[j] - d1]
                        qn = gv * zsv
                        q = gbar0[j] * zsv
                        if qn < 0.0:
                            qn = 0.0
                        rx[j] = qn
                        rz[j] = q
                        tot += qn if qn > q else q
                    else:
                        rv = 0.0
                        for m in range(mstart[j], mstart[j + 1]):
                            rv += mcoeff[m] * Xe[mfac[m, 0]] * Xe[mfac[m, 1]] * Xe[mfac[m, 2]] * Xe[mfac[m, 3]]
                        if rv < 0.0:
                            rv = 0.0
                        rx[j] = rv
                        rz[j] = 0.0
                        tot += rv
            else:
                for j in range(nj):
                    rv = 0.0
                    for m in range(mstart[j], mstart[j + 1]):
                        rv += mcoeff[m] * Xe[mfac[m, 0]] * Xe[mfac[m, 1]] * Xe[mfac[m, 2]] * Xe[mfac[m, 3]]
                    if rv < 0.0:
                        rv = 0.0
                    rx[j] = rv
                    tot += rv
                    if s_idx[j] >= 0:
                        q = gbar0[j] * Z[s_idx[j] - d1]
                        rz[j] = q
                        tot += q
                    else:
                        rz[j] = 0.0
            if tot <= 0.0:
                term = TERM_ABSORBED
                break
            dt = -np.log(_u01(rs)) / tot
            t += dt
            if t > horizon:
                t = horizon
                term = TERM_HORIZON
                break
            u2 = _u01(rs) * tot
            nev += 1

            if not diverged:
                c = 0.0
                pick = -1
                for j in range(nj):
                    m = rx[j] if rx[j] > rz[j] else rz[j]
                    if s_idx[j] < 0:
                        m = rx[j]
                    c += m
                    if u2 < c:
                        pick = j
                        break
                if pick < 0:
                    pick = nj - 1
                if s_idx[pick] < 0:
                    for i in range(d):
                        Xe[i] += jumps[pick, i]
                else:
                    qn = rx[pick]
                    q = rz[pick]
                    mx = qn if qn > q else q
                    mn = qn if qn < q else q
                    u3 = _u01(rs) * mx
                    if u3 < mn:
                        for i in range(d):
                            Xe[i] += jumps[pick, i]
                        for i in range(d2):
                            Z[i] += jumps[pick, d1 + i]
                    else:
                        div_t = t
                        if q <= 0.0:
                            cause = CAUSE_EXTRA_X
                        elif qn <= 0.0:
                            cause = CAUSE_EXTRA_Z
                        else:
                            cause = CAUSE_RATE_MISMATCH
                        if qn > q:
                            for i in range(d):
                                Xe[i] += jumps[pick, i]
                        else:
                            for i in range(d2):
                                Z[i] += jumps[pick, d1 + i]
                        if stop_at_div == 1:
                            term = TERM_DIVERGED
                            break
                        diverged = True
            else:
                c = 0.0
                pick = -1
                xside = True
                for j in range(nj):
                    c += rx[j]
                    if u2 < c:
                        pick = j
                        break
                if pick < 0:
                    xside = False
                    for j in range(nj):
                        c += rz[j]
                        if u2 < c:
                            pick = j
                            break
                    if pick < 0:
                        pick = nj - 1
                if xside:
                    for i in range(d):
                        Xe[i] += jumps[pick, i]
                else:
                    for i in range(d2):
                        Z[i] += jumps[pick, d1 + i]

            zsum = 0.0
            for i in range(d2):
                zsum += Z[i]
            if zsum == 0.0:
                zext = 1
                term = TERM_Z_DEAD if diverged else TERM_BLOCK2_ZERO
                break
            if not diverged and level < np.inf:
                w = 0.0
                for i in range(d2):
                    w += vlev[i] * Z[i]
                if w >= level:
                    tau = t
                    term = TERM_LEVEL
                    break

        out_term[r] = term
        out_div_t[r] = div_t
        out_cause[r] = cause
        out_tau[r] = tau
        out_zext[r] = zext
        out_nev[r] = nev
        for i in range(d2):
            out_zT[r, i] = Z[i]


@njit(cache=True, parallel=True)
def batch_branch_diag(seed, stream0, R,
                      jumps, mstart, mcoeff, mfac, s_idx, gbar0,
                      invN, Z0, B0, beta0, uvec, vvec,
                      tmax, cap, grid,
                      out_W, out_ext, out_sup1, out_sup2, out_mart, out_nev):
    """Path functionals of the branching chain needed for the convergence
    diagnostics: the horizon estimate of the growth limit W, suprema over
    u >= t of |v.Z e^{-b u} - W| and |Z e^{-b u} - W u_vec| (evaluated on the
    jump skeleton, both interval endpoints), and the compensated martingale
    N(t) = Z(t)e^{-b t} + (b I - B0) * int_0^t Z(s)e^{-b s} ds on the grid.
    """
    d = jumps.shape[1]
    nj = jumps.shape[0]
    G = grid.shape[0]
    for r in prange(R):
        rs = np.empty(4, np.uint64)
        _rng_init(seed, stream0 + r, rs)
        Xe = np.empty(d + 1)
        for i in range(d):
            Xe[i] = Z0[i]
        Xe[d] = 1.0
        rates = np.empty(nj)

        capn = 4096
        ts = np.empty(capn)
        zs = np.empty((capn, d))
        ne = 0
        t = 0.0
        while True:
            if ne >= cap:
                break
            tot = 0.0
            for j in range(nj):
                rv = 0.0
                for m in range(mstart[j], mstart[j + 1]):
                    rv += mcoeff[m] * Xe[mfac[m, 0]] * Xe[mfac[m, 1]] * Xe[mfac[m, 2]] * Xe[mfac[m, 3]]
                if rv < 0.0:
                    rv = 0.0
                rates[j] = rv
                tot += rv
            if tot <= 0.0:
                break
            dt = -np.log(_u01(rs)) / tot
            t += dt
            if t > tmax:
                break
            u2 = _u01(rs) * tot
            c = 0.0
            pick = nj - 1
            for j in range(nj):
                c += rates[j]
                if u2 < c:
                    pick = j
                    break
            if ne >= capn:
                capn2 = capn * 2
                ts2 = np.empty(capn2)
                zs2 = np.empty((capn2, d))
                for k in range(capn):
                    ts2[k] = ts[k]
                    for i in range(d):
                        zs2[k, i] = zs[k, i]
                ts = ts2
                zs = zs2
                capn = capn2
            for i in range(d):
                Xe[i] += jumps[pick, i]
            ts[ne] = t
            for i in range(d):
                zs[ne, i] = Xe[i]
            ne += 1

        out_nev[r] = ne
        wT = 0.0
        for i in range(d):
            wT += vvec[i] * Xe[i]
        wT *= np.exp(-beta0 * tmax)
        out_W[r] = wT
        tot_end = 0.0
        for i in range(d):
            tot_end += Xe[i]
        out_ext[r] = 1 if tot_end == 0.0 else 0

        # forward pass: compensated martingale at grid times
        intW = np.zeros(d)
        gi = 0
        t_lo = 0.0
        zcur = np.empty(d)
        for i in range(d):
            zcur[i] = Z0[i]
        for k in range(ne + 1):
            t_hi = ts[k] if k < ne else tmax
            while gi < G and grid[gi] <= t_hi:
                tg = grid[gi]
                f = (np.exp(-beta0 * t_lo) - np.exp(-beta0 * tg)) / beta0
                for i in range(d):
                    wti = zcur[i] * np.exp(-beta0 * tg)
                    acc = intW[i] + zcur[i] * f
                    mval = wti
                    for i2 in range(d):
                        bi = (beta0 if i == i2 else 0.0) - B0[i, i2]
                        mval += bi * (intW[i2] + zcur[i2] * f)
                    out_mart[r, gi, i] = mval
                gi += 1
            f = (np.exp(-beta0 * t_lo) - np.exp(-beta0 * t_hi)) / beta0
            for i in range(d):
                intW[i] += zcur[i] * f
            if k < ne:
                for i in range(d):
                    zcur[i] = zs[k, i]
            t_lo = t_hi

        # backward pass: suprema over u >= grid[j] on the jump skeleton
        runmax1 = 0.0
        runmax2 = 0.0
        k = ne  # interval index: [a_k, b_k) with state state_k
        gj = G - 1
        while gj >= 0:
            tg = grid[gj]
            while k >= 0:
                a = ts[k - 1] if k >= 1 else 0.0
                if a <= tg:
                    break
                b = ts[k] if k < ne else tmax
                # state on interval k
                v1a = 0.0
                v1b = 0.0
                n2a = 0.0
                n2b = 0.0
                for i in range(d):
                    zi = zs[k - 1, i] if k >= 1 else Z0[i]
                    fa = zi * np.exp(-beta0 * a) - wT * uvec[i]
                    fb = zi * np.exp(-beta0 * b) - wT * uvec[i]
                    n2a += fa * fa
                    n2b += fb * fb
                    v1a += vvec[i] * zi * np.exp(-beta0 * a)
                    v1b += vvec[i] * zi * np.exp(-beta0 * b)
                c1 = abs(v1a - wT)
                c2 = abs(v1b - wT)
                if c1 > runmax1:
                    runmax1 = c1
                if c2 > runmax1:
                    runmax1 = c2
                n2a = np.sqrt(n2a)
                n2b = np.sqrt(n2b)
                if n2a > runmax2:
                    runmax2 = n2a
                if n2b > runmax2:
                    runmax2 = n2b
                k -= 1
            # interval containing tg: index k (a_k <= tg)
            b = ts[k] if k < ne else tmax
            v1a = 0.0
            v1b = 0.0
            n2a = 0.0
            n2b = 0.0
            for i in range(d):
                zi = zs[k - 1, i] if k >= 1 else Z0[i]
                fa = zi * np.exp(-beta0 * tg) - wT * uvec[i]
                fb = zi * np.exp(-beta0 * b) - wT * uvec[i]
                n2a += fa * fa
                n2b += fb * fb
                v1a += vvec[i] * zi * np.exp(-beta0 * tg)
                v1b += vvec[i] * zi * np.exp(-beta0 * b)
            s1 = abs(v1a - wT)
            if abs(v1b - wT) > s1:
                s1 = abs(v1b - wT)
            if runmax1 > s1:
                s1 = runmax1
            s2 = np.sqrt(n2a)
            if np.sqrt(n2b) > s2:
                s2 = np.sqrt(n2b)
            if runmax2 > s2:
                s2 = runmax2
            out_sup1[r, gj] = s1
            out_sup2[r, gj] = s2
            gj -= 1
