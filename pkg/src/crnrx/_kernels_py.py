"""Pure-Python simulation kernels: event loop and Gibbs chain.

This module is the fallback twin of the compiled extension `_kernels`.  Both
implementations consume the PCG64 bit stream through identical draw sequences
(one uniform double per exponential threshold, two per Gibbs update), evaluate
all floating-point expressions in the same order, and therefore produce
bit-identical trajectories for the same seed.  Plain Python lists and floats
are used throughout; numpy scalar indexing would dominate the runtime.
"""

from __future__ import annotations

import math

import numpy as np

from .crn import EventBudgetExceeded, InvariantViolation

_INF = math.inf

BACKEND_NAME = "python"


class MnrmKernel:
    """Event-driven exact simulation of a compiled network.

    Per-reaction state follows the next-reaction formulation with remaining
    internal time: each reaction r keeps the internal time left until its next
    firing (``rrem``), the wall-clock time of its last synchronization
    (``tsync``), its current propensity (``a``) and the resulting candidate
    firing time ``cand = tsync + rrem / a``.  Gate flips and count clamps
    resynchronize only the affected reactions, so gated (piecewise-constant)
    rates are handled exactly.
    """

    def __init__(
        self,
        cnet,
        counts0,
        bit_generator,
        gate0,
        check_conservation=True,
        log_events=False,
        t0=0.0,
    ):
        self._cnet = cnet
        self.n_species = cnet.n_species
        self.n_reactions = cnet.n_reactions
        self._next_double = np.random.Generator(bit_generator).random
        self._bitgen = bit_generator

        self.rate = [float(x) for x in cnet.rate]
        self.gate = [int(x) for x in cnet.gate]
        self.order_ptr = [int(x) for x in cnet.order_ptr]
        self.order_sp = [int(x) for x in cnet.order_sp]
        self.order_mult = [int(x) for x in cnet.order_mult]
        self.delta_ptr = [int(x) for x in cnet.delta_ptr]
        self.delta_sp = [int(x) for x in cnet.delta_sp]
        self.delta_val = [int(x) for x in cnet.delta_val]
        self.dep_ptr = [int(x) for x in cnet.dep_ptr]
        self.dep = [int(x) for x in cnet.dep]
        self.gdep_ptr = [int(x) for x in cnet.gdep_ptr]
        self.gdep = [int(x) for x in cnet.gdep]
        self.sp_rx_ptr = [int(x) for x in cnet.sp_rx_ptr]
        self.sp_rx = [int(x) for x in cnet.sp_rx]
        self.group_ptr = [int(x) for x in cnet.group_ptr]
        self.group_sp = [int(x) for x in cnet.group_sp]
        self.group_total = [int(x) for x in cnet.group_total]
        self.sp_group_ptr = [int(x) for x in cnet.sp_group_ptr]
        self.sp_group = [int(x) for x in cnet.sp_group]

        self.counts = [int(x) for x in counts0]
        if len(self.counts) != self.n_species:
            raise InvariantViolation("count vector length mismatch")
        if any(c < 0 for c in self.counts):
            raise InvariantViolation("negative initial count")
        self.gate_state = [int(x) for x in gate0]
        self.t = float(t0)
        self.check_conservation = bool(check_conservation)
        self.log_events = bool(log_events)
        self.ev_t: list[float] = []
        self.ev_r: list[int] = []

        self.integ = [0.0] * self.n_species
        self.integ_t = [self.t] * self.n_species
        self.first_pos = [-1.0] * self.n_species
        self.fire_count = [0] * self.n_reactions
        self.event_count = 0

        if self.check_conservation:
            self._check_all_groups()

        n_r = self.n_reactions
        self.a = [0.0] * n_r
        self.rrem = [0.0] * n_r
        self.tsync = [self.t] * n_r
        self.cand = [0.0] * n_r
        nd = self._next_double
        for r in range(n_r):
            a = self._propensity(r)
            self.a[r] = a
            self.rrem[r] = -math.log1p(-nd())
            self.cand[r] = self.t + self.rrem[r] / a if a > 0.0 else _INF
        self.heap = list(range(n_r))
        self.hpos = list(range(n_r))
        for pos in range(n_r // 2 - 1, -1, -1):
            self._sift_down(pos)

    # -- propensity and heap helpers ------------------------------------

    def _propensity(self, r):
        g = self.gate[r]
        if g >= 0 and self.gate_state[g] == 0:
            return 0.0
        a = self.rate[r]
        counts = self.counts
        for k in range(self.order_ptr[r], self.order_ptr[r + 1]):
            n = counts[self.order_sp[k]]
            m = self.order_mult[k]
            ff = n
            for i in range(1, m):
                ff *= n - i
            if ff <= 0:
                return 0.0
            a *= ff
        return a

    def _sift_up(self, pos):
        heap, hpos, cand = self.heap, self.hpos, self.cand
        r = heap[pos]
        key = cand[r]
        while pos > 0:
            parent = (pos - 1) >> 1
            rp = heap[parent]
            if cand[rp] <= key:
                break
            heap[pos] = rp
            hpos[rp] = pos
            pos = parent
        heap[pos] = r
        hpos[r] = pos

    def _sift_down(self, pos):
        heap, hpos, cand = self.heap, self.hpos, self.cand
        n = len(heap)
        r = heap[pos]
        key = cand[r]
        while True:
            child = 2 * pos + 1
            if child >= n:
                break
            rc = heap[child]
            right = child + 1
            if right < n and cand[heap[right]] < cand[rc]:
                child = right
                rc = heap[child]
            if cand[rc] >= key:
                break
            heap[pos] = rc
            hpos[rc] = pos
            pos = child
        heap[pos] = r
        hpos[r] = pos

    def _update_key(self, r):
        self._sift_up(self.hpos[r])
        self._sift_down(self.hpos[r])

    def _resync(self, j, t):
        aj = self.a[j]
        if aj > 0.0:
            rem = self.rrem[j] - aj * (t - self.tsync[j])
            self.rrem[j] = rem if rem > 0.0 else 0.0
        self.tsync[j] = t
        anew = self._propensity(j)
        self.a[j] = anew
        self.cand[j] = t + self.rrem[j] / anew if anew > 0.0 else _INF
        self._update_key(j)

    def _check_all_groups(self):
        counts = self.counts
        for gi in range(len(self.group_total)):
            tot = 0
            for q in range(self.group_ptr[gi], self.group_ptr[gi + 1]):
                tot += counts[self.group_sp[q]]
            if tot != self.group_total[gi]:
                raise InvariantViolation(
                    f"conservation group {gi} total {tot} != {self.group_total[gi]}"
                )

    # -- event execution --------------------------------------------------

    def _fire(self, r, t):
        self.t = t
        counts = self.counts
        integ = self.integ
        integ_t = self.integ_t
        first_pos = self.first_pos
        d0 = self.delta_ptr[r]
        d1 = self.delta_ptr[r + 1]
        for k in range(d0, d1):
            s = self.delta_sp[k]
            old = counts[s]
            integ[s] += old * (t - integ_t[s])
            integ_t[s] = t
            new = old + self.delta_val[k]
            if new < 0:
                raise InvariantViolation(f"count of species {s} went negative at t={t}")
            counts[s] = new
            if old == 0 and new > 0 and first_pos[s] < 0.0:
                first_pos[s] = t
        if self.check_conservation:
            for k in range(d0, d1):
                s = self.delta_sp[k]
                for gk in range(self.sp_group_ptr[s], self.sp_group_ptr[s + 1]):
                    gi = self.sp_group[gk]
                    tot = 0
                    for q in range(self.group_ptr[gi], self.group_ptr[gi + 1]):
                        tot += counts[self.group_sp[q]]
                    if tot != self.group_total[gi]:
                        raise InvariantViolation(
                            f"conservation group {gi} broken at t={t}: {tot} != {self.group_total[gi]}"
                        )
        self.fire_count[r] += 1
        self.event_count += 1
        if self.log_events:
            self.ev_t.append(t)
            self.ev_r.append(r)
        u = self._next_double()
        self.rrem[r] = -math.log1p(-u)
        self.tsync[r] = t
        a = self._propensity(r)
        self.a[r] = a
        self.cand[r] = t + self.rrem[r] / a if a > 0.0 else _INF
        self._update_key(r)
        for k in range(self.dep_ptr[r], self.dep_ptr[r + 1]):
            self._resync(self.dep[k], t)

    def advance(self, t_end, flip_t, flip_sig, flip_state, max_events):
        """Run all firings and gate flips in (t, t_end]; returns events executed."""
        t_end = float(t_end)
        if not math.isfinite(t_end):
            raise InvariantViolation("t_end must be finite")
        if t_end < self.t:
            raise InvariantViolation("t_end must be >= current time")
        events = 0
        fi = 0
        nf = len(flip_t)
        heap = self.heap
        cand = self.cand
        while True:
            r = heap[0] if heap else -1
            t_next = cand[r] if r >= 0 else _INF
            t_flip = flip_t[fi] if fi < nf else _INF
            if t_next <= t_flip:
                if t_next > t_end:
                    break
                if events >= max_events:
                    raise EventBudgetExceeded(
                        f"exceeded {max_events} events before reaching t={t_end}"
                    )
                self._fire(r, t_next)
                events += 1
            else:
                if t_flip > t_end:
                    break
                self.t = t_flip
                g = flip_sig[fi]
                self.gate_state[g] = flip_state[fi]
                for k in range(self.gdep_ptr[g], self.gdep_ptr[g + 1]):
                    self._resync(self.gdep[k], t_flip)
                fi += 1
        self.t = t_end
        return events

    # -- state access ------------------------------------------------------

    def set_count(self, s, value):
        """Clamp species s to an absolute count (no RNG consumed)."""
        value = int(value)
        if value < 0:
            raise InvariantViolation("clamp value must be >= 0")
        if self.sp_group_ptr[s] != self.sp_group_ptr[s + 1]:
            raise InvariantViolation("cannot clamp a species inside a conservation group")
        t = self.t
        old = self.counts[s]
        self.integ[s] += old * (t - self.integ_t[s])
        self.integ_t[s] = t
        self.counts[s] = value
        if old == 0 and value > 0 and self.first_pos[s] < 0.0:
            self.first_pos[s] = t
        for k in range(self.sp_rx_ptr[s], self.sp_rx_ptr[s + 1]):
            self._resync(self.sp_rx[k], t)

    def flush_integrals(self):
        t = self.t
        counts = self.counts
        integ = self.integ
        integ_t = self.integ_t
        for s in range(self.n_species):
            integ[s] += counts[s] * (t - integ_t[s])
            integ_t[s] = t

    def get_counts(self):
        return np.array(self.counts, dtype=np.int64)

    def get_integrals(self):
        self.flush_integrals()
        return np.array(self.integ, dtype=np.float64)

    def get_first_positive(self):
        return np.array(self.first_pos, dtype=np.float64)

    def reset_first_positive(self):
        for s in range(self.n_species):
            self.first_pos[s] = -1.0

    def get_fire_counts(self):
        return np.array(self.fire_count, dtype=np.int64)

    def get_events(self):
        return np.array(self.ev_t, dtype=np.float64), np.array(self.ev_r, dtype=np.int32)

    def clear_events(self):
        self.ev_t.clear()
        self.ev_r.clear()


def gibbs_chain(
    W,
    theta,
    z0,
    free_nodes,
    n_updates,
    n_burn,
    bit_generator,
    want_state_counts=False,
):
    """Random-scan Gibbs chain over the free nodes of a binary network.

    Each update draws a node uniformly from ``free_nodes`` and sets it to 1
    with probability sigmoid(theta_i + sum_j W[i, j] z_j).  Updates with index
    >= n_burn contribute one sample each to the first/second moment sums (and
    to the per-state visit counts when requested; only for small networks).

    Returns (sum1, sum2, state_counts or None, z_final, n_kept).
    """
    m = len(theta)
    n_updates = int(n_updates)
    n_burn = int(n_burn)
    if not (0 <= n_burn < n_updates):
        raise ValueError("need 0 <= n_burn < n_updates")
    nf = len(free_nodes)
    if nf == 0:
        raise ValueError("need at least one free node")
    if want_state_counts and m > 20:
        raise ValueError("state counts only supported for m <= 20")
    Wl = [[float(W[i][j]) for j in range(m)] for i in range(m)]
    th = [float(x) for x in theta]
    z = [1 if v else 0 for v in z0]
    free = [int(i) for i in free_nodes]
    rand = np.random.Generator(bit_generator).random
    exp = math.exp

    h = []
    for i in range(m):
        acc = th[i]
        Wi = Wl[i]
        for j in range(m):
            if z[j]:
                acc += Wi[j]
        h.append(acc)

    sum1 = [0.0] * m
    sum2 = [[0.0] * m for _ in range(m)]
    state_counts = [0.0] * (1 << m) if want_state_counts else None

    def flush(length):
        ones = [i for i in range(m) if z[i]]
        for idx_a, sa in enumerate(ones):
            sum1[sa] += length
            row = sum2[sa]
            for sb in ones[idx_a:]:
                row[sb] += length
        if state_counts is not None:
            si = 0
            for i in ones:
                si |= 1 << i
            state_counts[si] += length

    run_len = 0
    for step in range(n_updates):
        u1 = rand()
        i = free[int(u1 * nf)]
        hi = h[i]
        if hi >= 0.0:
            p = 1.0 / (1.0 + exp(-hi))
        else:
            e = exp(hi)
            p = e / (1.0 + e)
        u2 = rand()
        znew = 1 if u2 < p else 0
        if znew != z[i]:
            if run_len > 0:
                flush(run_len)
                run_len = 0
            z[i] = znew
            dz = 1.0 if znew else -1.0
            for j in range(m):
                h[j] += Wl[j][i] * dz
        if step >= n_burn:
            run_len += 1
    if run_len > 0:
        flush(run_len)

    s1 = np.array(sum1, dtype=np.float64)
    s2 = np.array(sum2, dtype=np.float64)
    s2 = s2 + np.triu(s2, 1).T  # mirror the upper triangle
    counts_arr = None if state_counts is None else np.array(state_counts, dtype=np.float64)
    return s1, s2, counts_arr, np.array(z, dtype=np.uint8), n_updates - n_burn
