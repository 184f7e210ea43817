# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels: event loop and Gibbs chain.

Twin of `_kernels_py`; both consume the PCG64 bit stream through identical
draw sequences and evaluate floating-point expressions in the same order, so
trajectories are bit-identical across backends for the same seed.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, exp, isfinite, log1p
from numpy.random cimport bitgen_t

from .crn import EventBudgetExceeded, InvariantViolation

cnp.import_array()

BACKEND_NAME = "compiled"


cdef class MnrmKernel:
    """Event-driven exact simulation of a compiled network (compiled backend)."""

    cdef bitgen_t *rng
    cdef object _bitgen_obj
    cdef object _cnet

    cdef cnp.int64_t[::1] counts
    cdef cnp.uint8_t[::1] gate_state
    cdef public double t
    cdef bint check_conservation
    cdef bint log_events

    cdef double[::1] rate
    cdef cnp.int32_t[::1] gate
    cdef cnp.int32_t[::1] order_ptr, order_sp, order_mult
    cdef cnp.int32_t[::1] delta_ptr, delta_sp
    cdef cnp.int64_t[::1] delta_val
    cdef cnp.int32_t[::1] dep_ptr, dep
    cdef cnp.int32_t[::1] gdep_ptr, gdep
    cdef cnp.int32_t[::1] sp_rx_ptr, sp_rx
    cdef cnp.int32_t[::1] group_ptr, group_sp
    cdef cnp.int64_t[::1] group_total
    cdef cnp.int32_t[::1] sp_group_ptr, sp_group

    cdef double[::1] a, rrem, tsync, cand
    cdef cnp.int32_t[::1] heap, hpos

    cdef double[::1] integ, integ_t, first_pos
    cdef cnp.int64_t[::1] fire_count
    cdef public long long event_count

    cdef int n_species, n_reactions, n_groups
    cdef cnp.ndarray _ev_t, _ev_r
    cdef long long _ev_n

    def __init__(self, cnet, counts0, bit_generator, gate0,
                 check_conservation=True, log_events=False, t0=0.0):
        cdef int r, s, pos
        cdef double a, u

        self._cnet = cnet
        self._bitgen_obj = bit_generator
        capsule = bit_generator.capsule
        self.rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

        self.n_species = cnet.n_species
        self.n_reactions = cnet.n_reactions
        self.n_groups = len(cnet.group_total)

        self.rate = np.ascontiguousarray(cnet.rate, dtype=np.float64)
        self.gate = np.ascontiguousarray(cnet.gate, dtype=np.int32)
        self.order_ptr = np.ascontiguousarray(cnet.order_ptr, dtype=np.int32)
        self.order_sp = np.ascontiguousarray(cnet.order_sp, dtype=np.int32)
        self.order_mult = np.ascontiguousarray(cnet.order_mult, dtype=np.int32)
        self.delta_ptr = np.ascontiguousarray(cnet.delta_ptr, dtype=np.int32)
        self.delta_sp = np.ascontiguousarray(cnet.delta_sp, dtype=np.int32)
        self.delta_val = np.ascontiguousarray(cnet.delta_val, dtype=np.int64)
        self.dep_ptr = np.ascontiguousarray(cnet.dep_ptr, dtype=np.int32)
        self.dep = np.ascontiguousarray(cnet.dep, dtype=np.int32)
        self.gdep_ptr = np.ascontiguousarray(cnet.gdep_ptr, dtype=np.int32)
        self.gdep = np.ascontiguousarray(cnet.gdep, dtype=np.int32)
        self.sp_rx_ptr = np.ascontiguousarray(cnet.sp_rx_ptr, dtype=np.int32)
        self.sp_rx = np.ascontiguousarray(cnet.sp_rx, dtype=np.int32)
        self.group_ptr = np.ascontiguousarray(cnet.group_ptr, dtype=np.int32)
        self.group_sp = np.ascontiguousarray(cnet.group_sp, dtype=np.int32)
        self.group_total = np.ascontiguousarray(cnet.group_total, dtype=np.int64)
        self.sp_group_ptr = np.ascontiguousarray(cnet.sp_group_ptr, dtype=np.int32)
        self.sp_group = np.ascontiguousarray(cnet.sp_group, dtype=np.int32)

        counts_arr = np.ascontiguousarray(counts0, dtype=np.int64).copy()
        if counts_arr.shape[0] != self.n_species:
            raise InvariantViolation("count vector length mismatch")
        if np.any(counts_arr < 0):
            raise InvariantViolation("negative initial count")
        self.counts = counts_arr
        self.gate_state = np.ascontiguousarray(gate0, dtype=np.uint8).copy()
        self.t = float(t0)
        self.check_conservation = bool(check_conservation)
        self.log_events = bool(log_events)
        self._ev_t = np.empty(1024, dtype=np.float64)
        self._ev_r = np.empty(1024, dtype=np.int32)
        self._ev_n = 0

        self.integ = np.zeros(self.n_species, dtype=np.float64)
        self.integ_t = np.full(self.n_species, self.t, dtype=np.float64)
        self.first_pos = np.full(self.n_species, -1.0, dtype=np.float64)
        self.fire_count = np.zeros(self.n_reactions, dtype=np.int64)
        self.event_count = 0

        if self.check_conservation:
            self._check_all_groups()

        self.a = np.zeros(self.n_reactions, dtype=np.float64)
        self.rrem = np.zeros(self.n_reactions, dtype=np.float64)
        self.tsync = np.full(self.n_reactions, self.t, dtype=np.float64)
        self.cand = np.zeros(self.n_reactions, dtype=np.float64)
        for r in range(self.n_reactions):
            a = self._propensity(r)
            self.a[r] = a
            u = self.rng.next_double(self.rng.state)
            self.rrem[r] = -log1p(-u)
            self.cand[r] = self.t + self.rrem[r] / a if a > 0.0 else INFINITY
        self.heap = np.arange(self.n_reactions, dtype=np.int32)
        self.hpos = np.arange(self.n_reactions, dtype=np.int32)
        for pos in range(self.n_reactions // 2 - 1, -1, -1):
            self._sift_down(pos)

    # -- propensity and heap helpers ------------------------------------

    cdef double _propensity(self, int r) noexcept:
        cdef int g = self.gate[r]
        if g >= 0 and self.gate_state[g] == 0:
            return 0.0
        cdef double a = self.rate[r]
        cdef int k, i, m
        cdef long long n, ff
        for k in range(self.order_ptr[r], self.order_ptr[r + 1]):
            n = self.counts[self.order_sp[k]]
            m = self.order_mult[k]
            ff = n
            for i in range(1, m):
                ff *= n - i
            if ff <= 0:
                return 0.0
            a *= <double> ff
        return a

    cdef void _sift_up(self, int pos) noexcept:
        cdef cnp.int32_t[::1] heap = self.heap
        cdef cnp.int32_t[::1] hpos = self.hpos
        cdef double[::1] cand = self.cand
        cdef int r = heap[pos]
        cdef double key = cand[r]
        cdef int parent, rp
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

    cdef void _sift_down(self, int pos) noexcept:
        cdef cnp.int32_t[::1] heap = self.heap
        cdef cnp.int32_t[::1] hpos = self.hpos
        cdef double[::1] cand = self.cand
        cdef int n = self.n_reactions
        cdef int r = heap[pos]
        cdef double key = cand[r]
        cdef int child, right, rc
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

    cdef void _update_key(self, int r) noexcept:
        self._sift_up(self.hpos[r])
        self._sift_down(self.hpos[r])

    cdef void _resync(self, int j, double t) noexcept:
        cdef double aj = self.a[j]
        cdef double rem, anew
        if aj > 0.0:
            rem = self.rrem[j] - aj * (t - self.tsync[j])
            self.rrem[j] = rem if rem > 0.0 else 0.0
        self.tsync[j] = t
        anew = self._propensity(j)
        self.a[j] = anew
        self.cand[j] = t + self.rrem[j] / anew if anew > 0.0 else INFINITY
        self._update_key(j)

    cdef int _check_all_groups(self) except -1:
        cdef int gi, q
        cdef long long tot
        for gi in range(self.n_groups):
            tot = 0
            for q in range(self.group_ptr[gi], self.group_ptr[gi + 1]):
                tot += self.counts[self.group_sp[q]]
            if tot != self.group_total[gi]:
                raise InvariantViolation(
                    f"conservation group {gi} total {tot} != {self.group_total[gi]}"
                )
        return 0

    # -- event execution --------------------------------------------------

    cdef int _fire(self, int r, double t) except -1:
        cdef int k, s, gk, gi, q
        cdef long long old, new, tot
        cdef double u, a
        self.t = t
        cdef int d0 = self.delta_ptr[r]
        cdef int d1 = self.delta_ptr[r + 1]
        for k in range(d0, d1):
            s = self.delta_sp[k]
            old = self.counts[s]
            self.integ[s] += old * (t - self.integ_t[s])
            self.integ_t[s] = t
            new = old + self.delta_val[k]
            if new < 0:
                raise InvariantViolation(f"count of species {s} went negative at t={t}")
            self.counts[s] = new
            if old == 0 and new > 0 and self.first_pos[s] < 0.0:
                self.first_pos[s] = t
        if self.check_conservation:
            for k in range(d0, d1):
                s = self.delta_sp[k]
                for gk in range(self.sp_group_ptr[s], self.sp_group_ptr[s + 1]):
                    gi = self.sp_group[gk]
                    tot = 0
                    for q in range(self.group_ptr[gi], self.group_ptr[gi + 1]):
                        tot += self.counts[self.group_sp[q]]
                    if tot != self.group_total[gi]:
                        raise InvariantViolation(
                            f"conservation group {gi} broken at t={t}: "
                            f"{tot} != {self.group_total[gi]}"
                        )
        self.fire_count[r] += 1
        self.event_count += 1
        if self.log_events:
            self._log_event(t, r)
        u = self.rng.next_double(self.rng.state)
        self.rrem[r] = -log1p(-u)
        self.tsync[r] = t
        a = self._propensity(r)
        self.a[r] = a
        self.cand[r] = t + self.rrem[r] / a if a > 0.0 else INFINITY
        self._update_key(r)
        for k in range(self.dep_ptr[r], self.dep_ptr[r + 1]):
            self._resync(self.dep[k], t)
        return 0

    cdef void _log_event(self, double t, int r):
        cdef long long cap = self._ev_t.shape[0]
        if self._ev_n >= cap:
            new_t = np.empty(2 * cap, dtype=np.float64)
            new_r = np.empty(2 * cap, dtype=np.int32)
            new_t[:cap] = self._ev_t
            new_r[:cap] = self._ev_r
            self._ev_t = new_t
            self._ev_r = new_r
        self._ev_t[self._ev_n] = t
        self._ev_r[self._ev_n] = r
        self._ev_n += 1

    def advance(self, t_end, flip_t, flip_sig, flip_state, max_events):
        """Run all firings and gate flips in (t, t_end]; returns events executed."""
        cdef double t_end_c = float(t_end)
        if not isfinite(t_end_c):
            raise InvariantViolation("t_end must be finite")
        if t_end_c < self.t:
            raise InvariantViolation("t_end must be >= current time")
        cdef double[::1] ft = np.ascontiguousarray(flip_t, dtype=np.float64)
        cdef cnp.int32_t[::1] fs = np.ascontiguousarray(flip_sig, dtype=np.int32)
        cdef cnp.uint8_t[::1] fv = np.ascontiguousarray(flip_state, dtype=np.uint8)
        cdef long long max_ev = int(max_events)
        cdef long long events = 0
        cdef int fi = 0
        cdef int nf = ft.shape[0]
        cdef int r, g, k
        cdef double t_next, t_flip
        while True:
            r = self.heap[0] if self.n_reactions > 0 else -1
            t_next = self.cand[r] if r >= 0 else INFINITY
            t_flip = ft[fi] if fi < nf else INFINITY
            if t_next <= t_flip:
                if t_next > t_end_c:
                    break
                if events >= max_ev:
                    raise EventBudgetExceeded(
                        f"exceeded {max_ev} events before reaching t={t_end_c}"
                    )
                self._fire(r, t_next)
                events += 1
            else:
                if t_flip > t_end_c:
                    break
                self.t = t_flip
                g = fs[fi]
                self.gate_state[g] = fv[fi]
                for k in range(self.gdep_ptr[g], self.gdep_ptr[g + 1]):
                    self._resync(self.gdep[k], t_flip)
                fi += 1
        self.t = t_end_c
        return events

    # -- state access ------------------------------------------------------

    def set_count(self, s, value):
        """Clamp species s to an absolute count (no RNG consumed)."""
        cdef int si = int(s)
        cdef long long v = int(value)
        cdef long long old
        cdef int k
        if v < 0:
            raise InvariantViolation("clamp value must be >= 0")
        if self.sp_group_ptr[si] != self.sp_group_ptr[si + 1]:
            raise InvariantViolation("cannot clamp a species inside a conservation group")
        cdef double t = self.t
        old = self.counts[si]
        self.integ[si] += old * (t - self.integ_t[si])
        self.integ_t[si] = t
        self.counts[si] = v
        if old == 0 and v > 0 and self.first_pos[si] < 0.0:
            self.first_pos[si] = t
        for k in range(self.sp_rx_ptr[si], self.sp_rx_ptr[si + 1]):
            self._resync(self.sp_rx[k], t)

    def flush_integrals(self):
        cdef int s
        cdef double t = self.t
        for s in range(self.n_species):
            self.integ[s] += self.counts[s] * (t - self.integ_t[s])
            self.integ_t[s] = t

    def get_counts(self):
        return np.asarray(self.counts).copy()

    def get_integrals(self):
        self.flush_integrals()
        return np.asarray(self.integ).copy()

    def get_first_positive(self):
        return np.asarray(self.first_pos).copy()

    def reset_first_positive(self):
        cdef int s
        for s in range(self.n_species):
            self.first_pos[s] = -1.0

    def get_fire_counts(self):
        return np.asarray(self.fire_count).copy()

    def get_events(self):
        return (
            np.asarray(self._ev_t[: self._ev_n]).copy(),
            np.asarray(self._ev_r[: self._ev_n]).copy(),
        )

    def clear_events(self):
        self._ev_n = 0


def gibbs_chain(W, theta, z0, free_nodes, n_updates, n_burn, bit_generator,
                want_state_counts=False):
    """Random-scan Gibbs chain over the free nodes of a binary network.

    Mirrors `_kernels_py.gibbs_chain`; see there for the sampling contract.
    Returns (sum1, sum2, state_counts or None, z_final, n_kept).
    """
    cdef long long n_up = int(n_updates)
    cdef long long burn = int(n_burn)
    if not (0 <= burn < n_up):
        raise ValueError("need 0 <= n_burn < n_updates")
    # np.array (not ascontiguousarray) so read-only inputs become writable
    # buffers acceptable to the typed memoryviews below
    W_arr = np.array(W, dtype=np.float64, order="C")
    theta_arr = np.array(theta, dtype=np.float64, order="C")
    cdef int m = theta_arr.shape[0]
    z_arr = np.ascontiguousarray(z0, dtype=np.uint8).copy()
    free_arr = np.ascontiguousarray(free_nodes, dtype=np.int32)
    cdef int nf = free_arr.shape[0]
    if nf == 0:
        raise ValueError("need at least one free node")
    cdef bint want_counts = bool(want_state_counts)
    if want_counts and m > 20:
        raise ValueError("state counts only supported for m <= 20")

    capsule = bit_generator.capsule
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef double[:, ::1] Wv = W_arr
    cdef double[::1] th = theta_arr
    cdef cnp.uint8_t[::1] z = z_arr
    cdef cnp.int32_t[::1] free = free_arr

    h_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] h = h_arr
    cdef int i, j
    cdef double acc
    for i in range(m):
        acc = th[i]
        for j in range(m):
            if z[j]:
                acc += Wv[i, j]
        h[i] = acc

    sum1_arr = np.zeros(m, dtype=np.float64)
    sum2_arr = np.zeros((m, m), dtype=np.float64)
    cdef double[::1] sum1 = sum1_arr
    cdef double[:, ::1] sum2 = sum2_arr
    counts_arr = np.zeros(1 << m, dtype=np.float64) if want_counts else None
    cdef double[::1] state_counts
    if want_counts:
        state_counts = counts_arr

    ones_arr = np.empty(m, dtype=np.int32)
    cdef cnp.int32_t[::1] ones = ones_arr
    cdef int n_ones, ia, ib, sa
    cdef long long si

    cdef long long run_len = 0
    cdef long long step
    cdef double u1, u2, hi, p, e, dz
    cdef int znew

    for step in range(n_up):
        u1 = rng.next_double(rng.state)
        i = free[<int> (u1 * nf)]
        hi = h[i]
        if hi >= 0.0:
            p = 1.0 / (1.0 + exp(-hi))
        else:
            e = exp(hi)
            p = e / (1.0 + e)
        u2 = rng.next_double(rng.state)
        znew = 1 if u2 < p else 0
        if znew != z[i]:
            if run_len > 0:
                # flush the finished run of identical samples
                n_ones = 0
                for j in range(m):
                    if z[j]:
                        ones[n_ones] = j
                        n_ones += 1
                for ia in range(n_ones):
                    sa = ones[ia]
                    sum1[sa] += run_len
                    for ib in range(ia, n_ones):
                        sum2[sa, ones[ib]] += run_len
                if want_counts:
                    si = 0
                    for ia in range(n_ones):
                        si |= <long long> 1 << ones[ia]
                    state_counts[si] += run_len
                run_len = 0
            z[i] = znew
            dz = 1.0 if znew else -1.0
            for j in range(m):
                h[j] += Wv[j, i] * dz
        if step >= burn:
            run_len += 1

    if run_len > 0:
        n_ones = 0
        for j in range(m):
            if z[j]:
                ones[n_ones] = j
                n_ones += 1
        for ia in range(n_ones):
            sa = ones[ia]
            sum1[sa] += run_len
            for ib in range(ia, n_ones):
                sum2[sa, ones[ib]] += run_len
        if want_counts:
            si = 0
            for ia in range(n_ones):
                si |= <long long> 1 << ones[ia]
            state_counts[si] += run_len

    sum2_full = sum2_arr + np.triu(sum2_arr, 1).T
    return sum1_arr, sum2_full, counts_arr, z_arr, n_up - burn
