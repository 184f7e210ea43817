"""Full-receiver validation run: 750 alternating pilots, noise step at 250/500.

Checks: |dW|<=1 per interval, reset completeness, phase ordering, W checkpoints
against the ideal weight chain, and error-flag rate.
"""
import sys
import time

import numpy as np

from crnrx.channel import (
    draw_bound_receptors,
    draw_received_concentration,
    scenario_s1,
)
from crnrx.receiver import (
    ReceiverRates,
    assemble_full_rx,
    run_intervals,
    signal_windows_for_plan,
)

N_INT = 750
CHECK_EVERY = 50
# ideal weight-chain checkpoints for the (250 base, 250 noisy, 250 base) plan
IDEAL = [0.00, 7.65, 8.56, 8.98, 9.22, 9.38, 16.37, 16.51, 16.51, 16.51,
         16.51, 12.14, 11.12, 10.61, 10.30, 10.10]


def one_realization(seed):
    rates = ReceiverRates()
    kinds = ["pilot"] * N_INT
    windows = signal_windows_for_plan(kinds, rates, realign_every=2)
    asm = assemble_full_rx(rates=rates, signal_windows=windows)
    state = asm.new_state(seed=seed, check_conservation=True)
    rng = np.random.default_rng(seed + 777)
    s_base = scenario_s1()
    s_noisy = s_base.with_noise_scaled(5.0)
    t0 = time.time()
    w_traj = np.zeros(N_INT + 1, dtype=int)
    viol = 0
    tstart_bad = 0
    never_reset = 0
    never_detect = 0
    order_bad = 0
    flags = 0
    prev_w = 0
    for i in range(N_INT):
        scen = s_noisy if 250 <= i < 500 else s_base
        x = i % 2
        c = draw_received_concentration(scen, x, rng)
        n_rb = draw_bound_receptors(scen, c, rng)
        rec = run_intervals(state, [("pilot", x, int(n_rb))], rates)[0]
        w_traj[i + 1] = rec.n_w_end
        if abs(rec.n_w_end - prev_w) > 1:
            viol += 1
        prev_w = rec.n_w_end
        if i > 0 and rec.n_timer_on_start >= 5:
            tstart_bad += 1
        if rec.first_reset_on < 0:
            never_reset += 1
        if rec.first_detect_on < 0:
            never_detect += 1
        elif rec.first_reset_on >= 0 and rec.first_detect_on >= rec.first_reset_on:
            order_bad += 1
        if rec.error_flag:
            flags += 1
    dt = time.time() - t0
    return w_traj, viol, tstart_bad, never_reset, never_detect, order_bad, flags, dt


def main():
    n_real = int(sys.argv[1]) if len(sys.argv) > 1 else 8
    trajs = []
    tot = dict(viol=0, tstart=0, nreset=0, ndet=0, order=0, flags=0)
    for r in range(n_real):
        w, viol, tb, nr, nd, ob, fl, dt = one_realization(1000 + r)
        trajs.append(w)
        tot["viol"] += viol
        tot["tstart"] += tb
        tot["nreset"] += nr
        tot["ndet"] += nd
        tot["order"] += ob
        tot["flags"] += fl
        print(f"real {r}: viol={viol} tstart>=5:{tb} never_reset={nr} "
              f"never_det={nd} order_bad={ob} flags={fl} ({dt:.0f}s)", flush=True)
    W = np.stack(trajs)
    mean_w = W.mean(axis=0)
    print("\ncheckpoint  sim_mean  ideal  gap")
    worst = 0.0
    for j, l in enumerate(range(0, N_INT + 1, CHECK_EVERY)):
        gap = mean_w[l] - IDEAL[j]
        worst = max(worst, abs(gap))
        print(f"l={l:4d}  {mean_w[l]:7.2f}  {IDEAL[j]:6.2f}  {gap:+.2f}")
    n_iv = n_real * N_INT
    print(f"\nTOTALS over {n_iv} intervals: |dW|>1 = {tot['viol']}, "
          f"Tstart>=5 = {tot['tstart']} ({tot['tstart']/n_iv:.4f}), "
          f"never_reset = {tot['nreset']}, never_det = {tot['ndet']}, "
          f"order_bad = {tot['order']}, flags = {tot['flags']} "
          f"({tot['flags']/n_iv:.4f})")
    print(f"worst checkpoint gap = {worst:.2f} (tolerance 1.5)")


if __name__ == "__main__":
    main()
