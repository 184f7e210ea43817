"""Locate the |dW|>1 interval of realization seed 1002 and dump its context."""
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

N = 750
rates = ReceiverRates()
windows = signal_windows_for_plan(["pilot"] * N, rates, realign_every=2)
asm = assemble_full_rx(rates=rates, signal_windows=windows)
state = asm.new_state(seed=1002)
rng = np.random.default_rng(1002 + 777)
s_base = scenario_s1()
s_noisy = s_base.with_noise_scaled(5.0)

probe = ("H", "XC_ON", "XC_OFF", "D_ON", "R_ON", "T_ON", "A_ON", "Xtrue_ON")
rows = []
prev_w = 0
for i in range(N):
    scen = s_noisy if 250 <= i < 500 else s_base
    x = i % 2
    c = draw_received_concentration(scen, x, rng)
    n_rb = draw_bound_receptors(scen, c, rng)
    rec = run_intervals(state, [("pilot", x, int(n_rb))], rates)[0]
    endc = {s: state.count(s) for s in probe}
    rows.append((i, x, n_rb, rec.n_w_end, rec.n_w_end - prev_w,
                 rec.first_detect_on, rec.first_reset_on, endc))
    prev_w = rec.n_w_end

bad = [r[0] for r in rows if abs(r[4]) > 1]
print("violations at:", bad)
for b in bad:
    for i in range(max(0, b - 3), min(N, b + 3)):
        r = rows[i]
        print(f"i={r[0]:3d} x={r[1]} Y={r[2]:2d} W={r[3]:2d} dW={r[4]:+d} "
              f"fd={r[5]:5.2f} fr={r[6]:5.2f} end={r[7]}")
