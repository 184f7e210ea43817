"""Dump every flagged interval of one clean-channel realization."""
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

N = 200
rates = ReceiverRates()
windows = signal_windows_for_plan(["pilot"] * N, rates, realign_every=2)
asm = assemble_full_rx(rates=rates, signal_windows=windows)
state = asm.new_state(seed=1000)
rng = np.random.default_rng(1777)
scen = scenario_s1()

probe = ("H", "XC_ON", "XC_OFF", "D_ON", "R_ON", "T_ON", "Xtrue_ON", "W")
prev_w = 0
n_flag = 0
for i in range(N):
    x = i % 2
    c = draw_received_concentration(scen, x, rng)
    n_rb = draw_bound_receptors(scen, c, rng)
    rec = run_intervals(state, [("pilot", x, int(n_rb))], rates)[0]
    endc = {s: state.count(s) for s in probe}
    dw = rec.n_w_end - prev_w
    prev_w = rec.n_w_end
    if rec.error_flag or abs(dw) > 1:
        n_flag += 1
        print(f"i={i:3d} x={x} Y={n_rb:2d} W={rec.n_w_end:2d} dW={dw:+d} "
              f"int_on={rec.int_on:10.3f} int_off={rec.int_off:10.3f} "
              f"p={rec.p_rel_on:.5f} fd={rec.first_detect_on:5.2f} "
              f"fr={rec.first_reset_on:5.2f} end={endc}")
print(f"\nflagged {n_flag}/{N}")
