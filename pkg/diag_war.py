"""Fine-grained trace of the counting war inside flagged interval 18."""
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

TARGET = 18
for i in range(TARGET):
    x = i % 2
    c = draw_received_concentration(scen, x, rng)
    n_rb = draw_bound_receptors(scen, c, rng)
    run_intervals(state, [("pilot", x, int(n_rb))], rates)

x = TARGET % 2
c = draw_received_concentration(scen, x, rng)
n_rb = draw_bound_receptors(scen, c, rng)
print(f"interval {TARGET}: x={x} Y={n_rb} W={state.count('W')}")
t0 = state.t
state.set_count("Y", int(n_rb))
names = ("XC_ON", "XC_OFF")
base = state.integrals(names)
prev_on = base["XC_ON"]
step = 0.05
t = t0
marks = []
while t < t0 + 15.0:
    t = min(t + step, t0 + 15.0)
    state.advance_raw(t)
    cur = state.integrals(names)
    d_on = cur["XC_ON"] - prev_on
    if d_on > 0.005:
        marks.append((t - t0, d_on, state.count("XC_ON"), state.count("XC_OFF"),
                      state.count("D_ON"), state.count("R_ON"), state.count("W")))
    prev_on = cur["XC_ON"]
cum = base["XC_ON"]
print("windows where int_on accrued >0.005 (t, d_int_on, nON, nOFF, D, R, W):")
tot = 0.0
for m in marks:
    tot += m[1]
    print(f"  t={m[0]:6.2f} +{m[1]:7.4f} nON={m[2]:4d} nOFF={m[3]:5d} "
          f"D={m[4]:2d} R={m[5]:2d} W={m[6]}")
print(f"total int_on = {tot:.4f}")
