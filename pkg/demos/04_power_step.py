"""
Power step with the adaptive PLL
================================

The converter starts from rest at 300 W, synchronises during a one-second
warm-up, and the power reference steps to 600 W.  The currents follow in
milliseconds and the frame angle moves to the new load angle.
"""

# %%
import matplotlib.pyplot as plt
import numpy as np

from _common import save
from adaptive_pll.config import SimConfig
from adaptive_pll.engine import builtin_scenarios, run_scenario

cfg = SimConfig()
tr = run_scenario(cfg, builtin_scenarios(cfg)["power-step"])
ev = tr.meta["summary"]["events"][0]
print(f"settling: i_d {ev['i_d'] * 1e3:.0f} ms, i_q {ev['i_q'] * 1e3:.0f} ms, "
      f"phi {ev['phi_deg'] * 1e3:.0f} ms")

# %%
# Currents and angle around the step
# ----------------------------------
sel = (tr.t > 0.9) & (tr.t < 1.3)
fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
ax1.plot(tr.t[sel], tr["i_d"][sel], label="i_d")
ax1.plot(tr.t[sel], tr["i_q"][sel], label="i_q")
ax1.plot(tr.t[sel], tr["i_d_ref"][sel], "k:", tr.t[sel], tr["i_q_ref"][sel], "k:")
ax1.set_ylabel("A")
ax1.legend()
ax2.plot(tr.t[sel], tr["phi_deg"][sel], label="phi")
ax2.plot(tr.t[sel], np.degrees(tr["phi_ref"][sel]), "k:", label="phi_ref")
ax2.set_ylabel("deg")
ax2.set_xlabel("t [s]")
ax2.legend()
save(fig, "04_power_step.png")
