"""
Tracking frequency and amplitude steps
======================================

The estimate's first entry is the grid frequency and ``L_g |x_hat|`` is the
grid amplitude.  Forgetting lets the estimator follow steps in either.
"""

# %%
import matplotlib.pyplot as plt

from _common import save
from adaptive_pll.config import SimConfig
from adaptive_pll.engine import builtin_scenarios, run_scenario

cfg = SimConfig()
scs = builtin_scenarios(cfg)
f_run = run_scenario(cfg, scs["freq-step"])
v_run = run_scenario(cfg, scs["vg-step"])
print(f"final f_hat  {f_run['f_hat'][-1]:.6f} Hz (true 52)")
print(f"final Vg_hat {v_run['Vg_hat'][-1]:.4f} V (true 248.215)")

# %%
fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5))
sel = (f_run.t > 0.95) & (f_run.t < 1.1)
ax1.plot(f_run.t[sel], f_run["f_hat"][sel], label="f_hat")
ax1.plot(f_run.t[sel], f_run["f_true"][sel], "k:", label="f")
ax1.set_ylabel("Hz")
ax1.legend()
sel = (v_run.t > 0.95) & (v_run.t < 1.1)
ax2.plot(v_run.t[sel], v_run["Vg_hat"][sel], label="Vg_hat")
ax2.plot(v_run.t[sel], v_run["Vg_true"][sel], "k:", label="V_g")
ax2.set_ylabel("V")
ax2.set_xlabel("t [s]")
ax2.legend()
save(fig, "06_grid_estimates.png")
