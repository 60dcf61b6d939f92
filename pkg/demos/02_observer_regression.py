"""
Turning state observation into parameter estimation
===================================================

The grid voltage behind the impedance is not measured.  The observer builds
a regression ``Y = Omega theta`` whose three unknowns are constant while the
grid frequency is, and whose first entry *is* the grid frequency.  Along an
exact simulation the regression holds up to a filter transient that decays
like ``exp(-lambda t)``.
"""

# %%
# The regression error from a running operating point
# ---------------------------------------------------
# ``lre_probe`` starts the plant at its operating point with a fresh
# observer and returns ``|Y - Omega theta*|`` with ``theta*`` computed from
# the initial conditions.
import matplotlib.pyplot as plt
import numpy as np

from _common import save
from adaptive_pll.config import SimConfig
from adaptive_pll.engine import lre_probe

cfg = SimConfig()
t, res, rate = lre_probe(cfg, duration=0.02)
print(f"fitted decay rate {rate:.1f} 1/s for lambda = {cfg.filt.lam:g}")
print(f"residual ratio after 20 ms: {res[-1] / res[0]:.2e}")

fig, ax = plt.subplots(figsize=(7, 3))
ax.semilogy(t * 1e3, res, label="|Y - Omega theta*|")
ax.semilogy(t * 1e3, res[0] * np.exp(-cfg.filt.lam * t), "--", label="exp(-lambda t)")
ax.set_xlabel("t [ms]")
ax.legend()
save(fig, "02_lre_decay.png")

# %%
# With the true parameters the state is reconstructed
# -----------------------------------------------------------
# ``x = [J y12 - z | Phi] theta*`` holds along the closed loop to integration
# accuracy, so once the estimator has ``theta*`` the grid voltage is known.
from adaptive_pll.engine import PHI, Z, Scenario, run_scenario
from adaptive_pll.gpebo import ObserverState, estimate_x, lre_parameters

tr = run_scenario(cfg, Scenario("nominal", 0.2))
x_true = cfg.grid.V_g / cfg.plant.L_g * np.column_stack([np.cos(tr["phi"]), np.sin(tr["phi"])])
theta = lre_parameters(x_true[0], [tr["i_gd"][0], tr["i_gq"][0]], tr.states[0, Z],
                       cfg.grid.omega)
x_rec = np.array([estimate_x(ObserverState(z=s[Z], Phi=s[PHI].reshape(2, 2)), [a, b], theta)
                  for s, a, b in zip(tr.states, tr["i_gd"], tr["i_gq"])])
rel = np.linalg.norm(x_rec - x_true, axis=1) / np.linalg.norm(x_true, axis=1)
print(f"theta* = {theta}, worst relative reconstruction error {rel.max():.1e}")
