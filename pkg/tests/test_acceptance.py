"""Acceptance gate: the eight criteria at their stated tolerances.

Each test records one ``[PASS]``/``[FAIL]`` line; the lines are printed
together in the "acceptance criteria" section of the pytest summary.

Run on its own with::

    python3 -m pytest tests/test_acceptance.py -v
"""
import numpy as np
import pytest

from adaptive_pll.config import SimConfig
from adaptive_pll.ctrl import compute_references, equilibrium_residual
from adaptive_pll.engine import PHI, Scenario, builtin_scenarios, lre_probe, run_scenario
from adaptive_pll.frames import inv_park, park
from adaptive_pll.lsff import EstimatorGains, run_estimator, synthetic_regressor

from conftest import ACCEPTANCE_LINES, per_unit_bases

BAND = 0.02
SCENARIOS = ("power-step", "comparison", "freq-step", "vg-step")


def record(n, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _event_settling(trace, k):
    return trace.meta["summary"]["events"][k]


def _fmt(t):
    return "not settled" if t is None else f"{t * 1e3:.0f} ms"


def test_criterion_1_power_step(runs):
    tr = runs("power-step")
    ev = _event_settling(tr, 0)
    runtime = runs.timings[("power-step", "adaptive", ())]
    ok = (ev["i_d"] is not None and ev["i_d"] <= 0.2 and ev["i_q"] is not None
          and ev["i_q"] <= 0.2 and runtime <= 30.0 and tr.t[-1] == pytest.approx(3.0))
    assert record(1, ok, f"P 300->600 W: i_d settles in {_fmt(ev['i_d'])}, i_q in "
                         f"{_fmt(ev['i_q'])} (limit 200 ms, 2 % band); 3 s simulation took "
                         f"{runtime:.1f} s (limit 30 s)")


def test_criterion_2_frequency_step(runs):
    tr = runs("freq-step")
    ev = _event_settling(tr, 0)
    after = tr.t >= 1.0
    exc = max(np.max(np.abs(tr[c][after] - tr[c + "_ref"][after])) for c in ("i_d", "i_q"))
    ok = (ev["f_hat"] is not None and ev["f_hat"] <= 1.0
          and ev["i_d"] is not None and ev["i_d"] <= 0.5
          and ev["i_q"] is not None and ev["i_q"] <= 0.5)
    assert record(2, ok, f"50->52 Hz: |f_hat - 52| < 0.1 Hz after {_fmt(ev['f_hat'])} "
                         f"(limit 1 s); currents back in 2 % band after {_fmt(ev['i_d'])} / "
                         f"{_fmt(ev['i_q'])} (limit 500 ms), peak excursion {exc:.2e} A")


def test_criterion_3_voltage_step(runs):
    tr = runs("vg-step")
    ev = _event_settling(tr, 0)
    ok = (ev["Vg_hat"] is not None and ev["Vg_hat"] <= 1.0
          and ev["phi_deg"] is not None and ev["phi_deg"] <= 1.0)
    assert record(3, ok, f"V_g 310.27->248.215 V: Vg_hat within 2 % after {_fmt(ev['Vg_hat'])}, "
                         f"phi back within 2 % of phi_ref after {_fmt(ev['phi_deg'])} "
                         f"(limits 1 s); final Vg_hat {tr['Vg_hat'][-1]:.4f} V")


def test_criterion_4_comparison(runs):
    adaptive = runs("comparison", "adaptive")
    baseline = runs("comparison", "baseline")
    ev_a, ev_b = _event_settling(adaptive, 1), _event_settling(baseline, 1)
    ok = ev_b["phi_deg"] is None and ev_a["phi_deg"] is not None
    tail = baseline.t >= 1.5
    spread = np.ptp(baseline["phi_deg"][tail])
    assert record(4, ok, f"after the V_g step the baseline ATAN-PLL phi is "
                         f"{_fmt(ev_b['phi_deg'])} (spread {spread:.0f} deg), the adaptive "
                         f"phi settles in {_fmt(ev_a['phi_deg'])}")


def test_criterion_5_lre_identity():
    t, res, rate = lre_probe(SimConfig(), duration=0.02)
    ratio = res[-1] / res[0]
    ok = abs(rate - 1000.0) <= 50.0 and ratio < 1e-6 and t[-1] == pytest.approx(0.02)
    assert record(5, ok, f"|Y - Omega theta*| decays at {rate:.1f} 1/s (1000 +/- 5 %), "
                         f"ratio at 20 ms {ratio:.2e} (limit 1e-6)")


def test_criterion_6_estimator_oracle():
    rng = np.random.default_rng(6)
    dt, n = 1e-5, 50_000
    t = np.arange(2 * n + 1) * (dt / 2)
    # in closed loop Phi turns at the grid frequency; the synthetic regressor does too
    Om = synthetic_regressor(t, 100 * np.pi)
    errs = []
    for theta in rng.uniform(-2000, 2000, size=(100, 3)):
        e = run_estimator(Om, Om @ theta, dt, EstimatorGains())
        errs.append(np.linalg.norm(e.theta_hat - theta))
    passed = sum(err < 1e-4 for err in errs)
    assert record(6, passed == 100, f"{passed}/100 random theta reach |theta_hat - theta| "
                                    f"< 1e-4 within 0.5 s (worst {max(errs):.1e})")


def test_criterion_7_invariants(runs):
    rng = np.random.default_rng(7)
    worst_rt = 0.0
    for a, b, th in rng.uniform(-1, 1, size=(1000, 3)) * [1.0, 1.0, 400.0]:
        s = np.array([a, b, -a - b])
        worst_rt = max(worst_rt, np.max(np.abs(inv_park(park(s, th), th) - s)))

    cfg = SimConfig().replace(sim__renorm_interval=100.0)
    Phi = run_scenario(cfg, Scenario("nominal", 1.0)).states[:, PHI].reshape(-1, 2, 2)
    drift = np.linalg.norm(np.einsum("kji,kjl->kil", Phi, Phi)[-1] - np.eye(2))

    V_b, I_b = per_unit_bases()
    cols = {"i_d": I_b, "i_q": I_b, "i_gd": I_b, "i_gq": I_b, "v_d": V_b, "v_q": V_b, "phi": 1.0}
    worst_x, per_sc = 0.0, {}
    for name in SCENARIOS:
        a, d = runs(name), runs(name, sim__model="dq")
        dev = max(np.max(np.abs(a[c] - d[c])) / base for c, base in cols.items())
        per_sc[name] = dev
        worst_x = max(worst_x, dev)
    ok = worst_rt < 1e-12 and drift < 1e-6 and worst_x < 1e-6
    assert record(7, ok, f"park round-trip {worst_rt:.1e} (limit 1e-12); Phi drift "
                         f"{drift:.1e} per s unrenormalised (limit 1e-6); abc vs dq "
                         f"{worst_x:.1e} pu over " + ", ".join(
                             f"{k} {v:.1e}" for k, v in per_sc.items()) + " (limit 1e-6)")


def test_criterion_7_note_baseline_leg(runs):
    """Not part of the gate: the comparison's baseline leg, reported for transparency."""
    V_b, I_b = per_unit_bases()
    a, d = runs("comparison", "baseline"), runs("comparison", "baseline", sim__model="dq")
    dev = max(np.max(np.abs(a[c] - d[c])) / I_b for c in ("i_d", "i_q", "i_gd", "i_gq"))
    ACCEPTANCE_LINES.append(
        f"[NOTE] criterion 7: abc vs dq on the unstable baseline leg of the comparison "
        f"is {dev:.1e} pu at dt = 10 us; it shrinks like dt^4 (see "
        f"test_baseline_cross_simulation_deviation_is_integration_error)")


def test_criterion_8_equilibrium():
    cfg = SimConfig()
    worst_res, worst_audit = 0.0, 0.0
    for P_ref in (300.0, 600.0):
        r = compute_references(P_ref, cfg.V_ref, cfg.grid, cfg.plant)
        worst_res = max(worst_res, equilibrium_residual(r, cfg.grid, cfg.plant))
        audit = 1.5 * float(r.v_dq_ref @ r.i_g_dq_ref)
        worst_audit = max(worst_audit, abs(audit - P_ref) / P_ref)
    ok = worst_res < 1e-9 and worst_audit < 1e-6
    assert record(8, ok, f"dq derivative norm at the references {worst_res:.1e} (limit 1e-9); "
                         f"power audit relative error {worst_audit:.1e} (limit 1e-6)")


def test_builtin_scenarios_cover_the_gate():
    assert set(builtin_scenarios(SimConfig())) == set(SCENARIOS)
