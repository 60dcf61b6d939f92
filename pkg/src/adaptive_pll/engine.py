"""Fixed-step simulation of plant, observer, estimator, PLL and current loop.

The whole closed loop lives in one flat state vector advanced by classical
RK4; controller outputs are recomputed from the stage state at every RK4
stage.  Parameter steps (grid frequency, amplitude, power reference) are
applied between steps, never inside one.
"""
import configparser
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .ctrl import compute_references, equilibrium
from .ctrl import _current_pi
from .frames import inv_park, park, park_series, rot, wrap_angle
from .gpebo import _estimate_x, _observer_deriv, _regressor, lre_parameters
from .lsff import _estimator_deriv, _gain_norm
from .plant import GridTruth, _deriv_abc, _deriv_dq, _grid_voltage
from .pll import BASELINE, DETECTORS, SOURCES, _detect

# ---- state layout --------------------------------------------------------
# abc model: i_g[0:3], i[3:6], v[6:9]; dq model: i_g[0:2], v[2:4], i[4:6]
GPH, TH, XC = 9, 10, 11
XI = slice(12, 14)
Z = slice(14, 16)
PHI = slice(16, 20)
WY = slice(20, 22)
WG = slice(22, 24)
WM = slice(24, 30)
THH = slice(30, 33)
FM = slice(33, 42)
GR = slice(42, 51)
N_STATE = 51

# ---- parameter vector ----------------------------------------------------
(P_L, P_R, P_LG, P_RG, P_C, P_VDC, P_VG, P_W, P_LAM, P_ALPHA, P_BETA, P_M,
 P_KPP, P_KIP, P_KPI, P_KII, P_PHIREF, P_IDREF, P_IQREF, P_DET, P_SRC,
 P_MODEL, P_NORM) = range(23)
N_PARAM = 23

MODEL_ABC = 0
MODEL_DQ = 1
_MODELS = {"abc": MODEL_ABC, "dq": MODEL_DQ}

OK = 0
DIVERGED = 1
_BLOWUP = 1e12


class DivergenceError(RuntimeError):
    """The simulation produced a non-finite or exploding state.

    ``time`` is the simulated time of the failing step and ``trace`` the
    partial trace up to it.
    """

    def __init__(self, message, time, trace=None):
        super().__init__(message)
        self.time = time
        self.trace = trace


@njit(cache=True)
def _measure(s, p):
    if int(p[P_MODEL]) == MODEL_ABC:
        th = s[TH]
        return park(s[0:3], th), park(s[6:9], th), park(s[3:6], th)
    return s[0:2].copy(), s[2:4].copy(), s[4:6].copy()


@njit(cache=True)
def _detector_input(s, p, i_g, v):
    if int(p[P_SRC]) == BASELINE:
        return v
    Phi = s[PHI].reshape(2, 2)
    return _estimate_x(s[Z], Phi, i_g, s[THH])


@njit(cache=True)
def _detector_output(s, p, held):
    i_g, v, i = _measure(s, p)
    src = _detector_input(s, p, i_g, v)
    # the conventional loop puts the PCC voltage on the d axis, the gauge of the references
    phi_ref = 0.0 if int(p[P_SRC]) == BASELINE else p[P_PHIREF]
    return _detect(src, phi_ref, int(p[P_DET]), held)


@njit(cache=True)
def _rhs(s, p, held, frozen):
    """Full closed-loop derivative; also returns the detector output and u1."""
    L, r, L_g, r_g, C = p[P_L], p[P_R], p[P_LG], p[P_RG], p[P_C]
    lam = p[P_LAM]
    ds = np.zeros(N_STATE)

    i_g, v, i = _measure(s, p)
    e = _detector_output(s, p, held)
    u1 = -p[P_KPP] * e - p[P_KIP] * s[XC]

    i_ref = np.empty(2)
    i_ref[0] = p[P_IDREF]
    i_ref[1] = p[P_IQREF]
    u23, dxi = _current_pi(s[XI], i, i_ref, v, u1, L, p[P_KPI], p[P_KII])

    th = s[TH]
    if int(p[P_MODEL]) == MODEL_ABC:
        # V_dc * m_abc with m_dq = u23 / V_dc
        vdc_m = p[P_VDC] * inv_park(u23 / p[P_VDC], th)
        v_g = _grid_voltage(p[P_VG], s[GPH])
        di_g, di, dv = _deriv_abc(s[0:3], s[3:6], s[6:9], vdc_m, v_g, L, r, L_g, r_g, C)
        ds[0:3] = di_g
        ds[3:6] = di
        ds[6:9] = dv
    else:
        phi = th - s[GPH]
        x = np.empty(2)
        x[0] = p[P_VG] / L_g * np.cos(phi)
        x[1] = p[P_VG] / L_g * np.sin(phi)
        di_g, dv, di = _deriv_dq(s[0:2], s[2:4], s[4:6], u1, u23, x, L, r, L_g, r_g, C)
        ds[0:2] = di_g
        ds[2:4] = dv
        ds[4:6] = di

    ds[GPH] = p[P_W]
    ds[TH] = u1
    ds[XC] = e
    ds[XI] = dxi

    Phi = s[PHI].reshape(2, 2)
    W = s[WM].reshape(2, 3)
    dz, dPhi, dw_y, dw_g, dW = _observer_deriv(s[Z], Phi, s[WY], s[WG], W, i_g, v, u1,
                                               L_g, r_g, lam)
    ds[Z] = dz
    ds[PHI] = dPhi.ravel()
    ds[WY] = dw_y
    ds[WG] = dw_g
    ds[WM] = dW.ravel()

    Y, Omega = _regressor(s[WY], s[WG], W, i_g, lam)
    F = s[FM].reshape(3, 3)
    dth, dF = _estimator_deriv(s[THH], F, Y, Omega, p[P_ALPHA], p[P_BETA], frozen)
    ds[THH] = dth
    ds[FM] = dF.ravel()
    ds[GR] = (Omega.T @ Omega).ravel()
    return ds, e, u1


@njit(cache=True)
def _step(s, p, dt, held, frozen):
    k1, e, u1 = _rhs(s, p, held, frozen)
    k2, e, u1 = _rhs(s + 0.5 * dt * k1, p, held, frozen)
    k3, e, u1 = _rhs(s + 0.5 * dt * k2, p, held, frozen)
    k4, e, u1 = _rhs(s + dt * k3, p, held, frozen)
    return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _post_step(s, renorm):
    F = s[FM].reshape(3, 3)
    s[FM] = (0.5 * (F + F.T)).ravel()
    if renorm:
        a = np.arctan2(s[18] - s[17], s[16] + s[19])
        s[PHI] = rot(a).ravel()


@njit(cache=True)
def _integrate(s, p, dt, n_steps, step0, renorm_every, record_every, held,
               buf, aux, n_rec):
    """Advance `n_steps`; records state/aux into buf/aux after every
    `record_every`-th global step.  Returns (status, steps_done, held, n_rec)."""
    for k in range(n_steps):
        frozen = _gain_norm(s[FM].reshape(3, 3), int(p[P_NORM])) > p[P_M]
        s_new = _step(s, p, dt, held, frozen)
        gstep = step0 + k + 1
        _post_step(s_new, gstep % renorm_every == 0)
        for j in range(N_STATE):
            if not np.isfinite(s_new[j]) or abs(s_new[j]) > _BLOWUP:
                return DIVERGED, k, held, n_rec
        s[:] = s_new
        held = _detector_output(s, p, held)
        if gstep % record_every == 0 and n_rec < buf.shape[0]:
            buf[n_rec, :] = s
            _, e, u1 = _rhs(s, p, held, frozen)
            aux[n_rec, 0] = e
            aux[n_rec, 1] = u1
            aux[n_rec, 2] = 1.0 if _gain_norm(s[FM].reshape(3, 3), int(p[P_NORM])) > p[P_M] else 0.0
            n_rec += 1
    return OK, n_steps, held, n_rec


def rk4_step(fun, y, t, dt):
    """One classical RK4 step of ``dy/dt = fun(t, y)`` (same tableau as the engine)."""
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(fun(t, y))
    k2 = np.asarray(fun(t + 0.5 * dt, y + 0.5 * dt * k1))
    k3 = np.asarray(fun(t + 0.5 * dt, y + 0.5 * dt * k2))
    k4 = np.asarray(fun(t + dt, y + dt * k3))
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---- scenarios -----------------------------------------------------------

EVENT_KINDS = ("P_ref", "f", "V_g", "i_d_ref", "i_q_ref")


@dataclass(frozen=True)
class Event:
    """A parameter step at `time` seconds.

    Kinds: ``P_ref`` (W, references recomputed at nominal grid conditions),
    ``f`` (grid frequency, Hz), ``V_g`` (grid amplitude, V) and
    ``i_d_ref``/``i_q_ref`` (direct current-reference steps, A).
    """

    time: float
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}; expected one of {EVENT_KINDS}")


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    events: tuple = ()
    pll_variant: str = None
    P_start: float = None

    def __post_init__(self):
        times = [ev.time for ev in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        if any(t < 0 or t > self.duration for t in times):
            raise ValueError("event times must lie within the duration")
        if self.pll_variant is not None and self.pll_variant not in SOURCES:
            raise ValueError(f"pll_variant must be one of {sorted(SOURCES)}")


V_G_STEPPED = 248.215


def builtin_scenarios(cfg):
    """The laboratory test cases, with events placed after the warm-up.

    Power levels follow ``cfg.P_ref``: the power step goes from half of it
    to all of it (300 W to 600 W by default), the other cases run at it.
    """
    t0, T = cfg.warmup, max(cfg.duration, cfg.warmup + 1.0)
    P, P_half = cfg.P_ref, 0.5 * cfg.P_ref
    return {
        "power-step": Scenario("power-step", T, (Event(t0, "P_ref", P),), P_start=P_half),
        "comparison": Scenario("comparison", max(T, t0 + 1.5),
                               (Event(t0, "P_ref", P), Event(t0 + 0.5, "V_g", V_G_STEPPED)),
                               P_start=P_half),
        "freq-step": Scenario("freq-step", T, (Event(t0, "f", 52.0),), P_start=P),
        "vg-step": Scenario("vg-step", T, (Event(t0, "V_g", V_G_STEPPED),), P_start=P),
    }


def scenario_to_text(sc):
    lines = ["[scenario]", f"name = {sc.name}", f"duration = {sc.duration!r}"]
    if sc.pll_variant:
        lines.append(f"variant = {sc.pll_variant}")
    if sc.P_start is not None:
        lines.append(f"P_start = {sc.P_start!r}")
    lines.append("events =")
    lines += [f"    {ev.time!r} {ev.kind} {ev.value!r}" for ev in sc.events]
    return "\n".join(lines) + "\n"


def parse_scenario(text, source="<string>"):
    """Read a ``[scenario]`` section (see :func:`scenario_to_text`)."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string(text, source=source)
    if not parser.has_section("scenario"):
        raise ValueError(f"{source}: no [scenario] section")
    sec = parser["scenario"]
    events = []
    for line in sec.get("events", "").splitlines():
        if not line.strip():
            continue
        t, kind, value = line.split()
        events.append(Event(float(t), kind, float(value)))
    p_start = sec.get("P_start")
    return Scenario(name=sec.get("name", "custom"), duration=float(sec["duration"]),
                    events=tuple(events), pll_variant=sec.get("variant"),
                    P_start=float(p_start) if p_start is not None else None)


# ---- trace ---------------------------------------------------------------

TRACE_VERSION = 1
COLUMNS = (
    "t", "i_d", "i_q", "i_gd", "i_gq", "v_d", "v_q",
    "phi", "phi_deg", "xhat_1", "xhat_2",
    "theta_hat_1", "theta_hat_2", "theta_hat_3", "f_hat", "Vg_hat",
    "e_phi", "u1", "pe_metric", "F_norm", "frozen",
    "i_d_ref", "i_q_ref", "phi_ref", "f_true", "Vg_true",
)


@dataclass
class Trace:
    """Down-sampled run record.

    ``data`` maps every name in :data:`COLUMNS` to an array; ``states`` holds
    the raw state vectors at the same instants.  ``meta`` carries the
    references, event snapping and summary.
    """

    data: dict
    states: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.data[name]

    @property
    def t(self):
        return self.data["t"]

    def __len__(self):
        return len(self.data["t"])


def settling_time(t, y, target, band_fraction=0.02, t_event=0.0, t_end=None, band=None):
    """Time after `t_event` from which `y` stays within the band around `target`.

    The band is ``band`` if given, else ``band_fraction * |target|``.
    Returns ``None`` (not settled) when the last sample in the window is
    outside the band.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size == 0:
        raise ValueError("empty trace")
    if band is None:
        band = band_fraction * abs(target)
    sel = t >= t_event - 1e-12
    if t_end is not None:
        sel &= t <= t_end + 1e-12
    tt, yy = t[sel], y[sel]
    if tt.size == 0:
        raise ValueError("no samples in the window")
    outside = np.abs(yy - target) > band
    if outside[-1]:
        return None
    if not outside.any():
        return 0.0
    k = np.nonzero(outside)[0][-1]
    return float(tt[k + 1] - t_event)


# ---- runner --------------------------------------------------------------

def _params(cfg, refs, variant, grid):
    p = np.zeros(N_PARAM)
    pl = cfg.plant
    p[[P_L, P_R, P_LG, P_RG, P_C, P_VDC]] = pl.L, pl.r, pl.L_g, pl.r_g, pl.C, pl.V_dc
    p[P_VG], p[P_W] = grid.V_g, grid.omega
    p[P_LAM] = cfg.filt.lam
    est = cfg.estimator
    p[P_ALPHA], p[P_BETA], p[P_M], p[P_NORM] = est.alpha, est.beta, est.M, est.norm_code
    p[P_KPP], p[P_KIP] = cfg.pll.K_P, cfg.pll.K_I
    p[P_KPI], p[P_KII] = cfg.current.K_P, cfg.current.K_I
    p[P_PHIREF] = refs.phi_ref
    p[P_IDREF], p[P_IQREF] = refs.i_dq_ref
    p[P_DET] = DETECTORS[cfg.pll.detector]
    p[P_SRC] = SOURCES[variant]
    p[P_MODEL] = _MODELS[cfg.model]
    return p


def initial_state(cfg, refs, model=None):
    """State vector at t = 0 for ``cfg.initial`` ('rest' or 'equilibrium')."""
    model = model or cfg.model
    s = np.zeros(N_STATE)
    s[PHI] = np.eye(2).ravel()
    s[FM] = (np.eye(3) / cfg.estimator.f0).ravel()
    s[THH] = cfg.theta0
    if cfg.initial == "equilibrium":
        plant, _, cc = equilibrium(refs, cfg.grid, cfg.plant, cfg.current.K_I)
        th = refs.phi_ref
        s[TH] = th
        s[XC] = -cfg.grid.omega / cfg.pll.K_I
        s[XI] = cc.xi
        if model == "abc":
            s[0:3] = inv_park(plant.i_g, th)
            s[3:6] = inv_park(plant.i, th)
            s[6:9] = inv_park(plant.v, th)
        else:
            s[0:2], s[2:4], s[4:6] = plant.i_g, plant.v, plant.i
    return s


def _build_trace(cfg, states, aux, times, p_hist):
    """Derived columns from raw states; `p_hist` is the parameter vector per sample."""
    n = len(times)
    if cfg.model == "abc":
        th = states[:, TH]
        i_g = park_series(states[:, 0:3], th)
        i = park_series(states[:, 3:6], th)
        v = park_series(states[:, 6:9], th)
    else:
        i_g, v, i = states[:, 0:2], states[:, 2:4], states[:, 4:6]
    z = states[:, Z]
    Phi = states[:, PHI].reshape(n, 2, 2)
    thh = states[:, THH]
    xi_col = np.column_stack([-i_g[:, 1] - z[:, 0], i_g[:, 0] - z[:, 1]])
    xhat = xi_col * thh[:, :1] + np.einsum("kij,kj->ki", Phi, thh[:, 1:])
    phi = states[:, TH] - states[:, GPH]
    F = states[:, FM]
    if cfg.estimator.norm == "fro":
        fnorm = np.sqrt(np.sum(F * F, axis=1))
    else:
        fnorm = np.array([np.max(np.abs(np.linalg.eigvalsh(f.reshape(3, 3)))) for f in F])

    # windowed excitation from the running Gram integral
    G = states[:, GR].reshape(n, 3, 3)
    lag = int(round(cfg.pe_window * cfg.output_rate))
    pe = np.full(n, np.nan)
    if 0 < lag < n:
        d = G[lag:] - G[:-lag]
        pe[lag:] = np.linalg.eigvalsh(0.5 * (d + np.transpose(d, (0, 2, 1))))[:, 0]

    data = {
        "t": times,
        "i_d": i[:, 0], "i_q": i[:, 1], "i_gd": i_g[:, 0], "i_gq": i_g[:, 1],
        "v_d": v[:, 0], "v_q": v[:, 1],
        "phi": phi, "phi_deg": np.degrees([wrap_angle(a) for a in phi]),
        "xhat_1": xhat[:, 0], "xhat_2": xhat[:, 1],
        "theta_hat_1": thh[:, 0], "theta_hat_2": thh[:, 1], "theta_hat_3": thh[:, 2],
        "f_hat": thh[:, 0] / (2 * np.pi),
        "Vg_hat": cfg.plant.L_g * np.hypot(xhat[:, 0], xhat[:, 1]),
        "e_phi": aux[:, 0], "u1": aux[:, 1], "pe_metric": pe, "F_norm": fnorm,
        "frozen": aux[:, 2],
        "i_d_ref": p_hist[:, P_IDREF], "i_q_ref": p_hist[:, P_IQREF],
        "phi_ref": p_hist[:, P_PHIREF],
        "f_true": p_hist[:, P_W] / (2 * np.pi), "Vg_true": p_hist[:, P_VG],
    }
    data = {k: np.ascontiguousarray(data[k], dtype=float) for k in COLUMNS}
    return data


def _check_saturation(cfg, trace):
    d = trace.data
    i = np.column_stack([d["i_d"], d["i_q"]])
    v = np.column_stack([d["v_d"], d["v_q"]])
    e = np.column_stack([d["i_d_ref"], d["i_q_ref"]]) - i
    xi = trace.states[:, XI]
    ji = np.column_stack([-i[:, 1], i[:, 0]])
    u23 = v - cfg.plant.L * d["u1"][:, None] * ji + cfg.current.K_P * e + cfg.current.K_I * xi
    m = np.hypot(u23[:, 0], u23[:, 1]) / cfg.plant.V_dc
    if np.any(m > 1.0):
        k = int(np.argmax(m > 1.0))
        warnings.warn(f"modulation index exceeds 1 (first at t = {d['t'][k]:.4f} s, "
                      f"max {m.max():.3f})", RuntimeWarning, stacklevel=3)


def summarize(trace, scenario, band_fraction=0.02, f_band=0.1):
    """Settling times of the main channels after each event (``None`` = not settled)."""
    t = trace.t
    out = []
    bounds = [ev.time for ev in scenario.events]
    for k, ev in enumerate(scenario.events):
        t_end = bounds[k + 1] if k + 1 < len(bounds) else t[-1]
        after = np.searchsorted(t, ev.time + 1e-12)
        idx = min(after, len(t) - 1)
        d = trace.data
        entry = {"event": f"{ev.kind} -> {ev.value:g} at t = {ev.time:g} s"}
        for ch, target, kw in (
            ("i_d", d["i_d_ref"][idx], {}),
            ("i_q", d["i_q_ref"][idx], {}),
            ("phi_deg", np.degrees(d["phi_ref"][idx]), {}),
            ("f_hat", d["f_true"][idx], {"band": f_band}),
            ("Vg_hat", d["Vg_true"][idx], {}),
        ):
            entry[ch] = settling_time(t, d[ch], target, band_fraction, ev.time, t_end, **kw)
        out.append(entry)
    final = {
        "i_d_error": float(trace["i_d"][-1] - trace["i_d_ref"][-1]),
        "i_q_error": float(trace["i_q"][-1] - trace["i_q_ref"][-1]),
        "phi_error_deg": float(trace["phi_deg"][-1] - np.degrees(trace["phi_ref"][-1])),
        "f_hat_error": float(trace["f_hat"][-1] - trace["f_true"][-1]),
        "Vg_hat_error": float(trace["Vg_hat"][-1] - trace["Vg_true"][-1]),
    }
    return {"events": out, "final": final}


def run_scenario(cfg, sc, variant=None):
    """Simulate scenario `sc` under `cfg` and return its :class:`Trace`.

    Raises
    ------
    DivergenceError
        With the partial trace attached.
    adaptive_pll.ctrl.InfeasiblePowerFlow
        If a power reference cannot be met at nominal conditions.
    """
    variant = variant or sc.pll_variant or cfg.pll.source
    dt = cfg.dt
    grid = GridTruth(V_g=cfg.grid.V_g, omega=cfg.grid.omega)
    P0 = cfg.P_ref if sc.P_start is None else sc.P_start
    refs = compute_references(P0, cfg.V_ref, cfg.grid, cfg.plant)
    ref_log = {P0: refs}
    p = _params(cfg, refs, variant, grid)

    n_total = int(round(sc.duration / dt))
    record_every = max(1, int(round(1.0 / (cfg.output_rate * dt))))
    renorm_every = max(1, int(round(cfg.renorm_interval / dt)))

    # snap events to step boundaries
    snaps = []
    for ev in sc.events:
        n = int(round(ev.time / dt))
        snaps.append((n, ev, abs(n * dt - ev.time)))

    n_buf = n_total // record_every + 1
    buf = np.zeros((n_buf, N_STATE))
    aux = np.zeros((n_buf, 3))
    p_hist = np.zeros((n_buf, N_PARAM))
    s = initial_state(cfg, refs)
    held = 0.0
    buf[0] = s
    held = _detector_output(s, p, held)
    _, e0, u10 = _rhs(s, p, held, False)
    aux[0] = e0, u10, float(_gain_norm(s[FM].reshape(3, 3), int(p[P_NORM])) > p[P_M])
    p_hist[0] = p
    n_rec = 1

    step = 0
    status = OK
    for n_ev, ev in [(n, ev) for n, ev, _ in snaps] + [(n_total, None)]:
        n_seg = n_ev - step
        if n_seg > 0:
            first = n_rec
            status, done, held, n_rec = _integrate(s, p, dt, n_seg, step, renorm_every,
                                                   record_every, held, buf, aux, n_rec)
            p_hist[first:n_rec] = p
            step += done
            if status != OK:
                break
        if ev is None:
            break
        if ev.kind == "P_ref":
            if ev.value not in ref_log:
                ref_log[ev.value] = compute_references(ev.value, cfg.V_ref, cfg.grid, cfg.plant)
            r = ref_log[ev.value]
            p[P_IDREF], p[P_IQREF] = r.i_dq_ref
            p[P_PHIREF] = r.phi_ref
        elif ev.kind == "f":
            p[P_W] = 2 * np.pi * ev.value
        elif ev.kind == "V_g":
            p[P_VG] = ev.value
        elif ev.kind == "i_d_ref":
            p[P_IDREF] = ev.value
        elif ev.kind == "i_q_ref":
            p[P_IQREF] = ev.value

    times = np.arange(n_rec) * record_every * dt
    trace = Trace(data=_build_trace(cfg, buf[:n_rec], aux[:n_rec], times, p_hist[:n_rec]),
                  states=buf[:n_rec].copy())
    trace.meta = {
        "scenario": sc.name, "variant": variant,
        "references": ref_log,
        "event_snaps": [(ev.kind, ev.time, n * dt, d) for n, ev, d in snaps],
        "record_every": record_every,
    }
    if status != OK:
        t_fail = (step + 1) * dt
        raise DivergenceError(f"simulation diverged at t = {t_fail:.6f} s", t_fail, trace)
    trace.meta["summary"] = summarize(trace, sc)
    if cfg.saturation_warning:
        _check_saturation(cfg, trace)
    return trace


def lre_residual(trace, cfg):
    """``|Y - Omega theta*|`` along a trace, with ``theta*`` built from its first sample.

    Valid while the grid frequency stays at its first-sample value and the
    observer starts from ``z = 0``, ``Phi = I``.
    """
    st = trace.states
    lam = cfg.filt.lam
    y12 = np.column_stack([trace["i_gd"], trace["i_gq"]])
    Y = lam * (y12 - st[:, WY]) - st[:, WG]
    W = st[:, WM].reshape(-1, 2, 3)
    omega = 2 * np.pi * trace["f_true"][0]
    phi0 = trace["phi"][0]
    x0 = trace["Vg_true"][0] / cfg.plant.L_g * np.array([np.cos(phi0), np.sin(phi0)])
    theta = lre_parameters(x0, y12[0], st[0, Z], omega)
    return np.linalg.norm(Y + W @ theta, axis=1)


def lre_probe(cfg, duration=0.02, fit_window=0.01):
    """Run from the operating point with a fresh observer and fit the LRE decay.

    Returns ``(t, residual, fitted_rate)``; the residual should decay as
    ``exp(-lambda t)`` exactly.
    """
    probe = cfg.replace(sim__initial="equilibrium", sim__output_rate=1.0 / cfg.dt)
    tr = run_scenario(probe, Scenario("lre-probe", duration))
    res = lre_residual(tr, probe)
    sel = (tr.t <= fit_window) & (res > 0)
    slope = np.polyfit(tr.t[sel], np.log(res[sel]), 1)[0]
    return tr.t, res, float(-slope)


def write_trace_csv(trace, path):
    """Write the trace with 17 significant digits and a versioned header comment."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# adaptive_pll trace v{TRACE_VERSION}: {','.join(COLUMNS)}\n")
        fh.write(",".join(COLUMNS) + "\n")
        cols = [trace.data[c] for c in COLUMNS]
        for row in zip(*cols):
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def read_trace_csv(path):
    """Load a CSV written by :func:`write_trace_csv` (columns matched by name)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    arr = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
    arr = arr.reshape(-1, len(header))
    return Trace(data={name: arr[:, k].copy() for k, name in enumerate(header)})
