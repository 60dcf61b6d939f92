"""Inner dq current controller and the nominal power-flow references."""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .frames import jmul
from .plant import PlantStateDq, _deriv_dq


class InfeasiblePowerFlow(ValueError):
    """The requested power cannot be transferred through the grid impedance."""


@dataclass(frozen=True)
class CurrentGains:
    K_P: float = 1250.0
    K_I: float = 50000.0

    def __post_init__(self):
        if not (self.K_P > 0 and self.K_I > 0):
            raise ValueError("current-loop gains must be strictly positive")


@dataclass
class CurrentCtrlState:
    xi: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass(frozen=True)
class References:
    """Operating point at nominal grid conditions.

    ``i_dq_ref`` is the converter current, ``phi_ref`` the angle of the grid
    voltage in the frame that puts the PCC voltage on the d axis.
    ``Q`` is the reactive power delivered into the grid branch at that point.
    """

    i_dq_ref: np.ndarray
    phi_ref: float
    v_dq_ref: np.ndarray
    i_g_dq_ref: np.ndarray
    P: float
    Q: float


@njit(cache=True)
def _current_pi(xi, i_dq, i_ref, v_dq, u1, L, K_P, K_I):
    e = i_ref - i_dq
    u23 = v_dq - L * u1 * jmul(i_dq) + K_P * e + K_I * xi
    return u23, e


def current_pi(c, i_dq, i_ref, v_dq, u1, p, K_P, K_I):
    """PI current loop with feed-forward of the PCC voltage and frame coupling.

    Returns ``(u23, dxi)`` where ``u23 = V_dc m_dq`` is the commanded
    converter voltage in volts.
    """
    return _current_pi(np.asarray(c.xi, float), np.asarray(i_dq, float),
                       np.asarray(i_ref, float), np.asarray(v_dq, float),
                       float(u1), p.L, float(K_P), float(K_I))


def compute_references(P_ref, V_ref_ll, g_nominal, p):
    """Steady-state currents and phase shift delivering `P_ref` at the PCC.

    The PCC voltage is fixed to ``(V_a, 0)`` with ``V_a = V_ref_ll sqrt(2/3)``
    and the grid voltage to its nominal amplitude.  The grid branch then
    gives two equations for ``(i_g,q, phi_ref)`` once ``i_g,d`` is fixed by
    the power; of the two roots the low-current one is returned.

    Raises
    ------
    InfeasiblePowerFlow
        When no real operating point exists.
    """
    if P_ref < 0:
        raise ValueError("P_ref must be non-negative")
    V_a = V_ref_ll * np.sqrt(2.0 / 3.0)
    w = g_nominal.omega
    X = w * p.L_g
    r_g = p.r_g
    a = P_ref / (1.5 * V_a)
    # |v - Z i_g|^2 = V_g^2 with Z i = r_g i - X J i, as a quadratic in i_g,q
    Z2 = r_g**2 + X**2
    K = (V_a - r_g * a) ** 2 + (X * a) ** 2 - g_nominal.V_g**2
    disc = (X * V_a) ** 2 - Z2 * K
    if disc < 0:
        raise InfeasiblePowerFlow(
            f"P_ref = {P_ref:g} W exceeds the transfer capability at V_g = {g_nominal.V_g:g} V")
    b = (X * V_a - np.sqrt(disc)) / Z2
    i_g = np.array([a, b])
    v = np.array([V_a, 0.0])
    v_g = v - r_g * i_g + X * jmul(i_g)
    phi_ref = float(np.arctan2(v_g[1], v_g[0]))
    i = i_g - w * p.C * jmul(v)
    Q = 1.5 * (v[1] * i_g[0] - v[0] * i_g[1])
    return References(i_dq_ref=i, phi_ref=phi_ref, v_dq_ref=v, i_g_dq_ref=i_g,
                      P=1.5 * float(v @ i_g), Q=float(Q))


def equilibrium(refs, g_nominal, p, K_I):
    """Plant state, unknown state and controller integral at the operating point."""
    w = g_nominal.omega
    s = PlantStateDq(i_g=refs.i_g_dq_ref.copy(), v=refs.v_dq_ref.copy(),
                     i=refs.i_dq_ref.copy())
    x = (g_nominal.V_g / p.L_g) * np.array([np.cos(refs.phi_ref), np.sin(refs.phi_ref)])
    xi = p.r * refs.i_dq_ref / K_I
    return s, x, CurrentCtrlState(xi=xi)


def equilibrium_residual(refs, g_nominal, p):
    """Norm of the dq circuit derivative at the references with ``u1 = omega``."""
    s, x, _ = equilibrium(refs, g_nominal, p, 1.0)
    w = g_nominal.omega
    u23 = s.v + p.r * s.i - p.L * w * jmul(s.i)
    d = _deriv_dq(s.i_g, s.v, s.i, w, u23, x, p.L, p.r, p.L_g, p.r_g, p.C)
    return float(np.sqrt(sum(np.sum(di**2) for di in d)))
