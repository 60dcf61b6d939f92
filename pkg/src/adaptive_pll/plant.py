"""Grid source and averaged VSC circuit, in abc and dq coordinates."""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .frames import jmul


@dataclass(frozen=True)
class PlantParams:
    """Phase reactor, grid impedance, filter capacitor and DC link.

    Defaults are the laboratory values; ``V_dc`` is an assumed value since
    the averaged model only ever uses the product ``V_dc * m``.
    """

    L: float = 9.5e-3
    r: float = 0.64
    L_g: float = 0.282
    r_g: float = 12.8
    C: float = 4.6e-6
    V_dc: float = 700.0

    def __post_init__(self):
        for name in ("L", "r", "L_g", "r_g", "C", "V_dc"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class GridTruth:
    """Hidden grid voltage: amplitude (V), angular frequency (rad/s), phase (rad)."""

    V_g: float = 310.2687
    omega: float = 2 * np.pi * 50.0
    phase: float = 0.0


@dataclass
class PlantStateAbc:
    i_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    i: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class PlantStateDq:
    i_g: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    i: np.ndarray = field(default_factory=lambda: np.zeros(2))


@njit(cache=True)
def _grid_voltage(V_g, phase):
    out = np.empty(3)
    out[0] = V_g * np.sin(phase)
    out[1] = V_g * np.sin(phase - 2.0 * np.pi / 3.0)
    out[2] = V_g * np.sin(phase + 2.0 * np.pi / 3.0)
    return out


@njit(cache=True)
def _deriv_abc(i_g, i, v, vdc_m, v_g, L, r, L_g, r_g, C):
    di_g = (-r_g * i_g + v - v_g) / L_g
    di = (-r * i + vdc_m - v) / L
    dv = (-i_g + i) / C
    return di_g, di, dv


@njit(cache=True)
def _deriv_dq(i_g, v, i, u1, u23, x, L, r, L_g, r_g, C):
    # v_g,dq = L_g * x
    di_g = (-r_g * i_g + v) / L_g + u1 * jmul(i_g) - x
    dv = (-i_g + i) / C + u1 * jmul(v)
    di = (-v - r * i + u23) / L + u1 * jmul(i)
    return di_g, dv, di


def grid_voltage(g):
    """Three-phase grid voltage ``V_g sin(phase - k 2pi/3)``."""
    return _grid_voltage(float(g.V_g), float(g.phase))


def deriv_abc(s, m, g, p):
    """Time derivative of the abc circuit state under modulation `m`.

    Parameters
    ----------
    s : PlantStateAbc
    m : array_like, shape (3,)
        Modulation indices; the converter voltage is ``V_dc * m``.
    g : GridTruth
    p : PlantParams

    Returns
    -------
    PlantStateAbc
        Derivatives packed in the state container.
    """
    vdc_m = p.V_dc * np.asarray(m, dtype=float)
    di_g, di, dv = _deriv_abc(
        np.asarray(s.i_g, float), np.asarray(s.i, float), np.asarray(s.v, float),
        vdc_m, grid_voltage(g), p.L, p.r, p.L_g, p.r_g, p.C)
    return PlantStateAbc(i_g=di_g, i=di, v=dv)


def deriv_dq(s, u, x, p):
    """Time derivative of the dq circuit state.

    `u` is ``(u1, u2, u3)``: frame speed in rad/s followed by the converter
    voltage ``V_dc * m_dq``.  `x` is the unknown state ``v_g,dq / L_g``.
    """
    u = np.asarray(u, dtype=float)
    di_g, dv, di = _deriv_dq(
        np.asarray(s.i_g, float), np.asarray(s.v, float), np.asarray(s.i, float),
        u[0], u[1:3].copy(), np.asarray(x, float), p.L, p.r, p.L_g, p.r_g, p.C)
    return PlantStateDq(i_g=di_g, v=dv, i=di)


def unknown_state_deriv(x, u1, omega):
    """``(u1 - omega) J x``: the grid voltage seen from a frame rotating at `u1`."""
    return (u1 - omega) * jmul(np.asarray(x, dtype=float))
