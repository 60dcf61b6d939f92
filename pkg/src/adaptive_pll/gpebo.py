"""Generalized parameter estimation-based observer for the grid voltage.

The grid voltage behind the impedance, scaled as ``x = v_g,dq / L_g``, is
rewritten as ``x = [xi | Phi] theta`` with ``xi = J y12 - z`` built from a
dynamic extension driven by the grid current ``y12`` and PCC voltage
``y34``.  ``theta = (omega, c)`` is constant while the grid frequency is,
so reconstructing ``x`` reduces to estimating three numbers from the
filtered regression ``Y = Omega theta``.

All filters are first order, ``F(p) = lam / (p + lam)``.  The ``p F(p)``
term is realised as ``lam (y12 - F[y12])`` so no measurement is ever
differentiated.
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .frames import jmul


@dataclass(frozen=True)
class FilterParams:
    lam: float = 1000.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be strictly positive")


@dataclass
class ObserverState:
    """Dynamic extension and filter states.

    ``w_y`` filters ``y12`` and ``w_g`` filters
    ``(u1 J - r_g/L_g) y12 + y34/L_g``; ``W`` filters ``[xi | Phi]``.
    """

    z: np.ndarray = field(default_factory=lambda: np.zeros(2))
    Phi: np.ndarray = field(default_factory=lambda: np.eye(2))
    w_y: np.ndarray = field(default_factory=lambda: np.zeros(2))
    w_g: np.ndarray = field(default_factory=lambda: np.zeros(2))
    W: np.ndarray = field(default_factory=lambda: np.zeros((2, 3)))


@dataclass
class Regressor:
    Y: np.ndarray
    Omega: np.ndarray


@njit(cache=True)
def _xi_phi(z, Phi, y12):
    out = np.empty((2, 3))
    jy = jmul(y12)
    out[0, 0] = jy[0] - z[0]
    out[1, 0] = jy[1] - z[1]
    out[:, 1:] = Phi
    return out


@njit(cache=True)
def _observer_deriv(z, Phi, w_y, w_g, W, y12, y34, u1, L_g, r_g, lam):
    dz = u1 * jmul(z) - (r_g / L_g) * jmul(y12) + jmul(y34) / L_g
    dPhi = np.empty((2, 2))
    dPhi[0, :] = -u1 * Phi[1, :]
    dPhi[1, :] = u1 * Phi[0, :]
    g = u1 * jmul(y12) - (r_g / L_g) * y12 + y34 / L_g
    dw_y = lam * (y12 - w_y)
    dw_g = lam * (g - w_g)
    dW = lam * (_xi_phi(z, Phi, y12) - W)
    return dz, dPhi, dw_y, dw_g, dW


@njit(cache=True)
def _regressor(w_y, w_g, W, y12, lam):
    Y = lam * (y12 - w_y) - w_g
    return Y, -W


@njit(cache=True)
def _estimate_x(z, Phi, y12, theta_hat):
    return _xi_phi(z, Phi, y12) @ theta_hat


def observer_deriv(o, y12, y34, u1, p, f):
    """Derivative of every observer state, returned as an :class:`ObserverState`.

    Parameters
    ----------
    o : ObserverState
    y12, y34 : array_like, shape (2,)
        Grid current and PCC voltage in the dq frame.
    u1 : float
        Frame speed (rad/s).
    p : PlantParams
        Only ``L_g`` and ``r_g`` are read; they are assumed known.
    f : FilterParams
    """
    dz, dPhi, dw_y, dw_g, dW = _observer_deriv(
        np.asarray(o.z, float), np.asarray(o.Phi, float), np.asarray(o.w_y, float),
        np.asarray(o.w_g, float), np.asarray(o.W, float),
        np.asarray(y12, float), np.asarray(y34, float), float(u1),
        p.L_g, p.r_g, f.lam)
    return ObserverState(z=dz, Phi=dPhi, w_y=dw_y, w_g=dw_g, W=dW)


def regressor(o, y12, f):
    """Read out ``(Y, Omega)`` from the filter states and current ``y12``."""
    Y, Omega = _regressor(np.asarray(o.w_y, float), np.asarray(o.w_g, float),
                          np.asarray(o.W, float), np.asarray(y12, float), f.lam)
    return Regressor(Y=Y, Omega=Omega)


def estimate_x(o, y12, theta_hat):
    """``[J y12 - z | Phi] @ theta_hat``."""
    return _estimate_x(np.asarray(o.z, float), np.asarray(o.Phi, float),
                       np.asarray(y12, float), np.asarray(theta_hat, float))


def recover_grid(theta_hat, x_hat, p):
    """Grid frequency (rad/s and Hz) and amplitude implied by the estimates."""
    omega_hat = float(theta_hat[0])
    return omega_hat, omega_hat / (2 * np.pi), p.L_g * float(np.hypot(*x_hat))


def lre_parameters(x0, y12_0, z0, omega):
    """The constant ``theta`` such that ``x = [xi | Phi] theta`` from ``Phi(0) = I``.

    Holds while the grid frequency stays at `omega`.
    """
    xi0 = jmul(np.asarray(y12_0, float)) - np.asarray(z0, float)
    c = np.asarray(x0, float) - omega * xi0
    return np.array([omega, c[0], c[1]])
