"""Stationary (abc) to rotating (dq) frame transforms and angle helpers.

The dq transform is the amplitude-invariant one, applied with the angle
shifted by -pi/2 so that a grid voltage ``V sin(wt)`` seen from a frame at
angle ``theta`` reads ``V (cos phi, sin phi)`` with ``phi = theta - wt``.
Active power in these coordinates is ``1.5 * (v_d i_d + v_q i_q)``.
"""
import numpy as np
from numba import njit

#: Quarter-turn rotation, ``rot(pi/2)``.
J = np.array([[0.0, -1.0], [1.0, 0.0]])

_SHIFT = 2.0 * np.pi / 3.0


@njit(cache=True)
def rot(alpha):
    """Rotation matrix ``[[cos a, -sin a], [sin a, cos a]]``."""
    c = np.cos(alpha)
    s = np.sin(alpha)
    out = np.empty((2, 2))
    out[0, 0] = c
    out[0, 1] = -s
    out[1, 0] = s
    out[1, 1] = c
    return out


@njit(cache=True)
def jmul(x):
    """``J @ x`` for a 2-vector, without building ``J``."""
    out = np.empty(2)
    out[0] = -x[1]
    out[1] = x[0]
    return out


@njit(cache=True)
def park(s, theta):
    """Project an abc triple onto the dq frame at angle `theta`.

    The zero-sequence part of `s` is discarded.

    Parameters
    ----------
    s : ndarray, shape (3,)
        Instantaneous phase quantities.
    theta : float
        Frame angle (not wrapped; the -pi/2 offset is applied here).

    Returns
    -------
    ndarray, shape (2,)
    """
    delta = theta - 0.5 * np.pi
    ca = np.cos(delta)
    cb = np.cos(delta - _SHIFT)
    cc = np.cos(delta + _SHIFT)
    sa = np.sin(delta)
    sb = np.sin(delta - _SHIFT)
    sc = np.sin(delta + _SHIFT)
    out = np.empty(2)
    out[0] = (2.0 / 3.0) * (ca * s[0] + cb * s[1] + cc * s[2])
    out[1] = (2.0 / 3.0) * (sa * s[0] + sb * s[1] + sc * s[2])
    return out


@njit(cache=True)
def inv_park(d, theta):
    """Balanced abc triple whose dq image at `theta` is `d`."""
    delta = theta - 0.5 * np.pi
    out = np.empty(3)
    out[0] = np.cos(delta) * d[0] + np.sin(delta) * d[1]
    out[1] = np.cos(delta - _SHIFT) * d[0] + np.sin(delta - _SHIFT) * d[1]
    out[2] = np.cos(delta + _SHIFT) * d[0] + np.sin(delta + _SHIFT) * d[1]
    return out


@njit(cache=True)
def wrap_angle(a):
    """Wrap an angle to ``[-pi, pi)``."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    # float rounding can land exactly on +pi
    if w >= np.pi:
        w -= 2.0 * np.pi
    return w


def park_series(s, theta):
    """Vectorised :func:`park` for ``s`` of shape (n, 3) and ``theta`` of shape (n,)."""
    s = np.asarray(s, dtype=float)
    delta = np.asarray(theta, dtype=float) - 0.5 * np.pi
    offsets = np.array([0.0, -_SHIFT, _SHIFT])
    ang = delta[:, None] + offsets[None, :]
    d = (2.0 / 3.0) * np.sum(np.cos(ang) * s, axis=1)
    q = (2.0 / 3.0) * np.sum(np.sin(ang) * s, axis=1)
    return np.column_stack([d, q])
