"""Continuous-time least squares with forgetting factor and gain freeze."""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

NORM_FRO = 0
NORM_SPECTRAL = 1
_NORMS = {"fro": NORM_FRO, "spectral": NORM_SPECTRAL}


class InsufficientHistory(ValueError):
    """Raised when a regressor history does not cover the requested window."""


@dataclass(frozen=True)
class EstimatorGains:
    """Adaptation gain, forgetting rate (1/s), gain-norm cap, inverse initial gain."""

    alpha: float = 600.0
    beta: float = 500.0
    M: float = 100.0
    f0: float = 1.0
    norm: str = "fro"

    def __post_init__(self):
        if not (self.alpha > 0 and self.f0 > 0 and self.M > 0 and self.beta >= 0):
            raise ValueError("need alpha > 0, f0 > 0, M > 0 and beta >= 0")
        if self.norm not in _NORMS:
            raise ValueError(f"norm must be one of {sorted(_NORMS)}")

    @property
    def norm_code(self):
        return _NORMS[self.norm]


@dataclass
class EstimatorState:
    theta_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))
    F: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def initial(cls, gains, theta0=(0.0, 0.0, 0.0)):
        return cls(theta_hat=np.array(theta0, dtype=float), F=np.eye(3) / gains.f0)


@njit(cache=True)
def _gain_norm(F, code):
    if code == NORM_SPECTRAL:
        return np.max(np.abs(np.linalg.eigvalsh(0.5 * (F + F.T))))
    return np.sqrt(np.sum(F * F))


@njit(cache=True)
def _estimator_deriv(theta_hat, F, Y, Omega, alpha, beta, frozen):
    FOt = F @ Omega.T
    dtheta = alpha * (FOt @ (Y - Omega @ theta_hat))
    if frozen:
        dF = np.zeros((3, 3))
    else:
        dF = -alpha * (FOt @ (Omega @ F)) + beta * F
    return dtheta, dF


def gain_norm(F, norm="fro"):
    return float(_gain_norm(np.asarray(F, float), _NORMS[norm]))


def estimator_deriv(e, r, g):
    """Derivatives ``(dtheta_hat, dF)`` of the estimator.

    The freeze test ``||F|| > M`` is evaluated on the current `F`; when it
    trips, ``dF`` is zero while ``theta_hat`` keeps adapting.
    """
    frozen = gain_norm(e.F, g.norm) > g.M
    return _estimator_deriv(np.asarray(e.theta_hat, float), np.asarray(e.F, float),
                            np.asarray(r.Y, float), np.asarray(r.Omega, float),
                            g.alpha, g.beta, frozen)


@njit(cache=True)
def _run_estimator(Omega, Y, dt, theta, F, alpha, beta, M, code):
    n = (Omega.shape[0] - 1) // 2
    for k in range(n):
        frozen = _gain_norm(F, code) > M
        a = 2 * k
        k1t, k1F = _estimator_deriv(theta, F, Y[a], Omega[a], alpha, beta, frozen)
        k2t, k2F = _estimator_deriv(theta + 0.5 * dt * k1t, F + 0.5 * dt * k1F,
                                    Y[a + 1], Omega[a + 1], alpha, beta, frozen)
        k3t, k3F = _estimator_deriv(theta + 0.5 * dt * k2t, F + 0.5 * dt * k2F,
                                    Y[a + 1], Omega[a + 1], alpha, beta, frozen)
        k4t, k4F = _estimator_deriv(theta + dt * k3t, F + dt * k3F,
                                    Y[a + 2], Omega[a + 2], alpha, beta, frozen)
        theta = theta + dt / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)
        F = F + dt / 6.0 * (k1F + 2 * k2F + 2 * k3F + k4F)
        F = 0.5 * (F + F.T)
    return theta, F


def run_estimator(Omega, Y, dt, gains, state=None):
    """Integrate the estimator alone against a sampled regressor.

    `Omega` (shape ``(2n+1, 2, 3)``) and `Y` (shape ``(2n+1, 2)``) are
    sampled every ``dt/2`` so each RK4 step has its midpoint values.
    Returns the final :class:`EstimatorState`.
    """
    Omega = np.ascontiguousarray(Omega, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    if Omega.shape[0] % 2 != 1 or Omega.shape[0] != Y.shape[0]:
        raise ValueError("need 2n+1 matching half-step samples")
    state = state or EstimatorState.initial(gains)
    theta, F = _run_estimator(Omega, Y, float(dt), state.theta_hat.astype(float),
                              state.F.astype(float), gains.alpha, gains.beta,
                              gains.M, gains.norm_code)
    return EstimatorState(theta_hat=theta, F=F)


def synthetic_regressor(t, rate=1.0):
    """A persistently exciting ``Omega(t) = [rot(rate t) | e1]``, shape ``(len(t), 2, 3)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c, s = np.cos(rate * t), np.sin(rate * t)
    out = np.zeros((t.size, 2, 3))
    out[:, 0, 0], out[:, 0, 1] = c, -s
    out[:, 1, 0], out[:, 1, 1] = s, c
    out[:, 0, 2] = 1.0
    return out


def excitation_gram(omega_history, dt):
    """Trapezoidal ``int Omega^T Omega`` over a uniformly sampled history."""
    om = np.asarray(omega_history, dtype=float)
    g = np.einsum("kij,kil->kjl", om, om)
    return np.trapezoid(g, dx=dt, axis=0)


def pe_metric(omega_history, window, dt):
    """Smallest eigenvalue of ``int Omega^T Omega`` over the trailing `window`.

    Parameters
    ----------
    omega_history : array_like, shape (n, 2, 3)
        Regressor samples spaced `dt` apart, most recent last.
    window : float
        Window length in seconds.
    dt : float
        Sample spacing in seconds.

    Raises
    ------
    InsufficientHistory
        If the window is empty or longer than the history.
    """
    om = np.asarray(omega_history, dtype=float)
    steps = int(round(window / dt))
    if window <= 0 or steps < 1:
        raise InsufficientHistory("empty PE window")
    if om.shape[0] < steps + 1:
        raise InsufficientHistory(
            f"history spans {max(om.shape[0] - 1, 0) * dt:g} s, window needs {window:g} s")
    gram = excitation_gram(om[-(steps + 1):], dt)
    return float(np.linalg.eigvalsh(gram)[0])
