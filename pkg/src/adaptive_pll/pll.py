"""Phase detectors and the PI-plus-integrator loop.

Sign convention: the detector output is the phase *lead* of the detected
vector over ``phi_ref``, ``e ~ phi - phi_ref``, so that the PI law
``u1 = -K_P e - K_I x_c`` with ``d(theta)/dt = u1`` pulls the frame back.
With ``phi_ref = 0`` the SRF detector is the plain q component.
"""
from dataclasses import dataclass

import numpy as np
from numba import njit

from .frames import wrap_angle

SRF = 0
ATAN = 1
ADAPTIVE = 0
BASELINE = 1

DETECTORS = {"srf": SRF, "atan": ATAN}
SOURCES = {"adaptive": ADAPTIVE, "baseline": BASELINE}


class DetectorSingularity(ValueError):
    """ATAN detector evaluated at the origin, where the angle is undefined."""


@dataclass(frozen=True)
class PllConfig:
    K_P: float = 200.0
    K_I: float = 5000.0
    phi_ref: float = 0.0
    detector: str = "atan"
    source: str = "adaptive"

    def __post_init__(self):
        if not (self.K_P > 0 and self.K_I > 0):
            raise ValueError("PLL gains must be strictly positive")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {sorted(DETECTORS)}")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {sorted(SOURCES)}")


@dataclass
class PllState:
    x_c: float = 0.0
    theta: float = 0.0


@njit(cache=True)
def _detect(s, phi_ref, mode, held):
    """Detector output; returns `held` for ATAN at the origin."""
    if mode == SRF:
        return np.cos(phi_ref) * s[1] - np.sin(phi_ref) * s[0]
    if s[0] == 0.0 and s[1] == 0.0:
        return held
    return wrap_angle(np.arctan2(s[1], s[0]) - phi_ref)


def phase_detector(s, phi_ref, mode="atan"):
    """Phase error of the dq vector `s` relative to ``phi_ref``.

    ``srf`` returns ``|s| sin(angle(s) - phi_ref)``; ``atan`` returns the
    wrapped angle difference itself.
    """
    s = np.asarray(s, dtype=float)
    code = DETECTORS[mode]
    if code == ATAN and s[0] == 0.0 and s[1] == 0.0:
        raise DetectorSingularity("ATAN detector is undefined at s = (0, 0)")
    return float(_detect(s, float(phi_ref), code, 0.0))


def pll_deriv(p, e_phi, cfg):
    """Integrator derivative and frame speed: ``(e_phi, -K_P e_phi - K_I x_c)``."""
    return e_phi, -cfg.K_P * e_phi - cfg.K_I * p.x_c


def baseline_source(v_dq):
    """Conventional PLL input: the measured PCC voltage, used as if it were the grid's."""
    return np.array(v_dq, dtype=float)
