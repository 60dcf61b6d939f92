"""Observer-based adaptive PLL for a grid-connected voltage source converter.

Modules map to the pieces of the loop:

frames
    abc/dq transforms, rotations, angle wrapping
plant
    grid source and averaged converter circuit
gpebo
    dynamic extension, regressor and grid-voltage reconstruction
lsff
    least squares with forgetting factor, excitation monitor
pll
    phase detectors and the PI loop
ctrl
    dq current controller, power-flow references
engine
    RK4 closed-loop simulation, scenarios, traces
config, cli
    configuration text format and the ``adaptive-pll`` command
"""
from .config import ConfigError, SimConfig, parse_config, parse_config_text
from .ctrl import InfeasiblePowerFlow, compute_references
from .engine import (DivergenceError, Event, Scenario, Trace, builtin_scenarios,
                     run_scenario, settling_time)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "SimConfig", "parse_config", "parse_config_text",
    "InfeasiblePowerFlow", "compute_references",
    "DivergenceError", "Event", "Scenario", "Trace", "builtin_scenarios",
    "run_scenario", "settling_time",
]
