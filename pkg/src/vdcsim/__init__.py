"""Adaptive subsystem-based impedance control workbench for a 7-DoF arm.

Kinematics and dynamics run in a compiled kernel when available, falling back
to numpy otherwise (see :mod:`vdcsim.backend`).
"""

from .backend import kernels
from .controller import ControllerGains, ImpedanceTarget, VDCController
from .interaction import HumanArmModel, PassivityMonitor, VirtualWall
from .nal import AdaptationState, bregman_divergence, nal_map, nal_unmap
from .robot import RobotModel, default_robot, load_robot
from .sim import RunLog, Scenario, run_scenario

__version__ = "0.1.0"
BACKEND = "c" if kernels.__name__.endswith("_ckernels") else "python"

__all__ = [
    "AdaptationState", "ControllerGains", "HumanArmModel", "ImpedanceTarget", "PassivityMonitor",
    "RobotModel", "RunLog", "Scenario", "VDCController", "VirtualWall", "bregman_divergence",
    "default_robot", "load_robot", "nal_map", "nal_unmap", "run_scenario", "BACKEND",
]
