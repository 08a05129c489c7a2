"""Desk-scale workbench for haptic plate classification with a
tendon-driven viscoelastic chain reservoir."""

__version__ = "0.1.0"

from .chain import (  # noqa: F401
    ChainConfig,
    ChainState,
    JointParams,
    LigamentConfig,
    SimulationError,
    TendonConfig,
    default_config,
    forward_kinematics,
    step,
    uniform_chain,
)
from .contact import (  # noqa: F401
    ContactEnvironment,
    ContactParams,
    ContactResult,
    PlateSpec,
    contact_force,
    detect,
    impedance,
    plate_classes,
)
