"""Soft unilateral contact between the beak tip and a horizontal plate.

The plate is a virtual spring-damper constraint: penetration depth r and
normal velocity v produce a vertical penalty force

    f_n = max(0, d(r) * (k*r - b*v))

where the impedance d(r) is a smooth two-piece power sigmoid in (0, 1)
rising from d_min at zero penetration to d_max at ``width``. The plate's
damping coefficient b is the hidden quantity the classifier must infer;
stiffness k is shared across a class set. Tangential resistance is purely
viscous. Forces are reported in the world frame as (tangential, vertical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel


@dataclass(frozen=True)
class PlateSpec:
    """One pecked plate: class label plus its hidden dynamics.

    stiffness k (N/m), damping b (N*s/m), surface_height (m, world frame).
    """

    label: int
    stiffness: float
    damping: float
    surface_height: float = 0.0

    def __post_init__(self):
        if self.stiffness <= 0.0:
            raise ValueError("plate stiffness must be > 0")
        if self.damping < 0.0:
            raise ValueError("plate damping must be >= 0")


@dataclass(frozen=True)
class ContactParams:
    """Impedance sigmoid shape plus tangential viscous friction."""

    d_min: float = 0.1
    d_max: float = 0.95
    width: float = 0.01
    power: float = 2.0
    midpoint: float = 0.5
    tangential_friction: float = 1.0  # N*s/m

    def __post_init__(self):
        if not (0.0 < self.d_min <= self.d_max < 1.0):
            raise ValueError("require 0 < d_min <= d_max < 1")
        if self.width <= 0.0:
            raise ValueError("width must be > 0")
        if not (0.0 < self.midpoint < 1.0):
            raise ValueError("midpoint must lie in (0, 1)")


@dataclass(frozen=True)
class ContactEnvironment:
    """A plate (or None for free space) plus the contact law parameters."""

    plate: PlateSpec | None
    params: ContactParams = ContactParams()


@dataclass(frozen=True)
class ContactResult:
    """Penetration r (m), normal velocity v (m/s, positive separating)
    and world-frame force (tangential, vertical) on the beak."""

    penetration: float
    normal_velocity: float
    force: tuple

    def __post_init__(self):
        if self.penetration == 0.0 and self.force != (0.0, 0.0):
            raise ValueError("no force without penetration")
        if self.force[1] < 0.0:
            raise ValueError("vertical contact force must be >= 0")


def impedance(params: ContactParams, r: float) -> float:
    """Constraint strength d(r); monotone from d_min (r=0) to d_max (r>=width)."""
    if r < 0.0:
        raise ValueError("penetration r must be >= 0")
    return _kernel.impedance_core(r, params.d_min, params.d_max, params.width,
                                  params.power, params.midpoint)


def contact_force(plate: PlateSpec, params: ContactParams, r: float, v: float,
                  tangential_velocity: float = 0.0) -> ContactResult:
    """Penalty force for penetration r (m) and normal velocity v (m/s).

    Positive v separates, so an approaching beak (v < 0) stiffens the
    response through the b*(-v) term; that b-dependence is the
    information the readout classifies.
    """
    if r < 0.0:
        raise ValueError("penetration r must be >= 0")
    if r == 0.0:
        return ContactResult(0.0, v, (0.0, 0.0))
    f_n = _kernel.normal_force_core(r, v, plate.stiffness, plate.damping,
                                    params.d_min, params.d_max, params.width,
                                    params.power, params.midpoint)
    f_t = -params.tangential_friction * tangential_velocity
    if f_n == 0.0 and f_t == 0.0:
        return ContactResult(r, v, (0.0, 0.0))
    return ContactResult(r, v, (f_t, f_n))


def detect(tip_position, tip_velocity, plate: PlateSpec):
    """Penetration depth and normal velocity of the beak tip.

    r = max(0, surface_height - tip_y); v = tip vertical velocity
    (positive = moving away from the plate).
    """
    r = max(0.0, plate.surface_height - float(tip_position[1]))
    v = float(tip_velocity[1])
    return r, v


def plate_classes(n_classes: int,
                  damping_lo: float = 1.0,
                  damping_hi: float = 100.0,
                  stiffness: float = 2000.0,
                  surface_height: float = 0.0) -> list:
    """Plate set with log-spaced damping; the label is the class id."""
    if n_classes < 1:
        raise ValueError("need at least one class")
    if n_classes == 1:
        values = [damping_lo]
    else:
        values = np.geomspace(damping_lo, damping_hi, n_classes)
    return [PlateSpec(label=i, stiffness=stiffness, damping=float(b),
                      surface_height=surface_height)
            for i, b in enumerate(values)]
