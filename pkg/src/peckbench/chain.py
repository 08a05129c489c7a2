"""Planar serial chain with passive viscoelastic joints and a single tendon.

The chain models a pecking neck at desk scale: a fixed base at the origin,
n links in the sagittal (x, y) plane, gravity along -y. Each joint carries
an independent torsional spring-damper (stiffness S, damping D) about its
rest angle plus a soft penalty limit. A single inextensible-path tendon
with a stiff series spring runs from the base over constant moment arms
and anchors at ``tendon.attachment_joint``; joints head-side of the anchor
are purely passive. Optional gravity-compensating ligaments add a second
torsional spring per joint whose stiffness grows geometrically toward the
base.

Sign conventions: angles are counterclockwise-positive, the straight
q = 0 pose points along +x, and pulling the tendon (decreasing the
endpoint position u) drives the routed joints negative, i.e. swings the
beak downward onto the plate below.

Joint indexing is base-first: index 0 at the base, index n-1 nearest
the head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel
from .contact import ContactEnvironment

REGIONS = ("cranial", "middle", "caudal")


class SimulationError(RuntimeError):
    """Raised when the integrator produces a non-finite or diverged state."""

    def __init__(self, time: float, joint: int):
        super().__init__(
            f"non-finite or diverged joint state at t={time:.6f} s "
            f"(joint index {joint})")
        self.time = time
        self.joint = joint


@dataclass(frozen=True)
class JointParams:
    """Per-joint passive element: torsional spring-damper and soft limits.

    stiffness S in N*m/rad, damping D in N*m*s/rad, angles in rad.
    """

    stiffness: float
    damping: float
    rest_angle: float = 0.0
    limit_lo: float = -0.6
    limit_hi: float = 0.6

    def __post_init__(self):
        if self.stiffness < 0.0:
            raise ValueError("stiffness must be >= 0")
        if self.damping < 0.0:
            raise ValueError("damping must be >= 0")
        if not self.limit_lo < self.limit_hi:
            raise ValueError("limit_lo must be < limit_hi")
        if not (self.limit_lo <= self.rest_angle <= self.limit_hi):
            raise ValueError("rest_angle must lie within the joint limits")


@dataclass(frozen=True)
class TendonConfig:
    """Series-elastic tendon routed from the base to the anchor joint.

    moment_arm is the constant per-joint moment arm in meters for every
    routed joint (base up to and including attachment_joint);
    series_stiffness is the tendon spring in N/m. pulley_radius mirrors
    the drive-side pulley and is informational here (the input signal
    carries its own radius).
    """

    attachment_joint: int
    moment_arm: float = 0.01
    series_stiffness: float = 1.0e4
    pulley_radius: float = 0.01

    def __post_init__(self):
        if self.moment_arm <= 0.0:
            raise ValueError("moment_arm must be > 0")
        if self.series_stiffness <= 0.0:
            raise ValueError("series_stiffness must be > 0")


@dataclass(frozen=True)
class LigamentConfig:
    """Gravity-compensating elastic elements, stiffer toward the base."""

    enabled: bool = False
    base_stiffness: float = 0.0
    geometric_ratio: float = 1.0
    preload_mode: str = "none"  # "none" or "static-balance"

    def __post_init__(self):
        if self.base_stiffness < 0.0:
            raise ValueError("base_stiffness must be >= 0")
        if self.geometric_ratio < 1.0:
            raise ValueError("geometric_ratio must be >= 1")
        if self.preload_mode not in ("none", "static-balance"):
            raise ValueError("preload_mode must be 'none' or 'static-balance'")


@dataclass(frozen=True)
class ChainConfig:
    """Full mechanical description of the chain."""

    n_joints: int
    link_length: tuple
    link_mass: tuple
    joints: tuple
    tendon: TendonConfig
    ligament: LigamentConfig = LigamentConfig()
    gravity: float = 9.81
    region_label: tuple = ()

    def __post_init__(self):
        if self.n_joints < 1:
            raise ValueError("n_joints must be >= 1")
        for name in ("link_length", "link_mass", "joints"):
            if len(getattr(self, name)) != self.n_joints:
                raise ValueError(f"{name} must have n_joints entries")
        if any(v <= 0.0 for v in self.link_length):
            raise ValueError("link lengths must be > 0")
        if any(v <= 0.0 for v in self.link_mass):
            raise ValueError("link masses must be > 0")
        if not 0 <= self.tendon.attachment_joint < self.n_joints:
            raise ValueError("tendon attachment_joint outside the chain")
        if self.region_label:
            if len(self.region_label) != self.n_joints:
                raise ValueError("region_label must have n_joints entries")
            _check_contiguous_regions(self.region_label)

    @property
    def rest_angles(self) -> np.ndarray:
        return np.array([j.rest_angle for j in self.joints])

    def region_joints(self, region: str) -> list:
        """Joint indices carrying the given region label."""
        return [i for i, r in enumerate(self.region_label) if r == region]


def _check_contiguous_regions(labels):
    """Regions must partition the chain contiguously from head to base."""
    for lab in labels:
        if lab not in REGIONS:
            raise ValueError(f"unknown region label {lab!r}")
    # Base-first storage means the head-to-base order is reversed labels.
    order = list(labels[::-1])
    seen = []
    for lab in order:
        if not seen or seen[-1] != lab:
            seen.append(lab)
    if len(seen) != len(set(seen)):
        raise ValueError("region labels must be contiguous blocks")
    expected = [r for r in ("cranial", "middle", "caudal") if r in seen]
    if seen != expected:
        raise ValueError("regions must run cranial -> middle -> caudal "
                         "from head to base")


@dataclass
class ChainState:
    """Joint angles (rad), rates (rad/s) and simulation time (s)."""

    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        self.qdot = np.asarray(self.qdot, dtype=float).copy()
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot must have equal length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("state entries must be finite")


# ---------------------------------------------------------------------------
# Construction helpers


def default_regions(n_joints: int) -> tuple:
    """Contiguous cranial/middle/caudal labels, proportioned like the
    17-joint default (4 cranial, 8 middle, 5 caudal)."""
    n_cr = max(1, round(n_joints * 4 / 17))
    n_ca = max(1, round(n_joints * 5 / 17))
    while n_cr + n_ca >= n_joints and n_ca > 1:
        n_ca -= 1
    while n_cr + n_ca >= n_joints and n_cr > 1:
        n_cr -= 1
    n_mid = max(0, n_joints - n_cr - n_ca)
    if n_mid == 0:  # tiny chains: split head/base halves
        n_cr = max(1, n_joints // 2)
        n_ca = n_joints - n_cr
        return ("caudal",) * n_ca + ("cranial",) * n_cr
    return ("caudal",) * n_ca + ("middle",) * n_mid + ("cranial",) * n_cr


def default_attachment(n_joints: int) -> int:
    """Tendon anchor index leaving roughly the head-side third passive."""
    return min(n_joints - 1, max(0, int(n_joints * 0.7)))


def s_curve_rest(n_joints: int, droop: float = 0.12) -> np.ndarray:
    """Gentle S-curve rest posture: base joints arched up, head-side
    joints flexed down so gravity gives a natural droop at the tip."""
    idx = np.arange(n_joints)
    if n_joints == 1:
        return np.array([0.0])
    x = idx / (n_joints - 1)
    return droop * np.sin(math.pi * (x - 0.25)) * -1.0


def uniform_chain(n_joints: int,
                  stiffness: float,
                  damping: float,
                  *,
                  link_length: float = 0.08,
                  link_mass: float = 0.05,
                  rest_angles=None,
                  limit_margin: float = 0.6,
                  attachment_joint=None,
                  moment_arm: float = 0.01,
                  series_stiffness: float = 1.0e4,
                  gravity: float = 9.81,
                  ligament: LigamentConfig = LigamentConfig()) -> ChainConfig:
    """Chain with identical links and uniform (S, D) on every joint."""
    if rest_angles is None:
        rest = np.zeros(n_joints)
    else:
        rest = np.asarray(rest_angles, dtype=float)
    if attachment_joint is None:
        attachment_joint = default_attachment(n_joints)
    joints = tuple(
        JointParams(stiffness=stiffness, damping=damping,
                    rest_angle=float(rest[j]),
                    limit_lo=float(rest[j]) - limit_margin,
                    limit_hi=float(rest[j]) + limit_margin)
        for j in range(n_joints))
    return ChainConfig(
        n_joints=n_joints,
        link_length=(link_length,) * n_joints,
        link_mass=(link_mass,) * n_joints,
        joints=joints,
        tendon=TendonConfig(attachment_joint=attachment_joint,
                            moment_arm=moment_arm,
                            series_stiffness=series_stiffness),
        ligament=ligament,
        gravity=gravity,
        region_label=default_regions(n_joints))


def default_config() -> ChainConfig:
    """The 17-joint reference chain (0.04 m / 0.03 kg links, S-curve rest)."""
    n = 17
    return uniform_chain(n, stiffness=0.633, damping=0.0935,
                         link_length=0.04, link_mass=0.03,
                         rest_angles=s_curve_rest(n))


def with_region_params(config: ChainConfig, region: str,
                       stiffness: float, damping: float) -> ChainConfig:
    """Copy of config with (S, D) replaced on one region's joints."""
    idx = set(config.region_joints(region))
    if not idx:
        raise ValueError(f"config has no joints labelled {region!r}")
    joints = tuple(
        replace(jp, stiffness=stiffness, damping=damping) if j in idx else jp
        for j, jp in enumerate(config.joints))
    return replace(config, joints=joints)


def head_side_joints(config: ChainConfig) -> list:
    """Indices of purely passive joints beyond the tendon anchor."""
    return list(range(config.tendon.attachment_joint + 1, config.n_joints))


def rest_state(config: ChainConfig) -> ChainState:
    return ChainState(q=config.rest_angles,
                      qdot=np.zeros(config.n_joints), t=0.0)


# ---------------------------------------------------------------------------
# Packing for the numerical kernel


def pack(config: ChainConfig) -> dict:
    """Flatten a ChainConfig into the kernel's array arguments."""
    n = config.n_joints
    mom = np.zeros(n)
    mom[: config.tendon.attachment_joint + 1] = config.tendon.moment_arm
    lig = config.ligament
    if lig.enabled:
        dist_from_head = (n - 1) - np.arange(n)
        k_lig = lig.base_stiffness * lig.geometric_ratio ** dist_from_head
        if lig.preload_mode == "static-balance":
            preload = -gravity_torque(config, config.rest_angles)
        else:
            preload = np.zeros(n)
    else:
        k_lig = np.zeros(n)
        preload = np.zeros(n)
    return {
        "link_length": np.asarray(config.link_length, dtype=float),
        "link_mass": np.asarray(config.link_mass, dtype=float),
        "g": float(config.gravity),
        "stiff": np.array([j.stiffness for j in config.joints]),
        "damp": np.array([j.damping for j in config.joints]),
        "rest": config.rest_angles,
        "lim_lo": np.array([j.limit_lo for j in config.joints]),
        "lim_hi": np.array([j.limit_hi for j in config.joints]),
        "mom": mom,
        "k_t": float(config.tendon.series_stiffness),
        "lig_on": bool(lig.enabled),
        "k_lig": np.asarray(k_lig, dtype=float),
        "preload": np.asarray(preload, dtype=float),
    }


def _env_args(env) -> dict:
    if env is None or env.plate is None:
        return {"plate_on": False, "plate_k": 0.0, "plate_b": 0.0,
                "surf": 0.0, "d_min": 0.1, "d_max": 0.95, "width": 0.01,
                "power": 2.0, "midpoint": 0.5, "mu_t": 0.0}
    p, cp = env.plate, env.params
    return {"plate_on": True, "plate_k": p.stiffness, "plate_b": p.damping,
            "surf": p.surface_height, "d_min": cp.d_min, "d_max": cp.d_max,
            "width": cp.width, "power": cp.power, "midpoint": cp.midpoint,
            "mu_t": cp.tangential_friction}


# ---------------------------------------------------------------------------
# Operations


def forward_kinematics(config: ChainConfig, q) -> np.ndarray:
    """Positions of each joint frame and the beak tip, shape (n+1, 2).

    Row 0 is the base, row j the origin of joint frame j, row n the tip.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (config.n_joints,):
        raise ValueError(
            f"expected {config.n_joints} joint angles, got shape {q.shape}")
    return _kernel.fk_core(np.asarray(config.link_length, dtype=float), q)


def beak_tip(config: ChainConfig, q) -> np.ndarray:
    return forward_kinematics(config, q)[-1]


def passive_joint_torque(params: JointParams, q: float, qdot: float) -> float:
    """Spring-damper torque -S*(q - rest) - D*qdot."""
    return (-params.stiffness * (q - params.rest_angle)
            - params.damping * qdot)


def joint_limit_torque(params: JointParams, q: float, qdot: float) -> float:
    """Soft penalty torque outside [limit_lo, limit_hi], zero inside."""
    return _kernel.limit_torque_core(q, qdot, params.limit_lo, params.limit_hi)


def tendon_force(config: ChainConfig, state: ChainState, u: float):
    """Tendon tension (N, >= 0) and per-joint torques for endpoint u (m)."""
    if not np.isfinite(u):
        raise ValueError("endpoint position u must be finite")
    packed = pack(config)
    tension = _kernel.tendon_core(packed["mom"], packed["k_t"], state.q,
                                  float(u))
    return tension, -tension * packed["mom"]


def ligament_torque(config: ChainConfig, q) -> np.ndarray:
    """Ligament torques (N*m) per joint; zeros when disabled."""
    q = np.asarray(q, dtype=float)
    packed = pack(config)
    if not packed["lig_on"]:
        return np.zeros(config.n_joints)
    return -packed["k_lig"] * (q - packed["rest"]) + packed["preload"]


def gravity_torque(config: ChainConfig, q) -> np.ndarray:
    """Generalized gravity torque at pose q (N*m per joint)."""
    q = np.asarray(q, dtype=float)
    n = config.n_joints
    pos = forward_kinematics(config, q)
    phi = np.cumsum(q)
    tau = np.zeros(n)
    g = config.gravity
    for k in range(n):
        ex, ey = math.cos(phi[k]), math.sin(phi[k])
        for s_frac, w in zip(_kernel.ROD_FRACTIONS, _kernel.ROD_WEIGHTS):
            m = config.link_mass[k] * w
            px = pos[k, 0] + s_frac * config.link_length[k] * ex
            for j in range(k + 1):
                tau[j] += -m * g * (px - pos[j, 0])
    return tau


def step(config: ChainConfig, state: ChainState, u_fn, env, dt: float) -> ChainState:
    """Advance one integrator step of size dt.

    u_fn may be a callable t -> endpoint position (m), a scalar, or None
    for a slack tendon (u large enough never to engage). env is a
    ContactEnvironment or None for free space.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if u_fn is None:
        u = float("inf")
    elif callable(u_fn):
        u = float(u_fn(state.t))
    else:
        u = float(u_fn)
    packed = pack(config)
    envargs = _env_args(env)
    q = state.q.copy()
    qd = state.qdot.copy()
    # inf endpoint would poison the stretch product; emulate slack directly
    if not math.isfinite(u):
        u = float(np.dot(packed["mom"], q)) + 1.0
    _kernel.substep_core(
        q, qd, state.t, u, dt,
        packed["link_length"], packed["link_mass"], packed["g"],
        packed["stiff"], packed["damp"], packed["rest"],
        packed["lim_lo"], packed["lim_hi"],
        packed["mom"], packed["k_t"],
        packed["lig_on"], packed["k_lig"], packed["preload"],
        envargs["plate_on"], envargs["plate_k"], envargs["plate_b"],
        envargs["surf"], envargs["d_min"], envargs["d_max"],
        envargs["width"], envargs["power"], envargs["midpoint"],
        envargs["mu_t"])
    finite = np.isfinite(q) & np.isfinite(qd)
    if not np.all(finite):
        raise SimulationError(state.t + dt, int(np.argmax(~finite)))
    return ChainState(q=q, qdot=qd, t=state.t + dt)


def energy(config: ChainConfig, state: ChainState) -> float:
    """Kinetic + gravitational + joint-spring (+ ligament) energy (J).

    The constant ligament preload contributes the potential
    -preload * (q - rest) so that the functional is exactly dissipated
    by the dampers.
    """
    n = config.n_joints
    q, qd = state.q, state.qdot
    pos = forward_kinematics(config, q)
    phi = np.cumsum(q)
    cqd = np.cumsum(qd)
    pv = np.zeros((n + 1, 2))
    for k in range(n):
        dx = pos[k + 1, 0] - pos[k, 0]
        dy = pos[k + 1, 1] - pos[k, 1]
        pv[k + 1, 0] = pv[k, 0] - cqd[k] * dy
        pv[k + 1, 1] = pv[k, 1] + cqd[k] * dx
    kin = 0.0
    pot_g = 0.0
    for k in range(n):
        ex, ey = math.cos(phi[k]), math.sin(phi[k])
        for s_frac, w in zip(_kernel.ROD_FRACTIONS, _kernel.ROD_WEIGHTS):
            m = config.link_mass[k] * w
            s = s_frac * config.link_length[k]
            vx = pv[k, 0] - cqd[k] * s * ey
            vy = pv[k, 1] + cqd[k] * s * ex
            py = pos[k, 1] + s * ey
            kin += 0.5 * m * (vx * vx + vy * vy)
            pot_g += m * config.gravity * py
    rest = config.rest_angles
    stiff = np.array([j.stiffness for j in config.joints])
    pot_s = 0.5 * float(np.dot(stiff, (q - rest) ** 2))
    packed = pack(config)
    if packed["lig_on"]:
        pot_s += 0.5 * float(np.dot(packed["k_lig"], (q - rest) ** 2))
        pot_s += -float(np.dot(packed["preload"], q - rest))
    return kin + pot_g + pot_s
