"""Numerical core of the planar chain integrator.

Everything in this module operates on plain float64 scalars and arrays so
that it can be JIT-compiled with numba. The dataclass-based public API in
``chain.py`` / ``contact.py`` packs its inputs into arrays and calls these
kernels; when numba is unavailable (or ``PECKBENCH_DISABLE_NUMBA`` is set)
the same functions run as ordinary Python.

Conventions
-----------
* Base frame at the origin; at q = 0 the chain is straight along +x;
  gravity acts along -y. Joint angles are counterclockwise-positive.
* Joints are indexed base-first: joint 0 at the fixed base, joint n-1
  nearest the head. The beak tip is the distal end of link n-1.
* Each uniform-rod link is represented by three point masses
  (m/6, 2m/3, m/6 at the proximal end, midpoint and distal end), which
  reproduces the rod's mass, center of mass and rotational inertia
  exactly; mass matrix, velocity-product bias and gravity are assembled
  from those particles.
* The integrator is semi-implicit Euler: velocities update first, then
  positions from the new velocities. Velocity-proportional forces (joint
  damping, plate damping, viscous friction, limit damping) and the
  diagonal spring stiffnesses enter the velocity update implicitly
  through a first-order linearization, (M + dt*C + dt^2*K) dqd = dt*tau,
  because the chain's near-singular zigzag inertia modes make explicit
  damping unconditionally unstable across the damping sweep range. The
  linear system stays n x n and the update remains a single
  deterministic solve per step.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("PECKBENCH_DISABLE_NUMBA"):
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def njit(func):
        return _numba_njit(cache=True)(func)
else:
    def njit(func):
        return func

# Joint-limit penalty law (angular analogue of the plate contact law).
# The stop is stiff but only lightly damped, like a mechanical limiter
# bracket; heavy stop damping would swamp the smallest joint dampings
# of the sweep grid.
LIMIT_STIFFNESS = 50.0   # N*m per rad of violation
LIMIT_DAMPING = 0.05     # N*m*s/rad
LIMIT_WIDTH = 0.1        # rad of violation at which the impedance saturates
LIMIT_D_MIN = 0.1
LIMIT_D_MAX = 0.95
IMP_POWER = 2.0
IMP_MIDPOINT = 0.5

# Point-mass decomposition of a uniform rod: fractions of the link length
# and of the link mass. Matches mass, COM and inertia exactly.
ROD_FRACTIONS = (0.0, 0.5, 1.0)
ROD_WEIGHTS = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)

# Status codes returned by the episode loop.
STATUS_OK = 0
STATUS_NONFINITE = 1

# Magnitude at which a joint state counts as diverged; stops the loop
# before products overflow to inf inside the solver.
BLOWUP_LIMIT = 1.0e8


@njit
def impedance_core(r, d_min, d_max, width, power, midpoint):
    """Position-dependent constraint strength d(r) in [d_min, d_max]."""
    x = r / width
    if x <= 0.0:
        return d_min
    if x >= 1.0:
        return d_max
    if x <= midpoint:
        y = x ** power / midpoint ** (power - 1.0)
    else:
        y = 1.0 - (1.0 - x) ** power / (1.0 - midpoint) ** (power - 1.0)
    return d_min + (d_max - d_min) * y


@njit
def normal_force_core(r, v, k, b, d_min, d_max, width, power, midpoint):
    """Unilateral penalty force of the plate: max(0, d(r)*(k*r - b*v))."""
    if r <= 0.0:
        return 0.0
    d = impedance_core(r, d_min, d_max, width, power, midpoint)
    f = d * (k * r - b * v)
    if f < 0.0:
        return 0.0
    return f


@njit
def limit_torque_core(q, qdot, lo, hi):
    """Soft joint-limit torque; zero inside [lo, hi], restoring outside."""
    if q > hi:
        r = q - hi
        d = impedance_core(r, LIMIT_D_MIN, LIMIT_D_MAX, LIMIT_WIDTH,
                           IMP_POWER, IMP_MIDPOINT)
        f = d * (LIMIT_STIFFNESS * r + LIMIT_DAMPING * qdot)
        if f < 0.0:
            f = 0.0
        return -f
    if q < lo:
        r = lo - q
        d = impedance_core(r, LIMIT_D_MIN, LIMIT_D_MAX, LIMIT_WIDTH,
                           IMP_POWER, IMP_MIDPOINT)
        f = d * (LIMIT_STIFFNESS * r - LIMIT_DAMPING * qdot)
        if f < 0.0:
            f = 0.0
        return f
    return 0.0


@njit
def fk_core(link_length, q):
    """Joint-frame origins plus the beak tip for the planar chain.

    Returns an (n+1, 2) array: row j is the origin of joint frame j
    (row 0 = base) and row n is the tip of the last link.
    """
    n = q.shape[0]
    pos = np.empty((n + 1, 2))
    pos[0, 0] = 0.0
    pos[0, 1] = 0.0
    phi = 0.0
    for j in range(n):
        phi += q[j]
        pos[j + 1, 0] = pos[j, 0] + link_length[j] * np.cos(phi)
        pos[j + 1, 1] = pos[j, 1] + link_length[j] * np.sin(phi)
    return pos


@njit
def tendon_core(mom, k_t, q, u):
    """Tension (>= 0) of the series-elastic tendon for endpoint position u.

    The routed path length relative to the straight pose is
    sum_j mom[j] * q[j]; joints head-side of the anchor carry mom[j] = 0.
    """
    ell = 0.0
    for j in range(q.shape[0]):
        ell += mom[j] * q[j]
    stretch = ell - u
    if stretch <= 0.0:
        return 0.0
    return k_t * stretch


@njit
def substep_core(q, qd, t, u, dt,
                 link_length, link_mass, g,
                 stiff, damp, rest, lim_lo, lim_hi,
                 mom, k_t,
                 lig_on, k_lig, preload,
                 plate_on, plate_k, plate_b, surf,
                 d_min, d_max, width, power, midpoint, mu_t):
    """One semi-implicit Euler step of size dt. Mutates q and qd in place.

    All forces on the right-hand side are evaluated at the incoming
    state; their velocity gradients C and diagonal position gradients K
    stabilize the velocity update implicitly. Returns the plate reaction
    force (tangential, vertical) on the beak, evaluated at the
    pre-update state, which is what the sensors report.
    """
    n = q.shape[0]

    # Forward kinematics: joint origins, link directions, cumulative rates.
    pos = fk_core(link_length, q)
    phi = np.empty(n)
    cqd = np.empty(n)
    acc_a = 0.0
    acc_w = 0.0
    for j in range(n):
        acc_a += q[j]
        acc_w += qd[j]
        phi[j] = acc_a
        cqd[j] = acc_w

    # Joint-origin velocities: pv[k+1] = pv[k] + cqd[k] * perp(p[k+1]-p[k]).
    pv = np.zeros((n + 1, 2))
    for k in range(n):
        dx = pos[k + 1, 0] - pos[k, 0]
        dy = pos[k + 1, 1] - pos[k, 1]
        pv[k + 1, 0] = pv[k, 0] - cqd[k] * dy
        pv[k + 1, 1] = pv[k, 1] + cqd[k] * dx

    M = np.zeros((n, n))
    rhs = np.zeros(n)
    c_diag = np.zeros(n)   # velocity-gradient (damping) diagonal
    k_diag = np.zeros(n)   # position-gradient (stiffness) diagonal
    jx = np.empty(n)
    jy = np.empty(n)

    # Particle sweep: three point masses per link assemble the mass matrix,
    # the velocity-product bias and the gravity torque.
    for k in range(n):
        ex = np.cos(phi[k])
        ey = np.sin(phi[k])
        for piece in range(3):
            if piece == 0:
                s = 0.0
                m = link_mass[k] / 6.0
            elif piece == 1:
                s = 0.5 * link_length[k]
                m = link_mass[k] * 2.0 / 3.0
            else:
                s = link_length[k]
                m = link_mass[k] / 6.0
            px = pos[k, 0] + s * ex
            py = pos[k, 1] + s * ey
            vx = pv[k, 0] - cqd[k] * s * ey
            vy = pv[k, 1] + cqd[k] * s * ex
            # Jacobian columns perp(x - p_j) and the q̈ = 0 point acceleration.
            ax = 0.0
            ay = 0.0
            for j in range(k + 1):
                jx[j] = -(py - pos[j, 1])
                jy[j] = px - pos[j, 0]
                ax -= qd[j] * (vy - pv[j, 1])
                ay += qd[j] * (vx - pv[j, 0])
            for j in range(k + 1):
                rhs[j] += m * (-g * jy[j] - (jx[j] * ax + jy[j] * ay))
                for i in range(j, k + 1):
                    M[j, i] += m * (jx[j] * jx[i] + jy[j] * jy[i])

    for j in range(n):
        for i in range(j):
            M[j, i] = M[i, j]

    # Passive viscoelasticity and soft joint limits.
    for j in range(n):
        rhs[j] += -stiff[j] * (q[j] - rest[j]) - damp[j] * qd[j]
        rhs[j] += limit_torque_core(q[j], qd[j], lim_lo[j], lim_hi[j])
        c_diag[j] += damp[j]
        k_diag[j] += stiff[j]
        if q[j] > lim_hi[j] or q[j] < lim_lo[j]:
            viol = q[j] - lim_hi[j] if q[j] > lim_hi[j] else lim_lo[j] - q[j]
            d_lim = impedance_core(viol, LIMIT_D_MIN, LIMIT_D_MAX,
                                   LIMIT_WIDTH, IMP_POWER, IMP_MIDPOINT)
            k_diag[j] += d_lim * LIMIT_STIFFNESS
            c_diag[j] += d_lim * LIMIT_DAMPING

    # Tendon: tension only, torque -T * mom[j] on routed joints.
    tension = tendon_core(mom, k_t, q, u)
    if tension > 0.0:
        for j in range(n):
            rhs[j] -= tension * mom[j]

    # Gravity-compensating ligaments.
    if lig_on:
        for j in range(n):
            rhs[j] += -k_lig[j] * (q[j] - rest[j]) + preload[j]
            k_diag[j] += k_lig[j]

    # Plate contact at the beak tip, mapped through the tip Jacobian.
    f_tan = 0.0
    f_vert = 0.0
    contact_b = 0.0
    contact_mu = 0.0
    if plate_on:
        r = surf - pos[n, 1]
        if r > 0.0:
            v = pv[n, 1]
            d = impedance_core(r, d_min, d_max, width, power, midpoint)
            f_raw = d * (plate_k * r - plate_b * v)
            f_vert = f_raw if f_raw > 0.0 else 0.0
            f_tan = -mu_t * pv[n, 0]
            contact_mu = mu_t
            if f_raw > 0.0:
                contact_b = d * plate_b
            for j in range(n):
                cjx = -(pos[n, 1] - pos[j, 1])
                cjy = pos[n, 0] - pos[j, 0]
                rhs[j] += cjx * f_tan + cjy * f_vert

    # Velocity update, implicit in the velocity/position force gradients:
    # (M + dt*C + dt^2*K) dqd = dt * rhs.
    lhs = M
    for j in range(n):
        lhs[j, j] += dt * c_diag[j] + dt * dt * k_diag[j]
    if contact_b > 0.0 or contact_mu > 0.0:
        for j in range(n):
            cjx_j = -(pos[n, 1] - pos[j, 1])
            cjy_j = pos[n, 0] - pos[j, 0]
            for i in range(n):
                cjx_i = -(pos[n, 1] - pos[i, 1])
                cjy_i = pos[n, 0] - pos[i, 0]
                lhs[j, i] += dt * (contact_mu * cjx_j * cjx_i
                                   + contact_b * cjy_j * cjy_i)
    dqd = np.linalg.solve(lhs, dt * rhs)
    for j in range(n):
        qd[j] += dqd[j]
    for j in range(n):
        q[j] += dt * qd[j]
    return f_tan, f_vert


@njit
def episode_core(q, qd, t0, n_samples, substeps, fs,
                 amp_m, period, drift, input_on,
                 link_length, link_mass, g,
                 stiff, damp, rest, lim_lo, lim_hi,
                 mom, k_t,
                 lig_on, k_lig, preload,
                 plate_on, plate_k, plate_b, surf,
                 d_min, d_max, width, power, midpoint, mu_t,
                 q_frames, f_frames):
    """Integrate n_samples sensor intervals, recording one frame per interval.

    q and qd are mutated to the final state. Frame s holds the state at
    t0 + (s+1)/fs and the beak force from the last substep of the interval.
    Returns (status, bad_joint, t_fail); the loop aborts as soon as a
    joint state diverges past BLOWUP_LIMIT (which would overflow to
    non-finite values within a few further steps).
    """
    n = q.shape[0]
    dt = 1.0 / (fs * substeps)
    two_pi = 2.0 * np.pi
    k_total = 0
    f_tan = 0.0
    f_vert = 0.0
    for s in range(n_samples):
        for _ in range(substeps):
            t = t0 + k_total * dt
            if input_on:
                u = amp_m * np.cos(two_pi * t / period) + drift
            else:
                u = 0.0
            f_tan, f_vert = substep_core(
                q, qd, t, u, dt,
                link_length, link_mass, g,
                stiff, damp, rest, lim_lo, lim_hi,
                mom, k_t,
                lig_on, k_lig, preload,
                plate_on, plate_k, plate_b, surf,
                d_min, d_max, width, power, midpoint, mu_t)
            k_total += 1
            for j in range(n):
                bounded = (np.abs(q[j]) < BLOWUP_LIMIT
                           and np.abs(qd[j]) < BLOWUP_LIMIT)
                if not bounded:
                    return STATUS_NONFINITE, j, t0 + k_total * dt
        for j in range(n):
            q_frames[s, j] = q[j]
        f_frames[s, 0] = f_tan
        f_frames[s, 1] = f_vert
    return STATUS_OK, -1, t0 + k_total * dt


def warmup():
    """Trigger JIT compilation on a tiny problem (no-op without numba)."""
    n = 2
    q = np.zeros(n)
    qd = np.zeros(n)
    qf = np.empty((1, n))
    ff = np.empty((1, 2))
    episode_core(q, qd, 0.0, 1, 2, 100.0,
                 0.0, 1.0, 0.0, True,
                 np.full(n, 0.1), np.full(n, 0.1), 9.81,
                 np.ones(n), np.ones(n), np.zeros(n),
                 np.full(n, -1.0), np.full(n, 1.0),
                 np.zeros(n), 1e4,
                 False, np.zeros(n), np.zeros(n),
                 True, 2000.0, 10.0, -0.05,
                 0.1, 0.95, 0.01, 2.0, 0.5, 1.0,
                 qf, ff)
