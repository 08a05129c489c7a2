import numpy as np
import pytest

from peckbench.chain import (
    ChainConfig,
    ChainState,
    JointParams,
    LigamentConfig,
    TendonConfig,
    energy,
    forward_kinematics,
    gravity_torque,
    head_side_joints,
    joint_limit_torque,
    ligament_torque,
    passive_joint_torque,
    rest_state,
    step,
    tendon_force,
    uniform_chain,
)


def naive_fk(link_length, q):
    """Oracle: sequential 2x2 rotation-matrix composition, one link at a time."""
    pts = [np.zeros(2)]
    R = np.eye(2)
    for l, qi in zip(link_length, q):
        c, s = np.cos(qi), np.sin(qi)
        R = R @ np.array([[c, -s], [s, c]])
        pts.append(pts[-1] + R @ np.array([l, 0.0]))
    return np.array(pts)


class TestForwardKinematics:
    def test_straight_chain(self):
        cfg = uniform_chain(4, 1.0, 0.1, link_length=0.1)
        pos = forward_kinematics(cfg, np.zeros(4))
        np.testing.assert_allclose(pos[-1], [0.4, 0.0], atol=1e-15)

    def test_single_link_quarter_turn(self):
        cfg = uniform_chain(1, 1.0, 0.1, link_length=0.25, limit_margin=2.0)
        pos = forward_kinematics(cfg, [np.pi / 2])
        np.testing.assert_allclose(pos[-1], [0.0, 0.25], atol=1e-15)

    def test_matches_rotation_composition_oracle(self):
        rng = np.random.default_rng(7)
        for n in (1, 2, 5, 8):
            lengths = rng.uniform(0.02, 0.2, n)
            cfg = ChainConfig(
                n_joints=n,
                link_length=tuple(lengths),
                link_mass=(0.05,) * n,
                joints=tuple(JointParams(1.0, 0.1, 0.0, -4.0, 4.0)
                             for _ in range(n)),
                tendon=TendonConfig(attachment_joint=0))
            for _ in range(5):
                q = rng.uniform(-np.pi, np.pi, n)
                np.testing.assert_allclose(
                    forward_kinematics(cfg, q), naive_fk(lengths, q),
                    atol=1e-12)

    def test_dimension_mismatch(self):
        cfg = uniform_chain(3, 1.0, 0.1)
        with pytest.raises(ValueError):
            forward_kinematics(cfg, np.zeros(4))


class TestPassiveTorque:
    def test_equilibrium(self):
        p = JointParams(stiffness=2.0, damping=0.3, rest_angle=0.2)
        assert passive_joint_torque(p, 0.2, 0.0) == 0.0

    def test_linear_spring(self):
        p = JointParams(stiffness=1.0, damping=0.0)
        assert passive_joint_torque(p, 0.1, 0.0) == pytest.approx(-0.1)

    def test_linear_damper(self):
        p = JointParams(stiffness=0.0, damping=0.5)
        assert passive_joint_torque(p, 0.0, 2.0) == pytest.approx(-1.0)


class TestJointLimits:
    def test_zero_inside(self):
        p = JointParams(1.0, 0.1, 0.0, -0.5, 0.5)
        for q in (-0.5, -0.2, 0.0, 0.3, 0.5):
            assert joint_limit_torque(p, q, 1.0) == 0.0

    def test_restoring_sign(self):
        p = JointParams(1.0, 0.1, 0.0, -0.5, 0.5)
        assert joint_limit_torque(p, 0.51, 0.0) < 0.0
        assert joint_limit_torque(p, -0.51, 0.0) > 0.0

    def test_monotone_in_depth(self):
        p = JointParams(1.0, 0.1, 0.0, -0.5, 0.5)
        t1 = abs(joint_limit_torque(p, 0.5 + 0.01, 0.0))
        t2 = abs(joint_limit_torque(p, 0.5 + 0.02, 0.0))
        assert t2 > t1 > 0.0

    def test_never_pulls_into_limit(self):
        # fast separating motion must not produce adhesion-like torque
        p = JointParams(1.0, 0.1, 0.0, -0.5, 0.5)
        assert joint_limit_torque(p, 0.505, -10.0) <= 0.0
        assert joint_limit_torque(p, 0.505, -10.0) == 0.0


class TestTendon:
    def test_slack(self):
        cfg = uniform_chain(5, 1.0, 0.1)
        st = rest_state(cfg)
        path = float(np.dot(
            np.where(np.arange(5) <= cfg.tendon.attachment_joint,
                     cfg.tendon.moment_arm, 0.0), st.q))
        tension, torques = tendon_force(cfg, st, path + 0.01)
        assert tension == 0.0
        np.testing.assert_array_equal(torques, np.zeros(5))

    def test_hooke_evaluation(self):
        cfg = uniform_chain(3, 1.0, 0.1, series_stiffness=1000.0,
                            moment_arm=0.02, attachment_joint=2)
        st = ChainState(q=np.zeros(3), qdot=np.zeros(3))
        # path length 0 at q=0, endpoint at -0.01 -> stretch 0.01
        tension, torques = tendon_force(cfg, st, -0.01)
        assert tension == pytest.approx(10.0)
        np.testing.assert_allclose(torques, -10.0 * 0.02 * np.ones(3))

    def test_head_side_joints_unactuated(self):
        cfg = uniform_chain(6, 1.0, 0.1, attachment_joint=2)
        st = ChainState(q=np.full(6, 0.3), qdot=np.zeros(6))
        for u in (-0.5, 0.0, 0.02):
            tension, torques = tendon_force(cfg, st, u)
            np.testing.assert_array_equal(torques[3:], 0.0)
        assert head_side_joints(cfg) == [3, 4, 5]

    def test_tension_never_negative(self):
        cfg = uniform_chain(4, 1.0, 0.1)
        rng = np.random.default_rng(3)
        for _ in range(50):
            st = ChainState(q=rng.uniform(-1, 1, 4), qdot=np.zeros(4))
            tension, _ = tendon_force(cfg, st, rng.uniform(-0.1, 0.1))
            assert tension >= 0.0


class TestLigament:
    def test_disabled_is_zero(self):
        cfg = uniform_chain(4, 1.0, 0.1)
        np.testing.assert_array_equal(
            ligament_torque(cfg, np.full(4, 0.2)), np.zeros(4))

    def test_uniform_when_ratio_one(self):
        lig = LigamentConfig(enabled=True, base_stiffness=0.5,
                             geometric_ratio=1.0)
        cfg = uniform_chain(4, 1.0, 0.1, ligament=lig)
        q = cfg.rest_angles + 0.1
        tau = ligament_torque(cfg, q)
        np.testing.assert_allclose(tau, -0.5 * 0.1 * np.ones(4))

    def test_stiffness_grows_toward_base(self):
        lig = LigamentConfig(enabled=True, base_stiffness=0.2,
                             geometric_ratio=2.0)
        cfg = uniform_chain(4, 1.0, 0.1, ligament=lig)
        q = cfg.rest_angles + 0.1
        mag = np.abs(ligament_torque(cfg, q))
        assert np.all(np.diff(mag) < 0)  # base joint (index 0) strongest

    def test_static_balance_cancels_gravity_at_rest(self):
        lig = LigamentConfig(enabled=True, base_stiffness=0.3,
                             geometric_ratio=1.5,
                             preload_mode="static-balance")
        rest = np.array([0.2, -0.1, 0.15, -0.05, 0.1])
        cfg = uniform_chain(5, 1.0, 0.1, rest_angles=rest, ligament=lig)
        total = gravity_torque(cfg, rest) + ligament_torque(cfg, rest)
        np.testing.assert_allclose(total, np.zeros(5), atol=1e-9)


class TestStep:
    def test_no_forces_no_motion(self):
        cfg = uniform_chain(4, 0.0, 0.0, gravity=0.0)
        st = ChainState(q=np.array([0.1, -0.2, 0.3, 0.0]), qdot=np.zeros(4))
        out = step(cfg, st, None, None, 1e-4)
        np.testing.assert_allclose(out.q, st.q, atol=1e-12)
        np.testing.assert_allclose(out.qdot, st.qdot, atol=1e-12)

    def test_single_link_pendulum_period(self):
        # small-angle oscillation about the hanging rest pose
        S, m, l = 0.5, 0.05, 0.08
        cfg = uniform_chain(1, S, 0.0, link_length=l, link_mass=m,
                            rest_angles=[-np.pi / 2], limit_margin=3.0)
        inertia = m * l * l / 3.0
        t_expect = 2 * np.pi * np.sqrt(inertia / (S + m * 9.81 * l / 2))
        st = ChainState(q=[-np.pi / 2 + 0.01], qdot=[0.0])
        dt = 1e-4
        crossings = []
        prev = 0.01
        for _ in range(int(4 * t_expect / dt)):
            st = step(cfg, st, None, None, dt)
            dev = st.q[0] + np.pi / 2
            if prev < 0.0 <= dev:
                crossings.append(st.t)
            prev = dev
        periods = np.diff(crossings)
        assert abs(periods.mean() - t_expect) / t_expect < 0.01

    def test_energy_non_increasing_with_damping(self):
        cfg = uniform_chain(5, 0.6, 0.1, limit_margin=10.0)
        st = ChainState(
            q=cfg.rest_angles + np.array([0.3, -0.2, 0.25, -0.15, 0.3]),
            qdot=np.zeros(5))
        energies = [energy(cfg, st)]
        for k in range(20000):
            st = step(cfg, st, None, None, 1e-4)
            if k % 10 == 9:
                energies.append(energy(cfg, st))
        energies = np.array(energies)
        scale = np.abs(energies).max()
        assert np.all(np.diff(energies) <= 1e-6 * scale)

    def test_determinism_bit_identical(self):
        cfg = uniform_chain(4, 0.8, 0.05)

        def run():
            st = ChainState(q=cfg.rest_angles + 0.1, qdot=np.zeros(4))
            out = []
            for _ in range(500):
                st = step(cfg, st, lambda t: 0.01 * np.cos(t), None, 1e-4)
                out.append(st.q.copy())
            return np.array(out)

        a, b = run(), run()
        assert np.array_equal(a, b)

    def test_bounded_input_keeps_joints_near_limits(self):
        cfg = uniform_chain(4, 0.8, 0.15, limit_margin=0.4)
        rng = np.random.default_rng(11)
        st = rest_state(cfg)
        lo = np.array([j.limit_lo for j in cfg.joints]) - 0.2
        hi = np.array([j.limit_hi for j in cfg.joints]) + 0.2
        u0 = 0.0
        for k in range(20000):
            if k % 100 == 0:
                u0 = rng.uniform(-0.05, 0.05)
            st = step(cfg, st, u0, None, 1e-4)
            if k % 20 == 0:
                assert np.all(st.q >= lo) and np.all(st.q <= hi)

    def test_invalid_dt(self):
        cfg = uniform_chain(2, 1.0, 0.1)
        with pytest.raises(ValueError):
            step(cfg, rest_state(cfg), None, None, 0.0)


class TestValidation:
    def test_joint_param_invariants(self):
        with pytest.raises(ValueError):
            JointParams(stiffness=-1.0, damping=0.0)
        with pytest.raises(ValueError):
            JointParams(stiffness=1.0, damping=-0.1)
        with pytest.raises(ValueError):
            JointParams(1.0, 0.1, rest_angle=0.0, limit_lo=0.5, limit_hi=0.2)
        with pytest.raises(ValueError):
            JointParams(1.0, 0.1, rest_angle=0.9, limit_lo=-0.5, limit_hi=0.5)

    def test_chain_config_invariants(self):
        with pytest.raises(ValueError):
            uniform_chain(0, 1.0, 0.1)
        with pytest.raises(ValueError):
            uniform_chain(3, 1.0, 0.1, link_length=-0.1)
        with pytest.raises(ValueError):
            uniform_chain(3, 1.0, 0.1, attachment_joint=5)

    def test_region_labels_partition(self):
        cfg = uniform_chain(17, 1.0, 0.1)
        labels = cfg.region_label
        assert len(labels) == 17
        assert labels.count("cranial") == 4
        assert labels.count("middle") == 8
        assert labels.count("caudal") == 5
        # caudal at the base end, cranial at the head end
        assert labels[0] == "caudal" and labels[-1] == "cranial"

    def test_state_rejects_non_finite(self):
        with pytest.raises(ValueError):
            ChainState(q=[np.nan], qdot=[0.0])
