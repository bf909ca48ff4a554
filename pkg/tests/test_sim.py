import math
import warnings

import numpy as np
import pytest

from modfly.errors import Diverged, GimbalLockWarning, RankDeficient
from modfly.sim import (HOVER, ModuleCommand, Plant, RigidState, SimConfig, Trajectory, allocate,
                        forward_force, inverse_kinematics, rotation, step_dynamics, track)
from modfly.structure import identical_roster, plate_roster, pos_tree_search

from helpers import PLUS_AIM, chain_aim

G = 9.81
# first verified desk run of the plus shape on the default sinusoid
PLUS_SINUSOID_ATT_RMS = 0.003921249929804965


@pytest.fixture(scope="module")
def plus():
    return pos_tree_search(PLUS_AIM, identical_roster(5))


def test_hover_forces_are_equilibrium(plus):
    F = np.tile([0.0, 0.0, G], (5, 1))
    s = step_dynamics(RigidState(), F, plus, 1e-3)
    assert max(abs(v) for v in s.as_tuple()) <= 1e-9


def test_free_fall(plus):
    plant = Plant(plus)
    s = RigidState()
    for _ in range(1000):
        s = step_dynamics(s, np.zeros((5, 3)), plus, 1e-3, plant=plant)
    expected = np.array([0.0, 0.0, -0.5 * G])
    assert np.linalg.norm(np.array(s.position) - expected) <= 1e-6


def test_z_couple_closed_form(plus):
    plant = Plant(plus)
    # tangential forces on the four arms give a pure z torque
    F = np.zeros((5, 3))
    F[1:, :2] = 0.1 * np.array([[0, 1], [-1, 0], [0, -1], [1, 0]])
    u = plant.wrench(F)
    assert np.allclose(u[:5], 0, atol=1e-15)
    jzz = plant.J[2][2]
    s = RigidState()
    for k in range(1, 501):
        s = step_dynamics(s, F, plus, 1e-3, plant=plant)
        assert s.omega[2] == pytest.approx(u[5] / jzz * k * 1e-3, abs=1e-6)
    assert s.attitude[2] == pytest.approx(0.5 * u[5] / jzz * 0.5 ** 2, abs=1e-6)


def test_rotation_is_orthonormal_over_long_flight(plus):
    # 1e5 steps of a spinning, tumbling body; R is rebuilt from the angles every step
    plant = Plant(plus)
    s = RigidState(omega=(0.3, -0.2, 1.5))
    F = np.tile([0.0, 0.0, G], (5, 1))
    F[1, 0] = 0.05
    worst = 0.0
    for k in range(100_000):
        s = step_dynamics(s, F, plus, 1e-3, plant=plant)
        if k % 997 == 0:
            R = s.rotation
            worst = max(worst, float(np.abs(R.T @ R - np.eye(3)).max()))
            assert -math.pi <= s.attitude[0] < math.pi and -math.pi <= s.attitude[2] < math.pi
    assert worst <= 1e-9


def test_ik_examples():
    assert inverse_kinematics([0, 0, 5]) == ModuleCommand(0.0, 0.0, 5.0)
    c = inverse_kinematics([0, -5, 0])
    assert c.alpha == pytest.approx(math.pi / 2, abs=1e-15) and c.beta == 0.0 and c.thrust == 5.0
    assert inverse_kinematics([0, 0, 0]) == ModuleCommand(0.0, 0.0, 0.0)


def test_ik_round_trip_random():
    rng = np.random.default_rng(0)
    for f in rng.normal(size=(1000, 3)) * 10.0 ** rng.uniform(-3, 3, size=(1000, 1)):
        c = inverse_kinematics(f)
        assert c.thrust >= 0
        assert np.linalg.norm(forward_force(c) - f) <= 1e-10 * max(1.0, np.linalg.norm(f))


def test_allocate_hover_symmetric(plus):
    F = allocate([0, 0, 5 * G, 0, 0, 0], plus)
    assert np.allclose(F, np.tile([0, 0, G], (5, 1)), atol=1e-12)


def test_allocate_z_torque_is_tangential_couple(plus):
    u = np.array([0, 0, 0, 0, 0, 1.0])
    F = allocate(u, plus)
    ref = np.linalg.lstsq(Plant(plus).P, u, rcond=None)[0].reshape(5, 3)
    assert np.allclose(F, ref, atol=1e-12)
    assert np.allclose(F.sum(axis=0), 0, atol=1e-12)
    for p, f in zip(plus.positions, F):
        assert abs(p @ f) <= 1e-12 and abs(f[2]) <= 1e-12


def test_allocate_residual(plus):
    rng = np.random.default_rng(1)
    P = Plant(plus).P
    for _ in range(50):
        u = rng.normal(size=6)
        assert np.linalg.norm(P @ allocate(u, plus).reshape(-1) - u) <= 1e-10 * np.linalg.norm(u)


def test_allocate_rotational_only_matches_torque(plus):
    plant = Plant(plus)
    u = np.array([1.0, 2.0, 3.0, 0.4, -0.5, 0.6])
    F = allocate(u, plus, rotational_only=True)
    assert np.allclose(plant.wrench(F)[3:], u[3:], atol=1e-12)


def test_chain_is_rank_deficient():
    chain = pos_tree_search(chain_aim(4), identical_roster(4))
    with pytest.raises(RankDeficient):
        allocate([0, 0, 0, 1.0, 0, 0], chain)
    with pytest.raises(RankDeficient):
        track(chain, HOVER, SimConfig(duration=0.1))


def test_hover_regulation(plus):
    res = track(plus, HOVER, SimConfig(duration=10.0))
    assert res.pos_rms <= 1e-3 and res.att_rms <= 1e-9
    assert res.energy == pytest.approx(len(res.t) * 5 * G ** 2, rel=1e-9)


def test_hover_recovers_from_offset(plus):
    start = RigidState(position=(0.3, -0.2, 0.1), attitude=(0.1, -0.1, 0.2))
    res = track(plus, HOVER, SimConfig(duration=10.0), initial=start)
    assert np.linalg.norm(res.states[-1, :6]) <= 1e-3


def test_plus_sinusoid_golden(plus):
    res = track(plus)
    assert res.att_rms < 0.5
    assert res.att_rms == pytest.approx(PLUS_SINUSOID_ATT_RMS, rel=1e-9)
    assert res.pos_rms >= 0 and res.energy >= 0


def test_track_deterministic(plus):
    cfg = SimConfig(duration=1.0)
    a, b = track(plus, config=cfg), track(plus, config=cfg)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.commands, b.commands)


def test_rotational_mode_respects_energy_bound():
    lay = pos_tree_search(PLUS_AIM, plate_roster([1.0, 2.0, 3.0, 4.0, 5.0]))
    res = track(lay, config=SimConfig(duration=2.0, allocation="rotational"))
    assert 0 < res.bound_ratio <= 1 + 1e-9


def test_divergence_detected(plus):
    far = Trajectory(pos_amp=(5e3, 0, 0), pos_freq=(0.0, 0, 0))
    start = RigidState(position=(2e3, 0, 0))
    with pytest.raises(Diverged):
        track(plus, far, SimConfig(duration=0.01), initial=start)


def test_gimbal_warning(plus):
    s = RigidState(attitude=(0.0, 1.399, 0.0), omega=(0.0, 5.0, 0.0))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        step_dynamics(s, np.tile([0.0, 0.0, G], (5, 1)), plus, 1e-3)
    assert any(issubclass(x.category, GimbalLockWarning) for x in w)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0)
    with pytest.raises(ValueError):
        SimConfig(kp_att=(1, -1, 1))
    with pytest.raises(ValueError):
        SimConfig(allocation="other")
    assert SimConfig(duration=1.0, dt=1e-3).steps == 1000


def test_rotation_convention():
    R = rotation((0.0, 0.0, math.pi / 2))
    assert np.allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)
