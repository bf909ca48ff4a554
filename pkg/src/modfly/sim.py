"""Rigid-body flight of an assembled structure under force-decomposition control.

Every module produces a body-frame force ``F_i``; the structure sees the
wrench ``u = P F`` with ``P`` the constant allocation matrix.  The tracking
loop is: PD feedback -> desired wrench -> minimum-norm allocation -> per-module
(tilt, twist, thrust) commands -> forces rebuilt from those commands -> RK4
step of the 6-DOF dynamics with the wrench held over the step.

State convention: position and velocity in the world frame, attitude as
roll-pitch-yaw with ``R = Rz(yaw) Ry(pitch) Rx(roll)`` mapping body to world,
angular velocity in the body frame.  Gravity is a signed acceleration along
world z (default -9.81, so hovering needs upward thrust).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import allocation_matrix, hat_stack, inertia_total, singular_values_3xk
from .errors import Diverged, GimbalLockWarning, RankDeficient
from .structure import LayoutConfiguration

GRAVITY = -9.81
PITCH_LIMIT = 1.4
DIVERGENCE_LIMIT = 1e3
_RANK_TOL = 1e-9


def rotation(theta) -> np.ndarray:
    """Body-to-world rotation for roll-pitch-yaw angles."""
    return np.array(_rotation(*theta))


def _rotation(ph, th, ps):
    cf, sf = math.cos(ph), math.sin(ph)
    ct, st = math.cos(th), math.sin(th)
    cp, sp = math.cos(ps), math.sin(ps)
    return ((cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf),
            (sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf),
            (-st, ct * sf, ct * cf))


def euler_rates(theta, omega) -> tuple[float, float, float]:
    """Roll-pitch-yaw rates from body angular velocity."""
    ph, th, _ = theta
    p, q, r = omega
    cf, sf = math.cos(ph), math.sin(ph)
    ct, tt = math.cos(th), math.tan(th)
    a = q * sf + r * cf
    return (p + a * tt, q * cf - r * sf, a / ct)


def wrap_angle(a):
    """Map angles to [-pi, pi)."""
    return (np.asarray(a, dtype=float) + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class RigidState:
    position: tuple = (0.0, 0.0, 0.0)
    attitude: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (0.0, 0.0, 0.0)
    omega: tuple = (0.0, 0.0, 0.0)

    @property
    def rotation(self) -> np.ndarray:
        return rotation(self.attitude)

    def as_tuple(self) -> tuple:
        return tuple(self.position) + tuple(self.attitude) + tuple(self.velocity) + tuple(self.omega)

    @classmethod
    def from_tuple(cls, s) -> "RigidState":
        s = [float(v) for v in s]
        ph, th, ps = s[3:6]
        ph = (ph + math.pi) % (2 * math.pi) - math.pi
        ps = (ps + math.pi) % (2 * math.pi) - math.pi
        return cls(tuple(s[0:3]), (ph, th, ps), tuple(s[6:9]), tuple(s[9:12]))


@dataclass(frozen=True)
class ModuleCommand:
    alpha: float
    beta: float
    thrust: float


def inverse_kinematics(force) -> ModuleCommand:
    """(tilt, twist, thrust) reproducing a decomposed module force.

    Uses ``F = T [sin b, -sin a cos b, cos a cos b]``; the twist is taken from
    atan2 rather than asin(Fx / T), which is the same angle but keeps full
    precision near +-pi/2.
    """
    fx, fy, fz = (float(v) for v in force)
    t = math.sqrt(fx * fx + fy * fy + fz * fz)
    if t < 1e-9:
        return ModuleCommand(0.0, 0.0, 0.0)
    return ModuleCommand(math.atan2(-fy, fz), math.atan2(fx, math.hypot(fy, fz)), t)


def forward_force(cmd: ModuleCommand) -> np.ndarray:
    ca, sa = math.cos(cmd.alpha), math.sin(cmd.alpha)
    cb, sb = math.cos(cmd.beta), math.sin(cmd.beta)
    return cmd.thrust * np.array([sb, -sa * cb, ca * cb])


def _ik_batch(F: np.ndarray):
    t = np.sqrt(np.einsum("ij,ij->i", F, F))
    beta = np.arctan2(F[:, 0], np.hypot(F[:, 1], F[:, 2]))
    alpha = np.arctan2(-F[:, 1], F[:, 2])
    small = t < 1e-9
    return np.where(small, 0.0, alpha), np.where(small, 0.0, beta), np.where(small, 0.0, t)


def _forward_batch(alpha, beta, t) -> np.ndarray:
    cb = np.cos(beta)
    return t[:, None] * np.stack([np.sin(beta), -np.sin(alpha) * cb, np.cos(alpha) * cb], axis=1)


class Plant:
    """Per-layout constants: mass, J_S and its inverse, allocation matrix and its pseudo-inverses."""

    def __init__(self, layout: LayoutConfiguration):
        self.layout = layout
        self.n = layout.n
        self.mass = float(layout.masses.sum())
        J = inertia_total(layout)
        self.J = tuple(tuple(float(v) for v in row) for row in J)
        self.Jinv = tuple(tuple(float(v) for v in row) for row in np.linalg.inv(J))
        self.P = allocation_matrix(layout)
        self.H = hat_stack(layout.positions)
        self._pinv = None
        self._hpinv = None

    def rank(self) -> int:
        s = np.linalg.svd(self.P, compute_uv=False)
        return int(np.sum(s > _RANK_TOL * s[0]))

    @property
    def pinv(self) -> np.ndarray:
        if self._pinv is None:
            r = self.rank()
            if r < 6:
                raise RankDeficient(f"allocation matrix has rank {r} < 6; the structure is under-actuated")
            self._pinv = np.linalg.pinv(self.P)
        return self._pinv

    @property
    def rot_pinv(self) -> np.ndarray:
        if self._hpinv is None:
            s = singular_values_3xk(self.H)
            if not s[0] > 0 or s[2] < _RANK_TOL * s[0]:
                raise RankDeficient("torque map has rank < 3; no rotational-only allocation")
            self._hpinv = np.linalg.pinv(self.H)
        return self._hpinv

    def wrench(self, F) -> tuple:
        return tuple(float(v) for v in self.P @ np.asarray(F, dtype=float).reshape(-1))


def _rhs(s, u, plant: Plant, gravity: float):
    ph, th, ps = s[3], s[4], s[5]
    p, q, r = s[9], s[10], s[11]
    R = _rotation(ph, th, ps)
    m = plant.mass
    ux, uy, uz = u[0], u[1], u[2]
    ax = (R[0][0] * ux + R[0][1] * uy + R[0][2] * uz) / m
    ay = (R[1][0] * ux + R[1][1] * uy + R[1][2] * uz) / m
    az = (R[2][0] * ux + R[2][1] * uy + R[2][2] * uz) / m + gravity
    dph, dth, dps = euler_rates((ph, th, ps), (p, q, r))
    J, Ji = plant.J, plant.Jinv
    hx = J[0][0] * p + J[0][1] * q + J[0][2] * r
    hy = J[1][0] * p + J[1][1] * q + J[1][2] * r
    hz = J[2][0] * p + J[2][1] * q + J[2][2] * r
    tx = u[3] - (q * hz - r * hy)
    ty = u[4] - (r * hx - p * hz)
    tz = u[5] - (p * hy - q * hx)
    return (s[6], s[7], s[8], dph, dth, dps, ax, ay, az,
            Ji[0][0] * tx + Ji[0][1] * ty + Ji[0][2] * tz,
            Ji[1][0] * tx + Ji[1][1] * ty + Ji[1][2] * tz,
            Ji[2][0] * tx + Ji[2][1] * ty + Ji[2][2] * tz)


def _rk4(s, u, plant, gravity, dt):
    k1 = _rhs(s, u, plant, gravity)
    k2 = _rhs(tuple(a + 0.5 * dt * b for a, b in zip(s, k1)), u, plant, gravity)
    k3 = _rhs(tuple(a + 0.5 * dt * b for a, b in zip(s, k2)), u, plant, gravity)
    k4 = _rhs(tuple(a + dt * b for a, b in zip(s, k3)), u, plant, gravity)
    return tuple(a + dt / 6.0 * (b + 2.0 * c + 2.0 * d + e)
                 for a, b, c, d, e in zip(s, k1, k2, k3, k4))


def _check_pitch(pitch):
    if abs(pitch) > PITCH_LIMIT:
        warnings.warn(f"|pitch| = {abs(pitch):.3f} rad exceeds {PITCH_LIMIT}; "
                      "Euler kinematics are ill-conditioned", GimbalLockWarning, stacklevel=3)


def step_dynamics(state: RigidState, F, layout: LayoutConfiguration, dt: float,
                  gravity: float = GRAVITY, plant: Plant | None = None) -> RigidState:
    """Advance one RK4 step with per-module body forces ``F`` (n x 3) held constant."""
    plant = plant or Plant(layout)
    u = plant.wrench(F)
    s = _rk4(state.as_tuple(), u, plant, gravity, dt)
    _check_pitch(s[4])
    return RigidState.from_tuple(s)


def allocate(u, layout: LayoutConfiguration, rotational_only: bool = False,
             plant: Plant | None = None) -> np.ndarray:
    """Minimum-norm module forces (n x 3) producing the wrench ``u = (force, torque)``.

    With ``rotational_only`` only the torque part is matched (net force left
    free), which is the allocation behind the thrust-energy bound.
    """
    plant = plant or Plant(layout)
    u = np.asarray(u, dtype=float)
    if rotational_only:
        return (plant.rot_pinv @ u[3:]).reshape(-1, 3)
    return (plant.pinv @ u).reshape(-1, 3)


@dataclass(frozen=True)
class Trajectory:
    """Sinusoidal reference: ``amp * sin(2 pi freq t)`` per axis for position and attitude."""
    pos_amp: tuple = (0.0, 0.0, 0.0)
    pos_freq: tuple = (0.0, 0.0, 0.0)
    att_amp: tuple = (0.0, 0.0, 0.0)
    att_freq: tuple = (0.0, 0.0, 0.0)

    def _eval(self, amp, freq, t):
        v, d, dd = [], [], []
        for a, f in zip(amp, freq):
            w = 2.0 * math.pi * f
            s, c = math.sin(w * t), math.cos(w * t)
            v.append(a * s)
            d.append(a * w * c)
            dd.append(-a * w * w * s)
        return v, d, dd

    def position(self, t):
        return self._eval(self.pos_amp, self.pos_freq, t)

    def attitude(self, t):
        return self._eval(self.att_amp, self.att_freq, t)


HOVER = Trajectory()
# default 6-DOF reference used for the structure comparisons
SINUSOID = Trajectory(pos_amp=(1.0, 1.0, 0.5), pos_freq=(0.2, 0.2, 0.1),
                      att_amp=(0.2, 0.2, 0.3), att_freq=(0.2, 0.2, 0.2))


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop settings.

    Position gains are in acceleration units (scaled by the structure mass),
    attitude gains are torques per radian and per rad/s and are the same for
    every structure, so heavier or wider structures respond more slowly.
    """
    dt: float = 1e-3
    duration: float = 10.0
    gravity: float = GRAVITY
    kp_pos: tuple = (4.0, 4.0, 4.0)
    kd_pos: tuple = (4.0, 4.0, 4.0)
    kp_att: tuple = (400.0, 400.0, 400.0)
    kd_att: tuple = (150.0, 150.0, 150.0)
    allocation: str = "full"
    trajectory: Trajectory = field(default_factory=lambda: SINUSOID)

    def __post_init__(self):
        if not self.dt > 0 or not self.duration >= 0:
            raise ValueError("dt must be > 0 and duration >= 0")
        for g in (self.kp_pos, self.kd_pos, self.kp_att, self.kd_att):
            if len(g) != 3 or min(g) < 0:
                raise ValueError("gains must be three non-negative values")
        if self.allocation not in ("full", "rotational"):
            raise ValueError("allocation must be 'full' or 'rotational'")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class SimResult:
    pos_rms: float
    att_rms: float
    energy: float
    t: np.ndarray
    states: np.ndarray       # (steps, 12): X, Theta, V, Omega
    pos_ref: np.ndarray
    att_ref: np.ndarray
    thrust_sq: np.ndarray    # sum_i T_i^2 per step
    commands: np.ndarray     # (steps, n, 3): alpha, beta, T
    bound_ratio: float = math.nan

    def summary(self) -> dict:
        return {"pos_rms": self.pos_rms, "att_rms": self.att_rms, "energy": self.energy,
                "steps": len(self.t), "bound_ratio": self.bound_ratio}


def track(layout: LayoutConfiguration, trajectory: Trajectory | None = None,
          config: SimConfig = SimConfig(), initial: RigidState | None = None) -> SimResult:
    """Fly the structure along ``trajectory`` (default ``config.trajectory``) and score it.

    Starts at rest on the reference.  ``bound_ratio`` is only filled in the
    rotational allocation mode: the largest per-step ratio of the commanded
    thrust energy to ``sigma_max(pinv(Dbar))^2 ||Omega_dot||^2``, with
    ``Omega_dot = Dbar F`` the angular acceleration the forces command
    (gyroscopic term excluded, as in the bound itself).
    """
    traj = trajectory if trajectory is not None else config.trajectory
    plant = Plant(layout)
    rotational = config.allocation == "rotational"
    alloc = plant.rot_pinv if rotational else plant.pinv
    M, J, g, dt = plant.mass, plant.J, config.gravity, config.dt
    kp, kd = config.kp_pos, config.kd_pos
    ka, kw = config.kp_att, config.kd_att
    steps = config.steps
    n = plant.n

    if rotational:
        Dbar = np.linalg.solve(np.array(J), plant.H)
        sig3 = singular_values_3xk(Dbar)[2]
    if initial is None:
        x0, dx0, _ = traj.position(0.0)
        a0, da0, _ = traj.attitude(0.0)
        omega0 = np.linalg.solve(_euler_matrix(a0), da0)
        initial = RigidState(tuple(x0), tuple(a0), tuple(dx0), tuple(float(v) for v in omega0))
    s = initial.as_tuple()

    ts = np.arange(steps) * dt
    states = np.empty((steps, 12))
    pref = np.empty((steps, 3))
    aref = np.empty((steps, 3))
    tsq = np.empty(steps)
    cmds = np.empty((steps, n, 3))
    worst = 0.0
    for k in range(steps):
        t = k * dt
        xr, vr, ar = traj.position(t)
        th_r, dth_r, _ = traj.attitude(t)
        states[k] = s
        pref[k] = xr
        aref[k] = th_r
        pos_err = math.sqrt(sum((xr[i] - s[i]) ** 2 for i in range(3)))
        if not pos_err <= DIVERGENCE_LIMIT:
            raise Diverged(f"position error {pos_err:.3g} m at t = {t:.3f} s exceeds "
                           f"{DIVERGENCE_LIMIT:g} m")

        fw = [M * (ar[i] + kp[i] * (xr[i] - s[i]) + kd[i] * (vr[i] - s[6 + i])) for i in range(3)]
        fw[2] -= M * g
        R = _rotation(s[3], s[4], s[5])
        ub = [R[0][i] * fw[0] + R[1][i] * fw[1] + R[2][i] * fw[2] for i in range(3)]
        rates = euler_rates(s[3:6], s[9:12])
        err = wrap_angle([th_r[i] - s[3 + i] for i in range(3)])
        p, q, r = s[9], s[10], s[11]
        h = [J[i][0] * p + J[i][1] * q + J[i][2] * r for i in range(3)]
        gyro = (q * h[2] - r * h[1], r * h[0] - p * h[2], p * h[1] - q * h[0])
        tau = [ka[i] * err[i] + kw[i] * (dth_r[i] - rates[i]) + gyro[i] for i in range(3)]
        u = np.array(ub + tau)

        F = (alloc @ (u[3:] if rotational else u)).reshape(n, 3)
        al, be, T = _ik_batch(F)
        F = _forward_batch(al, be, T)
        cmds[k, :, 0], cmds[k, :, 1], cmds[k, :, 2] = al, be, T
        tsq[k] = float(T @ T)
        if rotational:
            wdot = Dbar @ F.reshape(-1)
            bound = float(wdot @ wdot) / (sig3 * sig3)
            if bound > 0:
                worst = max(worst, tsq[k] / bound)
        s = _rk4(s, plant.wrench(F), plant, g, dt)
        if abs(s[4]) > PITCH_LIMIT:
            _check_pitch(s[4])
        s = RigidState.from_tuple(s).as_tuple()

    perr = states[:, 0:3] - pref
    aerr = wrap_angle(states[:, 3:6] - aref)
    mean = (lambda v: float(np.mean(v))) if steps else (lambda v: 0.0)
    return SimResult(
        pos_rms=math.sqrt(mean(np.einsum("ij,ij->i", perr, perr))),
        att_rms=math.sqrt(mean(np.einsum("ij,ij->i", aerr, aerr))),
        energy=float(tsq.sum()), t=ts, states=states, pos_ref=pref, att_ref=aref,
        thrust_sq=tsq, commands=cmds, bound_ratio=worst if rotational else math.nan)


def _euler_matrix(theta) -> np.ndarray:
    """E(theta) with Euler rates = E @ omega."""
    ph, th, _ = theta
    cf, sf = math.cos(ph), math.sin(ph)
    ct, tt = math.cos(th), math.tan(th)
    return np.array([[1.0, sf * tt, cf * tt], [0.0, cf, -sf], [0.0, sf / ct, cf / ct]])
