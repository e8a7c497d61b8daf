"""Quasi-static kinematic locomotion model for an 18-servo hexapod.

The body glides at a fixed height over a flat floor; there is no rigid-body
dynamics.  Each control step the commanded joint angles give foot positions
by forward kinematics, feet close to the floor count as contacts, and the
body is propelled by the negated mean body-frame motion of feet that stayed
in contact across consecutive steps (stance feet are pinned to the world, so
their backward drift in the body frame is the body's forward motion).  Fewer
than two continuous contacts give no propulsion for that step.

Frames: body x forward, y left, z up; the floor is z = 0 and leg mounts sit
at the standing height.  The third servo of each leg mirrors the second
(s3 = -s2), which keeps the tibia vertical, so foot height depends only on
the elevation angle.

Displacements are reported against the start pose: forward displacement is
the final position's component along the initial forward axis, the goal sits
25 m straight ahead, and the heading angle is the signed angle between the
net displacement and the initial forward axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .controllers import CHANNEL_RANGE, ControllerBlowUp, ControllerInstance

GOAL_AHEAD_M = 25.0
DEFAULT_DURATION_S = 5.0
DEFAULT_CONTROL_DT_S = 0.015
MIN_STANCE_FEET = 2
NET_DISPLACEMENT_EPS_M = 1e-6

# legs 0,1,2 on the right (body frame -y), legs 3,4,5 on the left (+y)
LEG_SIDE = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])
_LEG_ROW = np.array([1.0, 0.0, -1.0, -1.0, 0.0, 1.0])  # +1 front, 0 middle, -1 rear


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class HexapodConfig:
    body_half_length: float = 0.10
    body_half_width: float = 0.06
    coxa: float = 0.04
    femur: float = 0.08
    tibia: float = 0.10
    body_height: float = 0.09
    contact_tol: float = 0.002
    damage_mask: tuple[bool, ...] = (False,) * 6

    def __post_init__(self) -> None:
        for name in ("body_half_length", "body_half_width", "coxa", "femur", "tibia", "body_height"):
            if getattr(self, name) <= 0:
                raise SimulationError(f"{name} must be positive")
        if self.body_height >= self.femur + self.tibia:
            raise SimulationError("standing height exceeds leg reach")
        if len(self.damage_mask) != 6:
            raise SimulationError("damage mask needs 6 entries")
        object.__setattr__(self, "damage_mask", tuple(bool(b) for b in self.damage_mask))

    @property
    def mount_xy(self) -> np.ndarray:
        L, W = self.body_half_length, self.body_half_width
        return np.array(
            [[L, -W], [0.0, -W], [-L, -W], [-L, W], [0.0, W], [L, W]]
        )

    def with_damage(self, removed_legs) -> "HexapodConfig":
        mask = [leg in set(removed_legs) for leg in range(6)]
        return replace(self, damage_mask=tuple(mask))


@dataclass
class EvalResult:
    forward_displacement: float
    goal_distance: float
    heading_deg: float
    gait: np.ndarray            # (T, 6) uint8 contact matrix
    trajectory: np.ndarray      # (T, 3) columns x, y, heading(rad)
    failed: bool = False

    def equals(self, other: "EvalResult") -> bool:
        return (
            self.forward_displacement == other.forward_displacement
            and self.goal_distance == other.goal_distance
            and self.heading_deg == other.heading_deg
            and self.failed == other.failed
            and np.array_equal(self.gait, other.gait)
            and np.array_equal(self.trajectory, other.trajectory)
        )


def tick_count(duration: float, control_dt: float) -> int:
    """Number of control emissions in [0, duration]; 334 at the defaults."""
    return int(math.floor(duration / control_dt + 1e-9)) + 1


def forward_kinematics(leg: int, s1: float, s2: float, config: HexapodConfig) -> np.ndarray:
    """Foot position (x, y, z) in the body frame for one leg.

    The coxa points outward, the femur pitches up by s2, and the tibia stays
    vertical because the third servo mirrors the second.
    """
    if not 0 <= leg <= 5:
        raise SimulationError(f"leg index {leg} out of range")
    mount = config.mount_xy[leg]
    side = LEG_SIDE[leg]
    radius = config.coxa + config.femur * math.cos(s2)
    direction = side * (math.pi / 2 + s1)
    x = mount[0] + radius * math.cos(direction)
    y = mount[1] + radius * math.sin(direction)
    z = config.body_height + config.femur * math.sin(s2) - config.tibia
    return np.array([x, y, z])


def _feet_from_commands(cmds: np.ndarray, config: HexapodConfig):
    """Vectorized kinematics: commands (..., 12) -> foot xy (..., 6, 2) and z (..., 6)."""
    s1 = cmds[..., :6]
    s2 = cmds[..., 6:]
    radius = config.coxa + config.femur * np.cos(s2)
    direction = LEG_SIDE * (np.pi / 2 + s1)
    xy = np.stack(
        [
            config.mount_xy[:, 0] + radius * np.cos(direction),
            config.mount_xy[:, 1] + radius * np.sin(direction),
        ],
        axis=-1,
    )
    z = config.body_height + config.femur * np.sin(s2) - config.tibia
    return xy, z


def behavior_vector(gait: np.ndarray) -> np.ndarray:
    """Row-major (time-major) flattening of the contact matrix into bits."""
    g = np.asarray(gait, dtype=np.uint8)
    if g.ndim != 2 or g.shape[1] != 6:
        raise SimulationError(f"gait matrix must be (T, 6), got {g.shape}")
    return g.reshape(-1)


def _failed_result(ticks: int) -> EvalResult:
    return EvalResult(
        forward_displacement=0.0,
        goal_distance=GOAL_AHEAD_M,
        heading_deg=0.0,
        gait=np.zeros((ticks, 6), dtype=np.uint8),
        trajectory=np.zeros((ticks, 3)),
        failed=True,
    )


def _finish(gait: np.ndarray, trajectory: np.ndarray) -> EvalResult:
    x, y = trajectory[-1, 0], trajectory[-1, 1]
    net = math.hypot(x, y)
    heading_deg = 0.0 if net < NET_DISPLACEMENT_EPS_M else math.degrees(math.atan2(y, x))
    return EvalResult(
        forward_displacement=float(x),
        goal_distance=float(math.hypot(GOAL_AHEAD_M - x, y)),
        heading_deg=float(heading_deg),
        gait=gait,
        trajectory=trajectory,
        failed=False,
    )


def _turn_angles(prev_xy: np.ndarray, cur_xy: np.ndarray) -> np.ndarray:
    """Signed angle each foot swept about the body center between two steps."""
    cross = prev_xy[..., 0] * cur_xy[..., 1] - prev_xy[..., 1] * cur_xy[..., 0]
    dot = prev_xy[..., 0] * cur_xy[..., 0] + prev_xy[..., 1] * cur_xy[..., 1]
    return np.arctan2(cross, dot)


def _simulate_open_loop(controller, config: HexapodConfig, ticks: int) -> EvalResult:
    try:
        cmds = controller.command_array(ticks)
    except ControllerBlowUp:
        return _failed_result(ticks)
    if not np.all(np.isfinite(cmds)):
        return _failed_result(ticks)
    cmds = np.clip(cmds, -CHANNEL_RANGE, CHANNEL_RANGE)

    feet_xy, feet_z = _feet_from_commands(cmds, config)
    alive = ~np.array(config.damage_mask)
    contacts = (feet_z <= config.contact_tol) & alive
    gait = contacts.astype(np.uint8)

    both = contacts[1:] & contacts[:-1]
    counts = both.sum(axis=1)
    usable = counts >= MIN_STANCE_FEET
    denom = np.where(usable, counts, 1)

    deltas = feet_xy[1:] - feet_xy[:-1]
    body_step = -(deltas * both[..., None]).sum(axis=1) / denom[:, None]
    body_step[~usable] = 0.0
    turn = _turn_angles(feet_xy[:-1], feet_xy[1:])
    yaw_step = -(turn * both).sum(axis=1) / denom
    yaw_step[~usable] = 0.0

    heading_after = np.cumsum(yaw_step)
    heading_before = np.concatenate([[0.0], heading_after[:-1]])
    cos_h, sin_h = np.cos(heading_before), np.sin(heading_before)
    world_dx = cos_h * body_step[:, 0] - sin_h * body_step[:, 1]
    world_dy = sin_h * body_step[:, 0] + cos_h * body_step[:, 1]

    trajectory = np.zeros((ticks, 3))
    trajectory[1:, 0] = np.cumsum(world_dx)
    trajectory[1:, 1] = np.cumsum(world_dy)
    trajectory[1:, 2] = heading_after
    return _finish(gait, trajectory)


def _simulate_closed_loop(controller, config: HexapodConfig, ticks: int, control_dt: float) -> EvalResult:
    alive = ~np.array(config.damage_mask)
    gait = np.zeros((ticks, 6), dtype=np.uint8)
    trajectory = np.zeros((ticks, 3))
    x = y = heading = 0.0
    prev_contacts: np.ndarray | None = None
    prev_xy: np.ndarray | None = None
    landed: frozenset[int] = frozenset()

    for k in range(ticks):
        try:
            cmd = controller.tick(landed, k * control_dt)
        except ControllerBlowUp:
            return _failed_result(ticks)
        if not np.all(np.isfinite(cmd)):
            return _failed_result(ticks)
        cmd = np.clip(cmd, -CHANNEL_RANGE, CHANNEL_RANGE)
        feet_xy, feet_z = _feet_from_commands(cmd, config)
        contacts = (feet_z <= config.contact_tol) & alive
        gait[k] = contacts

        if prev_contacts is not None:
            both = contacts & prev_contacts
            n = int(both.sum())
            if n >= MIN_STANCE_FEET:
                deltas = feet_xy - prev_xy
                bx = -float((deltas[:, 0] * both).sum()) / n
                by = -float((deltas[:, 1] * both).sum()) / n
                turn = _turn_angles(prev_xy, feet_xy)
                dyaw = -float((turn * both).sum()) / n
                x += math.cos(heading) * bx - math.sin(heading) * by
                y += math.sin(heading) * bx + math.cos(heading) * by
                heading += dyaw
            # rising edges feed the controller at the next tick; the initial
            # standing contact is not an edge
            landed = frozenset(np.flatnonzero(contacts & ~prev_contacts).tolist())
        else:
            landed = frozenset()
        trajectory[k] = (x, y, heading)
        prev_contacts = contacts
        prev_xy = feet_xy
    return _finish(gait, trajectory)


def simulate(
    controller: ControllerInstance,
    config: HexapodConfig,
    duration: float = DEFAULT_DURATION_S,
    control_dt: float = DEFAULT_CONTROL_DT_S,
) -> EvalResult:
    """Run one evaluation and return displacement, gait diagram, and trajectory.

    Deterministic: the same controller genome, configuration, and timing give
    a bit-identical result.  A diverging controller yields failed=True with
    zero displacement.
    """
    if duration <= 0 or control_dt <= 0:
        raise SimulationError("duration and control_dt must be positive")
    ticks = tick_count(duration, control_dt)
    got_dt = getattr(controller, "control_dt", control_dt)
    if abs(got_dt - control_dt) > 1e-12:
        raise SimulationError(
            f"controller was decoded for control_dt={got_dt}, simulation uses {control_dt}"
        )
    controller.begin_run()
    if controller.is_open_loop:
        return _simulate_open_loop(controller, config, ticks)
    return _simulate_closed_loop(controller, config, ticks, control_dt)
