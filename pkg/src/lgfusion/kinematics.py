"""Product-of-exponentials forward kinematics and camera pseudo-poses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .liegroup import make_pose, pose_inverse, se3_exp


@dataclass(frozen=True)
class JointScrew:
    """Revolute joint with unit axis ``omega_axis`` through ``point_on_axis``."""

    omega_axis: np.ndarray
    point_on_axis: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        w = np.array(self.omega_axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(w) - 1.0) > 1e-10:
            raise ValueError(f"joint axis must be a unit vector, got norm {np.linalg.norm(w)}")
        object.__setattr__(self, "omega_axis", w)
        object.__setattr__(self, "point_on_axis", np.array(self.point_on_axis, dtype=float).reshape(3))

    @property
    def twist(self):
        w = self.omega_axis
        return np.concatenate([w, -np.cross(w, self.point_on_axis)])

    @classmethod
    def from_twist(cls, twist):
        """Revolute screw from a raw ``[w; v]`` twist with ``v = -w x q``."""
        twist = np.asarray(twist, dtype=float)
        w, v = twist[:3], twist[3:]
        # the point on the axis closest to the origin
        return cls(w, np.cross(w, v))


@dataclass(frozen=True)
class KinematicChain:
    screws: List[JointScrew]
    home: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        if len(self.screws) == 0:
            raise ValueError("kinematic chain needs at least one joint")
        object.__setattr__(self, "home", np.array(self.home, dtype=float))

    @property
    def n_joints(self):
        return len(self.screws)


def poe_forward(chain: KinematicChain, theta: Sequence[float]):
    """End-effector pose ``exp(xi_1 t_1) ... exp(xi_n t_n) T(0)``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != chain.n_joints:
        raise ValueError(f"expected {chain.n_joints} joint angles, got {theta.size}")
    T = np.eye(4)
    for screw, t in zip(chain.screws, theta):
        T = T @ se3_exp(screw.twist * t)
    return T @ chain.home


@dataclass(frozen=True)
class ExtrinsicSet:
    """Constant calibration transforms.

    ``t_ec_h``: end effector -> hand camera; ``t_bc_b``: base -> base
    camera; ``t_ah_g`` / ``t_ab_g``: hand / base tag -> grasp frame.
    """

    t_ec_h: np.ndarray = field(default_factory=lambda: np.eye(4))
    t_bc_b: np.ndarray = field(default_factory=lambda: np.eye(4))
    t_ah_g: np.ndarray = field(default_factory=lambda: np.eye(4))
    t_ab_g: np.ndarray = field(default_factory=lambda: np.eye(4))


def hand_pseudo_pose(t_be, ext: ExtrinsicSet, t_ch_ah):
    return t_be @ ext.t_ec_h @ t_ch_ah @ ext.t_ah_g


def base_pseudo_pose(ext: ExtrinsicSet, t_cb_ab):
    return ext.t_bc_b @ t_cb_ab @ ext.t_ab_g


def hand_tag_observation(t_be, ext: ExtrinsicSet, t_bg):
    """Camera-to-tag transform that makes the hand pseudo-pose equal ``t_bg``."""
    return pose_inverse(t_be @ ext.t_ec_h) @ t_bg @ pose_inverse(ext.t_ah_g)


def base_tag_observation(ext: ExtrinsicSet, t_bg):
    return pose_inverse(ext.t_bc_b) @ t_bg @ pose_inverse(ext.t_ab_g)


def synthetic_six_dof_chain():
    """A 6-joint arm roughly shaped like a compact industrial manipulator.

    The geometry is made up for tests and simulation; it is not a calibrated
    model of any real robot.
    """
    z, y, x = np.eye(3)[2], np.eye(3)[1], np.eye(3)[0]
    screws = [
        JointScrew(z, [0.0, 0.0, 0.0]),
        JointScrew(y, [0.0, 0.0, 0.267]),
        JointScrew(y, [0.0535, 0.0, 0.551]),
        JointScrew(-z, [0.131, 0.0, 0.209]),
        JointScrew(y, [0.131, 0.0, 0.209]),
        JointScrew(-z, [0.207, 0.0, 0.209]),
    ]
    home = make_pose(np.diag([1.0, -1.0, -1.0]), [0.207, 0.0, 0.112])
    return KinematicChain(screws, home)
