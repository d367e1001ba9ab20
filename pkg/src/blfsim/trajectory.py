"""Smooth desired joint trajectories with closed-form derivatives.

Each joint follows offset + A * sin(w t) * (1 - exp(-lam t)): a sinusoid
ramped in by an exponential envelope so that position and velocity start
at rest.  The first and second derivatives are returned analytically,
never by numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import N_JOINTS, _joint_vec


@dataclass(frozen=True)
class TrajectorySpec:
    """Per-joint amplitude A [rad], frequency w [rad/s], ramp rate lam [1/s], offset [rad]."""

    amplitude: np.ndarray
    omega: np.ndarray
    ramp: float
    offset: np.ndarray

    def __post_init__(self):
        amplitude = _joint_vec(self.amplitude, "amplitude")
        omega = _joint_vec(self.omega, "omega")
        offset = _joint_vec(self.offset, "offset")
        if self.ramp <= 0.0:
            raise ValueError("ramp rate must be positive")
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "offset", offset)

    def derivative_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-joint bounds |qd_dot| <= A (w + lam), |qd_ddot| <= A (w + lam)^2."""
        a = np.abs(self.amplitude)
        s = self.omega + self.ramp
        return a * s, a * s**2


@dataclass(frozen=True)
class TrajectorySample:
    """Desired position, velocity, and acceleration at one time instant."""

    t: float
    qd: np.ndarray
    qd_dot: np.ndarray
    qd_ddot: np.ndarray


def desired_trajectory(t: float, spec: TrajectorySpec) -> TrajectorySample:
    """Evaluate the desired trajectory and its two derivatives at time t."""
    a, w, lam = spec.amplitude, spec.omega, spec.ramp
    s = np.sin(w * t)
    c = np.cos(w * t)
    decay = np.exp(-lam * t)
    env = 1.0 - decay
    qd = spec.offset + a * s * env
    qd_dot = a * (w * c * env + lam * decay * s)
    qd_ddot = a * (-w**2 * s * env + 2.0 * w * lam * decay * c - lam**2 * decay * s)
    return TrajectorySample(t=float(t), qd=qd, qd_dot=qd_dot, qd_ddot=qd_ddot)
