"""Fixed-step RK4 integration of the closed loop with violation detection.

The coupled state is y = (q, qdot, theta_hat).  The torque is recomputed
inside every derivative evaluation (each RK4 stage), so the simulated
loop is the continuous-time one, not a zero-order-hold discretization.

Constraint policy: a step whose tracking error reaches any delta_i is
never logged; the run is truncated with a violation outcome.  For the
log/tan gain designs the gain evaluation itself raises inside a stage;
for the constant baseline the engine's per-step domain check catches the
breach.  No logged record ever contains |e_i| >= delta_i.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable

import numpy as np

from .controller import (
    BarrierDomainError,
    ControllerConfig,
    ErrorState,
    adaptation_rate,
    control_torque_terms,
    tracking_errors,
)
from .dynamics import N_PARAMS, RobotParams, forward_dynamics, _joint_vec
from .lyapunov import lyapunov_value
from .trajectory import TrajectorySpec, desired_trajectory

if TYPE_CHECKING:  # pragma: no cover
    from .calibrate import EnvelopeSpec

DIVERGENCE_LIMIT = 1e6


@dataclass
class SimState:
    """Closed-loop state at time t: plant (q, qdot) and estimate theta_hat."""

    t: float
    q: np.ndarray
    qdot: np.ndarray
    theta_hat: np.ndarray


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run.

    params carries the true parameter vector (the plant); the controller
    only ever sees theta_hat.
    """

    name: str
    params: RobotParams
    cfg: ControllerConfig
    traj: TrajectorySpec
    t_end: float
    h: float
    q0: np.ndarray
    qdot0: np.ndarray
    theta_hat0: np.ndarray
    envelope: "EnvelopeSpec | None" = None

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0.0:
            raise ValueError("step size h must be positive")
        if not np.isfinite(self.t_end) or self.t_end < 0.0:
            raise ValueError("t_end must be non-negative")
        object.__setattr__(self, "q0", _joint_vec(self.q0, "q0"))
        object.__setattr__(self, "qdot0", _joint_vec(self.qdot0, "qdot0"))
        th0 = np.asarray(self.theta_hat0, dtype=float)
        if th0.shape != (N_PARAMS,):
            raise ValueError(f"theta_hat0 must have {N_PARAMS} entries, got shape {th0.shape}")
        object.__setattr__(self, "theta_hat0", th0)

    def initial_errors(self) -> ErrorState:
        return tracking_errors(desired_trajectory(0.0, self.traj),
                               self.q0, self.qdot0, self.cfg.alpha)

    def with_overrides(self, controller: str | None = None, h: float | None = None,
                       t_end: float | None = None) -> "Scenario":
        """Copy with a different gain design, step size, or horizon."""
        sc = self
        if controller is not None:
            sc = replace(sc, cfg=replace(sc.cfg, barrier_kind=controller))
        if h is not None:
            sc = replace(sc, h=float(h))
        if t_end is not None:
            sc = replace(sc, t_end=float(t_end))
        return sc


@dataclass(frozen=True)
class RunOutcome:
    """completed, violation(t, joint), or diverged(step)."""

    status: str
    t: float | None = None
    joint: int | None = None
    detail: str = ""


@dataclass
class RunLog:
    """Per-step time series of a run plus its outcome.

    Arrays are row-aligned: t[k] goes with q[k], e[k], ... theta_hat[k].
    V is the Lyapunov value matching the run's gain design (log form for
    baseline runs).
    """

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    e: np.ndarray
    r: np.ndarray
    tau: np.ndarray
    theta_hat: np.ndarray
    V: np.ndarray
    outcome: RunOutcome
    scenario_name: str
    controller_kind: str
    h: float

    @property
    def completed(self) -> bool:
        return self.outcome.status == "completed"

    def max_abs_e(self) -> np.ndarray:
        """Per-joint maximum |e_i| over the logged records."""
        return np.abs(self.e).max(axis=0) if self.e.size else np.zeros(self.e.shape[1])

    def final_e_norm(self) -> float:
        return float(np.linalg.norm(self.e[-1])) if self.e.size else 0.0

    def max_tau_norm(self) -> float:
        return float(np.linalg.norm(self.tau, axis=1).max()) if self.tau.size else 0.0

    def max_theta_hat_norm(self) -> float:
        return float(np.linalg.norm(self.theta_hat, axis=1).max()) if self.theta_hat.size else 0.0

    def settling_time(self, eps: float) -> float | None:
        """Earliest time after which ||e|| stays below eps, None if never."""
        norms = np.linalg.norm(self.e, axis=1)
        above = np.flatnonzero(norms >= eps)
        if above.size == 0:
            return float(self.t[0]) if self.t.size else None
        if above[-1] == norms.shape[0] - 1:
            return None
        return float(self.t[above[-1] + 1])


def rk4_step_generic(f: Callable[[float, np.ndarray], np.ndarray],
                     t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ydot = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _flat_derivative(t: float, y: np.ndarray, scenario: Scenario) -> np.ndarray:
    sample = desired_trajectory(t, scenario.traj)
    q, qdot, theta_hat = y[:2], y[2:4], y[4:]
    terms = control_torque_terms(sample, q, qdot, theta_hat, scenario.cfg)
    qddot = forward_dynamics(q, qdot, terms.total(), scenario.params)
    theta_dot = adaptation_rate(terms.Yd, terms.errors.r, scenario.cfg.Gamma)
    return np.concatenate((qdot, qddot, theta_dot))


def state_derivative(state: SimState, scenario: Scenario):
    """Time derivative (qdot, qddot, theta_hat_dot) of the closed loop."""
    y = np.concatenate((state.q, state.qdot, state.theta_hat))
    dy = _flat_derivative(state.t, y, scenario)
    return dy[:2], dy[2:4], dy[4:]


_STAGE_OFFSETS = (0.0, 0.5, 0.5, 1.0)


def _rk4_flat_step(t: float, y: np.ndarray, scenario: Scenario) -> np.ndarray:
    """RK4 step of the closed loop, tagging barrier breaches with the stage."""
    h = scenario.h
    ks = []
    for stage, c in enumerate(_STAGE_OFFSETS, start=1):
        if stage == 1:
            y_stage = y
        elif stage == 4:
            y_stage = y + h * ks[2]
        else:
            y_stage = y + 0.5 * h * ks[stage - 2]
        try:
            ks.append(_flat_derivative(t + c * h, y_stage, scenario))
        except BarrierDomainError as exc:
            exc.stage = stage
            raise
    return y + (h / 6.0) * (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3])


def rk4_step(state: SimState, scenario: Scenario) -> SimState:
    """Advance the closed-loop state by one step of size scenario.h."""
    y = np.concatenate((state.q, state.qdot, state.theta_hat))
    y_next = _rk4_flat_step(state.t, y, scenario)
    return SimState(t=state.t + scenario.h, q=y_next[:2], qdot=y_next[2:4],
                    theta_hat=y_next[4:])


def run(scenario: Scenario) -> RunLog:
    """Integrate from t = 0 to t_end, logging every step.

    Truncates with a violation outcome on any barrier-domain breach and
    with a diverged outcome if a state entry leaves [-1e6, 1e6].
    """
    h = scenario.h
    n_steps = int(np.floor(scenario.t_end / h + 1e-9))
    n_rec = n_steps + 1
    nj, npar = 2, N_PARAMS

    t_log = np.empty(n_rec)
    q_log = np.empty((n_rec, nj))
    qd_log = np.empty((n_rec, nj))
    e_log = np.empty((n_rec, nj))
    r_log = np.empty((n_rec, nj))
    tau_log = np.empty((n_rec, nj))
    th_log = np.empty((n_rec, npar))
    v_log_arr = np.empty(n_rec)

    cfg = scenario.cfg
    theta = scenario.params.theta
    y = np.concatenate((scenario.q0, scenario.qdot0, scenario.theta_hat0))
    outcome = None
    count = 0

    for k in range(n_rec):
        t = k * h
        if not np.all(np.isfinite(y)) or np.any(np.abs(y) > DIVERGENCE_LIMIT):
            outcome = RunOutcome("diverged", t=t, detail=f"state left bounds at step {k}")
            break
        sample = desired_trajectory(t, scenario.traj)
        q, qdot, theta_hat = y[:2], y[2:4], y[4:]
        err = tracking_errors(sample, q, qdot, cfg.alpha)
        breach = np.flatnonzero(np.abs(err.e) >= cfg.delta)
        if breach.size:
            j = int(breach[0])
            outcome = RunOutcome("violation", t=t, joint=j + 1,
                                 detail=f"|e_{j + 1}| = {abs(err.e[j]):.6g} >= {cfg.delta[j]:.6g}")
            break
        terms = control_torque_terms(sample, q, qdot, theta_hat, cfg)
        t_log[count] = t
        q_log[count] = q
        qd_log[count] = sample.qd
        e_log[count] = err.e
        r_log[count] = err.r
        tau_log[count] = terms.total()
        th_log[count] = theta_hat
        v_log_arr[count] = lyapunov_value(cfg.barrier_kind, err.r, err.e,
                                          theta - theta_hat, q, scenario.params, cfg)
        count += 1
        if k == n_steps:
            break
        try:
            y = _rk4_flat_step(t, y, scenario)
        except BarrierDomainError as exc:
            stage = exc.stage or 1
            t_fail = t + _STAGE_OFFSETS[stage - 1] * h
            outcome = RunOutcome("violation", t=t_fail, joint=exc.joint,
                                 detail=f"{exc} during step {k}")
            break

    if outcome is None:
        outcome = RunOutcome("completed")

    return RunLog(
        t=t_log[:count].copy(), q=q_log[:count].copy(), qd=qd_log[:count].copy(),
        e=e_log[:count].copy(), r=r_log[:count].copy(), tau=tau_log[:count].copy(),
        theta_hat=th_log[:count].copy(), V=v_log_arr[:count].copy(),
        outcome=outcome, scenario_name=scenario.name,
        controller_kind=cfg.barrier_kind, h=h,
    )
