"""Barrier Lyapunov functions, mismatch vector, and decrease monitoring.

Both candidate functions share the kinetic term 0.5 r^T M(q) r and the
estimation term 0.5 tt^T Gamma^-1 tt (tt = theta - theta_hat); they differ
in the barrier potential on e:

    log form:  sum_i (k_i / 2) ln(delta_i^2 / (delta_i^2 - e_i^2))
    tan form:  sum_i (delta_i^2 / pi) tan(pi/2 * e_i^2 / delta_i^2)

Along a completed run the monitor checks per-step decrease and the
discrete rate inequality (V_{k+1} - V_k)/h <= -beta ||x_k||^2 with
x = (r, e), where beta is the conservative decay constant implied by the
gain set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .controller import BarrierDomainError, ControllerConfig, _check_domain
from .dynamics import RobotParams, coriolis_matrix, gravity_vector, mass_matrix, regressor
from .trajectory import TrajectorySample

if TYPE_CHECKING:  # pragma: no cover
    from .engine import RunLog, Scenario


class NonPositiveBeta(ValueError):
    """The gain set gives no positive decay constant (kn too low)."""


def barrier_potential_log(e, k, delta) -> float:
    """Log barrier potential; diverges as any |e_i| -> delta_i."""
    e = np.asarray(e, dtype=float)
    _check_domain(e, delta)
    return float(np.sum(0.5 * k * np.log(delta**2 / (delta**2 - e**2))))


def barrier_potential_tan(e, delta) -> float:
    """Tangent barrier potential; diverges as any |e_i| -> delta_i."""
    e = np.asarray(e, dtype=float)
    _check_domain(e, delta)
    return float(np.sum(delta**2 / np.pi * np.tan(0.5 * np.pi * e**2 / delta**2)))


def _common_terms(r, e, theta_tilde, q, params, cfg) -> float:
    r = np.asarray(r, dtype=float)
    theta_tilde = np.asarray(theta_tilde, dtype=float)
    kinetic = 0.5 * float(r @ mass_matrix(q, params) @ r)
    estimation = 0.5 * float(theta_tilde @ (theta_tilde / cfg.Gamma))
    return kinetic + estimation


def v_log(r, e, theta_tilde, q, params: RobotParams, cfg: ControllerConfig) -> float:
    """Barrier Lyapunov value with the log potential."""
    return _common_terms(r, e, theta_tilde, q, params, cfg) \
        + barrier_potential_log(e, cfg.k, cfg.delta)


def v_tan(r, e, theta_tilde, q, params: RobotParams, cfg: ControllerConfig) -> float:
    """Barrier Lyapunov value with the tangent potential."""
    return _common_terms(r, e, theta_tilde, q, params, cfg) \
        + barrier_potential_tan(e, cfg.delta)


def lyapunov_value(kind: str, r, e, theta_tilde, q, params, cfg) -> float:
    """Dispatch v_log / v_tan; baseline runs are scored with the log form."""
    if kind == "tan":
        return v_tan(r, e, theta_tilde, q, params, cfg)
    return v_log(r, e, theta_tilde, q, params, cfg)


def chi_vector(q, qdot, sample: TrajectorySample, theta, alpha,
               params: RobotParams) -> np.ndarray:
    """Mismatch between the measured-state dynamics terms and the desired
    feedforward:

        chi = M(q)(qd_ddot + alpha edot) + C(q, qdot)(qd_dot + alpha e)
              + G(q) + Fd qdot - Yd theta
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    e = sample.qd - q
    edot = sample.qd_dot - qdot
    Yd = regressor(sample.qd, sample.qd_dot, sample.qd_ddot)
    return (
        mass_matrix(q, params) @ (sample.qd_ddot + alpha * edot)
        + coriolis_matrix(q, qdot, params) @ (sample.qd_dot + alpha * e)
        + gravity_vector(q, params)
        + params.fd * qdot
        - Yd @ np.asarray(theta, dtype=float)
    )


def beta_estimate(cfg: ControllerConfig, kind: str | None = None,
                  kr_min: float | None = None) -> float:
    """Conservative decay constant min{min Kr, lam_min(Ke alpha) - 1/(4 kn)}.

    lam_min(Ke alpha) is taken as the worst-case closed form of the gain
    design: min(k alpha)/max(delta^2) for the log design, min(alpha) for
    the tan design (its gain never drops below 1), and the exact constant
    min(k alpha / delta^2) for the baseline.  Raises NonPositiveBeta when
    the result is not positive, i.e. kn was not chosen high enough.
    """
    kind = kind or cfg.barrier_kind
    if kr_min is None:
        kr_min = float(np.min(cfg.Kr))
    if kind == "log":
        lam_ke_alpha = float(np.min(cfg.k * cfg.alpha) / np.max(cfg.delta**2))
    elif kind == "tan":
        lam_ke_alpha = float(np.min(cfg.alpha))
    elif kind == "baseline":
        lam_ke_alpha = float(np.min(cfg.k * cfg.alpha / cfg.delta**2))
    else:
        raise ValueError(f"unknown gain design {kind!r}")
    beta = min(kr_min, lam_ke_alpha - 1.0 / (4.0 * cfg.kn))
    if beta <= 0.0:
        raise NonPositiveBeta(
            f"beta = {beta:.6g} <= 0 for the {kind} design; increase kn or the gains"
        )
    return beta


@dataclass
class MonitorReport:
    """Per-step Lyapunov series and the decrease/rate verdict.

    The arrays are index-aligned with the run log; vdot_numeric holds the
    forward difference (V_{k+1} - V_k)/h and is one entry shorter.
    """

    kind: str
    t: np.ndarray
    v: np.ndarray
    vdot_numeric: np.ndarray
    x_norm_sq: np.ndarray
    beta: float | None
    decrease_ok: bool
    max_step_increase: float
    rate_skipped: bool
    rate_fraction: float | None
    rate_ok: bool | None
    tol_drift: float
    tol_rate: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """PASS iff V never increases beyond tolerance and, when beta is
        available, the discrete rate inequality holds at >= 99% of steps."""
        if not self.decrease_ok:
            return False
        if self.rate_skipped:
            return True
        return bool(self.rate_ok)


RATE_PASS_FRACTION = 0.99


def monitor_run(log: "RunLog", scenario: "Scenario", kind: str | None = None,
                tol_drift: float = 1e-6, tol_rate: float = 1e-3) -> MonitorReport:
    """Evaluate V along a completed run and check the decrease property.

    Tolerances are absolute but scaled by max(1, V(0)) to stay meaningful
    for runs starting at large V.  Isolated discretization overshoots are
    admitted by requiring the rate inequality at only 99% of steps.
    """
    if log.outcome.status != "completed":
        raise ValueError(f"monitor requires a completed run, got outcome {log.outcome.status!r}")
    if kind is None:
        kind = "tan" if log.controller_kind == "tan" else "log"
    cfg = scenario.cfg
    theta = scenario.params.theta
    n_rec = log.t.shape[0]

    v = np.empty(n_rec)
    x2 = np.empty(n_rec)
    for i in range(n_rec):
        theta_tilde = theta - log.theta_hat[i]
        v[i] = lyapunov_value(kind, log.r[i], log.e[i], theta_tilde,
                              log.q[i], scenario.params, cfg)
        x2[i] = float(log.r[i] @ log.r[i] + log.e[i] @ log.e[i])

    scale = max(1.0, v[0]) if n_rec else 1.0
    dv = np.diff(v)
    vdot = dv / log.h if n_rec > 1 else np.empty(0)
    decrease_ok = bool(np.all(dv <= tol_drift * scale)) if dv.size else True
    max_inc = float(dv.max()) if dv.size else 0.0

    notes: list[str] = []
    beta: float | None = None
    rate_skipped = False
    rate_fraction: float | None = None
    rate_ok: bool | None = None
    try:
        beta = beta_estimate(cfg, kind)
    except NonPositiveBeta as exc:
        rate_skipped = True
        notes.append(f"rate check skipped: {exc}")
    if not rate_skipped:
        if vdot.size:
            ok = vdot <= -beta * x2[:-1] + tol_rate * scale
            rate_fraction = float(np.mean(ok))
        else:
            rate_fraction = 1.0
        rate_ok = rate_fraction >= RATE_PASS_FRACTION

    return MonitorReport(
        kind=kind, t=log.t, v=v, vdot_numeric=vdot, x_norm_sq=x2,
        beta=beta, decrease_ok=decrease_ok, max_step_increase=max_inc,
        rate_skipped=rate_skipped, rate_fraction=rate_fraction, rate_ok=rate_ok,
        tol_drift=tol_drift, tol_rate=tol_rate, notes=notes,
    )
