"""Tracking errors, barrier gain designs, robust damping, control torque.

The torque is assembled from four parts:

    tau = Yd @ theta_hat  +  Kr r  +  Ke(e) e  +  (kn rho1^2 + rho2) r

where Yd is the regressor along the desired trajectory, r = edot + alpha e
is the filtered error, and Ke is one of two error-dependent diagonal gain
designs that diverge as |e_i| approaches the constraint width delta_i:

    log design:  k_i / (delta_i^2 - e_i^2)
    tan design:  1 + tan^2(pi/2 * e_i^2 / delta_i^2)

A constant baseline Ke = k_i / delta_i^2 (the shared e = 0 value of the
log design) isolates the effect of the error dependence.  rho1 and rho2
are affine-in-||e|| bounds on the feedforward mismatch, calibrated per
scenario (see calibrate module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import N_PARAMS, _joint_vec, regressor
from .trajectory import TrajectorySample

BARRIER_KINDS = ("log", "tan", "baseline")


class BarrierDomainError(RuntimeError):
    """A tracking-error entry reached its constraint width.

    Raised instead of clamping: saturating the gain would silently void
    the constraint-invariance guarantee under test.  `joint` is 1-based.
    """

    def __init__(self, joint: int, value: float, limit: float, stage: int | None = None):
        self.joint = int(joint)
        self.value = float(value)
        self.limit = float(limit)
        self.stage = stage
        msg = f"|e_{self.joint}| = {abs(self.value):.6g} reached constraint width {self.limit:.6g}"
        if stage is not None:
            msg += f" (integrator stage {stage})"
        super().__init__(msg)


def _positive_vec(x, name, size):
    x = np.asarray(x, dtype=float)
    if x.shape != (size,):
        raise ValueError(f"{name} must have {size} entries, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError(f"{name} entries must be positive and finite")
    return x


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and constraint widths of the tracking controller.

    alpha, Kr, k, delta, Gamma are the diagonals of the corresponding
    diagonal gain matrices; kn is the scalar damping gain; rho_coeffs =
    (c1, c2, c3, c4) gives rho1 = c1 + c2 ||e||, rho2 = c3 + c4 ||e||.
    """

    alpha: np.ndarray
    Kr: np.ndarray
    k: np.ndarray
    delta: np.ndarray
    kn: float
    Gamma: np.ndarray
    rho_coeffs: np.ndarray
    barrier_kind: str = "log"

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("alpha must be a non-empty 1-d vector")
        n = alpha.shape[0]
        object.__setattr__(self, "alpha", _positive_vec(alpha, "alpha", n))
        object.__setattr__(self, "Kr", _positive_vec(self.Kr, "Kr", n))
        object.__setattr__(self, "k", _positive_vec(self.k, "k", n))
        object.__setattr__(self, "delta", _positive_vec(self.delta, "delta", n))
        if not np.isfinite(self.kn) or self.kn <= 0.0:
            raise ValueError("kn must be positive and finite")
        object.__setattr__(self, "Gamma", _positive_vec(self.Gamma, "Gamma", N_PARAMS))
        rho = np.asarray(self.rho_coeffs, dtype=float)
        if rho.shape != (4,):
            raise ValueError(f"rho_coeffs must have 4 entries, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0.0):
            raise ValueError("rho_coeffs entries must be non-negative and finite")
        object.__setattr__(self, "rho_coeffs", rho)
        if self.barrier_kind not in BARRIER_KINDS:
            raise ValueError(f"barrier_kind must be one of {BARRIER_KINDS}, got {self.barrier_kind!r}")


@dataclass(frozen=True)
class ErrorState:
    """Position tracking error e = qd - q and filtered error r = edot + alpha e."""

    e: np.ndarray
    r: np.ndarray


def tracking_errors(sample: TrajectorySample, q, qdot, alpha) -> ErrorState:
    """Compute (e, r) from the desired sample and the measured state."""
    e = sample.qd - np.asarray(q, dtype=float)
    r = (sample.qd_dot - np.asarray(qdot, dtype=float)) + alpha * e
    return ErrorState(e=e, r=r)


def _check_domain(e, delta):
    for i in range(e.shape[0]):
        if abs(e[i]) >= delta[i]:
            raise BarrierDomainError(i + 1, e[i], delta[i])


def gain_log(e, k, delta) -> np.ndarray:
    """Diagonal of the log-design gain, k_i / (delta_i^2 - e_i^2)."""
    e = np.asarray(e, dtype=float)
    _check_domain(e, delta)
    return k / (delta**2 - e**2)


def gain_tan(e, delta) -> np.ndarray:
    """Diagonal of the tan-design gain, 1 + tan^2(pi/2 * e_i^2 / delta_i^2)."""
    e = np.asarray(e, dtype=float)
    _check_domain(e, delta)
    return 1.0 + np.tan(0.5 * np.pi * e**2 / delta**2) ** 2


def gain_baseline(k, delta) -> np.ndarray:
    """Constant baseline gain, the e = 0 value of the log design."""
    return k / delta**2


def barrier_gain(e, cfg: ControllerConfig) -> np.ndarray:
    """Dispatch the diagonal of Ke(e) according to cfg.barrier_kind."""
    if cfg.barrier_kind == "log":
        return gain_log(e, cfg.k, cfg.delta)
    if cfg.barrier_kind == "tan":
        return gain_tan(e, cfg.delta)
    return gain_baseline(cfg.k, cfg.delta)


def rho_bounds(e, coeffs) -> tuple[float, float]:
    """Affine mismatch bounds rho1 = c1 + c2 ||e||, rho2 = c3 + c4 ||e||."""
    ne = float(np.linalg.norm(e))
    c1, c2, c3, c4 = coeffs
    return c1 + c2 * ne, c3 + c4 * ne


def robust_term(r, kn: float, rho1: float, rho2: float) -> np.ndarray:
    """Nonlinear damping (kn rho1^2 + rho2) r."""
    return (kn * rho1**2 + rho2) * np.asarray(r, dtype=float)


@dataclass(frozen=True)
class TorqueTerms:
    """The four torque constituents plus the error state and regressor."""

    feedforward: np.ndarray   # Yd @ theta_hat
    filtered: np.ndarray      # Kr r
    barrier: np.ndarray       # Ke(e) e
    robust: np.ndarray        # (kn rho1^2 + rho2) r
    errors: ErrorState
    Yd: np.ndarray

    def total(self) -> np.ndarray:
        return self.feedforward + self.filtered + self.barrier + self.robust


def control_torque_terms(sample: TrajectorySample, q, qdot, theta_hat,
                         cfg: ControllerConfig) -> TorqueTerms:
    """Assemble the torque constituents at one instant.

    Raises BarrierDomainError (log/tan designs) if any |e_i| >= delta_i.
    """
    err = tracking_errors(sample, q, qdot, cfg.alpha)
    Yd = regressor(sample.qd, sample.qd_dot, sample.qd_ddot)
    ke = barrier_gain(err.e, cfg)
    rho1, rho2 = rho_bounds(err.e, cfg.rho_coeffs)
    theta_hat = np.asarray(theta_hat, dtype=float)
    return TorqueTerms(
        feedforward=Yd @ theta_hat,
        filtered=cfg.Kr * err.r,
        barrier=ke * err.e,
        robust=robust_term(err.r, cfg.kn, rho1, rho2),
        errors=err,
        Yd=Yd,
    )


def control_torque(sample: TrajectorySample, q, qdot, theta_hat,
                   cfg: ControllerConfig) -> np.ndarray:
    """Total control torque tau = Yd theta_hat + Kr r + Ke e + robust term."""
    return control_torque_terms(sample, q, qdot, theta_hat, cfg).total()


def adaptation_rate(Yd, r, Gamma) -> np.ndarray:
    """Gradient parameter-update rate Gamma Yd^T r."""
    Yd = np.asarray(Yd, dtype=float)
    r = _joint_vec(r, "r")
    Gamma = np.asarray(Gamma, dtype=float)
    if Yd.shape != (r.shape[0], Gamma.shape[0]):
        raise ValueError(f"Yd shape {Yd.shape} inconsistent with r and Gamma")
    return Gamma * (Yd.T @ r)
