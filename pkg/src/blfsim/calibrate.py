"""Offline calibration of the affine mismatch-bound coefficients.

The robust damping term needs scalars with ||chi|| <= rho1 ||e|| +
rho2 ||r|| over a scenario's operating envelope, where chi is computable
offline because the true parameters are known there.  Both bounds are
affine in ||e||, so the calibration fits four coefficients

    (c1 + c2 ||e||) ||e|| + (c3 + c4 ||e||) ||r||  >=  ||chi||

as the tightest mean-slack upper bound over a dense envelope sample
(a linear program), then inflates them by a safety margin: sampled maxima
under-estimate suprema.

The envelope is the box |e_i| < delta_i crossed with |edot_i| <= edot_max_i
and t in [0, t_end]; edot_max should cover the velocity errors the closed
loop actually reaches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import linprog

from .lyapunov import chi_vector
from .trajectory import desired_trajectory

if TYPE_CHECKING:  # pragma: no cover
    from .engine import Scenario


@dataclass(frozen=True)
class EnvelopeSpec:
    """Sampling region and calibration settings for one scenario."""

    edot_max: np.ndarray
    samples: int = 20000
    seed: int = 20860
    margin: float = 1.2

    def __post_init__(self):
        edot_max = np.asarray(self.edot_max, dtype=float)
        if edot_max.ndim != 1 or np.any(edot_max <= 0.0) or not np.all(np.isfinite(edot_max)):
            raise ValueError("edot_max must be a vector of positive finite entries")
        object.__setattr__(self, "edot_max", edot_max)
        if self.samples < 100:
            raise ValueError("calibration needs at least 100 samples")
        if self.margin < 1.0:
            raise ValueError("margin must be at least 1")


@dataclass(frozen=True)
class EnvelopeSamples:
    """Norms of (e, r, chi) over sampled envelope states."""

    e_norm: np.ndarray
    r_norm: np.ndarray
    chi_norm: np.ndarray


def default_envelope(scenario: "Scenario") -> EnvelopeSpec:
    return scenario.envelope if scenario.envelope is not None \
        else EnvelopeSpec(edot_max=np.full(2, 2.0))


def sample_envelope(scenario: "Scenario", n: int | None = None,
                    seed: int | None = None) -> EnvelopeSamples:
    """Draw envelope states and evaluate the mismatch norm at each."""
    env = default_envelope(scenario)
    n = env.samples if n is None else n
    seed = env.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    cfg = scenario.cfg
    t_hi = scenario.t_end if scenario.t_end > 0.0 else 1.0

    ts = rng.uniform(0.0, t_hi, n)
    es = rng.uniform(-cfg.delta, cfg.delta, (n, cfg.delta.shape[0]))
    eds = rng.uniform(-env.edot_max, env.edot_max, (n, env.edot_max.shape[0]))

    e_norm = np.empty(n)
    r_norm = np.empty(n)
    chi_norm = np.empty(n)
    theta = scenario.params.theta
    for i in range(n):
        sample = desired_trajectory(ts[i], scenario.traj)
        q = sample.qd - es[i]
        qdot = sample.qd_dot - eds[i]
        r = eds[i] + cfg.alpha * es[i]
        chi = chi_vector(q, qdot, sample, theta, cfg.alpha, scenario.params)
        e_norm[i] = np.linalg.norm(es[i])
        r_norm[i] = np.linalg.norm(r)
        chi_norm[i] = np.linalg.norm(chi)
    return EnvelopeSamples(e_norm=e_norm, r_norm=r_norm, chi_norm=chi_norm)


def _design_matrix(s: EnvelopeSamples) -> np.ndarray:
    return np.column_stack((s.e_norm, s.e_norm**2, s.r_norm, s.e_norm * s.r_norm))


def bound_slack(coeffs, s: EnvelopeSamples) -> np.ndarray:
    """rho1 ||e|| + rho2 ||r|| - ||chi|| per sample (negative = violated)."""
    return _design_matrix(s) @ np.asarray(coeffs, dtype=float) - s.chi_norm


def calibrate_rho(scenario: "Scenario", samples: int | None = None,
                  seed: int | None = None, margin: float | None = None,
                  envelope_samples: EnvelopeSamples | None = None) -> np.ndarray:
    """Fit (c1, c2, c3, c4) as the least mean-slack affine upper bound.

    Minimizes the average slack of the bound over the sampled envelope
    subject to covering every sample, then multiplies by the margin.
    """
    env = default_envelope(scenario)
    margin = env.margin if margin is None else margin
    s = envelope_samples if envelope_samples is not None \
        else sample_envelope(scenario, n=samples, seed=seed)
    A = _design_matrix(s)
    res = linprog(c=A.mean(axis=0), A_ub=-A, b_ub=-s.chi_norm,
                  bounds=[(0.0, None)] * 4, method="highs")
    if not res.success:  # pragma: no cover - feasible by construction
        raise RuntimeError(f"rho calibration LP failed: {res.message}")
    return res.x * margin
