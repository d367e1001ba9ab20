"""Closed-form rigid-body dynamics of a two-link planar revolute arm.

The arm moves in a vertical plane and is described by seven lumped
constants theta = (p1, p2, p3, g1, g2, fd1, fd2): three inertia lumps
[kg m^2], two gravity lumps [N m], and two viscous friction coefficients
[N m s/rad].  The joint-space model is

    M(q) qdd + C(q, qd) qd + G(q) + Fd qd = tau

with C in Christoffel form, so the usual structural identities hold:
skew-symmetry of (Mdot - 2C), the switching property C(q, a) b = C(q, b) a,
and linearity in theta via the regressor Y(q, qd, qdd).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_JOINTS = 2
N_PARAMS = 7

GRAVITY = 9.81


def _joint_vec(x, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (N_JOINTS,):
        raise ValueError(f"{name} must be a length-{N_JOINTS} vector, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class RobotParams:
    """Lumped parameter vector theta = (p1, p2, p3, g1, g2, fd1, fd2)."""

    theta: np.ndarray
    n: int = N_JOINTS

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (N_PARAMS,):
            raise ValueError(f"theta must have {N_PARAMS} entries, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta entries must be finite")
        p1, p2, p3 = theta[:3]
        if p1 <= 0.0 or p2 <= 0.0:
            raise ValueError("inertia lumps p1 and p2 must be positive")
        # sufficient condition for det M(q) > 0 at every configuration
        if p1 * p2 - (p2 + abs(p3)) ** 2 <= 0.0:
            raise ValueError("theta violates positive definiteness of the inertia matrix")
        if theta[5] <= 0.0 or theta[6] <= 0.0:
            raise ValueError("viscous friction coefficients must be positive")
        object.__setattr__(self, "theta", theta)

    @property
    def fd(self) -> np.ndarray:
        """Viscous friction coefficients (fd1, fd2)."""
        return self.theta[5:7]

    @classmethod
    def from_physical(cls, l1, l2, lc1, lc2, m1, m2, I1, I2, fd1, fd2, g=GRAVITY):
        """Lump link lengths, masses, and inertias into the seven parameters.

        l* are link lengths [m], lc* the distances to the link centers of
        mass [m], m* the link masses [kg], I* the centroidal inertias
        [kg m^2], fd* the viscous friction coefficients.
        """
        p1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2) + I1 + I2
        p2 = m2 * lc2**2 + I2
        p3 = m2 * l1 * lc2
        g1 = (m1 * lc1 + m2 * l1) * g
        g2 = m2 * lc2 * g
        return cls(theta=np.array([p1, p2, p3, g1, g2, fd1, fd2]))

    @classmethod
    def reference_arm(cls) -> "RobotParams":
        """Default arm: 1.5 kg / 0.8 kg links of 1.0 m / 0.8 m, vertical plane.

        Gives theta = (1.466, 0.171, 0.32, 15.2055, 3.1392, 0.2, 0.2).
        """
        return cls.from_physical(
            l1=1.0, l2=0.8, lc1=0.5, lc2=0.4,
            m1=1.5, m2=0.8, I1=0.12, I2=0.043,
            fd1=0.2, fd2=0.2,
        )


def mass_matrix(q, params: RobotParams) -> np.ndarray:
    """Symmetric positive-definite inertia matrix M(q)."""
    q = _joint_vec(q, "q")
    p1, p2, p3 = params.theta[:3]
    c2 = np.cos(q[1])
    m12 = p2 + p3 * c2
    return np.array([[p1 + 2.0 * p3 * c2, m12], [m12, p2]])


def mass_matrix_dot(q, qdot, params: RobotParams) -> np.ndarray:
    """Time derivative of M along (q, qdot), in closed form (dM/dq2 * qd2)."""
    q = _joint_vec(q, "q")
    qdot = _joint_vec(qdot, "qdot")
    p3 = params.theta[2]
    s2 = np.sin(q[1])
    a = -p3 * s2 * qdot[1]
    return np.array([[2.0 * a, a], [a, 0.0]])


def coriolis_matrix(q, qdot, params: RobotParams) -> np.ndarray:
    """Centripetal/Coriolis matrix C(q, qdot) in Christoffel-symbol form."""
    q = _joint_vec(q, "q")
    qdot = _joint_vec(qdot, "qdot")
    p3 = params.theta[2]
    h = p3 * np.sin(q[1])
    return np.array([
        [-h * qdot[1], -h * (qdot[0] + qdot[1])],
        [h * qdot[0], 0.0],
    ])


def gravity_vector(q, params: RobotParams) -> np.ndarray:
    """Gravity torque vector G(q); bounded by (g1 + g2, g2) entrywise."""
    q = _joint_vec(q, "q")
    g1, g2 = params.theta[3:5]
    c12 = np.cos(q[0] + q[1])
    return np.array([g1 * np.cos(q[0]) + g2 * c12, g2 * c12])


def forward_dynamics(q, qdot, tau, params: RobotParams) -> np.ndarray:
    """Joint accelerations from applied torque.

    Solves M(q) qdd = tau - C(q, qd) qd - G(q) - Fd qd with a linear solve
    (never an explicit inverse).
    """
    q = _joint_vec(q, "q")
    qdot = _joint_vec(qdot, "qdot")
    tau = _joint_vec(tau, "tau")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot)) and np.all(np.isfinite(tau))):
        raise ValueError("forward_dynamics requires finite inputs")
    rhs = tau - coriolis_matrix(q, qdot, params) @ qdot \
        - gravity_vector(q, params) - params.fd * qdot
    try:
        return np.linalg.solve(mass_matrix(q, params), rhs)
    except np.linalg.LinAlgError as exc:  # unreachable for valid RobotParams
        raise ValueError("inertia matrix is singular; parameter invariant violated") from exc


def regressor(q, qdot, qddot) -> np.ndarray:
    """Regressor Y with Y @ theta = M qdd + C qd + G + Fd qd, exactly.

    Evaluated along a desired trajectory (qd, qd_dot, qd_ddot) this is the
    feedforward regressor used by the adaptive controller.
    """
    q = _joint_vec(q, "q")
    qdot = _joint_vec(qdot, "qdot")
    qddot = _joint_vec(qddot, "qddot")
    c2 = np.cos(q[1])
    s2 = np.sin(q[1])
    c1 = np.cos(q[0])
    c12 = np.cos(q[0] + q[1])
    Y = np.zeros((N_JOINTS, N_PARAMS))
    # row 1: p1, p2, p3, g1, g2, fd1 columns
    Y[0, 0] = qddot[0]
    Y[0, 1] = qddot[1]
    Y[0, 2] = c2 * (2.0 * qddot[0] + qddot[1]) - s2 * (2.0 * qdot[0] * qdot[1] + qdot[1] ** 2)
    Y[0, 3] = c1
    Y[0, 4] = c12
    Y[0, 5] = qdot[0]
    # row 2: p2, p3, g2, fd2 columns
    Y[1, 1] = qddot[0] + qddot[1]
    Y[1, 2] = c2 * qddot[0] + s2 * qdot[0] ** 2
    Y[1, 4] = c12
    Y[1, 6] = qdot[1]
    return Y


@dataclass(frozen=True)
class StateRegion:
    """Axis-aligned joint-position box with a velocity magnitude cap."""

    q_min: np.ndarray
    q_max: np.ndarray
    v_max: float = 3.0

    def __post_init__(self):
        q_min = _joint_vec(self.q_min, "q_min")
        q_max = _joint_vec(self.q_max, "q_max")
        if np.any(q_max <= q_min):
            raise ValueError("degenerate region: q_max must exceed q_min in every joint")
        if self.v_max <= 0.0:
            raise ValueError("degenerate region: v_max must be positive")
        object.__setattr__(self, "q_min", q_min)
        object.__setattr__(self, "q_max", q_max)


@dataclass(frozen=True)
class ModelBounds:
    """Inertia eigenvalue range and Lipschitz-type bounding constants.

    m1/m2 bound the inertia eigenvalues; the zeta constants bound
    |M(a)-M(b)|, |C(a,v)|/|v|, |C(a,v)-C(b,v)|, |G(a)-G(b)| in the induced
    infinity norm (2-norm for G) against the argument distance.
    """

    m1: float
    m2: float
    zeta_m1: float
    zeta_c1: float
    zeta_c2: float
    zeta_g: float


def _iinf(a: np.ndarray) -> float:
    """Induced infinity norm (max absolute row sum)."""
    return float(np.abs(a).sum(axis=1).max())


def estimate_bounds(params: RobotParams, region: StateRegion | None = None,
                    samples: int = 4000, margin: float = 1.2,
                    seed: int = 0) -> ModelBounds:
    """Monte-Carlo estimates of the model bounding constants.

    Sampled maxima under-estimate the true suprema, so the eigenvalue
    range is widened and the ratio maxima inflated by `margin`.
    """
    if region is None:
        region = StateRegion(np.full(N_JOINTS, -np.pi), np.full(N_JOINTS, np.pi))
    if samples < 1000:
        raise ValueError("samples must be at least 1000")
    rng = np.random.default_rng(seed)
    qa = rng.uniform(region.q_min, region.q_max, size=(samples, N_JOINTS))
    qb = rng.uniform(region.q_min, region.q_max, size=(samples, N_JOINTS))
    va = rng.uniform(-region.v_max, region.v_max, size=(samples, N_JOINTS))

    eig_min = np.inf
    eig_max = 0.0
    zm = zc1 = zc2 = zg = 0.0
    for a, b, v in zip(qa, qb, va):
        w = np.linalg.eigvalsh(mass_matrix(a, params))
        eig_min = min(eig_min, w[0])
        eig_max = max(eig_max, w[-1])
        dq = float(np.linalg.norm(a - b))
        if dq > 1e-8:
            zm = max(zm, _iinf(mass_matrix(a, params) - mass_matrix(b, params)) / dq)
            zc2 = max(zc2, _iinf(coriolis_matrix(a, v, params) - coriolis_matrix(b, v, params)) / dq)
            zg = max(zg, float(np.linalg.norm(gravity_vector(a, params) - gravity_vector(b, params))) / dq)
        nv = float(np.linalg.norm(v))
        if nv > 1e-8:
            zc1 = max(zc1, _iinf(coriolis_matrix(a, v, params)) / nv)
    return ModelBounds(
        m1=eig_min / margin,
        m2=eig_max * margin,
        zeta_m1=zm * margin,
        zeta_c1=zc1 * margin,
        zeta_c2=zc2 * margin,
        zeta_g=zg * margin,
    )
