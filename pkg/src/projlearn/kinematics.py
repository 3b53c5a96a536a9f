"""Planar revolute-chain kinematics and manipulability helpers."""

from dataclasses import dataclass

import numpy as np


def wrap_angle(theta):
    """Wrap an angle (or array of angles) to the half-open interval (-pi, pi]."""
    wrapped = np.mod(theta, 2.0 * np.pi)
    # np.mod returns [0, 2pi); fold the upper half down, keeping +pi itself.
    return np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)


@dataclass(frozen=True)
class PlanarArm:
    """Planar arm with revolute joints and rigid links of fixed length.

    Joint angles are relative: joint i rotates link i with respect to link
    i-1. Lengths are in whatever unit the experiment uses, the math does not
    care; all experiment configs in this repo state the unit explicitly.
    """

    link_lengths: tuple

    def __post_init__(self):
        lengths = tuple(float(l) for l in self.link_lengths)
        if len(lengths) == 0:
            raise ValueError("arm needs at least one link")
        if any(not np.isfinite(l) or l <= 0.0 for l in lengths):
            raise ValueError("link lengths must be positive and finite")
        object.__setattr__(self, "link_lengths", lengths)

    @property
    def n(self) -> int:
        return len(self.link_lengths)


@dataclass(frozen=True)
class TaskPose:
    """End-effector pose (x, y, theta) with theta normalised to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)


def joint_positions(arm: PlanarArm, q) -> np.ndarray:
    """Cartesian positions of the base and every joint/end point.

    Args:
        arm: the arm description.
        q: joint angles, shape (n,).

    Returns:
        Array of shape (n + 1, 2); row 0 is the base at the origin, row i is
        the far end of link i.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (arm.n,):
        raise ValueError(f"expected {arm.n} joint angles, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    angles = np.cumsum(q)
    lengths = np.asarray(arm.link_lengths)
    pts = np.zeros((arm.n + 1, 2))
    pts[1:, 0] = np.cumsum(lengths * np.cos(angles))
    pts[1:, 1] = np.cumsum(lengths * np.sin(angles))
    return pts


def forward_kinematics(arm: PlanarArm, q) -> TaskPose:
    """End-effector pose of a planar chain.

    x = sum_i l_i cos(q_1 + ... + q_i), same with sin for y, and the
    orientation is the plain angle sum wrapped to (-pi, pi].
    """
    pts = joint_positions(arm, q)
    return TaskPose(x=pts[-1, 0], y=pts[-1, 1], theta=float(np.sum(q)))


def jacobian(arm: PlanarArm, q) -> np.ndarray:
    """Task Jacobian of (x, y, theta) with respect to the joint angles.

    Returns a (3, n) matrix. The orientation row is all ones: every revolute
    joint contributes its rate directly to the end-effector orientation.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (arm.n,):
        raise ValueError(f"expected {arm.n} joint angles, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    angles = np.cumsum(q)
    lengths = np.asarray(arm.link_lengths)
    sins = lengths * np.sin(angles)
    coss = lengths * np.cos(angles)
    J = np.ones((3, arm.n))
    # dx/dq_j = -sum_{i>=j} l_i sin(angle_i); reverse cumsum keeps it O(n).
    J[0, :] = -np.cumsum(sins[::-1])[::-1]
    J[1, :] = np.cumsum(coss[::-1])[::-1]
    return J


def jacobian_stack(arm: PlanarArm, Q) -> np.ndarray:
    """Jacobians for a batch of configurations, shape (N, 3, n)."""
    Q = np.asarray(Q, dtype=float)
    out = np.empty((Q.shape[0], 3, arm.n))
    for i in range(Q.shape[0]):
        out[i] = jacobian(arm, Q[i])
    return out


def manipulability(A) -> float:
    """Yoshikawa-style manipulability sqrt(det(A A^T)) of a constraint matrix.

    Zero for rank-deficient A. A must be a (k, n) matrix with k <= n.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] > A.shape[1]:
        raise ValueError("expected a wide (k, n) matrix with k <= n")
    if not np.all(np.isfinite(A)):
        raise ValueError("constraint matrix must be finite")
    gram = A @ A.T
    det = float(np.linalg.det(gram))
    # Rounding can push a singular Gram determinant a hair below zero.
    return float(np.sqrt(max(det, 0.0)))


def manipulability_gradient(model, x, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of manipulability wrt the state.

    Args:
        model: any constraint model exposing ``A_at(x) -> (k, n) array``.
        x: state at which to differentiate.
        step: finite-difference half-step.

    Returns:
        Gradient vector with the same shape as x. State-independent
        constraints give an exactly zero gradient.
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        probe = np.zeros_like(x)
        probe[i] = step
        hi = manipulability(model.A_at(x + probe))
        lo = manipulability(model.A_at(x - probe))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"manipulability not finite at probe along dim {i}")
        grad[i] = (hi - lo) / (2.0 * step)
    return grad
