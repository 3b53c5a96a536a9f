"""Replaying a learned task on the demonstrator or a different arm.

A retarget plan pairs a learned constraint with a source of task rates
(either the recorded sequence b_t indexed by timestep, or a task-space
attractor re-evaluated on the executing arm) and a secondary policy chosen
for the imitator. Crossing embodiments re-targets the coefficient matrix
onto the imitator's Jacobian through a row correspondence that matches task
coordinates by meaning.
"""

from dataclasses import dataclass, field

import numpy as np

from .constraints import SelectionConstraint, null_projector
from .kinematics import (PlanarArm, forward_kinematics, jacobian, joint_positions,
                         manipulability, wrap_angle)
from .policies import policy_values
from .simulator import Dataset, RankCollapseError, Trajectory


def estimate_components(dataset: Dataset, model, prior_pi=None):
    """Split observed actions into estimated null-space and task parts.

    w-hat = N(x) pi and v-hat = u - w-hat. Returns (w_hat, v_hat) arrays.
    """
    X = dataset.stack("x")
    U = dataset.stack("u")
    if prior_pi is None:
        PI = dataset.stack("pi")
    elif isinstance(prior_pi, np.ndarray):
        PI = prior_pi
    else:
        PI = policy_values(prior_pi, X)
    w_hat = np.empty_like(U)
    for i in range(X.shape[0]):
        w_hat[i] = model.projector_at(X[i]).N @ PI[i]
    return w_hat, U - w_hat


def estimate_task_policy(model, X, U) -> np.ndarray:
    """Recorded task rates b_t = A(x_t) u_t, one row per sample."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if X.shape[0] != U.shape[0]:
        raise ValueError("states and actions disagree on the sample count")
    return np.stack([model.A_at(x) @ u for x, u in zip(X, U)])


@dataclass(frozen=True, eq=False)
class ReplaySource:
    """Recorded task rates replayed by timestep; holds the last value at the end."""

    b_samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b_samples", np.atleast_2d(np.asarray(self.b_samples, dtype=float)))

    def rate(self, plan, x, step: int) -> np.ndarray:
        idx = min(max(step, 0), self.b_samples.shape[0] - 1)
        return self.b_samples[idx]


@dataclass(frozen=True, eq=False)
class AttractorSource:
    """Task attractor gain * (r* - r) evaluated on the executing arm.

    Produces rates in the learned constraint's coordinates by pushing the
    full task-space error through the coefficient matrix, exactly like the
    constraint itself selects coordinates.
    """

    target: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float)
        if target.shape != (3,):
            raise ValueError("target must be a full task pose (x, y, theta)")
        object.__setattr__(self, "target", target)

    def rate(self, plan, x, step: int) -> np.ndarray:
        pose = forward_kinematics(plan.arm, x).as_array()
        err = self.target - pose
        err[2] = wrap_angle(err[2])
        return plan.execution_model.lam @ (self.gain * err)


@dataclass(eq=False)
class RetargetPlan:
    """Everything needed to run a learned task with a substituted policy.

    constraint: the learned model, a SelectionConstraint whose feature
    closure already evaluates on the demonstrator. demonstrator: the arm the
    data came from. imitator: the executing arm when it differs; its
    Jacobian replaces the demonstrator's through row_correspondence, which
    maps each feature row of the learned coefficients to the imitator
    Jacobian row with the same task meaning.
    """

    constraint: SelectionConstraint
    task_source: object
    pi_robot: object
    demonstrator: PlanarArm
    imitator: PlanarArm | None = None
    row_correspondence: tuple = (0, 1, 2)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.constraint, SelectionConstraint):
            raise ValueError("plans execute coefficient-form constraints; wrap constant "
                             "matrices as a selection over identity features")
        corr = tuple(int(i) for i in self.row_correspondence)
        if len(set(corr)) != len(corr):
            raise ValueError("row correspondence must be injective")
        self.row_correspondence = corr
        if self.imitator is not None:
            arm = self.imitator
            self.execution_model = SelectionConstraint(
                lam=self.constraint.lam,
                feature=lambda q: jacobian(arm, q)[list(corr), :],
                meta={"feature": "jacobian", "links": list(arm.link_lengths),
                      "rows": list(corr)})
        else:
            self.execution_model = self.constraint
        self.arm = self.imitator if self.imitator is not None else self.demonstrator

    def projector_at(self, x):
        return null_projector(self.execution_model.A_at(x))


def retarget_step(plan: RetargetPlan, x, step: int = 0, rank_tol: float = 1e-10) -> np.ndarray:
    """One action of the retargeted controller: u = A^+ b + N pi_robot."""
    x = np.asarray(x, dtype=float)
    proj = plan.projector_at(x)
    m = manipulability(proj.A)
    if m < rank_tol:
        raise RankCollapseError(step, m)
    b = plan.task_source.rate(plan, x, step)
    return proj.A_pinv @ b + proj.N @ np.asarray(plan.pi_robot(x), dtype=float)


def reproduce_trajectory(plan: RetargetPlan, x0, dt: float, duration: float) -> Trajectory:
    """Euler rollout of the retargeted controller from x0."""
    if dt <= 0.0 or duration <= 0.0:
        raise ValueError("dt and duration must be positive")
    steps = int(round(duration / dt))
    x = np.asarray(x0, dtype=float).copy()
    X = np.empty((steps, x.size))
    U = np.empty((steps, x.size))
    B = None
    for t in range(steps):
        u = retarget_step(plan, x, t)
        X[t] = x
        U[t] = u
        b = plan.execution_model.A_at(x) @ u
        if B is None:
            B = np.empty((steps, b.size))
        B[t] = b
        x = x + dt * u
    return Trajectory(dt=dt, x=X, u=U, b=B)


# --- obstacle clearance ---------------------------------------------------------

@dataclass(frozen=True)
class ObstacleRegion:
    """Axis-aligned rectangle treated as forbidden space."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("rectangle must have positive area")

    def contains(self, p) -> bool:
        return bool(self.x_min <= p[0] <= self.x_max and self.y_min <= p[1] <= self.y_max)

    @property
    def corners(self) -> np.ndarray:
        return np.array([[self.x_min, self.y_min], [self.x_max, self.y_min],
                         [self.x_max, self.y_max], [self.x_min, self.y_max]])


def _segment_point_distance(p, q, pt) -> float:
    d = q - p
    denom = float(d @ d)
    t = 0.0 if denom == 0.0 else float(np.clip((pt - p) @ d / denom, 0.0, 1.0))
    return float(np.linalg.norm(p + t * d - pt))


def _segments_intersect(p1, q1, p2, q2) -> bool:
    def orient(a, b, c):
        val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(val) < 1e-15 else (1 if val > 0 else -1)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15 and
                min(a[1], b[1]) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15)

    o1, o2 = orient(p1, q1, p2), orient(p1, q1, q2)
    o3, o4 = orient(p2, q2, p1), orient(p2, q2, q1)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, q1, p2):
        return True
    if o2 == 0 and on_segment(p1, q1, q2):
        return True
    if o3 == 0 and on_segment(p2, q2, p1):
        return True
    return bool(o4 == 0 and on_segment(p2, q2, q1))


def _segment_segment_distance(p1, q1, p2, q2) -> float:
    if _segments_intersect(p1, q1, p2, q2):
        return 0.0
    return min(_segment_point_distance(p1, q1, p2), _segment_point_distance(p1, q1, q2),
               _segment_point_distance(p2, q2, p1), _segment_point_distance(p2, q2, q1))


def segment_rect_distance(p, q, region: ObstacleRegion) -> float:
    """Distance from a segment to a rectangle; zero when they touch or overlap."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if region.contains(p) or region.contains(q):
        return 0.0
    corners = region.corners
    dist = np.inf
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        dist = min(dist, _segment_segment_distance(p, q, a, b))
        if dist == 0.0:
            break
    return float(dist)


@dataclass
class ClearanceReport:
    clear: bool
    first_violation: tuple | None  # (step, link index)
    min_distance: float


def check_obstacle_clearance(traj: Trajectory, arm: PlanarArm, region: ObstacleRegion,
                             violation_tol: float = 0.0) -> ClearanceReport:
    """Check every link segment at every timestep against a forbidden rectangle."""
    first = None
    min_dist = np.inf
    for t in range(traj.n_samples):
        pts = joint_positions(arm, traj.x[t])
        for link in range(arm.n):
            d = segment_rect_distance(pts[link], pts[link + 1], region)
            min_dist = min(min_dist, d)
            if d <= violation_tol and first is None:
                first = (t, link)
    return ClearanceReport(clear=first is None, first_violation=first,
                           min_distance=float(min_dist))
