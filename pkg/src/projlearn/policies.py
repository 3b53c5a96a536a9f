"""Secondary and task-space policies used by the experiments.

All policies are pure functions of the state. The secondary policies mirror
the ones used to generate the benchmark data: a linear map, a planar limit
cycle, a sinusoidal field and joint-space point attractors. Task policies
return rates in the full task space (x, y, theta for the arms); the
constraint picks out the coordinates it actually governs.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from .kinematics import PlanarArm, forward_kinematics, manipulability_gradient, wrap_angle


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    """u = -L (x^T, 1)^T, an affine contraction written as one matrix."""

    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "L", np.atleast_2d(np.asarray(self.L, dtype=float)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return -self.L @ np.append(x, 1.0)


@dataclass(frozen=True)
class LimitCyclePolicy:
    """Polar-coordinate limit cycle rho' = rho (rho0 - rho^2), phi' = omega."""

    rho0: float = 0.75
    omega: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rho = float(np.hypot(x[0], x[1]))
        if rho == 0.0:
            return np.zeros(2)
        phi = np.arctan2(x[1], x[0])
        rho_dot = rho * (self.rho0 - rho * rho)
        c, s = np.cos(phi), np.sin(phi)
        return np.array([rho_dot * c - rho * self.omega * s,
                         rho_dot * s + rho * self.omega * c])


@dataclass(frozen=True)
class SinusoidalPolicy:
    """u = (cos z1 cos z2, -sin z1 sin z2) with z1 = pi x1, z2 = pi (x2 + 1/2)."""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        z1 = np.pi * x[0]
        z2 = np.pi * (x[1] + 0.5)
        return np.array([np.cos(z1) * np.cos(z2), -np.sin(z1) * np.sin(z2)])


@dataclass(frozen=True, eq=False)
class PointAttractor:
    """Joint-space attractor u = beta (x* - x) with scalar gain beta."""

    target: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))

    def __call__(self, x):
        return self.beta * (self.target - np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class ZeroPolicy:
    """Always returns a zero vector; handy for degenerate-case checks."""

    dim: int

    def __call__(self, x):
        return np.zeros(self.dim)


@dataclass(frozen=True, eq=False)
class TaskPointAttractor:
    """Full task-space attractor toward a target pose.

    Returns gain * (r* - r) over (x, y, theta), with the angular difference
    wrapped so the orientation error stays in (-pi, pi]. The constraint
    model selects the coordinates it constrains from this 3-vector.
    """

    arm: PlanarArm
    target: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float)
        if target.shape != (3,):
            raise ValueError("target must be (x, y, theta)")
        object.__setattr__(self, "target", target)

    def __call__(self, q):
        pose = forward_kinematics(self.arm, q).as_array()
        err = self.target - pose
        err[2] = wrap_angle(err[2])
        return self.gain * err


@dataclass(frozen=True, eq=False)
class ManipulabilityGradientPolicy:
    """Secondary policy that climbs the manipulability of a constraint model."""

    model: object
    step: float = 1e-5

    def __call__(self, x):
        return manipulability_gradient(self.model, x, step=self.step)


PolicySpec = Union[LinearPolicy, LimitCyclePolicy, SinusoidalPolicy, PointAttractor,
                   ZeroPolicy, TaskPointAttractor, ManipulabilityGradientPolicy]


def eval_policy(spec, x) -> np.ndarray:
    """Evaluate a policy spec at a single state."""
    return np.asarray(spec(x), dtype=float)


def policy_values(spec, X) -> np.ndarray:
    """Evaluate a policy at every row of X, returning an (N, dim) array."""
    X = np.asarray(X, dtype=float)
    return np.array([eval_policy(spec, x) for x in X])


_TOY_POLICY_BUILDERS = {
    "linear": lambda cfg: LinearPolicy(L=np.asarray(cfg.get("L", [[2.0, 4.0, 0.0], [1.0, 3.0, -1.0]]))),
    "limit_cycle": lambda cfg: LimitCyclePolicy(rho0=cfg.get("rho0", 0.75), omega=cfg.get("omega", 1.0)),
    "sinusoidal": lambda cfg: SinusoidalPolicy(),
}


def policy_from_config(cfg: dict):
    """Build a policy from its JSON form. Degree-valued keys end in _deg."""
    kind = cfg.get("type")
    if kind in _TOY_POLICY_BUILDERS:
        return _TOY_POLICY_BUILDERS[kind](cfg)
    if kind == "point_attractor":
        if "target_deg" in cfg:
            target = np.deg2rad(np.asarray(cfg["target_deg"], dtype=float))
        else:
            target = np.asarray(cfg["target_rad"], dtype=float)
        return PointAttractor(target=target, beta=float(cfg.get("beta", 1.0)))
    if kind == "zero":
        return ZeroPolicy(dim=int(cfg["dim"]))
    raise ValueError(f"unknown policy type: {kind!r}")
