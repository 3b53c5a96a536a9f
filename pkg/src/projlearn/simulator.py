"""Synthetic constrained-motion data: generation, noise and (de)serialisation.

Every sample is produced by the decomposition u = A^+ b + N pi, so the
ground-truth split into task part v and null-space part w is stored next to
the observations. Datasets are plain containers; generation is deterministic
given the seed.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import SelectionConstraint, SphericalConstraint, null_projector
from .kinematics import PlanarArm, jacobian
from .policies import TaskPointAttractor, policy_values


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States and actions sampled at a fixed rate, with optional ground truth.

    x, u are (N, n). v, w are the task / null-space action parts, b the task
    rate in constraint coordinates (N, k) and pi the secondary-policy values
    that a learner is given (these are the noisy ones when noise targets the
    prior). For i.i.d. sample sets dt is a placeholder and set to 1.
    """

    dt: float
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray | None = None
    w: np.ndarray | None = None
    b: np.ndarray | None = None
    pi: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0.0:
            raise ValueError("dt must be positive")
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if x.shape != u.shape:
            raise ValueError("x and u must have matching shapes")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        for name in ("v", "w", "b", "pi"):
            val = getattr(self, name)
            if val is not None:
                val = np.atleast_2d(np.asarray(val, dtype=float))
                if val.shape[0] != x.shape[0]:
                    raise ValueError(f"{name} has {val.shape[0]} rows, expected {x.shape[0]}")
                object.__setattr__(self, name, val)

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def slice(self, start: int, stop: int) -> "Trajectory":
        pick = lambda a: None if a is None else a[start:stop]
        return Trajectory(dt=self.dt, x=self.x[start:stop], u=self.u[start:stop],
                          v=pick(self.v), w=pick(self.w), b=pick(self.b), pi=pick(self.pi))


@dataclass(eq=False)
class Dataset:
    """A list of trajectories plus generation metadata."""

    trajectories: list
    meta: dict = field(default_factory=dict)

    def stack(self, name: str) -> np.ndarray:
        parts = [getattr(t, name) for t in self.trajectories]
        if any(p is None for p in parts):
            raise ValueError(f"field {name!r} missing from at least one trajectory")
        return np.concatenate(parts, axis=0)

    @property
    def n_samples(self) -> int:
        return sum(t.n_samples for t in self.trajectories)


def action_std(dataset: Dataset) -> np.ndarray:
    """Per-dimension standard deviation of the observed actions."""
    return np.std(dataset.stack("u"), axis=0)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise scaled by the action spread.

    Per dimension i the noise is N(0, epsilon * std(u_i)^2). target selects
    what gets perturbed: the observed actions, or the secondary-policy values
    handed to the learner (stored u stays untouched in that case).
    """

    epsilon: float
    target: str = "actions"

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be >= 0")
        if self.target not in ("actions", "prior_policy"):
            raise ValueError("target must be 'actions' or 'prior_policy'")


def add_noise(dataset: Dataset, spec: NoiseSpec, seed) -> Dataset:
    """Return a noisy copy of the dataset; the input is left alone."""
    rng = np.random.default_rng(seed)
    sigma = action_std(dataset)
    scale = np.sqrt(spec.epsilon) * sigma
    out = []
    for traj in dataset.trajectories:
        noise = rng.normal(0.0, 1.0, size=traj.u.shape) * scale
        if spec.target == "actions":
            out.append(Trajectory(dt=traj.dt, x=traj.x, u=traj.u + noise,
                                  v=traj.v, w=traj.w, b=traj.b, pi=traj.pi))
        else:
            if traj.pi is None:
                raise ValueError("cannot noise the prior: trajectory stores no pi values")
            out.append(Trajectory(dt=traj.dt, x=traj.x, u=traj.u,
                                  v=traj.v, w=traj.w, b=traj.b, pi=traj.pi + noise))
    meta = dict(dataset.meta)
    meta["noise"] = {"epsilon": spec.epsilon, "target": spec.target}
    return Dataset(trajectories=out, meta=meta)


def generate_toy_dataset(n_points: int, seed, null_policy, theta: float | None = None,
                         r_star: float | None = None) -> Dataset:
    """I.i.d. two-dimensional samples under a one-dimensional constraint.

    The constraint direction is a random unit vector alpha(theta) with
    theta ~ U[0, pi); states are drawn from U[-1, 1]^2 and the task policy
    is a point attractor b = r* - alpha . x toward a random target
    r* ~ U[-2, 2]. theta and r* can be pinned for reproducibility studies.
    """
    if n_points < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    theta = float(rng.uniform(0.0, np.pi)) if theta is None else float(theta)
    r_star = float(rng.uniform(-2.0, 2.0)) if r_star is None else float(r_star)
    X = rng.uniform(-1.0, 1.0, size=(n_points, 2))
    model = SphericalConstraint(theta=(theta,), k=1, n=2)
    A = model.matrix
    N = np.eye(2) - A.T @ A
    PI = policy_values(null_policy, X)
    B = r_star - X @ A[0]
    V = B[:, None] * A  # A^+ = A^T for a unit row
    W = PI @ N.T
    U = V + W
    traj = Trajectory(dt=1.0, x=X, u=U, v=V, w=W, b=B[:, None], pi=PI)
    meta = {
        "system": "toy",
        "seed": _seed_repr(seed),
        "constraint": model.to_config(),
        "r_star": r_star,
        "noise": None,
    }
    return Dataset(trajectories=[traj], meta=meta)


class RankCollapseError(RuntimeError):
    """Constraint matrix lost row rank while rolling out a trajectory."""

    def __init__(self, step: int, sigma_ratio: float):
        super().__init__(f"constraint rank collapse at step {step} "
                         f"(sigma_min/sigma_max = {sigma_ratio:.3e})")
        self.step = step
        self.sigma_ratio = sigma_ratio


def simulate_trajectory(arm: PlanarArm, constraint: SelectionConstraint, task_policy,
                        null_policy, q0, dt: float, duration: float,
                        rank_tol: float = 1e-10) -> Trajectory:
    """Explicit-Euler rollout of u = A^+ b + N pi on a planar arm.

    task_policy returns the full task-space rate; the constraint selects the
    coordinates it governs. Raises RankCollapseError when A(x) loses row
    rank along the way.
    """
    if dt <= 0.0 or duration <= 0.0:
        raise ValueError("dt and duration must be positive")
    steps = int(round(duration / dt))
    if steps < 1:
        raise ValueError("duration shorter than one step")
    q = np.asarray(q0, dtype=float).copy()
    k = constraint.k
    X = np.empty((steps, arm.n))
    U = np.empty((steps, arm.n))
    V = np.empty((steps, arm.n))
    W = np.empty((steps, arm.n))
    B = np.empty((steps, k))
    PI = np.empty((steps, arm.n))
    for t in range(steps):
        A = constraint.A_at(q)
        svals = np.linalg.svd(A, compute_uv=False)
        ratio = float(svals[-1] / svals[0]) if svals[0] > 0.0 else 0.0
        if ratio < rank_tol:
            raise RankCollapseError(t, ratio)
        proj = null_projector(A)
        b = constraint.select_rates(task_policy(q))
        pi = np.asarray(null_policy(q), dtype=float)
        v = proj.A_pinv @ b
        w = proj.N @ pi
        X[t] = q
        U[t] = v + w
        V[t] = v
        W[t] = w
        B[t] = b
        PI[t] = pi
        q = q + dt * U[t]
    return Trajectory(dt=dt, x=X, u=U, v=V, w=W, b=B, pi=PI)


THREE_LINK_START_RANGES_DEG = ((0.0, 10.0), (90.0, 100.0), (0.0, 10.0))


def sample_arm_start(rng, ranges_deg=THREE_LINK_START_RANGES_DEG) -> np.ndarray:
    lo = np.deg2rad([r[0] for r in ranges_deg])
    hi = np.deg2rad([r[1] for r in ranges_deg])
    return rng.uniform(lo, hi)


def sample_task_target(rng, x_range=(-0.01, 0.01), y_range=(0.0, 0.02),
                       theta_range_deg=(0.0, 180.0)) -> np.ndarray:
    return np.array([
        rng.uniform(*x_range),
        rng.uniform(*y_range),
        rng.uniform(np.deg2rad(theta_range_deg[0]), np.deg2rad(theta_range_deg[1])),
    ])


def generate_arm_dataset(arm: PlanarArm, lam: np.ndarray, null_policy, n_trajectories: int,
                         points_per_traj: int, dt: float, seed, task_gain: float = 1.0,
                         start_ranges_deg=THREE_LINK_START_RANGES_DEG,
                         target_cfg: dict | None = None) -> Dataset:
    """Batch of arm trajectories under a fixed selection constraint.

    Each trajectory gets a fresh start drawn from the configured joint
    ranges and a fresh task target, so b varies across the data while the
    constraint stays put.
    """
    rng = np.random.default_rng(seed)
    target_cfg = target_cfg or {}
    model = SelectionConstraint(lam=lam, feature=lambda q: jacobian(arm, q),
                                meta={"feature": "jacobian", "links": list(arm.link_lengths)})
    trajs = []
    for _ in range(n_trajectories):
        q0 = sample_arm_start(rng, start_ranges_deg)
        target = sample_task_target(rng, **target_cfg)
        task = TaskPointAttractor(arm=arm, target=target, gain=task_gain)
        trajs.append(simulate_trajectory(arm, model, task, null_policy, q0,
                                         dt=dt, duration=points_per_traj * dt))
    meta = {
        "system": "planar_arm",
        "seed": _seed_repr(seed),
        "constraint": model.to_config(),
        "noise": None,
        "dt": dt,
    }
    return Dataset(trajectories=trajs, meta=meta)


def split_dataset(dataset: Dataset, n_first: int) -> tuple:
    """Split into two datasets sharing metadata.

    A single-trajectory dataset is split at the sample level, a multi
    trajectory one at the trajectory level.
    """
    if len(dataset.trajectories) == 1:
        traj = dataset.trajectories[0]
        if not (0 < n_first < traj.n_samples):
            raise ValueError("split point outside the trajectory")
        parts = ([traj.slice(0, n_first)], [traj.slice(n_first, traj.n_samples)])
    else:
        if not (0 < n_first < len(dataset.trajectories)):
            raise ValueError("split point outside the trajectory list")
        parts = (dataset.trajectories[:n_first], dataset.trajectories[n_first:])
    return (Dataset(trajectories=parts[0], meta=dict(dataset.meta)),
            Dataset(trajectories=parts[1], meta=dict(dataset.meta)))


def constraint_from_meta(meta: dict):
    """Rebuild the generating constraint model from dataset metadata."""
    cfg = meta["constraint"]
    if cfg["form"] == "spherical":
        return SphericalConstraint(theta=tuple(cfg["theta_rad"]), k=cfg["k"], n=cfg["n"])
    if cfg["form"] == "selection":
        if cfg.get("feature") != "jacobian":
            raise ValueError("only jacobian features can be rebuilt from metadata")
        arm = PlanarArm(tuple(cfg["links"]))
        return SelectionConstraint(lam=np.asarray(cfg["lam"]),
                                   feature=lambda q: jacobian(arm, q),
                                   meta={"feature": "jacobian", "links": list(arm.link_lengths)})
    raise ValueError(f"unknown constraint form {cfg.get('form')!r}")


def _seed_repr(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return int(seed)


# --- CSV / JSON serialisation -------------------------------------------------

def save_trajectory_csv(traj: Trajectory, path):
    """Write one trajectory as CSV: t, x1..xn, u1..un and any ground truth."""
    path = Path(path)
    n = traj.dim
    header = ["t"]
    header += [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(n)]
    blocks = [("v", traj.v), ("w", traj.w), ("b", traj.b), ("pi", traj.pi)]
    for name, arr in blocks:
        if arr is not None:
            header += [f"{name}{i+1}" for i in range(arr.shape[1])]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(traj.n_samples):
            row = [repr(float(i * traj.dt))]
            row += [repr(float(val)) for val in traj.x[i]]
            row += [repr(float(val)) for val in traj.u[i]]
            for _, arr in blocks:
                if arr is not None:
                    row += [repr(float(val)) for val in arr[i]]
            writer.writerow(row)


def load_trajectory_csv(path, dt: float | None = None) -> Trajectory:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    if rows.size == 0:
        raise ValueError(f"{path} holds no samples")
    cols = {name: i for i, name in enumerate(header)}
    n = sum(1 for name in header if name.startswith("x") and name[1:].isdigit())

    def block(prefix, width):
        names = [f"{prefix}{i+1}" for i in range(width)]
        if not all(name in cols for name in names):
            return None
        return rows[:, [cols[name] for name in names]]

    if dt is None:
        t = rows[:, cols["t"]]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    k = sum(1 for name in header if name.startswith("b") and name[1:].isdigit())
    return Trajectory(dt=dt, x=block("x", n), u=block("u", n), v=block("v", n),
                      w=block("w", n), pi=block("pi", n), b=block("b", k) if k else None)


def save_dataset(dataset: Dataset, directory):
    """Write trajectories as numbered CSVs plus a JSON metadata sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, traj in enumerate(dataset.trajectories):
        save_trajectory_csv(traj, directory / f"traj_{i:04d}.csv")
    sidecar = {k: v for k, v in dataset.meta.items() if not k.startswith("_")}
    sidecar["n_trajectories"] = len(dataset.trajectories)
    sidecar["dt"] = dataset.trajectories[0].dt
    (directory / "dataset.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    meta = json.loads((directory / "dataset.json").read_text())
    count = meta.pop("n_trajectories")
    dt = meta.pop("dt")
    trajs = [load_trajectory_csv(directory / f"traj_{i:04d}.csv", dt=dt) for i in range(count)]
    return Dataset(trajectories=trajs, meta=meta)
