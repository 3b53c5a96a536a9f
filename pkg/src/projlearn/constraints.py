"""Constraint matrices, pseudo-inverses and null-space projectors.

Two constraint families are supported. A *spherical* constraint stores a
constant matrix whose orthonormal rows are parameterised by angles, which is
the representation the learner searches over when nothing is known about the
structure of A. A *selection* constraint is A(x) = Lambda Phi(x) for a fixed
coefficient matrix Lambda and a state-dependent feature matrix Phi, typically
the arm Jacobian.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np


def spherical_param_count(k: int, n: int) -> int:
    """Number of angles needed for k orthonormal constraint rows in R^n."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return k * (2 * n - k - 1) // 2


def spherical_to_unit(angles, n: int) -> np.ndarray:
    """Unit vector in R^n from n-1 spherical angles.

    Components are a_1 = cos t_1, a_2 = sin t_1 cos t_2, ..., with the last
    component carrying the full sine product. n = 1 takes no angles and
    returns (1.0,).
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 0:
        angles = angles.reshape(0)
    if angles.shape != (n - 1,):
        raise ValueError(f"need {n - 1} angles for a unit vector in R^{n}, got {angles.size}")
    if n == 1:
        return np.array([1.0])
    if not np.all(np.isfinite(angles)):
        raise ValueError("angles must be finite")
    sin_prod = np.concatenate(([1.0], np.cumprod(np.sin(angles))))
    a = np.empty(n)
    a[:-1] = np.cos(angles) * sin_prod[:-1]
    a[-1] = sin_prod[-1]
    return a


def spherical_from_unit(a) -> np.ndarray:
    """Angles that reproduce a given unit vector through spherical_to_unit.

    Inverse trigonometry: t_i = atan2(norm of the tail, a_i), with the last
    angle taking the sign of the final component.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("expected a 1-d vector")
    norm = np.linalg.norm(a)
    if not np.isclose(norm, 1.0, atol=1e-8):
        raise ValueError(f"expected a unit vector, norm was {norm:.3e}")
    n = a.size
    if n == 1:
        return np.zeros(0)
    angles = np.empty(n - 1)
    for i in range(n - 2):
        tail = np.linalg.norm(a[i + 1:])
        angles[i] = np.arctan2(tail, a[i])
    angles[-1] = np.arctan2(a[-1], a[-2])
    return angles


def _householder_complement(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to unit vector a.

    Columns 1..m-1 of the Householder reflection that maps a onto a signed
    first axis vector; shape (m, m-1).
    """
    m = a.size
    sign = 1.0 if a[0] >= 0.0 else -1.0
    v = a.copy()
    v[0] += sign
    H = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
    return H[:, 1:]


def build_constraint_rows(theta, k: int, n: int) -> np.ndarray:
    """Constraint matrix with k orthonormal rows in R^n from spherical angles.

    Row 1 consumes n-1 angles. Each following row is built inside the
    orthogonal complement of the rows before it, so row j consumes n-j
    angles; k(2n-k-1)/2 angles in total. The result always satisfies
    A A^T = I up to rounding.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    expected = spherical_param_count(k, n)
    if theta.shape != (expected,):
        raise ValueError(f"k={k}, n={n} needs {expected} angles, got {theta.size}")
    rows = np.empty((k, n))
    basis = np.eye(n)
    used = 0
    for j in range(k):
        m = n - j
        local = spherical_to_unit(theta[used:used + m - 1], m)
        used += m - 1
        rows[j] = basis @ local
        if j + 1 < k:
            basis = basis @ _householder_complement(local)
    return rows


def pseudo_inverse(M, rel_tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below rel_tol times the largest one are treated as zero,
    so rank-deficient input is fine.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0:
        return M.T.copy()
    cutoff = rel_tol * s[0]
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T


@dataclass(frozen=True, eq=False)
class Projector:
    """A constraint matrix together with its pseudo-inverse and projector."""

    A: np.ndarray
    A_pinv: np.ndarray
    N: np.ndarray


def null_projector(A, rel_tol: float = 1e-10) -> Projector:
    """Null-space projector N = I - A^+ A for a (k, n) constraint matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-d constraint matrix")
    pinv = pseudo_inverse(A, rel_tol=rel_tol)
    N = np.eye(A.shape[1]) - pinv @ A
    return Projector(A=A, A_pinv=pinv, N=N)


@dataclass(frozen=True, eq=False)
class SphericalConstraint:
    """Constant constraint matrix with orthonormal rows given by angles."""

    theta: tuple
    k: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in np.atleast_1d(self.theta)))
        spherical_param_count(self.k, self.n)  # validates k, n
        if len(self.theta) != spherical_param_count(self.k, self.n):
            raise ValueError("wrong number of angles for (k, n)")

    @cached_property
    def matrix(self) -> np.ndarray:
        return build_constraint_rows(np.array(self.theta), self.k, self.n)

    def A_at(self, x=None) -> np.ndarray:
        return self.matrix

    def projector_at(self, x=None) -> Projector:
        A = self.matrix
        # Orthonormal rows make the pseudo-inverse a plain transpose.
        return Projector(A=A, A_pinv=A.T.copy(), N=np.eye(self.n) - A.T @ A)

    def to_config(self) -> dict:
        return {"form": "spherical", "theta_rad": list(self.theta), "k": self.k, "n": self.n}


@dataclass(frozen=True, eq=False)
class SelectionConstraint:
    """State-dependent constraint A(x) = Lambda Phi(x).

    ``feature`` maps a state to the (p, n) feature matrix Phi(x); ``lam`` is
    the (k, p) coefficient matrix. For the arm experiments Phi is the task
    Jacobian and Lambda picks out (or mixes) task coordinates.
    """

    lam: np.ndarray
    feature: Callable[[np.ndarray], np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        if not np.all(np.isfinite(lam)):
            raise ValueError("selection matrix must be finite")
        object.__setattr__(self, "lam", lam)

    @property
    def k(self) -> int:
        return self.lam.shape[0]

    def A_at(self, x) -> np.ndarray:
        return self.lam @ self.feature(np.asarray(x, dtype=float))

    def projector_at(self, x) -> Projector:
        return null_projector(self.A_at(x))

    def select_rates(self, task_rate) -> np.ndarray:
        """Map a full task-space rate onto the constrained coordinates."""
        return self.lam @ np.asarray(task_rate, dtype=float)

    def to_config(self) -> dict:
        cfg = {"form": "selection", "lam": self.lam.tolist(), "k": self.k}
        cfg.update(self.meta)
        return cfg


def diagonal_selection(pattern, p: int = 3) -> np.ndarray:
    """Rows of the identity picked out by a 0/1 mask or an index list.

    A sequence of length p whose entries are all 0 or 1 is read as a mask,
    anything else as row indices: diagonal_selection((1, 0, 1)) and
    diagonal_selection([0, 2]) both give [[1,0,0],[0,0,1]].
    """
    pattern = [int(v) for v in pattern]
    if len(pattern) == p and all(v in (0, 1) for v in pattern):
        idx = [i for i, v in enumerate(pattern) if v == 1]
    else:
        idx = sorted(pattern)
    if len(idx) == 0:
        raise ValueError("selection pattern picks no rows")
    if any(i < 0 or i >= p for i in idx):
        raise ValueError(f"row index out of range for p={p}")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate rows in selection pattern")
    return np.eye(p)[idx]
