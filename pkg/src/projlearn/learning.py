"""Constraint learning from demonstrations with a known secondary policy.

The central idea: when actions are generated as u = A^+ b + N pi, the
null-space part w = N pi satisfies w^T (u - w) = 0 exactly. Replacing w by
N-hat pi gives a score

    sum_n | pi_n^T N-hat(x_n) (u_n - pi_n) |

that vanishes for the true projection and needs no access to b or w. The
learner minimises it over a parameterised constraint family with a
derivative-free simplex search from random restarts.

The module also carries the two-stage approach from earlier work, used here
as a comparison baseline: first separate a null-space component out of raw
actions without a prior, then fit a selection matrix to it.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .constraints import (SelectionConstraint, SphericalConstraint, build_constraint_rows,
                          diagonal_selection, pseudo_inverse, spherical_param_count)
from .policies import policy_values
from .simulator import Dataset


# --- derivative-free optimisation ----------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 20
    max_iters: int = 5000
    objective_tol: float = 1e-14
    param_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one restart")


@dataclass
class OptimizeResult:
    params: np.ndarray
    value: float
    restarts_used: int
    failures: int
    incumbents: list  # best value after each restart, non-increasing


class OptimizationError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class _NonFinite(Exception):
    pass


def optimize(objective_fn, init_params, opt: OptimizerConfig, sampler=None) -> OptimizeResult:
    """Simplex-type local search from several starts, keeping the best end point.

    The first restart begins at init_params, the rest at points drawn by
    ``sampler(rng)`` (standard normal jitter around the init by default). A
    restart whose objective turns non-finite is abandoned; if every restart
    is abandoned the search fails with the best incumbent attached.
    """
    init_params = np.atleast_1d(np.asarray(init_params, dtype=float))
    rng = np.random.default_rng(opt.seed)
    if sampler is None:
        sampler = lambda r: init_params + r.normal(0.0, 1.0, size=init_params.shape)

    def guarded(p):
        val = objective_fn(p)
        if not np.isfinite(val):
            raise _NonFinite
        return val

    def run(x0):
        return minimize(guarded, x0, method="Nelder-Mead",
                        options={"maxiter": opt.max_iters, "maxfev": 2 * opt.max_iters,
                                 "fatol": opt.objective_tol, "xatol": opt.param_tol})

    first = objective_fn(init_params)
    if not np.isfinite(first):
        raise ValueError("objective is not finite at the initial parameters")

    best_params, best_val = init_params.copy(), float(first)
    incumbents = []
    failures = 0
    for restart in range(opt.restarts):
        x0 = init_params if restart == 0 else np.atleast_1d(np.asarray(sampler(rng), dtype=float))
        try:
            res = run(x0)
        except _NonFinite:
            failures += 1
            incumbents.append(best_val)
            continue
        # Ties go to the earlier restart, so runs are reproducible.
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val = float(res.fun)
            best_params = np.atleast_1d(res.x).copy()
        incumbents.append(best_val)
    if failures == opt.restarts:
        raise OptimizationError("every restart hit a non-finite objective",
                                best=OptimizeResult(best_params, best_val, 0, failures, incumbents))
    # One polish pass from the incumbent. Rebuilding the simplex there undoes
    # the collapse the absolute-value kinks tend to cause.
    try:
        res = run(best_params)
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val = float(res.fun)
            best_params = np.atleast_1d(res.x).copy()
    except _NonFinite:
        pass
    return OptimizeResult(params=best_params, value=best_val,
                          restarts_used=opt.restarts - failures, failures=failures,
                          incumbents=incumbents)


# --- the consistency objective ---------------------------------------------------

def _stacked(dataset: Dataset, prior_pi):
    X = dataset.stack("x")
    U = dataset.stack("u")
    if prior_pi is None:
        PI = dataset.stack("pi")
    elif isinstance(prior_pi, np.ndarray):
        PI = prior_pi
        if PI.shape != U.shape:
            raise ValueError("prior value array must match the action array shape")
    else:
        PI = policy_values(prior_pi, X)
    return X, U, PI


def _consistency_terms_constant(N_hat, PI, D) -> np.ndarray:
    return np.einsum("ni,ij,nj->n", PI, N_hat, D)


def _gram_solve(G, B) -> np.ndarray:
    """Batched solve of small Gram systems G z = B, shapes (n,k,k) and (n,k).

    Closed forms for k of 1 and 2 keep this off the LAPACK per-matrix
    overhead, which dominates the optimizer's inner loop otherwise. Exactly
    singular samples come back non-finite for the caller to repair.
    """
    k = G.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        if k == 1:
            return B / G[:, :, 0]
        if k == 2:
            det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
            z0 = (G[:, 1, 1] * B[:, 0] - G[:, 0, 1] * B[:, 1]) / det
            z1 = (G[:, 0, 0] * B[:, 1] - G[:, 1, 0] * B[:, 0]) / det
            return np.stack([z0, z1], axis=1)
    try:
        return np.linalg.solve(G, B[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return np.full(B.shape, np.nan)


def _consistency_terms_stack(A_stack, PI, D) -> np.ndarray:
    """pi^T (I - A^+ A) (u - pi) per sample for a stack of wide matrices."""
    Ap = np.einsum("nkj,nj->nk", A_stack, PI)
    Ad = np.einsum("nkj,nj->nk", A_stack, D)
    G = np.einsum("nkj,nlj->nkl", A_stack, A_stack)
    direct = np.einsum("ni,ni->n", PI, D)
    corr = np.einsum("nk,nk->n", Ap, _gram_solve(G, Ad))
    bad = ~np.isfinite(corr)
    if np.any(bad):
        # Samples that hit a singular Gram matrix get a rank-aware
        # pseudo-inverse one at a time.
        for i in np.flatnonzero(bad):
            A = A_stack[i]
            corr[i] = Ap[i] @ (pseudo_inverse(A @ A.T) @ Ad[i])
    return direct - corr


def consistency_objective(model, dataset: Dataset, prior_pi=None) -> float:
    """Sum over samples of |pi^T N(x) (u - pi)| for a candidate constraint.

    Exactly zero (up to rounding) when N is the projector that produced the
    data, whatever the task policy was. A prior that is identically zero
    zeroes the score for every candidate; learn_constraint reports that
    degeneracy through its diagnostics instead of failing here.
    """
    X, U, PI = _stacked(dataset, prior_pi)
    D = U - PI
    if isinstance(model, SphericalConstraint):
        proj = model.projector_at(None)
        terms = _consistency_terms_constant(proj.N, PI, D)
    elif isinstance(model, SelectionConstraint):
        Phi = _feature_stack(dataset, model.feature, X)
        A_stack = np.einsum("kp,npj->nkj", np.asarray(model.lam, dtype=float), Phi)
        terms = _consistency_terms_stack(A_stack, PI, D)
    else:
        A_stack = np.stack([model.A_at(x) for x in X])
        terms = _consistency_terms_stack(A_stack, PI, D)
    return float(np.sum(np.abs(terms)))


# --- learning the constraint when the prior is known ------------------------------

@dataclass
class LearnedConstraint:
    model: object
    objective_value: float
    restarts_used: int
    seed: int
    diagnostics: dict = field(default_factory=dict)


def _feature_stack(dataset: Dataset, feature_fn, X) -> np.ndarray:
    cached = dataset.meta.get("_feature_stack")
    if (cached is not None and cached.shape[0] == X.shape[0]
            and np.array_equal(cached[0], feature_fn(X[0]))):
        return cached
    stack = np.stack([feature_fn(x) for x in X])
    dataset.meta["_feature_stack"] = stack
    return stack


def _screened_sampler(objective, dim, draws: int = 32):
    """Draw a batch of uniform angle vectors and hand back the best scorer.

    Restarting the simplex from the most promising of a few dozen probes
    costs a handful of objective calls and skips most of the poor basins.
    """
    def sample(rng):
        cand = rng.uniform(-np.pi, np.pi, size=(draws, dim))
        vals = np.array([objective(c) for c in cand])
        vals[~np.isfinite(vals)] = np.inf
        return cand[int(np.argmin(vals))]
    return sample


def _degenerate_prior_fraction(model, X, PI, rel: float = 1e-9) -> float:
    norms = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        norms[i] = np.linalg.norm(model.projector_at(X[i]).N @ PI[i])
    scale = float(np.median(np.linalg.norm(PI, axis=1)))
    floor = rel * max(scale, 1.0)
    return float(np.mean(norms < floor))


def learn_constraint(dataset: Dataset, prior_pi=None, k: int | None = 1,
                     representation: str = "spherical", opt: OptimizerConfig | None = None,
                     feature_fn=None) -> LearnedConstraint:
    """Recover the constraint from (x, u) data given the secondary policy.

    representation "spherical" searches directly over a constant matrix with
    k orthonormal rows. representation "lambda" searches over a coefficient
    matrix applied to ``feature_fn(x)``, with the coefficient rows also kept
    orthonormal since only their span matters for the projection.

    k is normally known per experiment. Passing k=None sweeps k upward and
    keeps the smallest value whose objective falls below 1e-8 times the
    summed action norm; the per-k objectives land in the diagnostics.
    """
    opt = opt or OptimizerConfig()
    if k is None:
        U = dataset.stack("u")
        floor = 1e-8 * float(np.sum(np.linalg.norm(U, axis=1)))
        # k = n leaves no null space and zeroes the objective for free, so
        # the sweep stays below it.
        k_max = U.shape[1] - 1
        if representation == "lambda":
            if feature_fn is None:
                raise ValueError("representation 'lambda' needs a feature_fn")
            k_max = min(k_max, feature_fn(dataset.stack("x")[0]).shape[0])
        sweep = {}
        best = None
        for kk in range(1, k_max + 1):
            cand = learn_constraint(dataset, prior_pi, kk, representation, opt, feature_fn)
            sweep[kk] = cand.objective_value
            if best is None or cand.objective_value < best.objective_value:
                best = cand
            if cand.objective_value < floor:
                best = cand
                break
        best.diagnostics["k_sweep"] = sweep
        best.diagnostics["k_sweep_floor"] = floor
        return best
    X, U, PI = _stacked(dataset, prior_pi)
    D = U - PI
    n = X.shape[1]

    if representation == "spherical":
        dim = spherical_param_count(k, n)

        def objective(theta):
            A = build_constraint_rows(theta, k, n)
            return float(np.sum(np.abs(_consistency_terms_constant(
                np.eye(n) - A.T @ A, PI, D))))

        def to_model(theta):
            return SphericalConstraint(theta=tuple(np.mod(theta, 2.0 * np.pi)), k=k, n=n)

    elif representation == "lambda":
        if feature_fn is None:
            raise ValueError("representation 'lambda' needs a feature_fn")
        Phi = _feature_stack(dataset, feature_fn, X)
        p = Phi.shape[1]
        dim = spherical_param_count(k, p)

        def objective(theta):
            lam = build_constraint_rows(theta, k, p)
            A_stack = np.einsum("kp,npj->nkj", lam, Phi)
            return float(np.sum(np.abs(_consistency_terms_stack(A_stack, PI, D))))

        def to_model(theta):
            return SelectionConstraint(lam=build_constraint_rows(theta, k, p),
                                       feature=feature_fn)

    else:
        raise ValueError(f"unknown representation {representation!r}")

    rng = np.random.default_rng(opt.seed)
    sampler = _screened_sampler(objective, dim)
    init = sampler(rng)
    res = optimize(objective, init, opt, sampler=sampler)
    model = to_model(res.params)
    diag = {
        "degenerate_prior_fraction": _degenerate_prior_fraction(model, X, PI),
        "failures": res.failures,
        "prior_norm_median": float(np.median(np.linalg.norm(PI, axis=1))),
    }
    if diag["degenerate_prior_fraction"] > 0.5:
        warnings.warn("secondary policy is (near) zero inside the learned null space "
                      "for most samples; the objective cannot identify the constraint there",
                      stacklevel=2)
    return LearnedConstraint(model=model, objective_value=res.value,
                             restarts_used=res.restarts_used, seed=opt.seed, diagnostics=diag)


# --- baseline: learn the selection matrix from an estimated w ---------------------

def _projection_energy(A_stack, W_hat) -> float:
    """sum_n w_n^T (A_n^+ A_n) w_n, the part of w inside the constrained span."""
    Aw = np.einsum("nkj,nj->nk", A_stack, W_hat)
    G = np.einsum("nkj,nlj->nkl", A_stack, A_stack)
    terms = np.einsum("nk,nk->n", Aw, _gram_solve(G, Aw))
    bad = ~np.isfinite(terms)
    if np.any(bad):
        for i in np.flatnonzero(bad):
            A = A_stack[i]
            terms[i] = Aw[i] @ (pseudo_inverse(A @ A.T) @ Aw[i])
    return float(np.sum(terms))


def learn_selection_matrix(dataset: Dataset, w_hat, feature_fn, k: int,
                           opt: OptimizerConfig | None = None,
                           mode: str = "continuous"):
    """Fit Lambda so the estimated null-space motion is annihilated by Lambda Phi.

    Minimises sum_n w_n^T (Lambda Phi_n)^+ (Lambda Phi_n) w_n. mode
    "continuous" searches orthonormal coefficient rows with the simplex
    optimizer; mode "diagonal" enumerates the k-subsets of feature rows and
    is mainly useful as an exhaustive cross-check.

    Returns (lam, objective_value).
    """
    X = dataset.stack("x")
    W_hat = np.atleast_2d(np.asarray(w_hat, dtype=float))
    if W_hat.shape[0] != X.shape[0]:
        raise ValueError("w_hat must have one row per sample")
    if float(np.max(np.linalg.norm(W_hat, axis=1))) == 0.0:
        raise ValueError("w_hat is identically zero; nothing constrains the fit")
    Phi = _feature_stack(dataset, feature_fn, X)
    p = Phi.shape[1]

    if mode == "diagonal":
        from itertools import combinations
        best = None
        for rows in combinations(range(p), k):
            lam = diagonal_selection(list(rows), p)
            val = _projection_energy(np.einsum("kp,npj->nkj", lam, Phi), W_hat)
            if best is None or val < best[1]:
                best = (lam, val)
        return best

    if mode != "continuous":
        raise ValueError(f"unknown mode {mode!r}")

    opt = opt or OptimizerConfig()
    dim = spherical_param_count(k, p)

    def objective(theta):
        lam = build_constraint_rows(theta, k, p)
        return _projection_energy(np.einsum("kp,npj->nkj", lam, Phi), W_hat)

    rng = np.random.default_rng(opt.seed)
    sampler = _screened_sampler(objective, dim)
    init = sampler(rng)
    res = optimize(objective, init, opt, sampler=sampler)
    return build_constraint_rows(res.params, k, p), res.value


# --- baseline: separate w out of raw actions without a prior ----------------------

@dataclass(frozen=True)
class BaselineConfig:
    max_centers: int = 200
    width_scale: float = 0.5
    iterations: int = 50
    w_floor: float = 1e-8
    rel_tol: float = 1e-12
    seed: int = 0


@dataclass
class BaselineResult:
    w_hat: np.ndarray
    v_hat: np.ndarray
    weights: np.ndarray
    centers: np.ndarray
    width: float
    objective_history: list

    def predict(self, x) -> np.ndarray:
        feats = _rbf_features(np.atleast_2d(np.asarray(x, dtype=float)),
                              self.centers, self.width)
        out = feats @ self.weights
        return out[0] if np.ndim(x) == 1 else out


def _rbf_features(X, centers, width) -> np.ndarray:
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.exp(-d2 / (2.0 * width * width))


def baseline_objective(w_model, U, w_floor: float = 1e-8) -> float:
    """sum_n || P_n u_n - w_n ||^2 with P_n the outer-product direction of w_n."""
    norms2 = np.maximum(np.sum(w_model * w_model, axis=1), w_floor * w_floor)
    proj = w_model * (np.sum(w_model * U, axis=1) / norms2)[:, None]
    resid = proj - w_model
    return float(np.sum(resid * resid))


def baseline_separate_nullspace(dataset: Dataset, cfg: BaselineConfig | None = None) -> BaselineResult:
    """Estimate the null-space component without knowing the secondary policy.

    Fits a radial-basis model w(x) by alternating between the direction
    projector P = w w^T / ||w||^2 evaluated at the current model and a
    least-squares refit of the model toward P u. Initialised from the raw
    actions themselves. Keeps the iterate with the lowest objective.
    """
    cfg = cfg or BaselineConfig()
    X = dataset.stack("x")
    U = dataset.stack("u")
    n_samples = X.shape[0]
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(cfg.seed)
    if n_samples > cfg.max_centers:
        idx = np.sort(rng.choice(n_samples, size=cfg.max_centers, replace=False))
        centers = X[idx]
    else:
        centers = X.copy()
    diffs = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    med = float(np.median(dists[np.triu_indices(len(centers), k=1)]))
    width = cfg.width_scale * med if med > 0.0 else 1.0
    feats = _rbf_features(X, centers, width)

    def refit(target):
        weights, *_ = np.linalg.lstsq(feats, target, rcond=cfg.rel_tol)
        return weights

    weights = refit(U)
    w_hat = feats @ weights
    best = (baseline_objective(w_hat, U, cfg.w_floor), weights.copy(), w_hat.copy())
    history = [best[0]]
    for _ in range(cfg.iterations):
        norms2 = np.maximum(np.sum(w_hat * w_hat, axis=1), cfg.w_floor ** 2)
        target = w_hat * (np.sum(w_hat * U, axis=1) / norms2)[:, None]
        weights = refit(target)
        w_hat = feats @ weights
        obj = baseline_objective(w_hat, U, cfg.w_floor)
        history.append(obj)
        if obj < best[0]:
            best = (obj, weights.copy(), w_hat.copy())
        if len(history) > 2 and abs(history[-2] - obj) < 1e-15 * max(1.0, obj):
            break
    _, weights, w_hat = best
    return BaselineResult(w_hat=w_hat, v_hat=U - w_hat, weights=weights,
                          centers=centers, width=width, objective_history=history)
