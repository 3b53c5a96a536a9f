import numpy as np
import pytest

from projlearn.constraints import (SelectionConstraint, SphericalConstraint,
                                   build_constraint_rows, diagonal_selection,
                                   null_projector)
from projlearn.kinematics import PlanarArm, jacobian
from projlearn.learning import (BaselineConfig, OptimizationError, OptimizerConfig,
                                baseline_objective, baseline_separate_nullspace,
                                consistency_objective, learn_constraint,
                                learn_selection_matrix, optimize)
from projlearn.policies import LimitCyclePolicy, PointAttractor, ZeroPolicy
from projlearn.simulator import (Dataset, Trajectory, generate_arm_dataset,
                                 generate_toy_dataset)

ARM = PlanarArm((0.1, 0.1, 0.1))
TOY_OPT = OptimizerConfig(restarts=8, max_iters=600, objective_tol=1e-13,
                          param_tol=1e-11, seed=0)
ARM_OPT = OptimizerConfig(restarts=6, max_iters=800, objective_tol=1e-12,
                          param_tol=1e-10, seed=0)


def toy(seed, n_points=150, theta=None):
    return generate_toy_dataset(n_points, seed=seed, null_policy=LimitCyclePolicy(),
                                theta=theta)


def arm_dataset(seed, lam_pattern=(1, 1, 0), n_traj=2, points=30):
    return generate_arm_dataset(ARM, diagonal_selection(lam_pattern),
                                PointAttractor(target=np.deg2rad([10.0, -10.0, 10.0])),
                                n_trajectories=n_traj, points_per_traj=points,
                                dt=0.02, seed=seed)


def action_norm_sum(ds):
    return float(np.sum(np.linalg.norm(ds.stack("u"), axis=1)))


def loop_objective(model, ds):
    # literal transcription of the score, one sample at a time
    X, U, PI = ds.stack("x"), ds.stack("u"), ds.stack("pi")
    total = 0.0
    for i in range(X.shape[0]):
        N = model.projector_at(X[i]).N
        total += abs(float(PI[i] @ N @ (U[i] - PI[i])))
    return total


class TestConsistencyObjective:
    def test_zero_at_toy_truth(self):
        ds = toy(seed=0)
        true = SphericalConstraint(theta=tuple(ds.meta["constraint"]["theta_rad"]),
                                   k=1, n=2)
        assert consistency_objective(true, ds) <= 1e-10 * action_norm_sum(ds)

    def test_zero_at_arm_truth(self):
        ds = arm_dataset(seed=1)
        true = SelectionConstraint(lam=diagonal_selection((1, 1, 0)),
                                   feature=lambda q: jacobian(ARM, q))
        assert consistency_objective(true, ds) <= 1e-10 * action_norm_sum(ds)

    def test_positive_away_from_truth(self):
        ds = toy(seed=2, theta=0.3)
        off = SphericalConstraint(theta=(0.3 + np.deg2rad(30.0),), k=1, n=2)
        assert consistency_objective(off, ds) > 1e-2

    def test_matches_loop_oracle_spherical(self):
        ds = toy(seed=3, theta=1.1)
        cand = SphericalConstraint(theta=(0.4,), k=1, n=2)
        fast = consistency_objective(cand, ds)
        assert fast == pytest.approx(loop_objective(cand, ds), rel=1e-12)

    def test_matches_loop_oracle_selection(self):
        ds = arm_dataset(seed=4)
        lam = build_constraint_rows(np.array([0.5, -0.2, 0.9]), 2, 3)
        cand = SelectionConstraint(lam=lam, feature=lambda q: jacobian(ARM, q))
        fast = consistency_objective(cand, ds)
        assert fast == pytest.approx(loop_objective(cand, ds), rel=1e-10)

    def test_prior_as_array_matches_policy(self):
        ds = toy(seed=5)
        cand = SphericalConstraint(theta=(0.7,), k=1, n=2)
        PI = ds.stack("pi")
        assert consistency_objective(cand, ds, prior_pi=PI) == pytest.approx(
            consistency_objective(cand, ds), rel=1e-14)

    def test_zero_prior_zeroes_every_candidate(self):
        ds = generate_toy_dataset(50, seed=6, null_policy=ZeroPolicy(dim=2))
        for theta in (0.1, 0.9, 2.2):
            cand = SphericalConstraint(theta=(theta,), k=1, n=2)
            assert consistency_objective(cand, ds) == 0.0


def angle_gap_mod_pi(a, b) -> float:
    d = abs(a - b) % np.pi
    return min(d, np.pi - d)


class TestLearnToyConstraint:
    def test_matches_grid_oracle(self):
        # brute-force scan is the reference answer; the learner must agree
        for seed in range(10):
            ds = toy(seed=seed, n_points=150)
            grid = np.deg2rad(np.arange(0.0, 180.0, 0.1))
            vals = [consistency_objective(SphericalConstraint(theta=(g,), k=1, n=2), ds)
                    for g in grid]
            oracle = grid[int(np.argmin(vals))]
            learned = learn_constraint(ds, k=1, opt=TOY_OPT)
            got = learned.model.theta[0]
            assert angle_gap_mod_pi(got, oracle) < np.deg2rad(0.5), seed

    def test_projector_recovery_25_points(self):
        ds = toy(seed=42, n_points=25)
        learned = learn_constraint(ds, k=1, opt=TOY_OPT)
        A = build_constraint_rows(np.array(ds.meta["constraint"]["theta_rad"]), 1, 2)
        N_true = null_projector(A).N
        N_hat = learned.model.projector_at(None).N
        assert np.linalg.norm(N_hat - N_true) <= 1e-4

    def test_explicit_prior_policy_object(self):
        ds = toy(seed=7)
        pi = LimitCyclePolicy()
        learned = learn_constraint(ds, prior_pi=pi, k=1, opt=TOY_OPT)
        assert learned.objective_value <= 1e-8 * action_norm_sum(ds)

    def test_degenerate_prior_is_flagged(self):
        ds = generate_toy_dataset(60, seed=8, null_policy=ZeroPolicy(dim=2))
        with pytest.warns(UserWarning):
            learned = learn_constraint(ds, k=1, opt=OptimizerConfig(restarts=2,
                                                                    max_iters=100))
        assert learned.diagnostics["degenerate_prior_fraction"] > 0.5
        assert learned.objective_value == 0.0

    def test_k_sweep_on_toy_stops_at_one(self):
        ds = toy(seed=9)
        learned = learn_constraint(ds, k=None, opt=TOY_OPT)
        assert learned.model.k == 1
        assert list(learned.diagnostics["k_sweep"]) == [1]
        assert learned.objective_value < learned.diagnostics["k_sweep_floor"]


class TestLearnArmConstraint:
    def test_lambda_representation_recovers_projector(self):
        ds = arm_dataset(seed=10)
        learned = learn_constraint(ds, k=2, representation="lambda",
                                   opt=ARM_OPT, feature_fn=lambda q: jacobian(ARM, q))
        assert learned.objective_value <= 1e-8 * action_norm_sum(ds)
        lam_true = diagonal_selection((1, 1, 0))
        for q in ds.stack("x")[::17]:
            N_true = null_projector(lam_true @ jacobian(ARM, q)).N
            N_hat = learned.model.projector_at(q).N
            assert np.max(np.abs(N_hat - N_true)) < 1e-5

    def test_lambda_needs_feature(self):
        with pytest.raises(ValueError):
            learn_constraint(arm_dataset(seed=11), k=2, representation="lambda")

    def test_unknown_representation(self):
        with pytest.raises(ValueError):
            learn_constraint(toy(seed=12), k=1, representation="fourier")


class TestLearnSelectionMatrix:
    CASES = {"x": (1, 0, 0), "y": (0, 1, 0), "theta": (0, 0, 1),
             "xy": (1, 1, 0), "xtheta": (1, 0, 1), "ytheta": (0, 1, 1)}

    def test_diagonal_mode_recovers_every_case(self):
        # with the true w the right subset scores zero, every other one does not
        for name, pattern in self.CASES.items():
            ds = arm_dataset(seed=13, lam_pattern=pattern, n_traj=1, points=25)
            k = sum(pattern)
            lam, val = learn_selection_matrix(ds, ds.stack("w"),
                                              lambda q: jacobian(ARM, q), k=k,
                                              mode="diagonal")
            assert np.array_equal(lam, diagonal_selection(pattern)), name
            assert val < 1e-16 * ds.n_samples, name

    def test_continuous_mode_matches_projector(self):
        ds = arm_dataset(seed=14, lam_pattern=(0, 1, 1))
        lam, val = learn_selection_matrix(ds, ds.stack("w"),
                                          lambda q: jacobian(ARM, q), k=2,
                                          opt=ARM_OPT)
        assert val < 1e-10
        lam_true = diagonal_selection((0, 1, 1))
        for q in ds.stack("x")[::23]:
            N_true = null_projector(lam_true @ jacobian(ARM, q)).N
            N_hat = null_projector(lam @ jacobian(ARM, q)).N
            assert np.max(np.abs(N_hat - N_true)) < 1e-4

    def test_zero_w_rejected(self):
        ds = arm_dataset(seed=15, n_traj=1, points=10)
        with pytest.raises(ValueError):
            learn_selection_matrix(ds, np.zeros((10, 3)),
                                   lambda q: jacobian(ARM, q), k=2)

    def test_row_count_mismatch(self):
        ds = arm_dataset(seed=16, n_traj=1, points=10)
        with pytest.raises(ValueError):
            learn_selection_matrix(ds, np.ones((4, 3)),
                                   lambda q: jacobian(ARM, q), k=2)


def pure_nullspace_dataset(seed, n_points=80):
    """States with u = N pi exactly: no task-space part at all."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n_points, 2))
    A = build_constraint_rows(np.array([0.6]), 1, 2)
    N = np.eye(2) - A.T @ A
    PI = np.array([LimitCyclePolicy()(x) for x in X])
    W = PI @ N.T
    traj = Trajectory(dt=1.0, x=X, u=W, v=np.zeros_like(W), w=W,
                      b=np.zeros((n_points, 1)), pi=PI)
    return Dataset(trajectories=[traj], meta={"system": "toy"})


class TestBaselineSeparation:
    def test_objective_zero_at_true_w(self):
        ds = arm_dataset(seed=17, n_traj=1, points=40)
        assert baseline_objective(ds.stack("w"), ds.stack("u")) < 1e-12

    def test_pure_nullspace_data_is_reproduced(self):
        # when u = w everywhere the separation can only return the actions
        ds = pure_nullspace_dataset(seed=18)
        res = baseline_separate_nullspace(ds, BaselineConfig(iterations=20, seed=0))
        U = ds.stack("u")
        assert float(np.max(np.linalg.norm(res.w_hat - U, axis=1))) < 1e-6
        assert float(np.max(np.linalg.norm(res.v_hat, axis=1))) < 1e-6

    def test_best_iterate_is_kept(self):
        ds = toy(seed=19, n_points=60)
        res = baseline_separate_nullspace(ds, BaselineConfig(iterations=15, seed=1))
        assert baseline_objective(res.w_hat, ds.stack("u")) == pytest.approx(
            min(res.objective_history), rel=1e-12)

    def test_needs_two_samples(self):
        ds = pure_nullspace_dataset(seed=20, n_points=1)
        with pytest.raises(ValueError):
            baseline_separate_nullspace(ds)


class TestOptimize:
    def test_quadratic_bowl(self):
        target = np.array([1.3, -0.4, 0.8])
        res = optimize(lambda p: float(np.sum((p - target) ** 2)),
                       np.zeros(3), OptimizerConfig(restarts=3, max_iters=2000,
                                                    objective_tol=1e-16,
                                                    param_tol=1e-12, seed=0))
        assert np.max(np.abs(res.params - target)) < 1e-6
        assert res.value < 1e-8

    def test_multimodal_lands_in_global_basin(self):
        # cosine-rippled bowl; local minima near every integer
        def rippled(p):
            x = float(p[0])
            return x * x + 10.0 * (1.0 - np.cos(2.0 * np.pi * x))

        hits = 0
        runs = 20
        for seed in range(runs):
            start = np.random.default_rng(seed).uniform(-4.0, 4.0, size=1)
            res = optimize(rippled, start,
                           OptimizerConfig(restarts=40, max_iters=400, seed=seed),
                           sampler=lambda r: r.uniform(-4.0, 4.0, size=1))
            hits += res.value < 1e-6
        assert hits >= int(0.95 * runs)

    def test_incumbents_never_increase(self):
        res = optimize(lambda p: float(np.sum(p * p)), np.array([2.0, -3.0]),
                       OptimizerConfig(restarts=6, max_iters=300, seed=3))
        assert all(a >= b for a, b in zip(res.incumbents, res.incumbents[1:]))

    def test_non_finite_restarts_are_abandoned(self):
        def holed(p):
            x = float(p[0])
            return np.nan if x < -1.0 else (x - 2.0) ** 2

        res = optimize(holed, np.array([2.5]),
                       OptimizerConfig(restarts=12, max_iters=300, seed=4),
                       sampler=lambda r: r.uniform(-4.0, 4.0, size=1))
        assert np.isfinite(res.value)
        assert res.value < 1e-8
        assert res.failures + res.restarts_used == 12

    def test_all_restarts_failing_raises(self):
        init = np.array([0.5])

        def spiked(p):
            return 1.0 if np.array_equal(p, init) else np.nan

        with pytest.raises(OptimizationError) as err:
            optimize(spiked, init, OptimizerConfig(restarts=3, max_iters=50, seed=5))
        assert err.value.best.value == 1.0

    def test_non_finite_init_rejected(self):
        with pytest.raises(ValueError):
            optimize(lambda p: np.inf, np.zeros(2), OptimizerConfig(restarts=2))

    def test_config_validates(self):
        with pytest.raises(ValueError):
            OptimizerConfig(restarts=0)
