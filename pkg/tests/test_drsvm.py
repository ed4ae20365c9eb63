import numpy as np
import pytest
from grid_oracle import grid_minimize, stack_micro
from instances import as_pairs, exact_blobs, micro_instance, micro_split

from roew.drsvm import (
    RobustParams,
    SolverConfig,
    SvmModel,
    _solve_core,
    hinge_l1_loss,
    kappa,
    kkt_report,
    robust_margin,
    train_hinge_l1,
    train_robust,
    train_roew_binary,
    train_soft_margin,
)
from roew.errors import (
    EmptyStratumError,
    InfeasibleError,
    OutOfRangeError,
    SingleClassError,
    SolverDivergedError,
)
from roew.measure import GaussianNoise, MomentSample, build_moments, exact_moment
from roew.states import BellLabel, generate_states
from roew.tolerances import ACTIVE_MARGIN_ATOL, DEFAULT_TOL_FEAS

# exact-margin cutoff for calling an oracle constraint binding; looser
# than the solver's because the oracle argmin sits on a 2e-4 grid
_ORACLE_BINDING_ATOL = 2.5e-3


def _binding_sets(model, samples, alpha, oracle_margins):
    solver = {
        i
        for i, s in enumerate(samples)
        if abs(robust_margin(s, model.v, model.b, alpha)) <= ACTIVE_MARGIN_ATOL
    }
    oracle = {i for i, mg in enumerate(oracle_margins) if abs(mg) <= _ORACLE_BINDING_ATOL}
    return solver, oracle


# ============================================================
# kappa and parameter containers
# ============================================================


def test_kappa_closed_forms():
    assert kappa(0.5) == pytest.approx(1.0, abs=1e-15)
    assert kappa(0.8) == pytest.approx(2.0, abs=1e-12)
    assert kappa(0.9) == pytest.approx(3.0, abs=1e-12)
    assert kappa(0.95) == pytest.approx(np.sqrt(19.0), abs=1e-12)


def test_kappa_defining_identity_and_monotone():
    alphas = np.linspace(0.01, 0.99, 197)
    kaps = np.array([kappa(a) for a in alphas])
    np.testing.assert_allclose(kaps**2 * (1.0 - alphas), alphas, atol=1e-12)
    assert np.all(np.diff(kaps) > 0.0)


def test_kappa_rejects_endpoints():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(OutOfRangeError):
            kappa(bad)


def test_robust_params_validation():
    p = RobustParams(0.8, 2.0)
    assert (p.alpha, p.c) == (0.8, 2.0)
    with pytest.raises(OutOfRangeError):
        RobustParams(1.0, 2.0)
    with pytest.raises(OutOfRangeError):
        RobustParams(0.8, 0.0)


# ============================================================
# robust_margin
# ============================================================


def test_robust_margin_hand_arithmetic():
    # identity covariance, unit v, alpha=0.8: margin = lin - 1 - 2*||v||
    s = MomentSample(np.array([3.0, 0.0]), np.eye(2), 1)
    assert robust_margin(s, np.array([1.0, 0.0]), 0.0, 0.8) == pytest.approx(
        0.0, abs=1e-12
    )
    # zero covariance reduces to the plain margin
    s0 = MomentSample(np.array([0.5, -0.5]), np.zeros((2, 2)), -1)
    v = np.array([2.0, 1.0])
    assert robust_margin(s0, v, 0.25, 0.9) == pytest.approx(
        -1.0 * (v @ s0.mu + 0.25) - 1.0, abs=1e-12
    )


def test_robust_margin_scaling_identity():
    # scaling mu by t and sigma by t^2 with v -> v/t preserves the margin
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 3))
    s = MomentSample(rng.normal(size=3), a @ a.T, 1)
    v = rng.normal(size=3)
    base = robust_margin(s, v, 0.3, 0.75)
    for t in (0.5, 2.0, 10.0):
        scaled = MomentSample(t * s.mu, t * t * s.sigma, s.label)
        assert robust_margin(scaled, v / t, 0.3, 0.75) == pytest.approx(
            base, abs=1e-12
        )


def test_robust_margin_decreases_with_alpha():
    rng = np.random.default_rng(12)
    a = rng.normal(size=(3, 3))
    s = MomentSample(rng.normal(size=3), a @ a.T, 1)
    v = rng.normal(size=3)
    vals = [robust_margin(s, v, 0.1, al) for al in (0.55, 0.7, 0.9)]
    assert vals[0] > vals[1] > vals[2]


# ============================================================
# soft-margin trainer
# ============================================================


def test_soft_margin_two_point_closed_form():
    # +1 at x=1, -1 at x=-1: maximum-margin plane is v=1, b=0
    model = train_soft_margin([(np.array([1.0]), 1), (np.array([-1.0]), -1)], 1000.0)
    assert model.v[0] == pytest.approx(1.0, abs=1e-4)
    assert model.b == pytest.approx(0.0, abs=1e-4)
    assert model.objective == pytest.approx(0.5, abs=1e-4)


def test_soft_margin_separable_blobs_have_no_slack():
    samples = exact_blobs(3, spread=0.5)
    model = train_soft_margin(as_pairs(samples), 10.0)
    assert model.beta.max(initial=0.0) < 1e-5
    preds = np.sign(np.stack([s.mu for s in samples]) @ model.v + model.b)
    np.testing.assert_array_equal(preds, [s.label for s in samples])


def test_soft_margin_validation():
    with pytest.raises(SingleClassError):
        train_soft_margin([(np.array([1.0]), 1), (np.array([2.0]), 1)], 1.0)
    with pytest.raises(EmptyStratumError):
        train_soft_margin([], 1.0)
    with pytest.raises(OutOfRangeError):
        train_soft_margin([(np.array([1.0]), 1), (np.array([-1.0]), -1)], 0.0)


def test_soft_margin_matches_grid_oracle():
    for seed in range(10):
        samples, _ = micro_instance(seed)
        mu = np.stack([s.mu for s in samples])
        lam = np.array([float(s.label) for s in samples])
        model = train_soft_margin([(s.mu, s.label) for s in samples], 5.0)
        ref_obj, _, _ = grid_minimize(mu, lam, None, 0.0, 5.0)
        assert model.objective <= ref_obj * (1.0 + 1e-3) + 1e-9
        assert model.objective >= ref_obj * (1.0 - 1e-3) - 1e-9


# ============================================================
# robust trainer
# ============================================================


def test_robust_zero_covariance_degenerates_to_soft_margin():
    # spec'd agreement is 1e-4 relative; the reduction is in fact exact
    for seed in range(20):
        samples = exact_blobs(seed)
        robust = train_robust(samples, RobustParams(0.7, 3.0))
        soft = train_soft_margin(as_pairs(samples), 3.0)
        assert robust.objective == pytest.approx(soft.objective, rel=1e-4)
        np.testing.assert_array_equal(robust.v, soft.v)
        assert robust.b == soft.b


def test_robust_matches_grid_oracle():
    for seed in (0, 4, 7):
        samples, _ = micro_instance(seed)
        params = RobustParams(0.7, 5.0)
        model = train_robust(samples, params)
        mu, lam, sig = stack_micro(samples)
        ref_obj, _, ref_margins = grid_minimize(mu, lam, sig, kappa(0.7), 5.0)
        assert model.objective == pytest.approx(ref_obj, rel=1e-3)
        solver_set, oracle_set = _binding_sets(model, samples, 0.7, ref_margins)
        assert solver_set == oracle_set


def test_robust_objective_nondecreasing_in_alpha():
    samples, _ = micro_instance(2)
    objs = [
        train_robust(samples, RobustParams(al, 5.0)).objective
        for al in (0.55, 0.7, 0.9)
    ]
    assert objs[0] <= objs[1] + 1e-9
    assert objs[1] <= objs[2] + 1e-9


def test_robust_label_flip_symmetry():
    samples, _ = micro_instance(5)
    flipped = [MomentSample(s.mu, s.sigma, -s.label) for s in samples]
    a = train_robust(samples, RobustParams(0.8, 5.0))
    b = train_robust(flipped, RobustParams(0.8, 5.0))
    assert a.objective == pytest.approx(b.objective, abs=1e-8)
    np.testing.assert_allclose(b.v, -a.v, atol=1e-6)
    assert b.b == pytest.approx(-a.b, abs=1e-6)


def test_trained_margins_scale_invariant():
    # homogeneity of the constraint set: v/t on (t*mu, t^2*sigma) data
    # reproduces every trained margin
    samples, _ = micro_instance(6)
    model = train_robust(samples, RobustParams(0.8, 5.0))
    base = [robust_margin(s, model.v, model.b, 0.8) for s in samples]
    for t in (0.5, 2.0, 25.0):
        scaled = [
            MomentSample(t * s.mu, t * t * s.sigma, s.label) for s in samples
        ]
        now = [robust_margin(s, model.v / t, model.b, 0.8) for s in scaled]
        np.testing.assert_allclose(now, base, atol=1e-6)


def test_robust_deterministic_bitwise():
    samples, _ = micro_instance(8)
    a = train_robust(samples, RobustParams(0.75, 5.0))
    b = train_robust(samples, RobustParams(0.75, 5.0))
    np.testing.assert_array_equal(a.v, b.v)
    assert a.b == b.b
    np.testing.assert_array_equal(a.beta, b.beta)


def test_robust_validation():
    with pytest.raises(EmptyStratumError):
        train_robust([], RobustParams(0.7, 1.0))
    ones = [MomentSample(np.zeros(2), np.zeros((2, 2)), 1) for _ in range(3)]
    with pytest.raises(SingleClassError):
        train_robust(ones, RobustParams(0.7, 1.0))


# ============================================================
# hard-separable binary trainer
# ============================================================


def test_roew_binary_model_shape_and_feasibility():
    samples, n_pos = micro_instance(1)
    sep, ent = micro_split(samples, n_pos)
    params = RobustParams(0.8, 5.0)
    model = train_roew_binary(sep, ent, params)
    assert model.n_hard == len(sep)
    assert model.beta.shape == (len(ent),)
    assert np.all(model.beta >= 0.0)
    assert model.feasibility_residual <= DEFAULT_TOL_FEAS
    for s in sep:
        assert robust_margin(s, model.v, model.b, 0.8) >= -DEFAULT_TOL_FEAS


def test_roew_binary_matches_grid_oracle():
    for seed in (0, 3, 9):
        samples, n_pos = micro_instance(seed)
        sep, ent = micro_split(samples, n_pos)
        params = RobustParams(0.7, 5.0)
        model = train_roew_binary(sep, ent, params)
        mu, lam, sig = stack_micro(sep + ent)
        hard = np.arange(len(samples)) < n_pos
        ref_obj, _, ref_margins = grid_minimize(
            mu, lam, sig, kappa(0.7), 5.0, hard_mask=hard
        )
        assert model.objective == pytest.approx(ref_obj, rel=1e-3, abs=1e-6)
        solver_set, oracle_set = _binding_sets(model, sep + ent, 0.7, ref_margins)
        assert solver_set == oracle_set


def test_roew_binary_always_feasible_at_extreme_alpha():
    # hard rows all carry label +1, so (v, b) = (0, 1) satisfies every
    # hard constraint and infeasibility is unreachable from this API
    samples, n_pos = micro_instance(4)
    sep, ent = micro_split(samples, n_pos)
    model = train_roew_binary(sep, ent, RobustParams(0.999, 5.0))
    assert model.feasibility_residual <= DEFAULT_TOL_FEAS


def test_roew_binary_zero_covariance_hard_side_exact():
    blobs = exact_blobs(13, spread=0.5)
    sep = [s for s in blobs if s.label == 1]
    ent = [
        MomentSample(s.mu, s.sigma, -1, BellLabel.PSI_MINUS)
        for s in blobs
        if s.label == -1
    ]
    model = train_roew_binary(sep, ent, RobustParams(0.8, 10.0))
    scores = np.stack([s.mu for s in sep]) @ model.v + model.b
    assert scores.min() >= 1.0 - 1e-5
    assert model.feasibility_residual <= DEFAULT_TOL_FEAS


def test_roew_binary_validation():
    samples, n_pos = micro_instance(0)
    sep, ent = micro_split(samples, n_pos)
    params = RobustParams(0.8, 5.0)
    with pytest.raises(EmptyStratumError):
        train_roew_binary([], ent, params)
    with pytest.raises(EmptyStratumError):
        train_roew_binary(sep, [], params)
    with pytest.raises(OutOfRangeError):
        train_roew_binary(ent, ent, params)  # wrong labels on the hard side
    with pytest.raises(OutOfRangeError):
        train_roew_binary(sep, sep, params)
    mixed = ent + [MomentSample(ent[0].mu, ent[0].sigma, -1, BellLabel.PHI_PLUS)]
    with pytest.raises(OutOfRangeError):
        train_roew_binary(sep, mixed, params)


# ============================================================
# failure certificates
# ============================================================


def test_contradictory_hard_rows_raise_infeasible_with_certificate():
    # v1 + b >= 1 and -(v1 + b) >= 1 cannot both hold; the best point
    # balances them at violation exactly 1
    mu = np.array([[1.0, 0.0], [1.0, 0.0]])
    lam = np.array([1.0, -1.0])
    with pytest.raises(InfeasibleError) as err:
        _solve_core(mu, lam, None, 0.0, 1.0, np.array([True, True]),
                    SolverConfig(), group="00")
    assert err.value.max_violation == pytest.approx(1.0, abs=1e-3)
    assert err.value.worst_index in (0, 1)
    assert err.value.group == "00"


def test_starved_budget_reports_divergence_not_infeasibility():
    # the instance is feasible, so exhausting the iteration budget must
    # never produce an infeasibility certificate
    records = generate_states(60, 60, 12345)
    samples = build_moments(records, GaussianNoise(0.05), 5)
    sep = [s for s in samples if s.label == 1]
    ent = [s for s in samples if s.group is BellLabel.PHI_PLUS]
    with pytest.raises(SolverDivergedError):
        train_roew_binary(sep, ent, RobustParams(0.8, 20.0), SolverConfig(max_iters=1))


# ============================================================
# KKT audit
# ============================================================


def test_kkt_report_on_feasible_model():
    samples, n_pos = micro_instance(7)
    sep, ent = micro_split(samples, n_pos)
    params = RobustParams(0.8, 5.0)
    model = train_roew_binary(sep, ent, params)
    report = kkt_report(model, sep + ent, params)
    assert report.max_violation <= DEFAULT_TOL_FEAS
    assert abs(report.objective_recomputed - model.objective) <= 1e-12


def test_kkt_report_hand_built_violation_exact():
    sample = MomentSample(np.array([1.0]), np.zeros((1, 1)), 1)
    model = SvmModel(
        v=np.zeros(1), b=0.0, beta=np.zeros(1), objective=0.0,
        feasibility_residual=0.0, alpha=0.7, c=1.0,
    )
    report = kkt_report(model, [sample], RobustParams(0.7, 1.0))
    # margin is exactly -1 and the declared slack is 0
    assert report.violations[0] == 1.0
    assert report.max_violation == 1.0


def test_kkt_report_active_set_two_point():
    model = train_soft_margin([(np.array([1.0]), 1), (np.array([-1.0]), -1)], 1000.0)
    samples = [exact_moment([1.0], 1), exact_moment([-1.0], -1)]
    report = kkt_report(model, samples, RobustParams(0.5, 1000.0))
    assert report.active == [0, 1]


# ============================================================
# L1 trainer
# ============================================================


def test_hinge_l1_loss_hand_values():
    samples = [(np.array([1.0, 0.0]), 1), (np.array([0.0, 1.0]), -1)]
    v = np.array([0.5, -0.5])
    # hinges are 0.25 and 0.75; l1 mass is 1.25
    assert hinge_l1_loss(samples, v, 0.25, 0.1) == pytest.approx(
        0.5 + 0.125, abs=1e-12
    )
    assert hinge_l1_loss(samples, v, 0.25, 0.1, m=2) == pytest.approx(
        0.3125 + 0.125, abs=1e-12
    )


def test_train_hinge_l1_separates_blobs():
    samples = exact_blobs(17, spread=0.5)
    model = train_hinge_l1(as_pairs(samples), 1e-3)
    preds = np.sign(np.stack([s.mu for s in samples]) @ model.v + model.b)
    np.testing.assert_array_equal(preds, [s.label for s in samples])
    assert np.isfinite(model.solver_info["stationarity"])


def test_train_hinge_l1_large_penalty_zeroes_coefficients():
    samples = exact_blobs(18)
    model = train_hinge_l1(as_pairs(samples), 100.0)
    # w = 0 costs exactly the unit hinge, and nothing beats it here
    assert np.abs(model.v).max(initial=0.0) <= 1e-9
    assert model.objective == pytest.approx(1.0, abs=1e-9)


def test_train_hinge_l1_validation():
    samples = as_pairs(exact_blobs(19))
    with pytest.raises(OutOfRangeError):
        train_hinge_l1(samples, 0.0)
    with pytest.raises(OutOfRangeError):
        train_hinge_l1(samples, 1.0, m=0)
    with pytest.raises(EmptyStratumError):
        train_hinge_l1([], 1.0)
