import numpy as np
import pytest

from zojade import (
    ConfigurationError,
    Xoshiro256,
    estimate_gradient,
    gradient_error_bound,
    load_csv,
    logistic_instance,
    quartic_instance,
    ridge_instance_from_shards,
    ridge_synthetic,
    separable_quadratic_instance,
    shard_round_robin,
    standardize_features,
    synthetic_classification,
)


# --- ridge -------------------------------------------------------------------


def test_ridge_single_sample_hand_solution():
    # f(x) = (x - 2)^2 + x^2/2 has its minimum at 4/3
    inst = ridge_instance_from_shards(np.array([[1.0]]), np.array([2.0]), n=1, lam=1.0)
    assert abs(inst.x_star[0] - 4.0 / 3.0) <= 1e-14


def test_ridge_zero_targets_minimized_at_origin():
    rng = Xoshiro256(4)
    features = rng.normals(12, 3)
    inst = ridge_instance_from_shards(features, np.zeros(12), n=3, lam=0.5)
    assert np.max(np.abs(inst.x_star)) <= 1e-14
    assert inst.f_star == 0.0


def test_ridge_identical_shards_match_union():
    rng = Xoshiro256(6)
    rows = rng.normals(4, 2)
    targets = rng.normals(4)
    duplicated = np.repeat(rows, 2, axis=0)  # round-robin gives two equal shards
    dup_targets = np.repeat(targets, 2)
    two = ridge_instance_from_shards(duplicated, dup_targets, n=2, lam=0.3)
    one = ridge_instance_from_shards(rows, targets, n=1, lam=0.3)
    assert np.max(np.abs(two.x_star - one.x_star)) <= 1e-12


def test_ridge_validates_inputs():
    with pytest.raises(ConfigurationError):
        ridge_instance_from_shards(np.ones((2, 2)), np.ones(2), n=3, lam=0.1)
    with pytest.raises(ConfigurationError):
        ridge_instance_from_shards(np.ones((2, 2)), np.ones(2), n=1, lam=0.0)
    with pytest.raises(ConfigurationError):
        ridge_instance_from_shards(np.ones((2, 2)), np.ones(3), n=1, lam=0.1)


# --- logistic ----------------------------------------------------------------


def test_logistic_no_samples_is_pure_ridge():
    inst = logistic_instance(np.zeros((0, 0)), np.zeros(0), n=3, w=0.5)
    assert np.max(np.abs(inst.x_star)) <= 1e-12
    assert abs(inst.f_star) <= 1e-20
    assert inst.constants.m == 0.5


def test_logistic_label_flip_negates_solution():
    samples = np.array([[0.8, -0.2]])
    plus = logistic_instance(samples, np.array([1.0]), n=1, w=0.1)
    minus = logistic_instance(samples, np.array([-1.0]), n=1, w=0.1)
    assert np.max(np.abs(plus.x_star + minus.x_star)) <= 1e-9


def test_logistic_two_sample_newton_reaches_tolerance():
    samples = np.array([[1.0], [-1.2]])
    labels = np.array([1.0, -1.0])
    inst = logistic_instance(samples, labels, n=1, w=0.1)
    assert np.linalg.norm(inst.global_gradient(inst.x_star)) <= 1e-10


def test_logistic_rejects_bad_labels():
    with pytest.raises(ConfigurationError):
        logistic_instance(np.ones((2, 1)), np.array([1.0, 0.0]), n=1, w=0.1)
    with pytest.raises(ConfigurationError):
        logistic_instance(np.ones((2, 1)), np.array([1.0, -1.0]), n=1, w=0.0)


def test_synthetic_classification_deterministic():
    a = synthetic_classification(5, 8, 3, seed=11)
    b = synthetic_classification(5, 8, 3, seed=11)
    assert np.array_equal(a.x_star, b.x_star)
    probe = np.linspace(-1.0, 1.0, 5)
    assert a.global_value(probe) == b.global_value(probe)
    assert a.f_star == b.f_star


def test_synthetic_classification_zero_separation_has_small_weights():
    null = synthetic_classification(4, 100, 4, seed=3, separation=0.0)
    split = synthetic_classification(4, 100, 4, seed=3, separation=3.0)
    weights_null = np.linalg.norm(null.x_star[:-1])
    weights_split = np.linalg.norm(split.x_star[:-1])
    assert weights_null < 0.3
    assert weights_null < weights_split


def test_synthetic_classification_newton_oracle_scale():
    inst = synthetic_classification(20, 50, 20, seed=1)
    assert inst.d == 20
    assert inst.n == 20
    assert np.linalg.norm(inst.global_gradient(inst.x_star)) <= 1e-10


def test_synthetic_classification_balanced_per_agent():
    inst = synthetic_classification(4, 10, 5, seed=2)
    # each agent's sample block carries equally many of each label; the
    # shard round-robin must hand agent i its own generated block
    for model in inst.models:
        assert model.U.shape[0] == 10
        labels = model.U[:, -1]  # sign of the appended intercept column
        assert int(np.sum(labels > 0)) == 5


# --- quartic and separable quadratic -------------------------------------------


def test_quartic_instance_ground_truth():
    inst = quartic_instance(4)
    # x* solves x^3 + x - 1 = 0 for the mean tilt -1
    r = inst.x_star[0]
    assert abs(r**3 + r - 1.0) <= 1e-12
    assert np.linalg.norm(inst.global_gradient(inst.x_star)) <= 1e-10
    c = inst.constants
    assert (c.m, c.L1, c.L2, c.L3) == (1.0, 3.0 * 1.5**2 + 1.0, 9.0, 6.0)


def test_quartic_tilts_average_to_mean():
    inst = quartic_instance(5, b_mean=-1.0, b_spread=0.5)
    b_bar = sum(m.b for m in inst.models) / 5
    assert abs(b_bar[0] + 1.0) <= 1e-15


def test_separable_quadratic_closed_form():
    inst = separable_quadratic_instance(6, 4, seed=10)
    a_bar = sum(np.diag(m.A) for m in inst.models) / 6
    b_bar = sum(m.b for m in inst.models) / 6
    assert np.max(np.abs(inst.x_star + b_bar / a_bar)) <= 1e-14
    assert inst.constants.L2 == 0.0 and inst.constants.L3 == 0.0


# --- sharding, metrics consistency, constants ----------------------------------


def test_round_robin_conserves_rows():
    shards = shard_round_robin(23, 5)
    counts = [len(s) for s in shards]
    assert sum(counts) == 23
    all_rows = np.concatenate(shards)
    assert len(np.unique(all_rows)) == 23


def test_every_family_matches_analytic_gradients_through_the_oracle():
    rng = Xoshiro256(20)
    instances = [
        separable_quadratic_instance(3, 4, seed=1),
        ridge_synthetic(4, 6, 3, seed=2),
        synthetic_classification(4, 9, 3, seed=3),
        quartic_instance(3, box=3.0),
    ]
    for inst in instances:
        c = inst.constants
        for _ in range(50):
            i = int(rng.uniform() * inst.n)
            obj = inst.objectives[i].fresh()
            x = 0.8 * rng.normals(inst.d)
            mu = 0.01 + 0.02 * rng.uniform()
            est = estimate_gradient(obj, x, mu)
            true = obj.analytic_gradient(x)
            bound = gradient_error_bound(
                obj.constants.L2 if obj.constants.L2 is not None else c.L2,
                mu,
                inst.d,
            )
            assert np.linalg.norm(est - true) <= bound + 1e-9 * (
                1.0 + np.linalg.norm(true)
            )


def test_f_star_beats_random_perturbations():
    rng = Xoshiro256(44)
    for inst in (
        ridge_synthetic(3, 5, 4, seed=5),
        synthetic_classification(3, 10, 4, seed=6),
        quartic_instance(4),
    ):
        for _ in range(1000):
            delta = rng.normals(inst.d)
            norm = np.linalg.norm(delta)
            if norm > 1.0:
                delta /= norm
            assert inst.global_value(inst.x_star + delta) >= inst.f_star - 1e-12


def test_reported_constants():
    quad = ridge_synthetic(3, 5, 2, seed=7)
    assert quad.constants.L2 == 0.0 and quad.constants.L3 == 0.0
    logi = synthetic_classification(3, 8, 2, seed=8, w=0.25)
    assert logi.constants.m == 0.25
    assert logi.constants.L1 >= 0.25 and logi.constants.L3 > 0.0


def test_fresh_objectives_reset_counters():
    inst = separable_quadratic_instance(2, 2, seed=1)
    inst.objectives[0].evaluate(np.zeros(2))
    assert inst.objectives[0].query_count == 1
    again = inst.fresh()
    assert again.objectives[0].query_count == 0
    assert again.objectives[0].raw_value(np.ones(2)) == inst.objectives[0].raw_value(
        np.ones(2)
    )


def test_standardize_features():
    rng = Xoshiro256(50)
    raw = rng.normals(40, 3) * np.array([5.0, 0.1, 1.0]) + np.array([2.0, -1.0, 0.0])
    out = standardize_features(raw)
    assert np.max(np.abs(out.mean(axis=0))) <= 1e-12
    assert np.max(np.abs(out.std(axis=0) - 1.0)) <= 1e-12


# --- csv ----------------------------------------------------------------------


def test_load_csv_basic(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("1,2\n3,4\n", encoding="utf-8")
    features, targets = load_csv(str(path))
    assert features.tolist() == [[1.0], [3.0]]
    assert targets.tolist() == [2.0, 4.0]


def test_load_csv_header_flag(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    features, targets = load_csv(str(path), has_header=True)
    assert features.tolist() == [[1.0]]
    with pytest.raises(ConfigurationError, match="row 1"):
        load_csv(str(path))


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="no data rows"):
        load_csv(str(path))


def test_load_csv_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3,4,5\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="row 2"):
        load_csv(str(path))


def test_load_csv_non_numeric(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="row 2"):
        load_csv(str(path))
