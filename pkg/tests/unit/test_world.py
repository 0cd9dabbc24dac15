"""Tests for worlds, Bayes predictors and assumption checks."""

import math

import numpy as np
import pytest

from idg_lab.theory.finite_prob import CondKernel, FiniteDist, JointTable, conditional_entropy
from idg_lab.theory.losses import LossSpec
from idg_lab.theory.world import (
    World,
    WorldConstraints,
    WorldSizes,
    bayes_image,
    bayes_predictor,
    bayes_risk_from_x,
    random_world,
    validate_world,
)
from idg_lab.utils.error_handler import AssumptionViolationError, DimensionMismatchError
from tests.fixtures.worlds import (
    four_input_world,
    restricted_label_world,
    shared_argmax_world,
    single_domain_world,
)


class TestStructure:
    def test_aliases_and_field_names_both_accepted(self):
        w = four_input_world()
        rebuilt = World(
            p_d=w.p_d,
            p_x_given_d=w.p_x_given_d,
            p_y_given_x=w.p_y_given_x,
            pair_dist=w.pair_dist,
            loss=w.loss,
        )
        assert rebuilt.n_inputs == 4

    def test_pair_dist_shape_checked(self):
        w = four_input_world()
        with pytest.raises(DimensionMismatchError):
            World(
                p_D=w.p_d,
                p_X_given_D=w.p_x_given_d,
                p_Y_given_X=w.p_y_given_x,
                pair_dist=JointTable(mass=np.full((3, 3), 1 / 9)),
                loss=w.loss,
            )

    def test_json_round_trip(self):
        w = shared_argmax_world()
        again = World.from_json(w.to_json())
        np.testing.assert_allclose(again.label_tensor(), w.label_tensor())


class TestValidateWorld:
    def test_fixture_passes_every_clause(self, world):
        report = validate_world(world)
        assert report.passed
        assert report.failed() == []

    def test_missing_image_element_fails_constant_clause(self):
        report = validate_world(restricted_label_world())
        assert report.failed() == ["constant_bayes_image"]

    def test_uniform_labels_tie_under_zero_one(self):
        w = single_domain_world(np.full((2, 2), 0.5), np.array([0.5, 0.5]), LossSpec.zero_one())
        report = validate_world(w)
        assert not report.unique_optima.passed

    def test_generalized_covariate_shift_with_shared_argmax(self):
        report = validate_world(shared_argmax_world())
        assert report.generalized_covariate_shift.passed
        assert report.passed

    def test_generalized_covariate_shift_detects_disagreement(self):
        d0 = np.array([[0.9, 0.1], [0.2, 0.8]])
        d1 = np.array([[0.3, 0.7], [0.2, 0.8]])
        w = World(
            p_D=FiniteDist(probs=np.array([0.7, 0.3])),
            p_X_given_D=CondKernel(rows=np.full((2, 2), 0.5)),
            p_Y_given_X=CondKernel(rows=0.7 * d0 + 0.3 * d1),
            p_Y_given_XD=[CondKernel(rows=d0), CondKernel(rows=d1)],
            pair_dist=JointTable(mass=np.full((2, 2), 0.25)),
            loss=LossSpec.zero_one(),
        )
        assert not validate_world(w).generalized_covariate_shift.passed

    def test_trivial_image(self):
        w = single_domain_world(np.array([[0.8, 0.2], [0.9, 0.1]]), np.array([0.5, 0.5]), LossSpec.zero_one())
        assert validate_world(w).failed() == ["nontrivial_bayes_image"]

    def test_pair_support(self):
        w = four_input_world()
        w = w.model_copy(update={"pair_dist": JointTable(mass=np.array([[0.5, 0.5], [0.0, 0.0]]))})
        assert not validate_world(w).pair_full_support.passed


class TestBayesPredictor:
    def test_zero_one_argmax(self):
        w = single_domain_world(np.array([[0.7, 0.3], [0.3, 0.7]]), np.array([0.5, 0.5]), LossSpec.zero_one())
        assert bayes_predictor(w).labels == [0, 1]

    def test_log_returns_conditional(self):
        rows = np.array([[0.7, 0.3], [0.3, 0.7]])
        w = single_domain_world(rows, np.array([0.5, 0.5]), LossSpec.log())
        np.testing.assert_allclose(bayes_predictor(w).actions, rows)

    def test_clamped_log_projects(self):
        rows = np.array([[0.999, 0.001], [0.3, 0.7]])
        w = single_domain_world(rows, np.array([0.5, 0.5]), LossSpec.clamped_log(0.01))
        np.testing.assert_allclose(bayes_predictor(w).action(0), [0.99, 0.01], atol=1e-12)

    def test_tie_raises(self):
        w = single_domain_world(np.full((2, 2), 0.5), np.array([0.5, 0.5]), LossSpec.zero_one())
        with pytest.raises(AssumptionViolationError):
            bayes_predictor(w)


class TestBayesRisk:
    def test_deterministic_labels_have_zero_risk(self, world):
        assert bayes_risk_from_x(world) == 0.0
        assert bayes_risk_from_x(four_input_world(LossSpec.log())) == pytest.approx(0.0, abs=1e-12)

    def test_constant_conditional_zero_one(self):
        w = single_domain_world(np.array([[0.7, 0.3]] * 3), np.full(3, 1 / 3), LossSpec.zero_one())
        assert bayes_risk_from_x(w) == pytest.approx(0.3)

    def test_log_is_average_entropy(self):
        rows = np.array([[0.9, 0.1], [0.6, 0.4]])
        w = single_domain_world(rows, np.array([0.5, 0.5]), LossSpec.log())
        assert bayes_risk_from_x(w) == pytest.approx(0.499727, abs=1e-6)

    def test_log_equals_conditional_entropy(self):
        w = random_world(4, WorldSizes(n_domains=2, n_inputs=5, n_labels=3), WorldConstraints(loss=LossSpec.log()))
        joint = JointTable(mass=w.input_marginal()[:, None] * w.p_y_given_x.rows)
        assert bayes_risk_from_x(w) == pytest.approx(conditional_entropy(joint), abs=1e-10)


class TestBayesImage:
    def test_single_conditional(self):
        w = single_domain_world(np.array([[0.8, 0.2], [0.8, 0.2]]), np.array([0.5, 0.5]), LossSpec.log())
        assert len(bayes_image(w)) == 1

    def test_both_labels(self, world):
        assert len(bayes_image(world)) == 2

    def test_dedup_under_log(self):
        rows = np.array([[0.9, 0.1], [0.9, 0.1], [0.2, 0.8]])
        w = single_domain_world(rows, np.full(3, 1 / 3), LossSpec.log())
        assert len(bayes_image(w)) == 2

    def test_domain_images_are_subsets(self):
        w = random_world(11, WorldSizes(n_domains=3, n_inputs=5, n_labels=3))
        overall = bayes_image(w)
        for d in range(w.n_domains):
            for action in bayes_image(w, d):
                assert any(np.max(np.abs(action - a)) <= 1e-9 for a in overall)


class TestRandomWorld:
    def test_deterministic(self):
        sizes = WorldSizes(n_domains=2, n_inputs=4, n_labels=2)
        assert random_world(0, sizes).to_json() == random_world(0, sizes).to_json()

    @pytest.mark.parametrize(
        "loss", [LossSpec.zero_one(), LossSpec.log(), LossSpec.clamped_log(1e-3)], ids=lambda l: l.kind.value
    )
    def test_passes_validation(self, loss):
        for seed in range(5):
            w = random_world(seed, WorldSizes(n_domains=2, n_inputs=4, n_labels=2), WorldConstraints(loss=loss))
            assert validate_world(w).passed

    def test_adversarial_fails_only_constant_image(self):
        w = random_world(
            2, WorldSizes(n_domains=2, n_inputs=4, n_labels=2), WorldConstraints(adversarial=True)
        )
        assert validate_world(w).failed() == ["constant_bayes_image"]

    def test_per_domain_labels_keep_argmax(self):
        w = random_world(
            5, WorldSizes(n_domains=3, n_inputs=4, n_labels=3), WorldConstraints(per_domain_labels=True)
        )
        assert w.p_y_given_xd is not None
        assert validate_world(w).generalized_covariate_shift.passed

    def test_max_bayes_image(self):
        for seed in range(5):
            w = random_world(
                seed,
                WorldSizes(n_domains=2, n_inputs=5, n_labels=3),
                WorldConstraints(loss=LossSpec.log(), max_bayes_image=2),
            )
            assert len(bayes_image(w)) == 2

    def test_every_domain_has_positive_mass(self):
        w = random_world(9, WorldSizes(n_domains=3, n_inputs=4, n_labels=2))
        assert np.all(w.p_d.probs > 0)
        assert math.isclose(w.pair_dist.mass.sum(), 1.0)
