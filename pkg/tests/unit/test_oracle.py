"""Tests for the exhaustive characterization check and adversarial constructions."""

import numpy as np
import pytest

from idg_lab.theory.encoder_risk import Encoder
from idg_lab.theory.finite_prob import CondKernel, FiniteDist
from idg_lab.theory.losses import LossSpec
from idg_lab.theory.oracle import (
    check_cmi,
    check_dpi,
    check_stochastic_encoder,
    construct_optimal_encoder,
    encoder_count,
    encoder_index,
    enumerate_det_encoders,
    no_free_lunch_bound,
    no_free_lunch_construct,
    no_free_lunch_input,
    random_no_free_lunch_case,
    random_worst_representation_case,
    risks_equal,
    sample_stochastic_encoders,
    verify_theorem1,
    worst_representation_construct,
)
from idg_lab.theory.world import DomainSlice, WorldConstraints, WorldSizes, random_world
from idg_lab.utils.error_handler import (
    AssumptionViolationError,
    BudgetExceededError,
    InadmissibleParameterError,
    InsufficientCodesError,
    NoQualifyingInputError,
)
from tests.fixtures.worlds import (
    BUCKETING_INDICES,
    four_input_world,
    no_free_lunch_encoder,
    no_free_lunch_good_target,
    no_free_lunch_source,
    restricted_label_world,
    single_domain_world,
)


class TestRisksEqual:
    def test_infinity_equals_only_infinity(self):
        assert risks_equal(float("inf"), float("inf"))
        assert not risks_equal(float("inf"), 1e300)

    def test_tolerance(self):
        assert risks_equal(0.1, 0.1 + 1e-10)
        assert not risks_equal(0.1, 0.1 + 1e-8)


class TestEnumeration:
    @pytest.mark.parametrize(("n_inputs", "n_codes", "count"), [(2, 2, 4), (4, 2, 16), (5, 3, 243)])
    def test_count(self, n_inputs, n_codes, count):
        assert encoder_count(n_inputs, n_codes) == count
        assert sum(1 for _ in enumerate_det_encoders(n_inputs, n_codes)) == count

    def test_lexicographic_order_matches_index(self):
        for i, e in enumerate(enumerate_det_encoders(3, 2)):
            assert encoder_index(e.codes(), 2) == i

    def test_every_encoder_once(self):
        seen = {tuple(e.codes()) for e in enumerate_det_encoders(3, 3)}
        assert len(seen) == 27

    def test_budget(self):
        with pytest.raises(BudgetExceededError) as info:
            list(enumerate_det_encoders(10, 3, budget=1000))
        assert info.value.required == 3**10
        assert info.value.exit_code == 2


class TestTheorem1:
    def test_four_input_fixture(self, world):
        report = verify_theorem1(world, 2)
        assert report.applicable
        assert report.equal
        assert report.min_idg == pytest.approx(0.0)
        assert report.set_idg_optimal == BUCKETING_INDICES
        assert report.set_char_optimal == BUCKETING_INDICES

    def test_assumption_failure_is_not_applicable(self):
        report = verify_theorem1(restricted_label_world(), 2)
        assert not report.applicable
        assert "constant_bayes_image" in report.reason

    def test_too_few_codes_is_not_applicable(self):
        w = random_world(3, WorldSizes(n_domains=2, n_inputs=4, n_labels=3), WorldConstraints(max_bayes_image=3))
        report = verify_theorem1(w, 1)
        assert not report.applicable

    @pytest.mark.parametrize("seed", range(8))
    def test_random_worlds(self, seed):
        loss = LossSpec.zero_one() if seed % 2 == 0 else LossSpec.clamped_log(1e-3)
        w = random_world(
            seed,
            WorldSizes(n_domains=2, n_inputs=4, n_labels=2),
            WorldConstraints(loss=loss, max_bayes_image=2),
        )
        report = verify_theorem1(w, 2)
        assert report.applicable
        assert report.equal


class TestConstructOptimalEncoder:
    def test_deterministic_labels_give_label_map(self, world):
        assert construct_optimal_encoder(world, 2).codes() == [0, 1, 0, 1]

    def test_three_conditionals_use_three_codes(self):
        rows = np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8], [0.9, 0.1]])
        w = single_domain_world(rows, np.full(4, 0.25), LossSpec.log())
        codes = construct_optimal_encoder(w, 3).codes()
        assert len(set(codes)) == 3
        assert codes[0] == codes[3]

    def test_insufficient_codes(self, world):
        with pytest.raises(InsufficientCodesError):
            construct_optimal_encoder(world, 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_constructed_encoder_is_idg_optimal(self, seed):
        w = random_world(
            seed, WorldSizes(n_domains=2, n_inputs=4, n_labels=2), WorldConstraints(max_bayes_image=2)
        )
        report = verify_theorem1(w, 2)
        constructed = encoder_index(construct_optimal_encoder(w, 2).codes(), 2)
        assert constructed in report.set_idg_optimal


class TestNoFreeLunch:
    def test_input_choice(self):
        label, x_star, q = no_free_lunch_input(
            no_free_lunch_source(), no_free_lunch_encoder(), no_free_lunch_good_target()
        )
        assert (label, x_star, q) == (0, 2, pytest.approx(1.0))

    def test_encoder_loses_to_constant(self):
        record = no_free_lunch_construct(
            no_free_lunch_source(), no_free_lunch_encoder(), no_free_lunch_good_target(), 0.25
        )
        assert record.encoder_sup_risk == pytest.approx(0.75)
        assert record.constant_sup_risk == pytest.approx(0.1)
        assert record.strict
        assert record.delta_bound == pytest.approx(0.5)
        np.testing.assert_allclose(record.adversarial.p_x.probs, [0.15, 0.1, 0.75, 0.0])

    @pytest.mark.parametrize("delta", [0.0, 0.5, 0.7])
    def test_delta_outside_interval(self, delta):
        with pytest.raises(InadmissibleParameterError):
            no_free_lunch_construct(
                no_free_lunch_source(), no_free_lunch_encoder(), no_free_lunch_good_target(), delta
            )

    def test_constant_encoder_has_no_qualifying_input(self):
        with pytest.raises(AssumptionViolationError):
            no_free_lunch_construct(
                no_free_lunch_source(), Encoder.constant(4), no_free_lunch_good_target(), 0.1
            )

    def test_good_target_must_cover_every_label(self):
        target = DomainSlice(
            p_x=FiniteDist(probs=np.array([0.0, 0.0, 1.0, 0.0])),
            p_y_given_x=CondKernel.from_assignment([0, 1, 1, 0], 2),
        )
        with pytest.raises(AssumptionViolationError):
            no_free_lunch_input(no_free_lunch_source(), no_free_lunch_encoder(), target)

    @pytest.mark.parametrize("seed", range(6))
    def test_strict_on_random_cases(self, seed):
        case = random_no_free_lunch_case(seed)
        bound = no_free_lunch_bound(case)
        for delta in np.linspace(0.0, bound, 6)[1:-1]:
            record = no_free_lunch_construct(case.source, case.encoder, case.good_target, float(delta))
            assert record.strict


class TestWorstRepresentation:
    @staticmethod
    def source_and_encoder() -> tuple[DomainSlice, Encoder]:
        source = DomainSlice(
            p_x=FiniteDist(probs=np.array([0.5, 0.5, 0.0])),
            p_y_given_x=CondKernel.from_assignment([0, 1, 0], 2),
        )
        return source, Encoder.from_assignment([0, 1, 2], 3)

    def test_sup_risk_is_one_minus_delta(self):
        source, e = self.source_and_encoder()
        record = worst_representation_construct(source, e, epsilon=0.02, delta=0.01)
        assert record.sup_risk == pytest.approx(0.99)
        assert record.lower_bound == pytest.approx(0.99)

    def test_default_delta(self):
        source, e = self.source_and_encoder()
        record = worst_representation_construct(source, e, epsilon=0.1)
        assert record.adversarial.delta == pytest.approx(0.05)
        assert record.sup_risk >= 0.9

    def test_delta_must_be_below_epsilon(self):
        source, e = self.source_and_encoder()
        with pytest.raises(InadmissibleParameterError):
            worst_representation_construct(source, e, epsilon=0.1, delta=0.1)

    def test_encoder_inside_source_codes(self):
        source, _ = self.source_and_encoder()
        with pytest.raises(NoQualifyingInputError):
            worst_representation_construct(source, Encoder.from_assignment([0, 1, 0], 2), epsilon=0.1)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_cases(self, seed):
        case = random_worst_representation_case(seed)
        record = worst_representation_construct(case.source, case.encoder, case.epsilon)
        assert record.sup_risk == pytest.approx(1.0 - record.adversarial.delta, abs=1e-9)
        assert record.sup_risk >= 1.0 - case.epsilon


class TestStochasticChecks:
    def test_implications_on_sampled_encoders(self, world):
        for e in sample_stochastic_encoders(0, 200, 4, 2):
            assert check_stochastic_encoder(world, e).holds

    def test_constant_encoder_matches_support(self, world):
        check = check_stochastic_encoder(world, Encoder.constant(4))
        assert check.support_match
        assert not check.risk_minimal
        assert check.holds

    def test_near_deterministic_samples_approach_enumeration(self, world):
        rows = 0.9995 * np.eye(2)[[0, 1, 0, 1]] + 0.0005 * np.full((4, 2), 0.5)
        check = check_stochastic_encoder(world, Encoder(kernel=CondKernel(rows=rows)))
        assert check.idg_risk == pytest.approx(0.0, abs=1e-3)

    def test_sampler_is_seeded(self):
        a = [e.kernel.rows for e in sample_stochastic_encoders(4, 5, 3, 2)]
        b = [e.kernel.rows for e in sample_stochastic_encoders(4, 5, 3, 2)]
        for x, y in zip(a, b, strict=True):
            np.testing.assert_array_equal(x, y)

    @pytest.mark.parametrize("seed", range(5))
    def test_dpi_and_cmi(self, seed):
        w = random_world(seed, WorldSizes(n_domains=2, n_inputs=4, n_labels=3))
        for e in sample_stochastic_encoders(seed, 20, 4, 3):
            assert check_dpi(w, e).holds
        for e in enumerate_det_encoders(4, 2):
            assert check_cmi(w, e).holds
