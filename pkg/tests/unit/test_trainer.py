"""Tests for the training loop, batching and run persistence."""

import numpy as np
import pytest

from idg_lab.learning.nets import Activation
from idg_lab.learning.objectives import BottleneckKind, BottleneckSpec, CriticSpec, ObjectiveKind, ObjectiveSpec
from idg_lab.learning.trainer import (
    TrainConfig,
    TrainResult,
    encode,
    load_result,
    make_batches,
    params_equal,
    train,
)
from idg_lab.theory.augmentation import RegimeKind
from idg_lab.utils.error_handler import InadmissibleParameterError, MissingArtifactError, ObjectiveConfigError

TINY = TrainConfig(hidden=[8], z_dim=2, epochs=2, batch_size=8, lr=1e-2, activation=Activation.TANH)


def with_objective(objective=ObjectiveKind.CE, kind=BottleneckKind.NONE, lam=0.0, **fields) -> TrainConfig:
    spec = ObjectiveSpec(
        objective=objective,
        bottleneck=BottleneckSpec(kind=kind, lam=lam),
        critic=CriticSpec(temperature=0.5),
    )
    return TINY.model_copy(update={"objective": spec, **fields})


class TestMakeBatches:
    def test_single_row_tail_is_merged(self):
        batches = make_batches(np.zeros(9, dtype=int), 4, False, np.random.default_rng(0))
        assert [b.size for b in batches] == [4, 5]
        assert sorted(np.concatenate(batches).tolist()) == list(range(9))

    def test_exact_split(self):
        batches = make_batches(np.zeros(8, dtype=int), 4, False, np.random.default_rng(0))
        assert [b.size for b in batches] == [4, 4]

    def test_stratified_batches_balance_domains(self):
        domains = np.repeat([0, 1], 8)
        for batch in make_batches(domains, 4, True, np.random.default_rng(1)):
            assert np.bincount(domains[batch], minlength=2).tolist() == [2, 2]

    def test_stratified_covers_every_row(self):
        domains = np.array([0, 0, 0, 1, 1, 2, 2, 2, 2, 2])
        batches = make_batches(domains, 3, True, np.random.default_rng(2))
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))


class TestTrain:
    def test_is_deterministic(self, small_dataset):
        first = train(small_dataset, TINY)
        second = train(small_dataset, TINY)
        assert params_equal(first.params, second.params)
        assert first.history == second.history

    def test_seed_matters(self, small_dataset):
        first = train(small_dataset, TINY)
        second = train(small_dataset, TINY.model_copy(update={"seed": 1}))
        assert not params_equal(first.params, second.params)

    def test_history_has_one_record_per_epoch(self, small_dataset):
        result = train(small_dataset, TINY)
        assert [r.epoch for r in result.history] == [0, 1]
        assert all(r.supp == 0.0 and r.total == r.aug for r in result.history)
        assert list(result.history_frame().columns) == ["epoch", "L_aug", "L_supp", "total"]

    @pytest.mark.parametrize("kind", [BottleneckKind.CAD, BottleneckKind.CCAD, BottleneckKind.ENT])
    def test_zero_weight_bottleneck_is_the_plain_run(self, small_dataset, kind):
        plain = train(small_dataset, with_objective(objective=ObjectiveKind.INFONCE))
        zero = train(small_dataset, with_objective(objective=ObjectiveKind.INFONCE, kind=kind))
        assert params_equal(plain.params, zero.params)
        assert plain.history == zero.history

    def test_cad_records_the_bottleneck(self, small_dataset):
        config = with_objective(ObjectiveKind.INFONCE, BottleneckKind.CAD, 1.0, regime=RegimeKind.STANDARD)
        result = train(small_dataset, config)
        assert all(r.supp > 0.0 for r in result.history)
        assert all(r.total == pytest.approx(r.aug + r.supp) for r in result.history)

    def test_mi_trains_a_stochastic_encoder(self, small_dataset):
        config = with_objective(ObjectiveKind.CE, BottleneckKind.MI, 0.1, stochastic=True)
        result = train(small_dataset, config)
        assert "prior/mu" in result.params
        assert result.params["enc/W1"].shape == (8, 4)

    def test_ccad_without_labels(self, small_dataset):
        config = with_objective(ObjectiveKind.INFONCE, BottleneckKind.CCAD, 1.0, regime=RegimeKind.STANDARD)
        with pytest.raises(ObjectiveConfigError):
            train(small_dataset, config)

    def test_ent_with_stochastic_encoder(self, small_dataset):
        with pytest.raises(ObjectiveConfigError):
            train(small_dataset, with_objective(ObjectiveKind.CE, BottleneckKind.ENT, 1.0, stochastic=True))

    def test_too_few_rows(self, small_dataset):
        with pytest.raises(InadmissibleParameterError):
            train(small_dataset, TINY.model_copy(update={"domains": [5]}))

    def test_domain_restriction(self, small_dataset):
        result = train(small_dataset, TINY.model_copy(update={"domains": [0]}))
        assert result.config.domains == [0]
        assert result.n_labels == small_dataset.n_labels


class TestPersistence:
    def test_round_trip(self, small_dataset, tmp_path):
        result = train(small_dataset, TINY)
        result.save(tmp_path / "run")
        loaded = load_result(tmp_path / "run")
        assert params_equal(loaded.params, result.params)
        assert loaded.history == result.history
        assert loaded.config == result.config
        assert loaded.optimizer is not None and loaded.optimizer.t == result.optimizer.t
        assert (tmp_path / "run" / "history.csv").exists()

    def test_missing_run(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_result(tmp_path / "nothing")

    def test_resume_of_a_finished_run_is_a_no_op(self, small_dataset, tmp_path):
        result = train(small_dataset, TINY)
        result.save(tmp_path / "run")
        resumed = train(small_dataset, TINY, resume=tmp_path / "run")
        assert params_equal(resumed.params, result.params)
        assert resumed.history == result.history

    def test_resume_continues_the_history(self, small_dataset, tmp_path):
        result = train(small_dataset, TINY)
        result.save(tmp_path / "run")
        longer = train(small_dataset, TINY.model_copy(update={"epochs": 4}), resume=tmp_path / "run")
        assert [r.epoch for r in longer.history] == [0, 1, 2, 3]
        assert longer.history[:2] == result.history
        assert not params_equal(longer.params, result.params)

    def test_resumed_runs_agree(self, small_dataset, tmp_path):
        train(small_dataset, TINY).save(tmp_path / "run")
        longer = TINY.model_copy(update={"epochs": 3})
        first = train(small_dataset, longer, resume=tmp_path / "run")
        second = train(small_dataset, longer, resume=tmp_path / "run")
        assert params_equal(first.params, second.params)


class TestEncode:
    def test_embeds_every_row(self, small_dataset):
        result = train(small_dataset, TINY)
        embedded = encode(result, small_dataset)
        assert embedded.features.shape == (len(small_dataset), 2)
        np.testing.assert_array_equal(embedded.labels, small_dataset.labels)

    def test_width_mismatch(self, small_dataset):
        result = train(small_dataset, TINY)
        narrow = small_dataset.with_features(small_dataset.features[:, :2])
        with pytest.raises(InadmissibleParameterError):
            encode(result, narrow)

    def test_saved_result_encodes_identically(self, small_dataset, tmp_path):
        result = train(small_dataset, TINY)
        result.save(tmp_path / "run")
        loaded = TrainResult.load(tmp_path / "run")
        np.testing.assert_array_equal(encode(loaded, small_dataset).features, encode(result, small_dataset).features)
