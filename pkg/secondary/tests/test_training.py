"""Training loop behavior: logging, determinism, persistence."""

import numpy as np
import pytest

from ctxlm import (Bundle, BundleError, EntityAttentionLM, ModelConfig,
                   ShapeMismatch, build_vocabulary, greedy_complete,
                   load_model, save_model, train_on_bundles)

from lm_helpers import toy_bundles


def small_config(vocab, seed=0):
    return ModelConfig(vocab_size=vocab.size, sum_token_id=vocab.sum_id,
                       d_model=16, n_layers=1, block_size=96, max_entities=4,
                       entity_char_cap=48, seed=seed)


def test_vocabulary_covers_the_corpus():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    for bundle in bundles:
        vocab.encode(bundle.in_file_prefix)
        vocab.encode(bundle.ground_truth)
        for body in bundle.entity_bodies:
            vocab.encode(body)


def test_losses_are_logged_per_step_and_windowed():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    seen = []
    model, log = train_on_bundles(bundles, small_config(vocab), vocab,
                                  steps=12, log_every=3,
                                  on_checkpoint=lambda s, l: seen.append((s, l)))
    assert len(log.step_losses) == 12
    assert all(np.isfinite(loss) for loss in log.step_losses)
    assert [step for step, _ in log.checkpoints] == [3, 6, 9, 12]
    for i, (step, mean_loss) in enumerate(log.checkpoints):
        window = log.step_losses[i * 3:(i + 1) * 3]
        assert mean_loss == pytest.approx(sum(window) / 3, rel=1e-12)
    assert seen == log.checkpoints


def test_default_window_is_one_pass_over_the_data():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    _, log = train_on_bundles(bundles, small_config(vocab), vocab,
                              steps=9, log_every=0)
    assert [step for step, _ in log.checkpoints] == [3, 6, 9]


def test_loss_improves_on_a_memorizable_corpus():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    _, log = train_on_bundles(bundles, small_config(vocab), vocab,
                              steps=60, log_every=12)
    losses = [loss for _, loss in log.checkpoints]
    assert losses[-1] < losses[0]


def test_two_runs_are_bitwise_identical():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    model_a, log_a = train_on_bundles(bundles, small_config(vocab), vocab,
                                      steps=8)
    model_b, log_b = train_on_bundles(bundles, small_config(vocab), vocab,
                                      steps=8)
    assert log_a.step_losses == log_b.step_losses
    for name in model_a.params:
        assert np.array_equal(model_a.params[name], model_b.params[name])


def test_seed_changes_the_run():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    _, log_a = train_on_bundles(bundles, small_config(vocab, seed=0), vocab,
                                steps=4)
    _, log_b = train_on_bundles(bundles, small_config(vocab, seed=1), vocab,
                                steps=4)
    assert log_a.step_losses != log_b.step_losses


def test_bundles_without_truth_are_skipped_for_training():
    bundles = toy_bundles()
    extra = Bundle(bundle_id="d.py:1:0", in_file_prefix="import lib\n",
                   entity_bodies=())
    vocab = build_vocabulary(bundles)
    _, log_with = train_on_bundles(bundles + [extra],
                                   small_config(vocab), vocab, steps=6)
    _, log_without = train_on_bundles(bundles, small_config(vocab), vocab,
                                      steps=6)
    assert log_with.step_losses == log_without.step_losses


def test_training_requires_some_ground_truth():
    bundle = Bundle(bundle_id="d.py:1:0", in_file_prefix="import lib\n",
                    entity_bodies=())
    vocab = build_vocabulary([bundle])
    with pytest.raises(BundleError):
        train_on_bundles([bundle], small_config(vocab), vocab, steps=4)


def test_training_rejects_nonpositive_steps():
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    with pytest.raises(ValueError):
        train_on_bundles(bundles, small_config(vocab), vocab, steps=0)


def test_checkpoint_round_trip(tmp_path):
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    model, _ = train_on_bundles(bundles, small_config(vocab), vocab, steps=6)
    path = tmp_path / "model.npz"
    save_model(path, model, vocab)
    loaded, loaded_vocab = load_model(path)
    assert loaded.config == model.config
    assert loaded_vocab == vocab
    for name in model.params:
        assert np.array_equal(loaded.params[name], model.params[name])
    probe = bundles[0]
    assert greedy_complete(loaded, loaded_vocab, probe, max_new_tokens=8) \
        == greedy_complete(model, vocab, probe, max_new_tokens=8)


def test_loaded_checkpoint_rejects_tampered_shapes(tmp_path):
    bundles = toy_bundles()
    vocab = build_vocabulary(bundles)
    model = EntityAttentionLM(small_config(vocab))
    path = tmp_path / "model.npz"
    save_model(path, model, vocab)
    loaded, _ = load_model(path)
    bad = dict(loaded.params)
    bad["lm_head"] = bad["lm_head"][:, :-1]
    with pytest.raises(ShapeMismatch):
        EntityAttentionLM(loaded.config, params=bad)
