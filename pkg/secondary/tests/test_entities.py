"""Entity encoding: one summary vector per retrieved entity."""

import numpy as np
import pytest

from ctxlm import EntityAttentionLM, MissingSumToken, ModelConfig


def make_model(vocab, **overrides):
    kw = dict(vocab_size=vocab.size, sum_token_id=vocab.sum_id, d_model=16,
              n_layers=2, block_size=32, max_entities=8, entity_char_cap=16,
              seed=7)
    kw.update(overrides)
    return EntityAttentionLM(ModelConfig(**kw))


def entity_seq(vocab, text):
    return vocab.encode(text + "[SUM]")


def test_no_entities_give_an_empty_matrix(toy_vocab):
    model = make_model(toy_vocab)
    out = model.encode_entities([])
    assert out.shape == (0, model.config.d_model)


def test_sum_token_reads_the_terminator_state(toy_vocab):
    model = make_model(toy_vocab)
    seq = entity_seq(toy_vocab, "#a\nbc(d)")
    vec = model.encode_entities([seq], mode="sum_token")[0]
    # The same sequence pushed through the plain causal pass must agree
    # at the terminator position.
    trace = model.trace_forward(seq, ())
    assert np.array_equal(vec, trace["layer_inputs"][-1][-1])


def test_mean_pool_averages_final_states(toy_vocab):
    model = make_model(toy_vocab)
    seq = toy_vocab.encode("ab(c)")
    vec = model.encode_entities([seq], mode="mean_pool")[0]
    trace = model.trace_forward(seq, ())
    assert np.allclose(vec, trace["layer_inputs"][-1].mean(axis=0),
                       rtol=0, atol=1e-12)


def test_mean_pool_of_single_token_is_its_state(toy_vocab):
    model = make_model(toy_vocab)
    seq = toy_vocab.encode("a")
    vec = model.encode_entities([seq], mode="mean_pool")[0]
    trace = model.trace_forward(seq, ())
    assert np.array_equal(vec, trace["layer_inputs"][-1][0])


def test_rows_follow_input_order(toy_vocab):
    model = make_model(toy_vocab)
    seqs = [entity_seq(toy_vocab, "#a\nb"), entity_seq(toy_vocab, "#c\nd.e")]
    both = model.encode_entities(seqs)
    assert both.shape == (2, model.config.d_model)
    for i, seq in enumerate(seqs):
        assert np.array_equal(both[i], model.encode_entities([seq])[0])


def test_sum_token_mode_requires_terminator(toy_vocab):
    model = make_model(toy_vocab)
    good = entity_seq(toy_vocab, "#a\nb")
    bad = toy_vocab.encode("#c\nd")
    with pytest.raises(MissingSumToken) as err:
        model.encode_entities([good, bad])
    assert err.value.index == 1


def test_mean_pool_mode_does_not_require_terminator(toy_vocab):
    model = make_model(toy_vocab, pooling="mean_pool")
    out = model.encode_entities([toy_vocab.encode("#c\nd")])
    assert out.shape == (1, model.config.d_model)


def test_mode_argument_overrides_config(toy_vocab):
    model = make_model(toy_vocab, pooling="sum_token")
    seq = entity_seq(toy_vocab, "#a\nb")
    by_sum = model.encode_entities([seq], mode="sum_token")[0]
    by_mean = model.encode_entities([seq], mode="mean_pool")[0]
    assert not np.array_equal(by_sum, by_mean)


def test_unknown_mode_rejected(toy_vocab):
    model = make_model(toy_vocab)
    with pytest.raises(ValueError):
        model.encode_entities([entity_seq(toy_vocab, "a")], mode="max_pool")


def test_final_state_memory_is_shared_across_layers(toy_vocab):
    model = make_model(toy_vocab, entity_states="final")
    mem = model.prepare_memory([entity_seq(toy_vocab, "#a\nb")])
    assert len(mem) == model.config.n_layers
    assert np.array_equal(mem[0], mem[1])
    assert np.array_equal(mem[0][0],
                          model.encode_entities(
                              [entity_seq(toy_vocab, "#a\nb")])[0])


def test_per_layer_memory_tracks_the_encoder_depth(toy_vocab):
    model = make_model(toy_vocab, entity_states="per_layer")
    seq = entity_seq(toy_vocab, "#a\nb")
    mem = model.prepare_memory([seq])
    trace = model.trace_forward(seq, ())
    assert len(mem) == model.config.n_layers
    assert not np.array_equal(mem[0], mem[1])
    # Layer l consumes the states that entered layer l of the encoding
    # pass: the summary position of each intermediate state matrix.
    for li in range(model.config.n_layers):
        assert np.array_equal(mem[li][0], trace["layer_inputs"][li][-1])


def test_memory_for_no_entities_is_empty_per_layer(toy_vocab):
    model = make_model(toy_vocab)
    mem = model.prepare_memory([])
    assert len(mem) == model.config.n_layers
    assert all(m.shape == (0, model.config.d_model) for m in mem)
