import math

import numpy as np
import pytest

from vulnvec.contexts import FunctionRecord, PathContext, Vocabulary
from vulnvec.embedding import (
    CodeVector,
    TrainConfig,
    attention_pool,
    corpus_loss,
    embed_context,
    embed_contexts,
    export_code_vector,
    model_from_bytes,
    model_to_bytes,
    name_vocab_of,
    new_model,
    predict_name,
    train_embeddings,
    training_accuracy,
)
from vulnvec.errors import DimensionMismatch, EmptyBag, EmptyCorpus, NonFiniteLoss


def tiny_model(dim_token=1, dim_path=1, dim_code=2, tokens=3, paths=2, names=3):
    cfg = TrainConfig(dim_token=dim_token, dim_path=dim_path, dim_code=dim_code, seed=5)
    return new_model(tokens, paths, names, cfg, names=["<unk>", "a", "b"][:names])


def zero_model(**kw):
    model = tiny_model(**kw)
    model.token_table[:] = 0
    model.path_table[:] = 0
    model.combine_weights[:] = 0
    model.attention_vector[:] = 0
    model.name_output[:] = 0
    return model


def make_record(contexts, rid="r", name="fn", module="m"):
    return FunctionRecord(
        id=rid,
        module_id=module,
        name_tokens=[name],
        contexts=[PathContext(*c) for c in contexts],
        source_sha="0" * 64,
    )


def random_corpus(n_functions, n_names, vocab_tokens, vocab_paths, seed, ctx_lo=3, ctx_hi=12):
    rng = np.random.default_rng(seed)
    tok, pat = Vocabulary(), Vocabulary()
    for t in range(vocab_tokens):
        tok.intern(f"tok{t}")
    for p in range(vocab_paths):
        pat.intern(f"path{p}")
    corpus = []
    for i in range(n_functions):
        n_ctx = int(rng.integers(ctx_lo, ctx_hi))
        contexts = [
            (int(rng.integers(1, vocab_tokens + 1)), int(rng.integers(1, vocab_paths + 1)),
             int(rng.integers(1, vocab_tokens + 1)))
            for _ in range(n_ctx)
        ]
        corpus.append(make_record(contexts, rid=f"fn{i}", name=f"name{i % n_names}"))
    return corpus, tok, pat


# -- context embedding ---------------------------------------------------------


def test_zero_model_embeds_to_zero_vector():
    model = zero_model()
    out = embed_context(PathContext(1, 1, 1), model)
    assert np.array_equal(out, np.zeros(2))


def test_unk_triple_is_deterministic():
    model = tiny_model()
    first = embed_context(PathContext(0, 0, 0), model)
    second = embed_context(PathContext(0, 0, 0), model)
    assert np.array_equal(first, second)
    assert np.all(np.abs(first) < 1.0)


def test_embed_context_matches_hand_computed_tanh():
    model = zero_model()
    model.token_table = np.array([[0.0], [0.5], [-0.25]])
    model.path_table = np.array([[0.0], [0.25]])
    model.combine_weights = np.array([[1.0, 2.0, 3.0], [-1.0, 0.0, 1.0]])
    # x = [0.5, 0.25, 0.5]; W x = [0.5 + 0.5 + 1.5, -0.5 + 0.5] = [2.5, 0.0]
    out = embed_context(PathContext(1, 1, 1), model)
    assert out == pytest.approx([math.tanh(2.5), 0.0], abs=1e-12)


# -- attention pooling -----------------------------------------------------------


def test_single_context_gets_weight_one():
    model = tiny_model()
    c = embed_contexts([PathContext(1, 1, 1)], model)
    pooled, weights = attention_pool(c, model)
    assert weights.weights == pytest.approx([1.0])
    assert pooled.values == pytest.approx(c[0])


def test_identical_contexts_split_weight_evenly():
    model = tiny_model()
    c = embed_contexts([PathContext(1, 1, 1), PathContext(1, 1, 1)], model)
    _, weights = attention_pool(c, model)
    assert weights.weights == pytest.approx([0.5, 0.5])


def test_attention_matches_hand_softmax_of_three():
    model = zero_model()
    model.attention_vector = np.array([1.0, -1.0])
    vectors = np.array([[0.3, 0.1], [0.0, 0.4], [-0.2, 0.2]])
    dots = [0.3 - 0.1, 0.0 - 0.4, -0.2 - 0.2]
    exps = [math.exp(d) for d in dots]
    expected = [x / sum(exps) for x in exps]
    pooled, weights = attention_pool(vectors, model)
    assert weights.weights == pytest.approx(expected, abs=1e-9)
    hand_pooled = [
        sum(expected[i] * vectors[i][j] for i in range(3)) for j in range(2)
    ]
    assert pooled.values == pytest.approx(hand_pooled, abs=1e-12)


def test_empty_bag_raises():
    model = tiny_model()
    with pytest.raises(EmptyBag):
        attention_pool(np.zeros((0, 2)), model)
    with pytest.raises(EmptyBag):
        embed_contexts([], model)


def test_attention_weights_are_distribution_on_random_bags():
    model = tiny_model(dim_code=6, dim_token=3, dim_path=2)
    rng = np.random.default_rng(0)
    for _ in range(50):
        vectors = rng.normal(size=(int(rng.integers(1, 40)), 6))
        _, weights = attention_pool(vectors, model)
        w = weights.weights
        assert np.all(w >= 0) and np.all(w <= 1)
        assert abs(w.sum() - 1.0) < 1e-6


# -- name prediction -------------------------------------------------------------


def test_zero_everything_gives_uniform_name_distribution():
    model = zero_model(names=3)
    dist = predict_name(CodeVector(np.zeros(2), model.version), model)
    assert dist == pytest.approx([1 / 3] * 3)


def test_name_distribution_sums_to_one():
    model = tiny_model(names=3)
    rng = np.random.default_rng(1)
    for _ in range(20):
        dist = predict_name(CodeVector(rng.normal(size=2), model.version), model)
        assert abs(dist.sum() - 1.0) < 1e-6


def test_five_name_hand_softmax():
    model = zero_model(names=5)
    model.name_output = np.array(
        [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0], [0.5, -0.5]]
    )
    v = np.array([0.2, -0.4])
    logits = [0.2, -0.4, -0.2, -0.2, 0.3]
    exps = [math.exp(x) for x in logits]
    expected = [x / sum(exps) for x in exps]
    dist = predict_name(CodeVector(v, model.version), model)
    assert dist == pytest.approx(expected, abs=1e-9)


def test_dimension_mismatch_raises():
    model = tiny_model()
    with pytest.raises(DimensionMismatch):
        predict_name(CodeVector(np.zeros(7), model.version), model)


# -- export ----------------------------------------------------------------------


def test_duplicate_records_export_identical_vectors():
    model = tiny_model()
    contexts = [(1, 1, 2), (2, 1, 1)]
    v1 = export_code_vector(make_record(contexts, "a"), model)
    v2 = export_code_vector(make_record(contexts, "b"), model)
    assert np.array_equal(v1.values, v2.values)


def test_export_shape_and_finiteness():
    model = tiny_model(dim_code=4, dim_token=2, dim_path=2)
    record = make_record([(1, 1, 1), (2, 1, 2), (0, 0, 0)])
    vec = export_code_vector(record, model)
    assert vec.values.shape == (4,)
    assert np.all(np.isfinite(vec.values))
    assert vec.model_version == model.version


def test_export_equals_manual_embed_then_pool():
    model = tiny_model()
    record = make_record([(1, 1, 2), (2, 0, 1)])
    manual, _ = attention_pool(embed_contexts(record.contexts, model), model)
    assert export_code_vector(record, model).values == pytest.approx(manual.values)


def test_export_is_permutation_invariant():
    model = tiny_model(dim_code=5, dim_token=3, dim_path=3, tokens=9, paths=7)
    rng = np.random.default_rng(3)
    contexts = [
        (int(rng.integers(0, 9)), int(rng.integers(0, 7)), int(rng.integers(0, 9)))
        for _ in range(15)
    ]
    base = export_code_vector(make_record(contexts), model).values
    for _ in range(5):
        perm = list(rng.permutation(len(contexts)))
        shuffled = [contexts[i] for i in perm]
        out = export_code_vector(make_record(shuffled), model).values
        assert out == pytest.approx(base, abs=1e-9)


# -- gradients --------------------------------------------------------------------


def collect_params(model):
    return {
        "token_table": model.token_table,
        "path_table": model.path_table,
        "combine_weights": model.combine_weights,
        "attention_vector": model.attention_vector,
        "name_output": model.name_output,
    }


def analytic_corpus_grads(model, corpus, targets):
    from vulnvec.embedding import _context_arrays, _forward_backward

    grads = {k: np.zeros_like(v) for k, v in collect_params(model).items()}
    for record, target in zip(corpus, targets):
        s, p, e = _context_arrays(record.contexts)
        _, g = _forward_backward(model, s, p, e, target)
        for k in grads:
            grads[k] += g[k]
    for k in grads:
        grads[k] /= len(corpus)
    return grads


def test_gradients_match_central_finite_differences():
    corpus, tok, pat = random_corpus(
        n_functions=2, n_names=2, vocab_tokens=4, vocab_paths=3, seed=11
    )
    cfg = TrainConfig(dim_token=4, dim_path=4, dim_code=4, seed=17)
    model = new_model(tok.size, pat.size, 3, cfg, names=["<unk>", "name0", "name1"])
    targets = [1 if r.name_tokens[0] == "name0" else 2 for r in corpus]

    analytic = analytic_corpus_grads(model, corpus, targets)
    params = collect_params(model)
    step = 1e-4
    worst = 0.0
    for key, param in params.items():
        flat = param.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            up = corpus_loss(model, corpus, targets)
            flat[idx] = original - step
            down = corpus_loss(model, corpus, targets)
            flat[idx] = original
            numeric = (up - down) / (2 * step)
            a = analytic[key].reshape(-1)[idx]
            denom = max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    assert worst < 1e-4


# -- training ---------------------------------------------------------------------


def test_training_is_bit_reproducible():
    corpus, tok, pat = random_corpus(8, 3, 10, 6, seed=23)
    cfg = TrainConfig(dim_token=6, dim_path=6, dim_code=6, epochs=5, seed=42,
                      learning_rate=0.05)
    first = train_embeddings(corpus, tok, pat, cfg)
    second = train_embeddings(corpus, tok, pat, cfg)
    assert first.loss_log == second.loss_log
    assert np.array_equal(first.model.combine_weights, second.model.combine_weights)
    assert np.array_equal(first.model.token_table, second.model.token_table)


def test_single_function_corpus_memorizes_its_name():
    corpus, tok, pat = random_corpus(1, 1, 5, 4, seed=2)
    cfg = TrainConfig(dim_token=8, dim_path=8, dim_code=8, epochs=60,
                      learning_rate=0.5, seed=1)
    result = train_embeddings(corpus, tok, pat, cfg)
    assert training_accuracy(result.model, corpus, name_vocab_of(result.model)) == 1.0


def test_loss_decreases_over_early_epochs():
    corpus, tok, pat = random_corpus(10, 3, 12, 8, seed=31)
    cfg = TrainConfig(dim_token=8, dim_path=8, dim_code=8, epochs=10,
                      learning_rate=0.1, seed=7)
    log = train_embeddings(corpus, tok, pat, cfg).loss_log
    monotone = all(b < a for a, b in zip(log, log[1:]))
    if not monotone:
        cfg_half = TrainConfig(dim_token=8, dim_path=8, dim_code=8, epochs=10,
                               learning_rate=0.05, seed=7)
        log = train_embeddings(corpus, tok, pat, cfg_half).loss_log
        monotone = all(b < a for a, b in zip(log, log[1:]))
    assert monotone


def test_empty_corpus_raises():
    with pytest.raises(EmptyCorpus):
        train_embeddings([], Vocabulary(), Vocabulary(), TrainConfig())


def test_oversized_context_bags_are_capped_and_deterministic():
    corpus, tok, pat = random_corpus(3, 2, 6, 4, seed=41, ctx_lo=240, ctx_hi=300)
    cfg = TrainConfig(dim_token=4, dim_path=4, dim_code=4, epochs=3, seed=5,
                      learning_rate=0.05, max_contexts_per_function=200)
    first = train_embeddings(corpus, tok, pat, cfg)
    second = train_embeddings(corpus, tok, pat, cfg)
    assert first.loss_log == second.loss_log
    assert np.all(np.isfinite(first.model.combine_weights))


def test_non_finite_loss_aborts_with_diagnostics():
    corpus, tok, pat = random_corpus(3, 2, 5, 4, seed=3)
    cfg = TrainConfig(dim_token=4, dim_path=4, dim_code=4, epochs=1, seed=0)
    poisoned = new_model(tok.size, pat.size, 3, cfg)
    poisoned.combine_weights[0, 0] = np.nan
    with pytest.raises(NonFiniteLoss):
        train_embeddings(corpus, tok, pat, cfg, init_model=poisoned)


# -- serialization ----------------------------------------------------------------


def test_model_bytes_round_trip_is_stable():
    corpus, tok, pat = random_corpus(4, 2, 6, 5, seed=9)
    cfg = TrainConfig(dim_token=5, dim_path=4, dim_code=6, epochs=2, seed=13)
    model = train_embeddings(corpus, tok, pat, cfg).model
    data = model_to_bytes(model)
    restored = model_from_bytes(data)
    assert model_to_bytes(restored) == data
    assert restored.version == model.version
    assert restored.names == model.names
    record = corpus[0]
    a = export_code_vector(record, model).values
    b = export_code_vector(record, restored).values
    assert a == pytest.approx(b, abs=1e-6)
