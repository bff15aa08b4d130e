import math

import numpy as np
import pytest

from vulnvec.embedding import TrainConfig, train_embeddings
from vulnvec.errors import CoincidentVectors, UnknownFunction
from vulnvec.feedback import (
    AdjustmentConfig,
    VoteStore,
    apply_feedback,
    apply_incremental_vote,
    incremental_step,
    read_overlays,
    warm_start_retrain,
    write_overlays,
)

from .test_embedding import random_corpus


def test_zero_votes_is_bit_identical():
    v = np.array([0.125, -0.5, 3.0])
    out = apply_feedback(v, np.array([1.0, 1.0, 1.0]), "+", 0)
    assert np.array_equal(out, v)
    assert out is not v


def test_moved_distance_follows_log_law_when_uncapped():
    cfg = AdjustmentConfig(alpha=0.1, guard=0.9)
    v = np.zeros(3)
    target = np.array([10.0, 0.0, 0.0])  # huge gap: the guard never binds
    for votes in (1, 5, 50):
        moved = np.linalg.norm(apply_feedback(v, target, "+", votes, cfg) - v)
        assert moved == pytest.approx(0.1 * math.log1p(votes), abs=1e-9)


def test_spec_arithmetic_alpha_times_ln_e():
    # votes = e - 1 makes ln(1 + votes) = 1, so the move is exactly alpha.
    cfg = AdjustmentConfig(alpha=0.1)
    v = np.array([0.0, 0.0])
    target = np.array([1.0, 0.0])
    votes = math.e - 1
    out = apply_feedback(v, target, "+", votes, cfg)
    assert np.linalg.norm(out - v) == pytest.approx(0.1, abs=1e-9)


def test_huge_vote_count_capped_by_guard():
    cfg = AdjustmentConfig(alpha=0.5, guard=0.9)
    v = np.array([0.0, 0.0])
    target = np.array([0.2, 0.0])
    out = apply_feedback(v, target, "+", 10_000, cfg)
    moved = np.linalg.norm(out - v)
    assert moved == pytest.approx(0.9 * 0.2, abs=1e-12)
    # Never passes the target.
    assert np.linalg.norm(target - out) > 0.0
    assert out[0] < target[0]


def test_repeated_positive_votes_converge_without_overshoot():
    cfg = AdjustmentConfig(alpha=0.2, guard=0.9)
    rng = np.random.default_rng(3)
    v = rng.normal(size=4)
    target = rng.normal(size=4) * 3.0
    gap = np.linalg.norm(target - v)
    for n in range(1, 40):
        v, _ = apply_incremental_vote(v, target, "+", n, cfg)
        new_gap = np.linalg.norm(target - v)
        assert new_gap < gap
        assert new_gap > 0.0
        gap = new_gap


def test_negative_votes_strictly_diverge():
    cfg = AdjustmentConfig(alpha=0.05)
    v = np.array([1.0, 1.0])
    target = np.array([2.0, 2.0])
    gap = np.linalg.norm(target - v)
    for n in range(1, 20):
        v, moved = apply_incremental_vote(v, target, "-", n, cfg)
        new_gap = np.linalg.norm(target - v)
        assert new_gap > gap
        assert moved == pytest.approx(0.05 * (math.log1p(n) - math.log(n)), abs=1e-12)
        gap = new_gap


def test_incremental_steps_accumulate_to_log_law():
    cfg = AdjustmentConfig(alpha=0.05, guard=1.0)
    total = sum(incremental_step(n, cfg) for n in range(1, 51))
    assert total == pytest.approx(0.05 * math.log1p(50), abs=1e-12)


def test_first_incremental_vote_is_alpha_ln_two():
    cfg = AdjustmentConfig(alpha=0.05)
    assert incremental_step(1, cfg) == pytest.approx(0.05 * math.log(2.0), abs=1e-12)


def test_coincident_vectors_error():
    v = np.array([1.0, 2.0])
    with pytest.raises(CoincidentVectors):
        apply_feedback(v, v.copy(), "+", 3)


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        AdjustmentConfig(alpha=0.0)
    with pytest.raises(ValueError):
        AdjustmentConfig(guard=0.0)
    with pytest.raises(ValueError):
        AdjustmentConfig(guard=1.5)


# -- vote store -----------------------------------------------------------------


def test_first_vote_counts_one():
    store = VoteStore(known_ids={"a", "b"})
    assert store.record_vote("a", "b", "+", timestamp=1.0) == 1


def test_votes_accumulate_per_key():
    store = VoteStore(known_ids={"a", "b"})
    store.record_vote("a", "b", "+", timestamp=1.0)
    store.record_vote("a", "b", "+", timestamp=2.0)
    assert store.record_vote("a", "b", "+", timestamp=3.0) == 3
    assert store.count("a", "b", "-") == 0


def test_unknown_function_rejected():
    store = VoteStore(known_ids={"a"})
    with pytest.raises(UnknownFunction):
        store.record_vote("a", "ghost", "+")


def test_replaying_log_reconstructs_counts_exactly():
    store = VoteStore(known_ids={"a", "b", "c"})
    store.record_vote("a", "b", "+", timestamp=1.0)
    store.record_vote("a", "b", "+", timestamp=2.0)
    store.record_vote("a", "c", "-", timestamp=3.0)
    store.record_vote("b", "c", "+", timestamp=4.0)
    replayed = VoteStore.from_jsonl(store.to_jsonl())
    assert replayed.counts == store.counts
    assert replayed.events == store.events


def test_vote_summary():
    store = VoteStore()
    store.record_vote("a", "b", "+", timestamp=1.0)
    store.record_vote("a", "b", "+", timestamp=2.0)
    store.record_vote("c", "a", "-", timestamp=3.0)
    assert store.summary_for("a") == {"given": 2, "received": 1}


# -- warm start -------------------------------------------------------------------


def test_zero_epoch_retrain_is_bit_exact_with_bumped_version():
    corpus, tok, pat = random_corpus(6, 2, 8, 5, seed=51)
    cfg = TrainConfig(dim_token=5, dim_path=5, dim_code=5, epochs=4, seed=3,
                      learning_rate=0.05)
    base = train_embeddings(corpus, tok, pat, cfg).model
    frozen_cfg = TrainConfig(dim_token=5, dim_path=5, dim_code=5, epochs=0, seed=3)
    result = warm_start_retrain(base, corpus, tok, pat, frozen_cfg)
    assert result.model.version == "v2"
    assert np.array_equal(result.model.token_table, base.token_table)
    assert np.array_equal(result.model.path_table, base.path_table)
    assert np.array_equal(result.model.combine_weights, base.combine_weights)
    assert np.array_equal(result.model.attention_vector, base.attention_vector)
    assert np.array_equal(result.model.name_output, base.name_output)


def test_epoch_zero_loss_continues_previous_final_loss():
    corpus, tok, pat = random_corpus(6, 2, 8, 5, seed=52)
    cfg = TrainConfig(dim_token=5, dim_path=5, dim_code=5, epochs=6, seed=4,
                      learning_rate=0.05)
    first = train_embeddings(corpus, tok, pat, cfg)
    resumed = warm_start_retrain(
        first.model, corpus, tok, pat,
        TrainConfig(dim_token=5, dim_path=5, dim_code=5, epochs=2, seed=4,
                    learning_rate=0.05),
    )
    assert resumed.loss_log[0] == pytest.approx(first.loss_log[-1], abs=1e-6)


def test_vocab_growth_keeps_old_rows_exactly():
    corpus, tok, pat = random_corpus(6, 2, 8, 5, seed=53)
    cfg = TrainConfig(dim_token=5, dim_path=5, dim_code=5, epochs=3, seed=5,
                      learning_rate=0.05)
    base = train_embeddings(corpus, tok, pat, cfg).model
    old_token_rows = base.token_table.copy()
    old_path_rows = base.path_table.copy()
    tok.intern("brand_new_token")
    pat.intern("brand_new_path")
    grown = warm_start_retrain(
        base, corpus, tok, pat,
        TrainConfig(dim_token=5, dim_path=5, dim_code=5, epochs=0, seed=5),
    ).model
    assert grown.token_table.shape[0] == old_token_rows.shape[0] + 1
    assert np.array_equal(grown.token_table[: old_token_rows.shape[0]], old_token_rows)
    assert np.array_equal(grown.path_table[: old_path_rows.shape[0]], old_path_rows)


def test_version_bumps_chain():
    corpus, tok, pat = random_corpus(4, 2, 6, 4, seed=54)
    cfg = TrainConfig(dim_token=4, dim_path=4, dim_code=4, epochs=0, seed=6)
    base = train_embeddings(corpus, tok, pat, TrainConfig(
        dim_token=4, dim_path=4, dim_code=4, epochs=1, seed=6, learning_rate=0.05
    )).model
    second = warm_start_retrain(base, corpus, tok, pat, cfg).model
    third = warm_start_retrain(second, corpus, tok, pat, cfg).model
    assert (base.version, second.version, third.version) == ("v1", "v2", "v3")


# -- overlays ---------------------------------------------------------------------


def test_overlay_round_trip_and_version_filter():
    overlays = {"f1": np.array([1.0, 2.0]), "f2": np.array([-0.5, 0.25])}
    text = write_overlays(overlays, "v1")
    same = read_overlays(text, "v1")
    assert set(same) == {"f1", "f2"}
    assert np.array_equal(same["f1"], overlays["f1"])
    assert read_overlays(text, "v2") == {}
