import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vulnvec.contexts import FunctionRecord, PathContext
from vulnvec.errors import EmptyCorpus
from vulnvec.ranker import (
    ContextFrequencyTable,
    FilterBounds,
    build_frequency_table,
    filter_contexts,
)

from .oracles import filter_by_comprehension, recount_context_frequencies


def record_with(contexts, rid="r", module="m"):
    return FunctionRecord(
        id=rid,
        module_id=module,
        name_tokens=["f"],
        contexts=[PathContext(*c) for c in contexts],
        source_sha="0" * 64,
    )


def random_corpus(seed, n_functions=50, vocab=12):
    rng = random.Random(seed)
    corpus = []
    for i in range(n_functions):
        contexts = [
            (rng.randrange(vocab), rng.randrange(vocab), rng.randrange(vocab))
            for _ in range(rng.randrange(1, 25))
        ]
        corpus.append(record_with(contexts, rid=f"fn{i}", module=f"mod{i % 5}"))
    return corpus


def test_count_sums_across_functions():
    ctx = (1, 2, 3)
    corpus = [record_with([ctx], "a"), record_with([ctx], "b")]
    table = build_frequency_table(corpus)
    assert table.count(PathContext(*ctx)) == 2
    assert table.total_functions == 2


def test_duplicate_context_in_one_function_counts_twice():
    corpus = [record_with([(1, 1, 1), (1, 1, 1)])]
    table = build_frequency_table(corpus)
    assert table.count(PathContext(1, 1, 1)) == 2


def test_empty_corpus_raises():
    with pytest.raises(EmptyCorpus):
        build_frequency_table([])


def test_table_matches_flat_recount_oracle():
    corpus = random_corpus(seed=7)
    table = build_frequency_table(corpus)
    oracle = recount_context_frequencies(corpus)
    assert {tuple(k): v for k, v in table.counts.items()} == dict(oracle)


def test_filter_direct_rule():
    counts = {
        PathContext(1, 1, 1): 5,
        PathContext(2, 2, 2): 1,
        PathContext(3, 3, 3): 100,
    }
    table = ContextFrequencyTable(counts=counts, total_functions=3)
    record = record_with([(1, 1, 1), (2, 2, 2), (3, 3, 3)])
    out = filter_contexts(record, table, FilterBounds(2, 50))
    assert out.contexts == [PathContext(1, 1, 1)]


def test_identity_bounds_leave_record_unchanged():
    corpus = random_corpus(seed=3)
    table = build_frequency_table(corpus)
    bounds = FilterBounds(1, 10**9)
    for record in corpus:
        assert filter_contexts(record, table, bounds).contexts == record.contexts


def test_filter_matches_comprehension_oracle_on_random_bounds():
    corpus = random_corpus(seed=11)
    table = build_frequency_table(corpus)
    counts = {tuple(k): v for k, v in table.counts.items()}
    rng = random.Random(99)
    for _ in range(5):
        lo = rng.randrange(1, 6)
        hi = lo + rng.randrange(0, 30)
        bounds = FilterBounds(lo, hi)
        for record in corpus:
            expected = filter_by_comprehension(record.contexts, counts, lo, hi)
            got = filter_contexts(record, table, bounds).contexts
            assert [tuple(c) for c in got] == [tuple(c) for c in expected]


def test_zero_survivors_returns_empty_list():
    table = ContextFrequencyTable(counts={PathContext(1, 1, 1): 1}, total_functions=1)
    record = record_with([(1, 1, 1)])
    out = filter_contexts(record, table, FilterBounds(2, 5))
    assert out.contexts == []
    assert out.id == record.id


def test_filter_is_idempotent():
    corpus = random_corpus(seed=5)
    table = build_frequency_table(corpus)
    bounds = FilterBounds(2, 30)
    for record in corpus:
        once = filter_contexts(record, table, bounds)
        twice = filter_contexts(once, table, bounds)
        assert twice.contexts == once.contexts


@settings(max_examples=30, deadline=None)
@given(
    lo=st.integers(min_value=1, max_value=6),
    extra=st.integers(min_value=0, max_value=20),
    widen=st.integers(min_value=1, max_value=10),
)
def test_widening_bounds_is_monotone(lo, extra, widen):
    corpus = random_corpus(seed=13)
    table = build_frequency_table(corpus)
    narrow = FilterBounds(lo + 1, lo + 1 + extra)
    wide = FilterBounds(max(1, lo + 1 - widen), lo + 1 + extra + widen)
    for record in corpus[:10]:
        kept_narrow = set(filter_contexts(record, table, narrow).contexts)
        kept_wide = set(filter_contexts(record, table, wide).contexts)
        assert kept_narrow <= kept_wide


def test_invalid_bounds_rejected():
    with pytest.raises(ValueError):
        FilterBounds(0, 5)
    with pytest.raises(ValueError):
        FilterBounds(6, 5)


def test_frequency_table_round_trip():
    corpus = random_corpus(seed=21)
    table = build_frequency_table(corpus)
    restored = ContextFrequencyTable.from_jsonl(table.to_jsonl())
    assert restored.counts == table.counts
    assert restored.total_functions == table.total_functions
