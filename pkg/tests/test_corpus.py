import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sentorder.corpus import (
    CorpusFormatError,
    Document,
    EmbeddingTable,
    Sentence,
    SyntheticSpec,
    Vocabulary,
    bow_matrix,
    build_vocab,
    embed_batch,
    embed_sentence,
    featurize_bow,
    generate_synthetic_corpus,
    load_corpus,
    load_embeddings,
    make_document,
    shuffle_document,
    tokenize,
    write_corpus,
)


def sent(*tokens):
    return Sentence(tuple(tokens))


# -- tokenize -------------------------------------------------------------------

@pytest.mark.parametrize(
    "text, tokens",
    [
        ("We propose a model.", ("we", "propose", "a", "model", ".")),
        ("A", ("a",)),
        ('"Hello," she said.', ('"', "hello", ",", '"', "she", "said", ".")),
        ("(e.g. this)", ("(", "e.g", ".", "this", ")")),
        ("x-ray  TESTS\tpass!?", ("x-ray", "tests", "pass", "!", "?")),
    ],
)
def test_tokenize(text, tokens):
    assert tokenize(text).tokens == tokens


@pytest.mark.parametrize("text", ["", "  ", "\n\t"])
def test_tokenize_rejects_blank(text):
    with pytest.raises(ValueError, match="empty"):
        tokenize(text)


def test_tokenize_is_lowercase_and_deterministic():
    a = tokenize("MiXeD Case, Text.")
    assert a == tokenize("MiXeD Case, Text.")
    assert all(t == t.lower() for t in a.tokens)


# -- vocabulary -----------------------------------------------------------------

def corpus_of(*sentences):
    return [Document("d", tuple(sent(*s) for s in sentences))]


def test_vocab_counts_by_hand():
    docs = corpus_of(["a"] * 5 + ["b"] * 3 + ["c"])
    vocab = build_vocab(docs, (2, 0, 0))
    assert vocab.unigrams == {"a": 0, "b": 1}


def test_vocab_zero_sizes_is_empty():
    vocab = build_vocab(corpus_of(["a", "b"]), (0, 0, 0))
    assert len(vocab) == 0
    assert featurize_bow(sent("a", "b"), vocab) == {}


def test_vocab_ties_keep_lexicographically_smaller():
    vocab = build_vocab(corpus_of(["zz", "aa", "mm"]), (2, 0, 0))
    assert vocab.unigrams == {"aa": 0, "mm": 1}


def test_vocab_truncates_to_available():
    vocab = build_vocab(corpus_of(["a", "b"]), (10, 10, 10))
    assert vocab.sizes == (2, 1, 0)


def test_vocab_ngrams_do_not_cross_sentences():
    vocab = build_vocab(corpus_of(["a", "b"], ["c", "d"]), (0, 10, 0))
    assert set(vocab.bigrams) == {"a b", "c d"}


def test_vocab_rejects_bad_input():
    with pytest.raises(ValueError):
        build_vocab([], (1, 1, 1))
    with pytest.raises(ValueError):
        build_vocab(corpus_of(["a"]), (-1, 0, 0))


def test_vocab_round_trip_and_determinism():
    docs = generate_synthetic_corpus(SyntheticSpec(num_docs=30), seed=2)
    v1 = build_vocab(docs, (40, 30, 20))
    v2 = build_vocab(list(docs), (40, 30, 20))
    assert v1 == v2
    assert Vocabulary.from_dict(json.loads(json.dumps(v1.to_dict()))) == v1


# -- bag of n-grams -------------------------------------------------------------

def test_featurize_unigram_counts():
    vocab = build_vocab(corpus_of(["a", "a", "b"]), (2, 0, 0))
    assert featurize_bow(sent("a", "b", "a"), vocab) == {0: 2, 1: 1}


def test_featurize_disjoint_is_zero():
    vocab = build_vocab(corpus_of(["a", "b"]), (2, 1, 0))
    assert featurize_bow(sent("x", "y"), vocab) == {}
    assert bow_matrix([sent("x")], vocab).sum() == 0


def test_featurize_includes_bigram():
    vocab = build_vocab(corpus_of(["a", "b"]), (0, 1, 0))
    assert featurize_bow(sent("a", "b"), vocab) == {0: 1}


def test_bow_sum_equals_in_vocab_occurrences():
    docs = generate_synthetic_corpus(SyntheticSpec(num_docs=40), seed=3)
    vocab = build_vocab(docs[:20], (30, 20, 10))
    for doc in docs[20:]:
        for s in doc.sentences:
            expected = 0
            for n, table in enumerate(vocab.maps()):
                grams = [" ".join(s.tokens[i : i + n + 1]) for i in range(len(s) - n)]
                expected += sum(g in table for g in grams)
            assert sum(featurize_bow(s, vocab).values()) == expected


# -- embeddings -----------------------------------------------------------------

def test_embed_pads_with_zero_rows():
    table = EmbeddingTable.random(["a", "b"], 3, seed=0)
    m = embed_sentence(sent("a", "b"), table, max_len=4)
    assert m.shape == (4, 3)
    np.testing.assert_array_equal(m[0], table.lookup("a"))
    np.testing.assert_array_equal(m[1], table.lookup("b"))
    assert not m[2:].any()


def test_embed_truncates_at_max_len():
    tokens = [f"t{i}" for i in range(70)]
    table = EmbeddingTable.random(tokens, 2, seed=0)
    m = embed_sentence(Sentence(tuple(tokens)), table, max_len=64)
    assert m.shape == (64, 2)
    np.testing.assert_array_equal(m[63], table.lookup("t63"))


def test_oov_policies():
    zeros = EmbeddingTable(2, {}, oov_policy="zeros")
    assert not embed_sentence(sent("nope"), zeros, max_len=1).any()
    rand = EmbeddingTable(2, {}, oov_policy="random", seed=4)
    v = rand.lookup("nope")
    assert v.any()
    np.testing.assert_array_equal(v, EmbeddingTable(2, {}, oov_policy="random", seed=4).lookup("nope"))


def test_embed_batch_uses_true_lengths():
    table = EmbeddingTable.random(["a", "b", "c"], 2)
    x, lengths = embed_batch([sent("a"), sent("a", "b", "c")], table, max_len=2)
    assert x.shape == (2, 2, 2)
    assert lengths.tolist() == [1, 2]
    assert not x[0, 1].any()


def test_random_vectors_depend_only_on_seed_and_token():
    a = EmbeddingTable.random(["x", "y"], 4, seed=9)
    b = EmbeddingTable.random(["y", "z", "x"], 4, seed=9)
    np.testing.assert_array_equal(a.lookup("x"), b.lookup("x"))


# -- shuffling ------------------------------------------------------------------

def doc_of(n):
    return make_document(f"doc{n}", [f"sentence {i}." for i in range(n)])


def test_shuffle_single_sentence():
    assert shuffle_document(doc_of(1), 3).perm == (0,)


def test_shuffle_deterministic_per_seed():
    d = doc_of(6)
    assert shuffle_document(d, 11) == shuffle_document(d, 11)


@pytest.mark.parametrize(
    "seed, expected",
    [
        # default_rng(7) draws j=2 at i=2 then j=1 at i=1: no swaps
        (7, (0, 1, 2)),
        # default_rng(12345) draws j=2 at i=2 then j=0 at i=1: swap slots 0 and 1
        (12345, (1, 0, 2)),
    ],
)
def test_shuffle_fisher_yates_trace(seed, expected):
    assert shuffle_document(doc_of(3), seed).perm == expected


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_unshuffle_round_trip(n, seed):
    d = doc_of(n)
    inst = shuffle_document(d, seed)
    assert inst.unshuffle() == d
    assert [inst.perm[k] for k in inst.gold_order()] == list(range(n))


def test_shuffle_is_roughly_uniform():
    d = doc_of(3)
    counts = Counter(shuffle_document(d, s).perm for s in range(6000))
    assert len(counts) == 6
    assert all(800 < c < 1200 for c in counts.values())


# -- synthetic corpora ----------------------------------------------------------

def test_synthetic_empty():
    assert generate_synthetic_corpus(SyntheticSpec(num_docs=0)) == []


@pytest.mark.parametrize(
    "kwargs",
    [{"len_range": (0, 3)}, {"len_range": (5, 17)}, {"len_range": (4, 3)}, {"marker_noise": 1.5}],
)
def test_synthetic_rejects_bad_spec(kwargs):
    with pytest.raises(ValueError):
        generate_synthetic_corpus(SyntheticSpec(num_docs=1, **kwargs))


def test_synthetic_markers_present():
    docs = generate_synthetic_corpus(SyntheticSpec(num_docs=300, len_range=(1, 12)), seed=5)
    hits = Counter()
    totals = Counter()
    for doc in docs:
        for p, s in enumerate(doc.sentences):
            totals[p] += 1
            hits[p] += f"p{p}" in s.tokens
    for p in totals:
        assert hits[p] / totals[p] >= 0.95


def test_synthetic_marker_lookup_orders_perfectly():
    docs = generate_synthetic_corpus(SyntheticSpec(num_docs=100), seed=6)
    for i, doc in enumerate(docs):
        inst = shuffle_document(doc, i)
        key = [next(int(t[1:]) for t in s.tokens if t.startswith("p")) for s in inst.shuffled]
        order = sorted(range(len(inst)), key=key.__getitem__)
        assert order == inst.gold_order()


def test_synthetic_is_reproducible():
    spec = SyntheticSpec(num_docs=50, context_signal=True, transition_signal=True, link_noise=0.2)
    a = generate_synthetic_corpus(spec, seed=1)
    assert a == generate_synthetic_corpus(spec, seed=1)
    assert a != generate_synthetic_corpus(spec, seed=2)


def test_context_signal_roles_depend_on_topic():
    spec = SyntheticSpec(num_docs=200, positional_signal=False, context_signal=True)
    for doc in generate_synthetic_corpus(spec, seed=0):
        toks = [t for s in doc.sentences for t in s.tokens]
        topic = [t for t in toks if t in ("t0", "t1")]
        assert len(topic) == 1
        n = len(doc)
        for p, s in enumerate(doc.sentences):
            role = p if topic[0] == "t0" else n - 1 - p
            assert f"r{role}" in s.tokens
            assert not any(t.startswith("p") for t in s.tokens)


# -- file formats ---------------------------------------------------------------

def test_corpus_round_trip(tmp_path):
    docs = generate_synthetic_corpus(SyntheticSpec(num_docs=20), seed=7)
    write_corpus(docs, tmp_path / "c.jsonl")
    assert load_corpus(tmp_path / "c.jsonl") == docs


@pytest.mark.parametrize(
    "lines, needle",
    [
        (['{"id": "a", "sentences": ["x."]}', "{oops"], ":2: malformed JSON"),
        (['{"sentences": ["x."]}'], ":1: expected an object"),
        (['{"id": "a", "sentences": []}'], ":1: 'sentences' must be a non-empty list"),
        (['{"id": "a", "sentences": ["x."]}', '{"id": "a", "sentences": ["y."]}'], ":2: duplicate document id"),
        (['{"id": "a", "sentences": ["  "]}'], ":1:"),
    ],
)
def test_load_corpus_errors(tmp_path, lines, needle):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusFormatError, match=needle):
        load_corpus(path)


def test_load_embeddings(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("2 3\nfoo 0.1 0.2 0.3\nbar 1 2 3\n")
    table = load_embeddings(path)
    assert table.dim == 3
    np.testing.assert_array_equal(table.lookup("bar"), [1.0, 2.0, 3.0])


@pytest.mark.parametrize(
    "text, needle",
    [
        ("2 3\nfoo 0.1 0.2 0.3\nbar 1 2\n", ":3:"),
        ("2 3\nfoo 1 2 3\nfoo 1 2 3\n", "duplicate token"),
        ("3 3\nfoo 1 2 3\n", "declares 3 rows"),
        ("3\n", ":1: header"),
        ("1 2\nfoo a b\n", ":2: non-numeric"),
    ],
)
def test_load_embeddings_errors(tmp_path, text, needle):
    path = tmp_path / "e.txt"
    path.write_text(text)
    with pytest.raises(CorpusFormatError, match=needle):
        load_embeddings(path)
