import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from depsem.errors import DataError, InputError, LogicParseError
from depsem.metrics import (LogicTree, canonicalize, corpus_exact, corpus_tree, exact_match, parse_logic,
                            score_report, serialize, tree_match)


def toks(s):
    return s.split()


def test_parse_examples():
    assert parse_logic(["city"]) == LogicTree("city")
    assert parse_logic(toks("( and a b )")) == LogicTree("and", (LogicTree("a"), LogicTree("b")))
    with pytest.raises(LogicParseError):
        parse_logic(toks("( and a"))
    with pytest.raises(LogicParseError):
        parse_logic(toks("a )"))
    with pytest.raises(LogicParseError):
        parse_logic([])


def test_multiple_top_level_expressions_share_a_root():
    tree = parse_logic(toks("( f x ) y"))
    assert len(tree.children) == 2
    assert serialize(tree) == toks("( f x ) y")


def test_canonicalize_examples():
    assert canonicalize(parse_logic(toks("( and b a )"))).key() == "and(a,b)"
    assert canonicalize(parse_logic(toks("( and ( or d c ) a )"))).key() == "and(a,or(c,d))"
    assert canonicalize(parse_logic(toks("( f b a )"))).key() == "f(b,a)"


def test_exact_match_examples():
    assert exact_match(toks("( and a b )"), toks("( and a b )"))
    assert not exact_match(toks("( and a b )"), toks("( and b a )"))


def test_tree_match_examples():
    assert tree_match(toks("( and a b )"), toks("( and b a )"))
    assert not tree_match(toks("( f a b )"), toks("( f b a )"))
    assert not tree_match(toks("( and a"), toks("( and a b )"))
    with pytest.raises(DataError):
        tree_match(toks("a"), toks("( and a"))


def test_reversed_conjuncts_score_tree_only():
    report = score_report([toks("( and b a )")], [toks("( and a b )")])
    assert report["exact_match"] == 0.0 and report["tree_match"] == 100.0


def test_corpus_errors():
    with pytest.raises(InputError):
        corpus_exact([], [])
    with pytest.raises(InputError):
        corpus_tree([["a"]], [])


def test_gold_as_prediction_scores_full_marks():
    golds = [toks("( lambda x ( and ( f x ) ( g x ) ) )"), toks("( h y )")]
    report = score_report(golds, golds)
    assert report["exact_match"] == 100.0 and report["tree_match"] == 100.0
    assert [r["id"] for r in report["per_sentence"]] == [0, 1]


def test_empty_outputs_score_zero():
    golds = [toks("( f x )"), toks("y")]
    assert corpus_exact([[], []], golds) == 0.0
    assert corpus_tree([[], []], golds) == 0.0
    assert corpus_exact([[]], [[]]) == 100.0


atoms = st.sampled_from(["a", "b", "c", "x", "city"])


def trees(depth=3):
    return st.recursive(
        atoms.map(LogicTree),
        lambda kids: st.builds(LogicTree, st.sampled_from(["and", "or", "f", "eq"]),
                               st.lists(kids, min_size=1, max_size=3).map(tuple)),
        max_leaves=8,
    )


def shuffle_commutative(tree, rng):
    kids = [shuffle_commutative(c, rng) for c in tree.children]
    if tree.label in ("and", "or"):
        rng.shuffle(kids)
    return LogicTree(tree.label, kids)


@given(trees(), st.integers(0, 10 ** 6))
def test_commutative_permutations_always_tree_match(tree, seed):
    gold = serialize(tree)
    pred = serialize(shuffle_commutative(tree, random.Random(seed)))
    assert tree_match(pred, gold)
    assert parse_logic(gold) == tree


@given(trees(), trees())
def test_exact_implies_tree_and_corpus_ordering(a, b):
    pa, pb = serialize(a), serialize(b)
    if exact_match(pa, pb):
        assert tree_match(pa, pb)
    preds, golds = [pa, pb, pa], [pb, pb, pa]
    assert corpus_tree(preds, golds) >= corpus_exact(preds, golds)


@given(trees())
def test_canonicalize_is_idempotent(tree):
    once = canonicalize(tree)
    assert canonicalize(once) == once
