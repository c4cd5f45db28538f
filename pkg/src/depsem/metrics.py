"""Exact Match and Tree Match over parenthesized logic forms.

A logic form is a token sequence such as ``( lambda x ( and ( f x ) ( g x ) ) )``.
The first token of each group is the node label, the rest are its children.
Tree Match compares trees after sorting the arguments of commutative
operators, so reordered conjuncts still count as a match.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import DataError, InputError, LogicParseError

DEFAULT_COMMUTATIVE = frozenset({"and", "or"})
ROOT_LABEL = "<root>"


@dataclass(frozen=True)
class LogicTree:
    label: str
    children: Tuple["LogicTree", ...] = ()

    def __post_init__(self):
        if not self.label:
            raise ValueError("logic tree labels must be non-empty")
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def key(self) -> str:
        """Functional-notation rendering, e.g. ``and(a,or(c,d))``; used for ordering."""
        if not self.children:
            return self.label
        return f"{self.label}({','.join(c.key() for c in self.children)})"


def _parse_expr(tokens, pos):
    tok = tokens[pos]
    if tok == ")":
        raise LogicParseError("unexpected ')'", pos)
    if tok != "(":
        return LogicTree(tok), pos + 1
    if pos + 1 >= len(tokens):
        raise LogicParseError("unbalanced '(' at end of input", pos)
    label = tokens[pos + 1]
    if label == ")":
        raise LogicParseError("empty group", pos)
    if label == "(":
        raise LogicParseError("group label must be an atom", pos + 1)
    children = []
    i = pos + 2
    while True:
        if i >= len(tokens):
            raise LogicParseError("unbalanced '('", pos)
        if tokens[i] == ")":
            return LogicTree(label, children), i + 1
        child, i = _parse_expr(tokens, i)
        children.append(child)


def parse_logic(tokens: Sequence[str]) -> LogicTree:
    """Build a :class:`LogicTree`; several top-level expressions share a virtual root."""
    tokens = list(tokens)
    if not tokens:
        raise LogicParseError("empty logic form", 0)
    exprs = []
    pos = 0
    while pos < len(tokens):
        expr, pos = _parse_expr(tokens, pos)
        exprs.append(expr)
    if len(exprs) == 1:
        return exprs[0]
    return LogicTree(ROOT_LABEL, exprs)


def serialize(tree: LogicTree) -> List[str]:
    if tree.label == ROOT_LABEL:
        return [tok for child in tree.children for tok in serialize(child)]
    if tree.is_leaf:
        return [tree.label]
    out = ["(", tree.label]
    for child in tree.children:
        out.extend(serialize(child))
    out.append(")")
    return out


def canonicalize(tree: LogicTree, commutative: Iterable[str] = DEFAULT_COMMUTATIVE) -> LogicTree:
    commutative = frozenset(commutative)
    children = [canonicalize(c, commutative) for c in tree.children]
    if tree.label in commutative:
        children.sort(key=LogicTree.key)
    return LogicTree(tree.label, children)


def _tokens(x) -> List[str]:
    return x.split() if isinstance(x, str) else list(x)


def exact_match(pred: Sequence[str], gold: Sequence[str]) -> bool:
    return _tokens(pred) == _tokens(gold)


def tree_match(pred: Sequence[str], gold: Sequence[str], commutative: Iterable[str] = DEFAULT_COMMUTATIVE) -> bool:
    """Structural equality after canonicalization; an unparseable prediction is a miss."""
    try:
        gold_tree = parse_logic(_tokens(gold))
    except LogicParseError as exc:
        raise DataError(f"gold logic form is malformed: {exc}")
    try:
        pred_tree = parse_logic(_tokens(pred))
    except LogicParseError:
        return False
    return canonicalize(pred_tree, commutative) == canonicalize(gold_tree, commutative)


def _check_corpus(preds, golds):
    if len(preds) != len(golds):
        raise InputError(f"{len(preds)} predictions for {len(golds)} gold forms")
    if not golds:
        raise InputError("empty corpus")


def corpus_exact(preds: Sequence, golds: Sequence) -> float:
    _check_corpus(preds, golds)
    return 100.0 * sum(exact_match(p, g) for p, g in zip(preds, golds)) / len(golds)


def corpus_tree(preds: Sequence, golds: Sequence, commutative: Iterable[str] = DEFAULT_COMMUTATIVE) -> float:
    _check_corpus(preds, golds)
    hits = sum(exact_match(p, g) or tree_match(p, g, commutative) for p, g in zip(preds, golds))
    return 100.0 * hits / len(golds)


def score_report(preds: Sequence, golds: Sequence, ids: Optional[Sequence] = None,
                 commutative: Iterable[str] = DEFAULT_COMMUTATIVE) -> dict:
    """Scoring report: corpus percentages plus one entry per sentence."""
    _check_corpus(preds, golds)
    ids = list(range(len(golds))) if ids is None else list(ids)
    rows = []
    for i, p, g in zip(ids, preds, golds):
        exact = exact_match(p, g)
        rows.append({"id": i, "exact": exact, "tree": exact or tree_match(p, g, commutative)})
    n = len(rows)
    return {
        "exact_match": 100.0 * sum(r["exact"] for r in rows) / n,
        "tree_match": 100.0 * sum(r["tree"] for r in rows) / n,
        "per_sentence": rows,
    }
