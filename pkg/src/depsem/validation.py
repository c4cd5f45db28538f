"""Input validation helpers shared by the estimators."""

from typing import List, Optional, Sequence

from .deptree import Sentence
from .errors import InputError


def check_sentences(X, require_heads=False, require_targets=False) -> List[Sentence]:
    """Coerce ``X`` to a list of :class:`Sentence` and check required fields.

    Plain token lists are accepted and wrapped. Raises :class:`InputError`
    on an empty collection or a missing tree/target.
    """
    if X is None:
        raise InputError("expected a sequence of sentences, got None")
    out = []
    for i, s in enumerate(X):
        if not isinstance(s, Sentence):
            if isinstance(s, str):
                s = Sentence(s.split())
            else:
                s = Sentence(list(s))
        if len(s) == 0:
            raise InputError(f"sentence {i} has no tokens")
        if require_heads and s.heads is None:
            raise InputError(f"sentence {i} has no dependency tree")
        if require_targets and s.target is None:
            raise InputError(f"sentence {i} has no target logic form")
        out.append(s)
    if not out:
        raise InputError("expected at least one sentence")
    return out


def attach_targets(X: Sequence[Sentence], y: Optional[Sequence]) -> List[Sentence]:
    """Return sentences carrying targets from ``y`` (or their own when ``y`` is None)."""
    if y is None:
        return check_sentences(X, require_targets=True)
    sentences = check_sentences(X)
    y = list(y)
    if len(y) != len(sentences):
        raise InputError(f"{len(sentences)} sentences but {len(y)} targets")
    return [Sentence(s.tokens, s.heads, t.split() if isinstance(t, str) else list(t))
            for s, t in zip(sentences, y)]


def check_aligned(name: str, values, sentences) -> None:
    if values is not None and len(values) != len(sentences):
        raise InputError(f"{name}: {len(values)} entries for {len(sentences)} sentences")
