"""Synthetic utterance / dependency tree / logic form corpus.

Utterances follow one template family::

    list <noun> that <mod1> and <mod2> ... in <city>

and map to::

    ( lambda x ( and ( <pred> x ) ( eq x <city> ) ( <mod1> x ) ( <mod2> x ) ... ) )

Modifier order varies across examples and the conjuncts follow the utterance
order, so two utterances differing only in modifier order have targets that
are equal up to conjunct order. Trees come from fixed head rules: ``list`` is
the root, the noun and the city attach to it, modifiers attach to the noun,
``that``/``and`` attach to the following modifier, ``in`` attaches to the city.
"""

import json
import math
import os
import random
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .deptree import Sentence, read_conll, write_conll
from .errors import DataError, FormatError, SpecError

NOUNS = {
    "flights": "flight", "hotels": "hotel", "cars": "rental_car", "restaurants": "restaurant",
    "trains": "train", "buses": "bus", "tours": "tour", "museums": "museum",
}
CITIES = ("boston", "denver", "dallas", "seattle", "atlanta", "chicago", "miami", "phoenix",
          "oakland", "houston")
MODIFIERS = {
    "cheap": "cheap", "daily": "daily", "nonstop": "nonstop", "new": "new", "open": "open",
    "popular": "popular", "nearby": "nearby", "late": "late", "early": "early", "quiet": "quiet",
}

SPLITS = ("train", "dev", "test")


@dataclass
class GrammarSpec:
    seed: int = 0
    train: int = 500
    dev: int = 100
    test: int = 100
    min_modifiers: int = 1
    max_modifiers: int = 3
    nouns: Dict[str, str] = field(default_factory=lambda: dict(NOUNS))
    cities: Tuple[str, ...] = CITIES
    modifiers: Dict[str, str] = field(default_factory=lambda: dict(MODIFIERS))

    def validate(self) -> "GrammarSpec":
        for name in SPLITS:
            if getattr(self, name) < 1:
                raise SpecError(f"{name} count must be at least 1")
        if not 0 <= self.min_modifiers <= self.max_modifiers:
            raise SpecError("modifier range must satisfy 0 <= min_modifiers <= max_modifiers")
        if self.max_modifiers > len(self.modifiers):
            raise SpecError(f"max_modifiers={self.max_modifiers} exceeds the {len(self.modifiers)} modifiers")
        if not self.nouns or not self.cities:
            raise SpecError("nouns and cities must be non-empty")
        total = self.capacity()
        needed = self.train + self.dev + self.test
        if needed > total:
            raise SpecError(f"requested {needed} examples but the grammar has only {total} distinct utterances")
        return self

    def capacity(self) -> int:
        m = len(self.modifiers)
        orderings = sum(math.perm(m, k) for k in range(self.min_modifiers, self.max_modifiers + 1))
        return len(self.nouns) * len(self.cities) * orderings

    @classmethod
    def from_dict(cls, data: dict) -> "GrammarSpec":
        data = dict(data)
        data.pop("version", None)
        if "cities" in data:
            data["cities"] = tuple(data["cities"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise SpecError(f"bad grammar spec: {exc}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cities"] = list(self.cities)
        return d


def realize(spec: GrammarSpec, noun: str, mods: Sequence[str], city: str) -> Sentence:
    tokens = ["list", noun]
    heads = [0, 0]
    for j, mod in enumerate(mods):
        tokens.append("that" if j == 0 else "and")
        heads.append(len(tokens))
        tokens.append(mod)
        heads.append(1)
    tokens += ["in", city]
    heads += [len(tokens) - 1, 0]
    conj = ["(", spec.nouns[noun], "x", ")", "(", "eq", "x", city, ")"]
    for mod in mods:
        conj += ["(", spec.modifiers[mod], "x", ")"]
    target = ["(", "lambda", "x", "(", "and", *conj, ")", ")"]
    return Sentence(tokens, heads, target)


def generate(spec: GrammarSpec) -> Tuple[List[Sentence], List[Sentence], List[Sentence]]:
    """Draw disjoint train/dev/test splits; identical grammar settings always give identical data."""
    spec.validate()
    rng = random.Random(spec.seed)
    nouns = sorted(spec.nouns)
    mods = sorted(spec.modifiers)
    seen = set()
    drawn = []
    needed = spec.train + spec.dev + spec.test
    while len(drawn) < needed:
        k = rng.randint(spec.min_modifiers, spec.max_modifiers)
        key = (rng.choice(nouns), tuple(rng.sample(mods, k)), rng.choice(spec.cities))
        if key in seen:
            continue
        seen.add(key)
        drawn.append(realize(spec, *key))
    a = spec.train
    b = a + spec.dev
    return drawn[:a], drawn[a:b], drawn[b:]


def write_dataset(path, sentences: Sequence[Sentence], sources_only=False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            src = " ".join(s.tokens)
            if sources_only or s.target is None:
                fh.write(src + "\n")
            else:
                fh.write(src + "\t" + " ".join(s.target) + "\n")


def default_conll_path(path) -> str:
    root, _ = os.path.splitext(str(path))
    return root + ".conll"


def read_dataset(path, conll_path: Optional[str] = None, require_targets=False,
                 forbid_targets=False) -> List[Sentence]:
    """Load ``source<TAB>target`` lines, attaching trees from the companion CoNLL file.

    ``conll_path`` defaults to the dataset path with a ``.conll`` suffix and is
    optional when that file does not exist.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if "\t" in line:
            if forbid_targets:
                raise FormatError(f"{path}: gold target found in a sources-only file", lineno)
            src, tgt = line.split("\t", 1)
            rows.append((src.split(), tgt.split()))
        else:
            if require_targets:
                raise FormatError(f"{path}: missing target column", lineno)
            rows.append((line.split(), None))
    explicit = conll_path is not None
    conll_path = conll_path or default_conll_path(path)
    trees = None
    if os.path.exists(conll_path):
        trees = read_conll(conll_path)
    elif explicit:
        raise FileNotFoundError(f"tree file not found: {conll_path}")
    out = []
    if trees is not None and len(trees) != len(rows):
        raise DataError(f"{conll_path} holds {len(trees)} trees for {len(rows)} sentences in {path}")
    for i, (src, tgt) in enumerate(rows):
        heads = None
        if trees is not None:
            if list(trees[i].tokens) != src:
                raise DataError(f"tokens in {conll_path} do not match {path}", i)
            heads = trees[i].heads
        out.append(Sentence(src, heads, tgt))
    return out


def export(datasets, out_dir, test_sources=False) -> List[str]:
    """Write ``{split}.tsv`` and ``{split}.conll`` for each split; returns the paths.

    With ``test_sources`` a target-free ``test.src.tsv`` (plus trees) is added
    for transductive fine-tuning.
    """
    if isinstance(datasets, dict):
        named = [(name, datasets[name]) for name in SPLITS if name in datasets]
    else:
        named = list(zip(SPLITS, datasets))
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, sentences in named:
        tsv = os.path.join(out_dir, f"{name}.tsv")
        write_dataset(tsv, sentences)
        write_conll(default_conll_path(tsv), sentences)
        paths += [tsv, default_conll_path(tsv)]
    if test_sources:
        test = dict(named).get("test")
        if test is not None:
            tsv = os.path.join(out_dir, "test.src.tsv")
            write_dataset(tsv, test, sources_only=True)
            write_conll(default_conll_path(tsv), test)
            paths += [tsv, default_conll_path(tsv)]
    return paths


def load_exported(out_dir) -> Tuple[List[Sentence], List[Sentence], List[Sentence]]:
    return tuple(read_dataset(os.path.join(out_dir, f"{name}.tsv")) for name in SPLITS)


def load_spec(path) -> GrammarSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            return GrammarSpec.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})")
