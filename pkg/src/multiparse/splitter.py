"""Tokenization and enumeration of split operations over an utterance.

Four split sources are recognised:

* single-token conjunctions (``and``, ``then``, ``when`` ...), where a run of
  adjacent conjunctions such as ``and then`` is consumed as one anchor;
* ordered double-word pairs (``first ... then``);
* punctuation marks;
* coordination distribution, where a shared prefix/suffix is copied onto each
  coordinated element (``book a hotel and flight to NYC``).

Every function here is pure. Recursion over fragments is the tree's job.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence

from multiparse.text import normalize_for_comparison

DEFAULT_SINGLE_CONJUNCTIONS = frozenset(
    {"and", "then", "before", "after", "also", "plus", "if", "when"}
)
DEFAULT_DOUBLE_WORD_PAIRS = (("first", "then"), ("first", "second"), ("first", "after"))
DEFAULT_PUNCTUATION = frozenset({",", ".", ";", "?", "!"})
# Conjunctions that may coordinate two elements sharing context.
DEFAULT_COORDINATORS = frozenset({"and", "or", "plus"})

# Closed-class words that end a coordinated element.
PREPOSITIONS = frozenset(
    {
        "about", "at", "between", "by", "during", "for", "from", "in", "into",
        "near", "of", "on", "onto", "over", "through", "to", "under", "via",
        "with", "within", "without",
    }
)
DETERMINERS = frozenset({"a", "an", "the", "some", "another", "my", "our", "your"})


class TokenKind(str, Enum):
    WORD = "word"
    PUNCTUATION = "punctuation"


class SplitKind(str, Enum):
    SINGLE_CONJUNCTION = "single_conjunction"
    DOUBLE_WORD = "double_word"
    PUNCTUATION = "punctuation"
    DEPENDENCY = "dependency"

    @property
    def rank(self) -> int:
        return _KIND_RANK[self]


_KIND_RANK = {
    SplitKind.SINGLE_CONJUNCTION: 0,
    SplitKind.DOUBLE_WORD: 1,
    SplitKind.PUNCTUATION: 2,
    SplitKind.DEPENDENCY: 3,
}


@dataclass(frozen=True)
class Token:
    surface: str
    index: int
    kind: TokenKind
    # Position of the token in the root utterance it was derived from.
    origin: int = -1

    @property
    def is_word(self) -> bool:
        return self.kind is TokenKind.WORD

    @property
    def lower(self) -> str:
        return self.surface.lower()


@dataclass(frozen=True)
class Utterance:
    """A user event: verbatim text plus its token sequence."""

    text: str
    tokens: tuple[Token, ...]

    @classmethod
    def from_text(cls, text: str, punctuation: Iterable[str] = DEFAULT_PUNCTUATION) -> "Utterance":
        return cls(text, tokenize(text, punctuation))

    @classmethod
    def from_tokens(cls, tokens: Sequence[Token]) -> "Utterance":
        """Build a fragment from tokens, re-indexing from 0 and keeping origins."""
        reindexed = tuple(
            Token(t.surface, i, t.kind, t.origin if t.origin >= 0 else t.index)
            for i, t in enumerate(tokens)
        )
        return cls(render(reindexed), reindexed)

    @cached_property
    def normalized(self) -> str:
        return normalize_for_comparison(self.text)

    @property
    def words(self) -> list[Token]:
        return [t for t in self.tokens if t.is_word]

    @property
    def word_count(self) -> int:
        return sum(1 for t in self.tokens if t.is_word)

    @property
    def first_origin(self) -> int:
        return self.tokens[0].origin if self.tokens else -1

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SplitPoint:
    kind: SplitKind
    anchor_indices: tuple[int, ...]
    fragments: tuple[Utterance, ...]
    # Only populated for dependency splits: token indices copied into every
    # fragment, and the coordinated element carried by each fragment.
    shared_indices: tuple[int, ...] = ()
    element_indices: tuple[tuple[int, ...], ...] = ()

    @property
    def sort_key(self) -> tuple[int, int]:
        return (min(self.anchor_indices), self.kind.rank)


@dataclass(frozen=True)
class SplitConfig:
    single_conjunctions: frozenset = DEFAULT_SINGLE_CONJUNCTIONS
    double_word_pairs: tuple = DEFAULT_DOUBLE_WORD_PAIRS
    punctuation_marks: frozenset = DEFAULT_PUNCTUATION
    enable_dependency: bool = True
    min_fragment_words: int = 2
    coordinators: frozenset = DEFAULT_COORDINATORS

    def __post_init__(self):
        object.__setattr__(self, "single_conjunctions", frozenset(self.single_conjunctions))
        object.__setattr__(
            self, "double_word_pairs", tuple((a, b) for a, b in self.double_word_pairs)
        )
        object.__setattr__(self, "punctuation_marks", frozenset(self.punctuation_marks))
        object.__setattr__(self, "coordinators", frozenset(self.coordinators))
        words = set(self.single_conjunctions) | {w for pair in self.double_word_pairs for w in pair}
        words |= self.coordinators
        for word in words:
            if word != word.lower():
                raise ValueError(f"lexicon entries must be lowercase: {word!r}")
        for mark in self.punctuation_marks:
            if len(mark) != 1:
                raise ValueError(f"punctuation marks must be single characters: {mark!r}")
        if self.min_fragment_words < 1:
            raise ValueError("min_fragment_words must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SplitConfig":
        kwargs = {}
        if "single_conjunctions" in data:
            kwargs["single_conjunctions"] = frozenset(data["single_conjunctions"])
        if "double_word_pairs" in data:
            kwargs["double_word_pairs"] = tuple(tuple(p) for p in data["double_word_pairs"])
        if "punctuation_marks" in data:
            kwargs["punctuation_marks"] = frozenset(data["punctuation_marks"])
        if "enable_dependency" in data:
            kwargs["enable_dependency"] = bool(data["enable_dependency"])
        if "min_fragment_words" in data:
            kwargs["min_fragment_words"] = int(data["min_fragment_words"])
        if "coordinators" in data:
            kwargs["coordinators"] = frozenset(data["coordinators"])
        unknown = set(data) - {
            "single_conjunctions",
            "double_word_pairs",
            "punctuation_marks",
            "enable_dependency",
            "min_fragment_words",
            "coordinators",
        }
        if unknown:
            raise ValueError(f"unknown split config keys: {sorted(unknown)}")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "single_conjunctions": sorted(self.single_conjunctions),
            "double_word_pairs": [list(p) for p in self.double_word_pairs],
            "punctuation_marks": sorted(self.punctuation_marks),
            "enable_dependency": self.enable_dependency,
            "min_fragment_words": self.min_fragment_words,
            "coordinators": sorted(self.coordinators),
        }


DEFAULT_CONFIG = SplitConfig()


def tokenize(text: str, punctuation: Iterable[str] = DEFAULT_PUNCTUATION) -> tuple[Token, ...]:
    """Split on whitespace, peeling configured punctuation off word edges.

    >>> [t.surface for t in tokenize("Book a hotel and flight to NYC.")]
    ['Book', 'a', 'hotel', 'and', 'flight', 'to', 'NYC', '.']
    """
    marks = frozenset(punctuation)
    surfaces: list[tuple[str, TokenKind]] = []
    for chunk in text.split():
        start, end = 0, len(chunk)
        while start < end and chunk[start] in marks:
            start += 1
        while end > start and chunk[end - 1] in marks:
            end -= 1
        surfaces.extend((ch, TokenKind.PUNCTUATION) for ch in chunk[:start])
        if start < end:
            surfaces.append((chunk[start:end], TokenKind.WORD))
        surfaces.extend((ch, TokenKind.PUNCTUATION) for ch in chunk[end:])
    return tuple(Token(s, i, kind, i) for i, (s, kind) in enumerate(surfaces))


def render(tokens: Sequence[Token]) -> str:
    """Join tokens back into text, attaching punctuation to the preceding token."""
    parts: list[str] = []
    for tok in tokens:
        if parts and not tok.is_word:
            parts[-1] += tok.surface
        else:
            parts.append(tok.surface)
    return " ".join(parts)


def _fragment(tokens: Sequence[Token], indices: Iterable[int]) -> Utterance:
    return Utterance.from_tokens([tokens[i] for i in indices])


def _word_count(tokens: Sequence[Token], indices: Iterable[int]) -> int:
    return sum(1 for i in indices if tokens[i].is_word)


def _grow_over_punctuation(tokens: Sequence[Token], anchors: set[int]) -> set[int]:
    grown = set(anchors)
    for idx in anchors:
        j = idx - 1
        while j >= 0 and not tokens[j].is_word:
            grown.add(j)
            j -= 1
        j = idx + 1
        while j < len(tokens) and not tokens[j].is_word:
            grown.add(j)
            j += 1
    return grown


def _is_conj(tok: Token, cfg: SplitConfig) -> bool:
    return tok.is_word and tok.lower in cfg.single_conjunctions


def _two_way(
    kind: SplitKind,
    tokens: Sequence[Token],
    anchors: set[int],
    left: list[int],
    right: list[int],
    cfg: SplitConfig,
) -> Optional[SplitPoint]:
    if _word_count(tokens, left) < cfg.min_fragment_words:
        return None
    if _word_count(tokens, right) < cfg.min_fragment_words:
        return None
    return SplitPoint(
        kind,
        tuple(sorted(anchors)),
        (_fragment(tokens, left), _fragment(tokens, right)),
    )


def _conjunction_splits(u: Utterance, cfg: SplitConfig) -> list[SplitPoint]:
    tokens = u.tokens
    out = []
    i = 0
    while i < len(tokens):
        if not _is_conj(tokens[i], cfg):
            i += 1
            continue
        end = i
        while end + 1 < len(tokens) and _is_conj(tokens[end + 1], cfg):
            end += 1
        anchors = _grow_over_punctuation(tokens, set(range(i, end + 1)))
        lo, hi = min(anchors), max(anchors)
        sp = _two_way(
            SplitKind.SINGLE_CONJUNCTION,
            tokens,
            anchors,
            list(range(lo)),
            list(range(hi + 1, len(tokens))),
            cfg,
        )
        if sp is not None:
            out.append(sp)
        i = end + 1
    return out


def _gapped(tokens: Sequence[Token], first: list[int], second: list[int], anchors) -> Optional[SplitPoint]:
    """``first send an email and then a message``: copy the leading verb onto the
    determiner-initial second fragment."""
    first_words = [i for i in first if tokens[i].is_word]
    second_words = [i for i in second if tokens[i].is_word]
    if len(first_words) < 2 or not second_words:
        return None
    head = first_words[0]
    if tokens[head].lower in DETERMINERS or tokens[second_words[0]].lower not in DETERMINERS:
        return None
    rest = [i for i in first if i != head]
    return SplitPoint(
        SplitKind.DEPENDENCY,
        tuple(sorted(anchors)),
        (_fragment(tokens, first), _fragment(tokens, [head, *second])),
        shared_indices=(head,),
        element_indices=(tuple(rest), tuple(second)),
    )


def _double_word_splits(u: Utterance, cfg: SplitConfig) -> list[SplitPoint]:
    tokens = u.tokens
    lowers = [t.lower if t.is_word else None for t in tokens]
    out = []
    for a, b in cfg.double_word_pairs:
        for i, word in enumerate(lowers):
            if word != a:
                continue
            for j in range(i + 1, len(tokens)):
                if lowers[j] != b:
                    continue
                anchors = {i, j}
                # "and then": conjunctions directly before the second anchor go with it.
                k = j - 1
                while k > i and (not tokens[k].is_word or _is_conj(tokens[k], cfg)):
                    anchors.add(k)
                    k -= 1
                anchors = _grow_over_punctuation(tokens, anchors)
                first = [x for x in range(j) if x not in anchors]
                second = [x for x in range(j + 1, len(tokens)) if x not in anchors]
                sp = _two_way(SplitKind.DOUBLE_WORD, tokens, anchors, first, second, cfg)
                if sp is None:
                    continue
                out.append(sp)
                if cfg.enable_dependency:
                    gap = _gapped(tokens, first, second, sp.anchor_indices)
                    if gap is not None:
                        out.append(gap)
    return out


def apply_punctuation_split(
    u: Utterance, mark_index: int, cfg: SplitConfig = DEFAULT_CONFIG
) -> SplitPoint:
    """Split at the punctuation run containing ``mark_index``.

    Raises ValueError when the token is not a configured mark or when either
    side would hold fewer than ``cfg.min_fragment_words`` words.
    """
    tokens = u.tokens
    if not 0 <= mark_index < len(tokens):
        raise ValueError(f"mark index {mark_index} out of range")
    tok = tokens[mark_index]
    if tok.is_word or tok.surface not in cfg.punctuation_marks:
        raise ValueError(f"token {tok.surface!r} is not a configured punctuation mark")
    anchors = _grow_over_punctuation(tokens, {mark_index})
    lo, hi = min(anchors), max(anchors)
    left = list(range(lo))
    right = list(range(hi + 1, len(tokens)))
    if not any(tokens[i].is_word for i in right):
        raise ValueError("punctuation mark has no right fragment")
    if not any(tokens[i].is_word for i in left):
        raise ValueError("punctuation mark has no left fragment")
    sp = _two_way(SplitKind.PUNCTUATION, tokens, anchors, left, right, cfg)
    if sp is None:
        raise ValueError(
            f"punctuation split leaves a fragment under {cfg.min_fragment_words} words"
        )
    return sp


def _punctuation_splits(u: Utterance, cfg: SplitConfig) -> list[SplitPoint]:
    tokens = u.tokens
    out = []
    i = 0
    while i < len(tokens):
        if tokens[i].is_word or tokens[i].surface not in cfg.punctuation_marks:
            i += 1
            continue
        try:
            out.append(apply_punctuation_split(u, i, cfg))
        except ValueError:
            pass
        while i < len(tokens) and not tokens[i].is_word:
            i += 1
    return out


def _element_word(tok: Token, cfg: SplitConfig) -> bool:
    return (
        tok.is_word
        and tok.lower not in cfg.single_conjunctions
        and tok.lower not in PREPOSITIONS
    )


def distribute_coordination(
    u: Utterance, conj_index: int, cfg: SplitConfig = DEFAULT_CONFIG
) -> Optional[SplitPoint]:
    """Distribute shared context over ``prefix N1 conj N2 suffix``.

    N1 and N2 are runs of one or two words adjacent to the conjunction; N2 ends
    at a preposition, conjunction, punctuation mark or the end of the text.
    ``conj_index`` must point at one of ``cfg.coordinators``. Returns None
    when the pattern does not match.
    """
    tokens = u.tokens
    if not (0 <= conj_index < len(tokens)) or tokens[conj_index].lower not in cfg.coordinators:
        raise ValueError(f"token {conj_index} is not a coordinating conjunction")
    right = []
    j = conj_index + 1
    while j < len(tokens) and _element_word(tokens[j], cfg) and len(right) <= 2:
        right.append(j)
        j += 1
    if not 1 <= len(right) <= 2:
        return None
    if all(tokens[i].lower in DETERMINERS for i in right):
        return None
    left = list(range(conj_index - len(right), conj_index))
    if not left or left[0] < 0 or not all(_element_word(tokens[i], cfg) for i in left):
        return None
    right_det = tokens[right[0]].lower in DETERMINERS
    left_det = tokens[left[0]].lower in DETERMINERS
    if right_det and not left_det:
        return None
    if left_det and not right_det:
        if len(left) == 1:
            return None
        left = left[1:]
    prefix = list(range(left[0]))
    if not any(tokens[i].is_word for i in prefix):
        return None
    if any(_is_conj(tokens[i], cfg) for i in prefix):
        return None
    suffix = list(range(right[-1] + 1, len(tokens)))
    fragments = (_fragment(tokens, prefix + left + suffix), _fragment(tokens, prefix + right + suffix))
    if min(f.word_count for f in fragments) < cfg.min_fragment_words:
        return None
    return SplitPoint(
        SplitKind.DEPENDENCY,
        (conj_index,),
        fragments,
        shared_indices=tuple(prefix + suffix),
        element_indices=(tuple(left), tuple(right)),
    )


def find_split_points(u: Utterance, cfg: SplitConfig = DEFAULT_CONFIG) -> list[SplitPoint]:
    """Every split applicable to ``u``, each applied once, ordered left to right.

    Ties on the first anchor index are broken by kind: single conjunction,
    double word, punctuation, dependency.
    """
    splits = _conjunction_splits(u, cfg)
    splits += _double_word_splits(u, cfg)
    splits += _punctuation_splits(u, cfg)
    if cfg.enable_dependency:
        for i, tok in enumerate(u.tokens):
            if tok.is_word and tok.lower in cfg.coordinators:
                sp = distribute_coordination(u, i, cfg)
                if sp is not None:
                    splits.append(sp)
    splits.sort(key=lambda sp: sp.sort_key)
    return splits
