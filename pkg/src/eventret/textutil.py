"""Tokenization, sentence splitting, and stopword handling.

English text is split on whitespace and punctuation; CJK text is split into
single characters. Both scripts can be mixed in one document.
"""

from __future__ import annotations

import re

_CJK = "㐀-䶿一-鿿豈-﫿"

# One CJK character, a digit run, or a Latin-ish word (apostrophes kept inside).
_TOKEN_RE = re.compile(rf"[{_CJK}]|\d+|[^\W\d_{_CJK}]+(?:'[^\W\d_{_CJK}]+)*")

_SENTENCE_SPLIT_RE = re.compile(r"[.!?。！？\n]+")

_ASIDE_RE = re.compile(r"\([^)]*\)|\[[^\]]*\]|（[^）]*）|【[^】]*】")

EN_STOPWORDS = frozenset(
    """a an the of to in on at and or is was are were be been being it its this
    that these those he she they we you i his her their our your as by for with
    from but not no yes if then than there here have has had do does did will
    would can could may might shall should into over under about after before
    when while where which who whom whose what why how all any each very s t
    because therefore thus hence since consequently so accordingly""".split()
)

ZH_STOPWORDS = frozenset(
    "的了是在和就不都也很到要会着这那与或及其即之于把被让向从但因为所以因此于是而且并且"
)

STOPWORDS = EN_STOPWORDS | ZH_STOPWORDS

# Cue words that mark the sentence they open as the effect of the previous one.
CAUSAL_CUES = (
    "because",
    "therefore",
    "so",
    "thus",
    "hence",
    "since",
    "consequently",
    "accordingly",
    "因为",  # 因为
    "所以",  # 所以
    "因此",  # 因此
    "于是",  # 于是
)


def is_cjk(token: str) -> bool:
    return len(token) == 1 and bool(re.match(rf"[{_CJK}]", token))


def tokenize(text: str, lowercase: bool = False) -> list[str]:
    """Split text into word tokens (CJK characters count as one token each)."""
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


def split_sentences(text: str) -> list[str]:
    """Split on sentence terminators (ASCII and CJK) and newlines."""
    return [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]


def strip_asides(text: str) -> str:
    """Remove bracketed asides and collapse the leftover whitespace."""
    return " ".join(_ASIDE_RE.sub(" ", text).split())


def content_tokens(text: str) -> list[str]:
    """Lowercased tokens minus stopwords, with bigrams over adjacent CJK chars.

    Underscores and hyphens act as separators so taxonomy node names such as
    "Change_tool" contribute their parts.
    """
    raw = tokenize(text.replace("_", " ").replace("-", " "), lowercase=True)
    out = [t for t in raw if t not in STOPWORDS]
    for a, b in zip(raw, raw[1:]):
        if is_cjk(a) and is_cjk(b):
            out.append(a + b)
    return out


def first_content_token(text: str) -> str | None:
    """First non-stopword token; falls back to the first token of any kind."""
    tokens = tokenize(text)
    for tok in tokens:
        if tok.lower() not in STOPWORDS:
            return tok
    return tokens[0] if tokens else None


def begins_with_cue(sentence: str) -> bool:
    """True when the sentence opens with a causal cue word."""
    lead = sentence.lstrip(" \t\"'“‘,，")
    lowered = lead.lower()
    for cue in CAUSAL_CUES:
        if not lowered.startswith(cue):
            continue
        rest = lead[len(cue):]
        if is_cjk(cue[0]) or not rest or not rest[0].isalnum():
            return True
    return False
