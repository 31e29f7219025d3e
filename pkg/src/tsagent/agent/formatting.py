"""Checks on the final two-paragraph morphology answer."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

SHORT_PREFIX = "In the short term,"
LONG_PREFIX = "In the long term,"
MAX_WORDS = 300  # exclusive
SENTENCE_RANGE = (3, 5)

_PARA_SPLIT = re.compile(r"\n[ \t]*\n")
# sentence ends at . ! or ? followed by whitespace or end of text
_SENT_SPLIT = re.compile(r"(?<=[.!?])(?:\s+|$)")
_TIMESTAMP = re.compile(r"\b\d{4}-\d{2}-\d{2}(?:[ T]\d{2}:\d{2}(?::\d{2})?)?\b|\b\d{1,2}:\d{2}(?::\d{2})?\b")
_NUMERAL = re.compile(r"\d")


@dataclass(frozen=True)
class FormatReport:
    paragraph_count: int
    prefixes_ok: bool
    word_count: int
    sentence_counts: tuple[int, ...]
    forbidden_content_flags: tuple[str, ...] = ()
    reasons: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.reasons

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "paragraph_count": self.paragraph_count,
            "prefixes_ok": self.prefixes_ok,
            "word_count": self.word_count,
            "sentence_counts": list(self.sentence_counts),
            "forbidden_content_flags": list(self.forbidden_content_flags),
            "verdict": self.verdict,
            "reasons": list(self.reasons),
        }


def split_paragraphs(text: str) -> list[str]:
    return [p.strip() for p in _PARA_SPLIT.split(text.strip()) if p.strip()]


def count_sentences(paragraph: str) -> int:
    return sum(1 for s in _SENT_SPLIT.split(paragraph.strip()) if s.strip())


def validate_final_format(text: str | None) -> FormatReport:
    text = text or ""
    paras = split_paragraphs(text)
    words = len(text.split())
    sentences = tuple(count_sentences(p) for p in paras)
    prefixes_ok = len(paras) == 2 and paras[0].startswith(SHORT_PREFIX) and paras[1].startswith(LONG_PREFIX)

    reasons = []
    if len(paras) != 2:
        reasons.append(f"expected 2 paragraphs, found {len(paras)}")
    if not prefixes_ok:
        reasons.append("paragraphs must open with the short-term and long-term prefixes")
    if words >= MAX_WORDS:
        reasons.append(f"{words} words, limit is under {MAX_WORDS}")
    lo, hi = SENTENCE_RANGE
    for i, n in enumerate(sentences, 1):
        if not lo <= n <= hi:
            reasons.append(f"paragraph {i} has {n} sentences, want {lo}-{hi}")

    flags = []
    if _TIMESTAMP.search(text):
        flags.append("timestamp")
    if _NUMERAL.search(text):
        flags.append("numeral")
    return FormatReport(len(paras), prefixes_ok, words, sentences, tuple(flags), tuple(reasons))
