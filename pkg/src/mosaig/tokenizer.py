"""Caption token accounting.

The 77-token caption budget exists because the scoring model's text encoder
caps its input length, so the budget must be measured with a tokenizer the
scorer agrees with.  The tokenizer is pluggable; the default is a simple
deterministic word/punctuation splitter that over-counts relative to BPE
vocabularies, keeping the budget conservative.
"""

from __future__ import annotations

import re
from typing import Protocol


class Tokenizer(Protocol):
    name: str

    def count(self, text: str) -> int: ...

    def truncate(self, text: str, max_tokens: int) -> str: ...


_TOKEN_RE = re.compile(r"\w+(?:[-']\w+)*|[^\w\s]", re.UNICODE)


class SimpleTokenizer:
    """Splits on words (hyphen/apostrophe compounds kept) and punctuation."""

    name = "simple/v1"

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in _TOKEN_RE.finditer(text)]

    def count(self, text: str) -> int:
        return len(self.spans(text))

    def truncate(self, text: str, max_tokens: int) -> str:
        """Cut at a token boundary so the result has exactly min(count, max) tokens."""
        spans = self.spans(text)
        if len(spans) <= max_tokens:
            return text
        end = spans[max_tokens - 1][1]
        return text[:end]


DEFAULT_TOKENIZER = SimpleTokenizer()
