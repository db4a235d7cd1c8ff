"""Tokenizers shared by budgeting, metrics and prompt assembly.

Two views of source text live here:

* a flat budget tokenizer (``TokenizerProfile``) used when counting prompt
  tokens, where the ``[SUM]`` terminator must count as a single token, and
* a structural scanner that classifies tokens (string, comment, name,
  number, operator) so callers can pull identifiers out of code or drop
  comments before scoring.

The scanner is intentionally forgiving: prompts and model output are often
cut mid-statement, so unterminated strings must not abort a scan.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass
from typing import Callable, Iterator, List, Tuple

SUM_TOKEN = "[SUM]"

_CODE_TOKEN_RE = re.compile(r"\[SUM\]|\w+|[^\w\s]")


def code_tokens(text: str) -> List[str]:
    """Split text into budget tokens: words, punctuation, and ``[SUM]``."""
    return _CODE_TOKEN_RE.findall(text)


def code_token_spans(text: str) -> List[Tuple[int, int]]:
    """(start, end) offsets of each budget token in ``text``."""
    return [(m.start(), m.end()) for m in _CODE_TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class TokenizerProfile:
    """A named tokenizer so budgets mean the same thing everywhere."""

    name: str
    tokenize: Callable[[str], List[str]]

    def count(self, text: str) -> int:
        return len(self.tokenize(text))


_PROFILES = {
    "code": TokenizerProfile("code", code_tokens),
}


def get_tokenizer(name: str) -> TokenizerProfile:
    try:
        return _PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown tokenizer profile {name!r}") from None


def tokenizer_names() -> List[str]:
    return sorted(_PROFILES)


# Structural scanner.  Order matters: string prefixes would otherwise be
# eaten as names, and numbers must win over bare operators for the dot in
# a float.  The single-quoted branches accept end-of-line as a terminator
# so truncated code still scans.
_SCAN_RE = re.compile(
    r"""
    (?P<STRING>
        [rRbBuUfF]{0,3}
        (?:
            '''(?:[^\\]|\\.)*?(?:'''|$)
          | \"\"\"(?:[^\\]|\\.)*?(?:\"\"\"|$)
          | '(?:[^'\\\n]|\\.)*(?:'|(?=\n)|$)
          | \"(?:[^\"\\\n]|\\.)*(?:\"|(?=\n)|$)
        )
    )
  | (?P<COMMENT>\#[^\n]*)
  | (?P<NAME>[A-Za-z_]\w*)
  | (?P<NUMBER>\d(?:[eE][+-]|[\w.])*)
  | (?P<OP>[^\s])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    start: int
    end: int


def scan(text: str) -> Iterator[Token]:
    """Yield classified tokens; whitespace is skipped."""
    for match in _SCAN_RE.finditer(text):
        kind = match.lastgroup or "OP"
        yield Token(kind, match.group(), match.start(), match.end())


def identifier_tokens(text: str) -> List[str]:
    """Names in source order, excluding keywords, comments and strings."""
    out = []
    for tok in scan(text):
        if tok.kind == "NAME" and not keyword.iskeyword(tok.value):
            out.append(tok.value)
    return out


def statement_tokens(text: str) -> List[str]:
    """Scanner tokens with comments dropped, for similarity scoring."""
    return [tok.value for tok in scan(text) if tok.kind != "COMMENT"]


_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = {")", "]", "}"}


def find_header_colon(text: str, start: int = 0) -> int:
    """Offset of the colon ending a compound-statement header, or -1.

    Tracks bracket depth so slice and dict colons are skipped, and skips
    the colon belonging to a bare lambda.
    """
    depth = 0
    pending_lambda = 0
    for tok in scan(text[start:]):
        if tok.kind == "OP":
            if tok.value in _OPENERS:
                depth += 1
            elif tok.value in _CLOSERS:
                depth = max(0, depth - 1)
            elif tok.value == ":" and depth == 0:
                if pending_lambda:
                    pending_lambda -= 1
                    continue
                return start + tok.start
        elif tok.kind == "NAME" and tok.value == "lambda" and depth == 0:
            pending_lambda += 1
    return -1
