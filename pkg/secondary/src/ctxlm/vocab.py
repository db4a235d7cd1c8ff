"""Character-level vocabulary with reserved special tokens.

Three specials live past the character range: a begin-of-sequence
marker, an end-of-sequence marker, and the ``[SUM]`` entity terminator.
The literal substring ``[SUM]`` is lexed as one token wherever it
appears, so entity bodies framed by the retrieval side keep their
terminator intact instead of decaying into five punctuation characters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

from .errors import VocabularyMiss

SUM_MARKER = "[SUM]"


@dataclass(frozen=True)
class Vocabulary:
    """Immutable char-to-id table; ids are dense and deterministic."""

    chars: str

    @property
    def bos_id(self) -> int:
        return len(self.chars)

    @property
    def eos_id(self) -> int:
        return len(self.chars) + 1

    @property
    def sum_id(self) -> int:
        return len(self.chars) + 2

    @property
    def size(self) -> int:
        return len(self.chars) + 3

    def __post_init__(self):
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("vocabulary characters must be unique")
        object.__setattr__(
            self, "_index", {ch: i for i, ch in enumerate(self.chars)})

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        """Collect every character used outside of ``[SUM]`` markers."""
        seen = set()
        for text in texts:
            for piece in text.split(SUM_MARKER):
                seen.update(piece)
        return cls(chars="".join(sorted(seen)))

    def encode(self, text: str, context: str = "") -> List[int]:
        """Token ids for ``text``; ``[SUM]`` becomes a single token."""
        index = self._index
        ids: List[int] = []
        pos = 0
        while pos < len(text):
            if text.startswith(SUM_MARKER, pos):
                ids.append(self.sum_id)
                pos += len(SUM_MARKER)
                continue
            ch = text[pos]
            if ch not in index:
                raise VocabularyMiss(ch, context=context)
            ids.append(index[ch])
            pos += 1
        return ids

    def decode(self, ids: Sequence[int], keep_specials: bool = False) -> str:
        """Text for ``ids``; specials are dropped unless asked for."""
        out: List[str] = []
        for i in ids:
            if i < len(self.chars):
                out.append(self.chars[i])
            elif keep_specials:
                out.append({self.bos_id: "<bos>", self.eos_id: "<eos>",
                            self.sum_id: SUM_MARKER}[i])
        return "".join(out)

    def to_dict(self) -> dict:
        return {"chars": self.chars}

    @classmethod
    def from_dict(cls, raw: dict) -> "Vocabulary":
        return cls(chars=raw["chars"])
