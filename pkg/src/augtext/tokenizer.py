"""Word-level tokenization and its inverse.

The splitting rule is deliberately simple: whitespace separates tokens, and
punctuation stuck to the start or end of a chunk is detached into tokens of
its own so the mask-fill backend is never asked to predict a fused
word+punctuation string. Interior apostrophes and hyphens stay inside the
token ("don't", "state-of-the-art").
"""

from __future__ import annotations

# Punctuation detached when leading/trailing a whitespace-separated chunk.
DETACHABLE = set('.,!?;:"()[]')

# Single-token spacing rules for join(): no space before a closer,
# no space after an opener.
CLOSERS = set('.,!?;:)]"')
OPENERS = set('"([')


def word_tokenize(text: str) -> list[str]:
    """Split text into word and punctuation tokens.

    Empty or all-whitespace text gives an empty list. Output tokens are
    never empty and never contain whitespace.
    """
    tokens: list[str] = []
    for chunk in text.split():
        tokens.extend(_split_chunk(chunk))
    return tokens


def _split_chunk(chunk: str) -> list[str]:
    leading: list[str] = []
    while chunk and chunk[0] in DETACHABLE:
        leading.append(chunk[0])
        chunk = chunk[1:]
    trailing: list[str] = []
    while chunk and chunk[-1] in DETACHABLE:
        trailing.append(chunk[-1])
        chunk = chunk[:-1]
    parts = leading
    if chunk:
        parts.append(chunk)
    parts.extend(reversed(trailing))
    return parts


def join(tokens: list[str]) -> str:
    """Reassemble tokens into a sentence.

    Tokens are space-separated except around punctuation: nothing before a
    closing token (.,!?;:)]") and nothing after an opening one ("([).
    """
    pieces: list[str] = []
    prev: str | None = None
    for tok in tokens:
        if prev is not None and tok not in CLOSERS and prev not in OPENERS:
            pieces.append(" ")
        pieces.append(tok)
        prev = tok
    return "".join(pieces)
