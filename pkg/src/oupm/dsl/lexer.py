"""Tokenizer for ``.oum`` model files."""

from __future__ import annotations

import re
from typing import List, NamedTuple

from ..errors import ParseError

KEYWORDS = frozenset({
    "type", "origin", "random", "guaranteed", "obs", "query",
    "if", "then", "elseif", "else", "null", "true", "false",
})

# longest operators first
_PUNCT = ["->", "!=", "<=", ">=", "==", "(", ")", "[", "]", "{", "}", ",", ";",
          "~", "#", "=", "<", ">", "+", "-", "*", "/", "%", "!", "&", "|"]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>""" + "|".join(re.escape(p) for p in _PUNCT) + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


class Token(NamedTuple):
    kind: str  # 'ident', 'number', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> List[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind == "number":
            tokens.append(Token("number", text, line, col))
        elif kind == "punct":
            tokens.append(Token("op", text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    if source.startswith("/*", pos):
        raise ParseError("unterminated comment", line, pos - line_start + 1)
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens
