"""Line-oriented lexer for notebook code cells.

Produces logical lines (physical lines joined across open brackets and
backslash continuations) with comments removed and string literals
collapsed into single tokens. f-string replacement fields are lexed and
kept, since they read names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

NAME = "NAME"
NUMBER = "NUMBER"
STRING = "STRING"
OP = "OP"

_NAME_RE = re.compile(r"[^\W\d]\w*")
_NUMBER_RE = re.compile(
    r"0[xXoObB][0-9a-fA-F_]+|(?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[jJ]?"
)
_STRING_START_RE = re.compile(r"(?i)(rb|br|fr|rf|b|r|u|f)?('''|\"\"\"|'|\")")
_OPERATORS = (
    "**=", "//=", ">>=", "<<=", "...",
    "->", ":=", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
    "**", "//", "<<", ">>",
    "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">",
    "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
)
_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = {")": "(", "]": "[", "}": "{"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    # For f-strings: token lists of each replacement-field expression.
    exprs: list[list[Token]] = field(default_factory=list)


@dataclass
class LogicalLine:
    indent: int
    line: int
    nlines: int
    tokens: list[Token]
    raw: str
    lossy: bool = False
    reason: str = ""


class _LexError(Exception):
    pass


def _indent_width(text: str) -> int:
    width = 0
    for ch in text:
        if ch == " ":
            width += 1
        elif ch == "\t":
            width = (width // 8 + 1) * 8
        elif ch == "\f":
            width = 0
        else:
            break
    return width


def _scan_string_end(src: str, start: int, quote: str) -> int:
    """Index just past the closing quote, or -1 if unterminated."""
    i = start
    triple = len(quote) == 3
    while i < len(src):
        ch = src[i]
        if ch == "\\":
            i += 2
            continue
        if not triple and ch == "\n":
            return -1
        if src.startswith(quote, i):
            return i + len(quote)
        i += 1
    return -1


def _fstring_fields(body: str) -> list[str]:
    """Expression texts of the replacement fields in an f-string body."""
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "{":
            if body.startswith("{{", i):
                i += 2
                continue
            depth = 0
            j = i + 1
            expr_end = None
            quote = None
            while j < len(body):
                c = body[j]
                if quote:
                    if c == "\\":
                        j += 2
                        continue
                    if c == quote:
                        quote = None
                elif c in "'\"":
                    quote = c
                elif c in "([{":
                    depth += 1
                elif c in ")]":
                    depth -= 1
                elif c == "}":
                    if depth == 0:
                        break
                    depth -= 1
                elif depth == 0 and expr_end is None:
                    if c == "!" and not body.startswith("!=", j):
                        expr_end = j
                    elif c == ":":
                        expr_end = j
                j += 1
            expr = body[i + 1 : expr_end if expr_end is not None else j]
            expr = expr.rstrip()
            if expr.endswith("=") and not expr.endswith(("==", "!=", "<=", ">=")):
                expr = expr[:-1]
            out.append(expr)
            # nested fields inside a format spec
            if expr_end is not None and body[expr_end] == ":":
                out.extend(_fstring_fields(body[expr_end + 1 : j]))
            i = j + 1
        else:
            i += 1
    return out


def tokenize_fragment(text: str, line: int = 1) -> list[Token]:
    """Lex a single expression fragment; raises _LexError on failure."""
    lines = scan(text, first_line=line)
    tokens: list[Token] = []
    for logical in lines:
        if logical.lossy:
            raise _LexError(logical.reason)
        tokens.extend(logical.tokens)
    return tokens


def scan(source: str, first_line: int = 1) -> list[LogicalLine]:
    """Split ``source`` into logical lines of tokens."""
    result: list[LogicalLine] = []
    src = source
    n = len(src)
    i = 0
    line = first_line

    tokens: list[Token] = []
    stack: list[str] = []
    start_line = line
    indent = 0
    line_start = 0
    at_line_start = True
    error = ""

    def finish(end: int) -> None:
        nonlocal tokens, stack, error
        raw = src[line_start:end]
        if tokens or error:
            nlines = line - start_line + 1
            result.append(
                LogicalLine(
                    indent=indent,
                    line=start_line,
                    nlines=nlines,
                    tokens=tokens,
                    raw=raw,
                    lossy=bool(error),
                    reason=error,
                )
            )
        tokens = []
        stack = []
        error = ""

    while i < n:
        if at_line_start:
            j = i
            while j < n and src[j] in " \t\f":
                j += 1
            if j < n and src[j] in "\r\n#" and not stack:
                # blank or comment-only line
                while j < n and src[j] != "\n":
                    j += 1
                i = j + 1
                line += 1
                continue
            indent = _indent_width(src[i:j])
            start_line = line
            line_start = i
            at_line_start = False
            i = j
            continue

        ch = src[i]
        if error:
            # skip to the end of the physical line, then close the logical line
            if ch == "\n":
                finish(i)
                line += 1
                at_line_start = True
            i += 1
            continue

        if ch in " \t\f\r":
            i += 1
            continue
        if ch == "\n":
            if stack:
                line += 1
                i += 1
                continue
            finish(i)
            line += 1
            i += 1
            at_line_start = True
            continue
        if ch == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if ch == "\\" and (src.startswith("\\\n", i) or src.startswith("\\\r\n", i)):
            i = src.index("\n", i) + 1
            line += 1
            continue

        m = _STRING_START_RE.match(src, i)
        if m:
            prefix = (m.group(1) or "").lower()
            quote = m.group(2)
            body_start = m.end()
            end = _scan_string_end(src, body_start, quote)
            if end < 0:
                error = "unterminated string literal"
                continue
            body = src[body_start : end - len(quote)]
            tok = Token(STRING, body, line)
            if "f" in prefix:
                try:
                    tok.exprs = [tokenize_fragment(e, line) for e in _fstring_fields(body) if e.strip()]
                except _LexError:
                    error = "unparseable f-string field"
                    continue
            tokens.append(tok)
            line += src.count("\n", i, end)
            i = end
            continue

        m = _NAME_RE.match(src, i)
        if m:
            tokens.append(Token(NAME, m.group(), line))
            i = m.end()
            continue
        m = _NUMBER_RE.match(src, i)
        if m and m.end() > i:
            tokens.append(Token(NUMBER, m.group(), line))
            i = m.end()
            continue

        for op in _OPERATORS:
            if src.startswith(op, i):
                break
        else:
            error = f"unexpected character {ch!r}"
            continue
        if op in _OPENERS:
            stack.append(op)
        elif op in _CLOSERS:
            if not stack or stack[-1] != _CLOSERS[op]:
                error = f"unbalanced {op!r}"
                continue
            stack.pop()
        tokens.append(Token(OP, op, line))
        i += len(op)

    if stack and not error:
        error = "unclosed bracket at end of cell"
    if tokens or error:
        finish(n)
    return result
