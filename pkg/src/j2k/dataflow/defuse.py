"""Definition/use extraction for a single cell over a restricted statement grammar.

Recognised statements: simple, tuple, annotated and augmented assignment,
``import``/``from ... import``, ``def``, ``class``, ``for``, ``with``,
plus the usual control-flow headers. Anything the grammar cannot account
for is handled conservatively: every identifier on the line becomes a use
and nothing becomes a def.
"""

from __future__ import annotations

import keyword
from dataclasses import dataclass, field

from j2k.dataflow.scanner import NAME, OP, STRING, LogicalLine, Token, scan

DEFAULT_BUILTINS = frozenset(
    [
        "print", "len", "range", "enumerate", "zip", "list", "dict", "set", "tuple",
        "str", "int", "float", "bool", "open", "sum", "min", "max", "abs", "sorted",
        "map", "filter", "type", "isinstance", "Exception",
    ]
)

_KEYWORDS = frozenset(keyword.kwlist)
_HEADERS = frozenset(["if", "elif", "else", "for", "while", "with", "def", "class", "try", "except", "finally"])
_LOSSY_CALLS = frozenset(["exec", "eval"])
_AUG_OPS = frozenset(["+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@="])
_OPENERS = {"(": ")", "[": "]", "{": "}"}


class _Lossy(Exception):
    pass


@dataclass
class DefUseSet:
    defs: list[str] = field(default_factory=list)
    uses: list[str] = field(default_factory=list)
    imports: list[str] = field(default_factory=list)
    # uses read on some path before the name is assigned in this source
    exposed: list[str] = field(default_factory=list)
    # defs assigned on every path that reaches the end of the source
    definite: list[str] = field(default_factory=list)
    # bound alias -> imported module (dotted)
    aliases: dict[str, str] = field(default_factory=dict)
    strings: list[str] = field(default_factory=list)
    lossy_lines: int = 0


@dataclass
class _Effects:
    reads: list[str] = field(default_factory=list)
    writes: list[str] = field(default_factory=list)
    imports: list[tuple[str, str | None]] = field(default_factory=list)  # (alias, module or None)
    params: list[str] = field(default_factory=list)
    declared_global: list[str] = field(default_factory=list)
    declared_nonlocal: list[str] = field(default_factory=list)
    scope: str | None = None  # "function" | "class" for def/class headers


@dataclass
class _Stmt:
    indent: float
    tokens: list[Token]
    nlines: int
    lossy: bool = False
    children: list[_Stmt] = field(default_factory=list)


# ---------------------------------------------------------------- token helpers


def _split_top(tokens: list[Token], sep: str) -> list[list[Token]]:
    parts: list[list[Token]] = [[]]
    depth = 0
    for tok in tokens:
        if tok.kind == OP:
            if tok.text in _OPENERS:
                depth += 1
            elif tok.text in (")", "]", "}"):
                depth -= 1
            elif tok.text == sep and depth == 0:
                parts.append([])
                continue
        parts[-1].append(tok)
    return parts


def _find_top(tokens: list[Token], texts: frozenset[str] | set[str], start: int = 0) -> int:
    """Index of the first depth-0 OP token in ``texts``, skipping lambda headers."""
    depth = 0
    in_lambda = 0
    for i in range(start, len(tokens)):
        tok = tokens[i]
        if tok.kind == NAME and tok.text == "lambda" and depth == 0:
            in_lambda += 1
            continue
        if tok.kind != OP:
            continue
        if tok.text in _OPENERS:
            depth += 1
        elif tok.text in (")", "]", "}"):
            depth -= 1
        elif depth == 0:
            if in_lambda and tok.text == ":":
                in_lambda -= 1
                continue
            if in_lambda:
                continue
            if tok.text in texts:
                return i
    return -1


def _match(tokens: list[Token], i: int) -> int:
    """Index of the bracket closing the opener at ``i``."""
    depth = 0
    for j in range(i, len(tokens)):
        tok = tokens[j]
        if tok.kind != OP:
            continue
        if tok.text in _OPENERS:
            depth += 1
        elif tok.text in (")", "]", "}"):
            depth -= 1
            if depth == 0:
                return j
    raise _Lossy("unbalanced brackets")


def _is_kw(tok: Token, word: str) -> bool:
    return tok.kind == NAME and tok.text == word


# ---------------------------------------------------------------- expressions


def _expr(tokens: list[Token], bound: frozenset[str] = frozenset()) -> tuple[list[str], list[str]]:
    """Return (reads, walrus writes) of an expression token list."""
    reads: list[str] = []
    writes: list[str] = []
    _walk_group(tokens, bound, reads, writes)
    return reads, writes


def _comprehension_targets(tokens: list[Token]) -> tuple[set[str], int, int]:
    """Names bound by depth-0 ``for`` clauses, plus the span of the first iterable."""
    names: set[str] = set()
    first_iter = (-1, -1)
    depth = 0
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind == OP and tok.text in _OPENERS:
            depth += 1
        elif tok.kind == OP and tok.text in (")", "]", "}"):
            depth -= 1
        elif depth == 0 and _is_kw(tok, "for"):
            j = i + 1
            d = 0
            while j < n and not (d == 0 and _is_kw(tokens[j], "in")):
                t = tokens[j]
                if t.kind == OP and t.text in _OPENERS:
                    d += 1
                elif t.kind == OP and t.text in (")", "]", "}"):
                    d -= 1
                elif t.kind == NAME and t.text not in _KEYWORDS:
                    names.add(t.text)
                j += 1
            if first_iter[0] < 0:
                k = j + 1
                d = 0
                while k < n:
                    t = tokens[k]
                    if t.kind == OP and t.text in _OPENERS:
                        d += 1
                    elif t.kind == OP and t.text in (")", "]", "}"):
                        d -= 1
                    elif d == 0 and (_is_kw(t, "for") or _is_kw(t, "if")):
                        break
                    k += 1
                first_iter = (j + 1, k)
            i = j
            continue
        i += 1
    return names, first_iter[0], first_iter[1]


def _walk_group(tokens: list[Token], bound: frozenset[str], reads: list[str], writes: list[str]) -> None:
    comp_names, iter_start, iter_end = _comprehension_targets(tokens)
    inner_bound = bound | comp_names if comp_names else bound
    lambda_bound: frozenset[str] = frozenset()
    lambda_depth_end = -1
    n = len(tokens)
    i = 0
    while i < n:
        tok = tokens[i]
        active = bound if iter_start <= i < iter_end else inner_bound
        if lambda_bound and i >= lambda_depth_end:
            lambda_bound = frozenset()
        active = active | lambda_bound
        if tok.kind == STRING:
            for sub in tok.exprs:
                _walk_group(sub, active, reads, writes)
        elif tok.kind == OP and tok.text in _OPENERS:
            j = _match(tokens, i)
            _walk_group(tokens[i + 1 : j], active, reads, writes)
            i = j
        elif tok.kind == NAME:
            prev = tokens[i - 1] if i else None
            nxt = tokens[i + 1] if i + 1 < n else None
            if prev is not None and prev.kind == OP and prev.text == ".":
                pass
            elif tok.text == "lambda":
                colon = _find_lambda_colon(tokens, i)
                params, defaults = _lambda_params(tokens[i + 1 : colon])
                for d in defaults:
                    _walk_group(d, active, reads, writes)
                end = _find_top(tokens, frozenset([","]), colon + 1)
                lambda_bound = lambda_bound | frozenset(params)
                lambda_depth_end = end if end >= 0 else n
                i = colon
            elif tok.text in _KEYWORDS:
                if tok.text == "for":
                    # skip the comprehension target list up to 'in'
                    while i + 1 < n and not _is_kw(tokens[i + 1], "in"):
                        i += 1
            elif nxt is not None and nxt.kind == OP and nxt.text == "=":
                pass  # keyword argument name
            elif nxt is not None and nxt.kind == OP and nxt.text == ":=":
                writes.append(tok.text)
            elif tok.text not in active:
                reads.append(tok.text)
        i += 1


def _find_lambda_colon(tokens: list[Token], i: int) -> int:
    depth = 0
    for j in range(i + 1, len(tokens)):
        t = tokens[j]
        if t.kind != OP:
            continue
        if t.text in _OPENERS:
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
        elif t.text == ":" and depth == 0:
            return j
    raise _Lossy("lambda without body")


def _lambda_params(tokens: list[Token]) -> tuple[list[str], list[list[Token]]]:
    names: list[str] = []
    defaults: list[list[Token]] = []
    if not tokens:
        return names, defaults
    for part in _split_top(tokens, ","):
        eq = _find_top(part, frozenset(["="]))
        head = part if eq < 0 else part[:eq]
        if eq >= 0:
            defaults.append(part[eq + 1 :])
        for t in head:
            if t.kind == NAME:
                names.append(t.text)
    return names, defaults


# ---------------------------------------------------------------- targets


def _target(tokens: list[Token], eff: _Effects) -> None:
    """Record reads/writes for one assignment target (may be a tuple)."""
    if not tokens:
        raise _Lossy("empty target")
    parts = _split_top(tokens, ",")
    if len(parts) > 1:
        for part in parts:
            if part:
                _target(part, eff)
        return
    if tokens[0].kind == OP and tokens[0].text == "*":
        _target(tokens[1:], eff)
        return
    first = tokens[0]
    if first.kind == OP and first.text in ("(", "["):
        close = _match(tokens, 0)
        if close == len(tokens) - 1:
            _target(tokens[1:close], eff)
            return
    if first.kind != NAME or first.text in _KEYWORDS:
        raise _Lossy("unsupported assignment target")
    # NAME followed by trailers: .attr, [index], (call)
    i = 1
    last_call = False
    while i < len(tokens):
        t = tokens[i]
        if t.kind == OP and t.text == "." and i + 1 < len(tokens) and tokens[i + 1].kind == NAME:
            i += 2
            last_call = False
        elif t.kind == OP and t.text in ("[", "("):
            last_call = t.text == "("
            i = _match(tokens, i) + 1
        else:
            raise _Lossy("unsupported assignment target")
    if last_call:
        raise _Lossy("cannot assign to a call")
    if len(tokens) == 1:
        eff.writes.append(first.text)
        return
    # attribute/subscript assignment mutates the base object: read it, then rebind it
    reads, writes = _expr(tokens)
    eff.reads.extend(reads)
    eff.writes.extend(writes)
    eff.writes.append(first.text)


# ---------------------------------------------------------------- statements


def _dotted(tokens: list[Token]) -> str:
    if not tokens or any(t.kind not in (NAME, OP) for t in tokens):
        raise _Lossy("bad module name")
    text = "".join(t.text for t in tokens)
    if any(t.kind == OP and t.text != "." for t in tokens):
        raise _Lossy("bad module name")
    return text


def _import_stmt(tokens: list[Token], eff: _Effects) -> None:
    for part in _split_top(tokens[1:], ","):
        if not part:
            raise _Lossy("empty import")
        if len(part) >= 3 and _is_kw(part[-2], "as"):
            module = _dotted(part[:-2])
            eff.imports.append((part[-1].text, module))
        else:
            module = _dotted(part)
            eff.imports.append((module.split(".")[0], module))


def _from_stmt(tokens: list[Token], eff: _Effects) -> None:
    try:
        imp = next(i for i, t in enumerate(tokens) if _is_kw(t, "import"))
    except StopIteration:
        raise _Lossy("from without import") from None
    module_tokens = tokens[1:imp]
    relative = bool(module_tokens) and module_tokens[0].kind == OP and module_tokens[0].text in (".", "...")
    module = "".join(t.text for t in module_tokens)
    names = tokens[imp + 1 :]
    if names and names[0].kind == OP and names[0].text == "(":
        names = names[1:-1]
    if any(t.kind == OP and t.text == "*" for t in names):
        raise _Lossy("star import")
    for part in _split_top(names, ","):
        if not part:
            continue
        if len(part) == 3 and _is_kw(part[1], "as"):
            alias, name = part[2].text, part[0].text
        elif len(part) == 1 and part[0].kind == NAME:
            alias = name = part[0].text
        else:
            raise _Lossy("bad import name")
        eff.imports.append((alias, None if relative else f"{module}.{name}"))


def _params(tokens: list[Token], eff: _Effects) -> None:
    for part in _split_top(tokens, ","):
        part = [t for t in part if not (t.kind == OP and t.text in ("*", "**", "/"))]
        if not part:
            continue
        if part[0].kind != NAME:
            raise _Lossy("bad parameter")
        eff.params.append(part[0].text)
        rest = part[1:]
        if not rest:
            continue
        eq = _find_top(rest, frozenset(["="]))
        if rest[0].kind == OP and rest[0].text == ":":
            ann = rest[1:] if eq < 0 else rest[1:eq]
            eff.reads.extend(_expr(ann)[0])
        elif eq != 0:
            raise _Lossy("bad parameter")
        if eq >= 0:
            eff.reads.extend(_expr(rest[eq + 1 :])[0])


def _def_header(tokens: list[Token], eff: _Effects) -> None:
    if len(tokens) < 3 or tokens[1].kind != NAME or tokens[2].text != "(":
        raise _Lossy("bad def")
    close = _match(tokens, 2)
    _params(tokens[3:close], eff)
    rest = tokens[close + 1 :]
    if rest:
        if rest[0].text != "->":
            raise _Lossy("bad def")
        eff.reads.extend(_expr(rest[1:])[0])
    eff.writes.append(tokens[1].text)
    eff.scope = "function"


def _class_header(tokens: list[Token], eff: _Effects) -> None:
    if len(tokens) < 2 or tokens[1].kind != NAME:
        raise _Lossy("bad class")
    if len(tokens) > 2:
        if tokens[2].text != "(" or _match(tokens, 2) != len(tokens) - 1:
            raise _Lossy("bad class")
        eff.reads.extend(_expr(tokens[3:-1])[0])
    eff.writes.append(tokens[1].text)
    eff.scope = "class"


def _with_items(tokens: list[Token], eff: _Effects) -> None:
    if tokens and tokens[0].text == "(" and _match(tokens, 0) == len(tokens) - 1:
        inner = tokens[1:-1]
        if any(_is_kw(t, "as") for t in inner):
            tokens = inner
    pending: list[list[Token]] = []
    for item in _split_top(tokens, ","):
        as_at = next((i for i, t in enumerate(item) if _is_kw(t, "as")), -1)
        expr = item if as_at < 0 else item[:as_at]
        r, w = _expr(expr)
        eff.reads.extend(r)
        eff.writes.extend(w)
        if as_at >= 0:
            pending.append(item[as_at + 1 :])
    for target in pending:
        _target(target, eff)


def _simple(tokens: list[Token], eff: _Effects) -> None:
    first = tokens[0]
    word = first.text if first.kind == NAME else None

    if word == "import":
        _import_stmt(tokens, eff)
        return
    if word == "from" and len(tokens) > 1 and any(_is_kw(t, "import") for t in tokens):
        _from_stmt(tokens, eff)
        return
    if word in ("global", "nonlocal"):
        names = [t.text for t in tokens[1:] if t.kind == NAME]
        (eff.declared_global if word == "global" else eff.declared_nonlocal).extend(names)
        return
    if word in ("pass", "break", "continue"):
        return
    if word in ("return", "yield", "raise", "assert", "del", "await"):
        r, w = _expr(tokens[1:])
        eff.reads.extend(r)
        eff.writes.extend(w)
        return
    if word in _KEYWORDS and word not in ("lambda", "not", "None", "True", "False", "yield", "await"):
        raise _Lossy(f"unexpected keyword {word!r}")

    for i, tok in enumerate(tokens):
        if tok.kind == NAME and tok.text in _LOSSY_CALLS and (i == 0 or tokens[i - 1].text != "."):
            raise _Lossy(f"dynamic code via {tok.text}")

    aug = _find_top(tokens, _AUG_OPS)
    if aug >= 0:
        r, w = _expr(tokens[aug + 1 :])
        eff.reads.extend(r)
        eff.writes.extend(w)
        target_eff = _Effects()
        _target(tokens[:aug], target_eff)
        if len(target_eff.writes) != 1:
            raise _Lossy("bad augmented target")
        eff.reads.extend(target_eff.reads)
        eff.reads.append(target_eff.writes[0])
        eff.writes.append(target_eff.writes[0])
        return

    colon = _find_top(tokens, frozenset([":"]))
    if colon >= 0:
        # annotated assignment
        eq = _find_top(tokens, frozenset(["="]), colon + 1)
        annotation = tokens[colon + 1 : eq if eq >= 0 else len(tokens)]
        if eq >= 0:
            r, w = _expr(tokens[eq + 1 :])
            eff.reads.extend(r)
            eff.writes.extend(w)
        eff.reads.extend(_expr(annotation)[0])
        target_eff = _Effects()
        _target(tokens[:colon], target_eff)
        eff.reads.extend(target_eff.reads)
        if eq >= 0:
            eff.writes.extend(target_eff.writes)
        return

    segments: list[list[Token]] = []
    rest = tokens
    while True:
        eq = _find_top(rest, frozenset(["="]))
        if eq < 0:
            segments.append(rest)
            break
        segments.append(rest[:eq])
        rest = rest[eq + 1 :]
    value = segments[-1]
    if not value:
        raise _Lossy("missing value")
    r, w = _expr(value)
    eff.reads.extend(r)
    eff.writes.extend(w)
    for target in segments[:-1]:
        _target(target, eff)


def _header(word: str, tokens: list[Token], eff: _Effects) -> None:
    body = tokens[1:]
    if word in ("if", "elif", "while"):
        if not body:
            raise _Lossy(f"empty {word}")
        r, w = _expr(body)
        eff.reads.extend(r)
        eff.writes.extend(w)
    elif word in ("else", "try", "finally"):
        if body:
            raise _Lossy(f"unexpected tokens after {word}")
    elif word == "except":
        as_at = next((i for i, t in enumerate(body) if _is_kw(t, "as")), -1)
        if body and body[0].text == "*":
            body = body[1:]
            as_at = as_at - 1 if as_at >= 0 else as_at
        expr = body if as_at < 0 else body[:as_at]
        eff.reads.extend(_expr(expr)[0])
        if as_at >= 0:
            if len(body) != as_at + 2 or body[-1].kind != NAME:
                raise _Lossy("bad except clause")
            eff.writes.append(body[-1].text)
    elif word == "for":
        in_at = _find_top_kw(body, "in")
        if in_at < 0:
            raise _Lossy("for without in")
        r, w = _expr(body[in_at + 1 :])
        eff.reads.extend(r)
        eff.writes.extend(w)
        _target(body[:in_at], eff)
    elif word == "with":
        _with_items(body, eff)
    elif word == "def":
        _def_header(tokens, eff)
    elif word == "class":
        _class_header(tokens, eff)
    elif word == "match":
        eff.reads.extend(_expr(body)[0])


def _find_top_kw(tokens: list[Token], word: str) -> int:
    depth = 0
    for i, t in enumerate(tokens):
        if t.kind == OP and t.text in _OPENERS:
            depth += 1
        elif t.kind == OP and t.text in (")", "]", "}"):
            depth -= 1
        elif depth == 0 and _is_kw(t, word):
            return i
    return -1


def _effects(tokens: list[Token]) -> _Effects:
    eff = _Effects()
    if tokens and _is_kw(tokens[0], "async"):
        tokens = tokens[1:]
    if not tokens:
        raise _Lossy("empty statement")
    first = tokens[0]
    if first.kind == OP and first.text == "@":
        eff.reads.extend(_expr(tokens[1:])[0])
        return eff
    if first.kind == OP and first.text not in ("(", "[", "{", "-", "+", "~", "*", "..."):
        raise _Lossy(f"statement cannot start with {first.text!r}")
    if first.kind == NAME and (first.text in _HEADERS or first.text == "match"):
        _header(first.text, tokens, eff)
    else:
        _simple(tokens, eff)
    return eff


# ---------------------------------------------------------------- statement tree


def _is_header(tokens: list[Token]) -> bool:
    if not tokens:
        return False
    first = tokens[1] if _is_kw(tokens[0], "async") and len(tokens) > 1 else tokens[0]
    if first.kind != NAME:
        return False
    if first.text in _HEADERS:
        return True
    # soft keywords: only when the line ends in a header colon
    return first.text in ("match", "case") and len(tokens) > 1 and tokens[1].kind != OP


def _line_to_stmts(line: LogicalLine) -> list[_Stmt]:
    if line.lossy:
        return [_Stmt(line.indent, line.tokens, line.nlines, lossy=True)]
    tokens = line.tokens
    if _is_header(tokens):
        colon = _find_top(tokens, frozenset([":"]))
        if colon < 0:
            return [_Stmt(line.indent, tokens, line.nlines, lossy=True)]
        word = tokens[1].text if _is_kw(tokens[0], "async") else tokens[0].text
        lossy = word == "case"
        head = _Stmt(line.indent, tokens[:colon], line.nlines, lossy=lossy)
        body = tokens[colon + 1 :]
        if body:
            for part in _split_top(body, ";"):
                if part:
                    head.children.append(_Stmt(line.indent + 0.5, part, 0))
        return [head]
    stmts = []
    for k, part in enumerate(_split_top(tokens, ";")):
        if part:
            stmts.append(_Stmt(line.indent, part, line.nlines if k == 0 else 0))
    return stmts


def _build_tree(lines: list[LogicalLine]) -> list[_Stmt]:
    root = _Stmt(-1, [], 0)
    stack = [root]
    for line in lines:
        for stmt in _line_to_stmts(line):
            while len(stack) > 1 and stack[-1].indent >= stmt.indent:
                stack.pop()
            stack[-1].children.append(stmt)
            if not stmt.children and not stmt.lossy and _is_header(stmt.tokens):
                stack.append(stmt)
            elif stmt.lossy and stmt.tokens and _is_header(stmt.tokens):
                stack.append(stmt)
    return root.children


# ---------------------------------------------------------------- scoping

_CLAUSES = {
    "if": ("elif", "else"),
    "for": ("else",),
    "while": ("else",),
    "try": ("except", "else", "finally"),
    "match": (),
}


def _head_word(stmt: _Stmt) -> str | None:
    tokens = stmt.tokens
    if tokens and _is_kw(tokens[0], "async"):
        tokens = tokens[1:]
    if not tokens or not _is_header(tokens):
        return None
    return tokens[0].text


class _Scope:
    def __init__(self, kind: str, parent: _Scope | None, local: set[str] | None = None):
        self.kind = kind
        self.parent = parent
        self.local = local or set()
        self.globals: set[str] = set()


class _Analyzer:
    def __init__(self) -> None:
        self.result = DefUseSet()
        self._defined: set[str] = set()
        self._seen_defs: set[str] = set()
        self._seen_uses: set[str] = set()
        self._seen_exposed: set[str] = set()

    # module-level effects
    def module_read(self, name: str) -> None:
        if name in _KEYWORDS:
            return
        if name not in self._seen_uses:
            self._seen_uses.add(name)
            self.result.uses.append(name)
        if name not in self._defined and name not in self._seen_exposed:
            self._seen_exposed.add(name)
            self.result.exposed.append(name)

    def module_write(self, name: str, definite: bool = True) -> None:
        if definite:
            self._defined.add(name)
        if name not in self._seen_defs:
            self._seen_defs.add(name)
            self.result.defs.append(name)

    def read(self, name: str, scope: _Scope) -> None:
        s = scope
        while s.kind != "module":
            if name in s.globals:
                break
            if name in s.local and (s is scope or s.kind == "function"):
                return
            s = s.parent
        self.module_read(name)

    def write(self, name: str, scope: _Scope) -> None:
        if scope.kind == "module":
            self.module_write(name)
        elif name in scope.globals:
            # happens at call time, so it never shadows later reads
            self.module_write(name, definite=False)

    def run(self, stmts: list[_Stmt], scope: _Scope) -> None:
        i = 0
        while i < len(stmts):
            word = _head_word(stmts[i])
            if scope.kind != "module" or word not in _CLAUSES:
                self.stmt(stmts[i], scope)
                i += 1
                continue
            j = i + 1
            while j < len(stmts) and stmts[j].indent == stmts[i].indent and _head_word(stmts[j]) in _CLAUSES[word]:
                j += 1
            self.compound(word, stmts[i:j], scope)
            i = j

    def _branch(self, stmt: _Stmt, scope: _Scope, start: set[str]) -> set[str]:
        self._defined = set(start)
        self.stmt(stmt, scope)
        return self._defined

    def compound(self, word: str, clauses: list[_Stmt], scope: _Scope) -> None:
        """Module-level branching: a name counts as defined afterwards only
        when every path that falls through assigns it."""
        entry = set(self._defined)
        words = [_head_word(c) for c in clauses]
        if word == "if":
            paths = [self._branch(c, scope, entry) for c in clauses]
            if words[-1] != "else":
                paths.append(entry)
            self._defined = set.intersection(*paths)
        elif word == "try":
            paths: list[set[str]] = []
            body = entry
            cleanup = set()
            for clause, w in zip(clauses, words):
                if w == "try":
                    body = self._branch(clause, scope, entry)
                elif w == "else":
                    body = self._branch(clause, scope, body)
                elif w == "except":
                    paths.append(self._branch(clause, scope, entry))
                elif w == "finally":
                    cleanup = self._branch(clause, scope, entry) - entry
            self._defined = set.intersection(body, *paths) | cleanup
        else:
            # loops may run zero times; match arms are not analysed per case
            for clause in clauses:
                self._branch(clause, scope, entry)
            self._defined = entry

    def lossy(self, stmt: _Stmt, scope: _Scope) -> None:
        self.result.lossy_lines += stmt.nlines
        for name in _all_names(stmt.tokens):
            self.read(name, scope)
        self.run(stmt.children, scope)

    def stmt(self, stmt: _Stmt, scope: _Scope) -> None:
        if stmt.lossy:
            self.lossy(stmt, scope)
            return
        try:
            eff = _effects(stmt.tokens)
        except _Lossy:
            self.lossy(stmt, scope)
            return
        self.result.strings.extend(_strings(stmt.tokens))
        scope.globals.update(eff.declared_global)
        for name in eff.reads:
            self.read(name, scope)
        for alias, module in eff.imports:
            if module is not None:
                top = module.split(".")[0]
                if top not in self.result.imports:
                    self.result.imports.append(top)
                if scope.kind == "module":
                    self.result.aliases[alias] = module
            self.write(alias, scope)
        if eff.scope is None:
            for name in eff.writes:
                self.write(name, scope)
            self.run(stmt.children, scope)
            return
        # def/class: the name binds after decorators/defaults, body reads count now
        name = eff.writes[-1]
        if eff.scope == "function":
            self.write(name, scope)
        inner = _Scope(eff.scope, scope, set(eff.params) | _collect_locals(stmt.children))
        inner.globals.update(_collect_globals(stmt.children))
        inner.local -= inner.globals
        self.run(stmt.children, inner)
        if eff.scope == "class":
            self.write(name, scope)


def _collect_locals(stmts: list[_Stmt]) -> set[str]:
    names: set[str] = set()
    for stmt in stmts:
        if stmt.lossy:
            names |= _collect_locals(stmt.children)
            continue
        try:
            eff = _effects(stmt.tokens)
        except _Lossy:
            names |= _collect_locals(stmt.children)
            continue
        names.update(eff.writes)
        names.update(alias for alias, _ in eff.imports)
        if eff.scope is None:
            names |= _collect_locals(stmt.children)
    return names


def _collect_globals(stmts: list[_Stmt]) -> set[str]:
    names: set[str] = set()
    for stmt in stmts:
        if stmt.lossy:
            continue
        try:
            eff = _effects(stmt.tokens)
        except _Lossy:
            continue
        names.update(eff.declared_global)
        if eff.scope is None:
            names |= _collect_globals(stmt.children)
    return names


def _all_names(tokens: list[Token]) -> list[str]:
    out: list[str] = []
    for tok in tokens:
        if tok.kind == NAME and tok.text not in _KEYWORDS:
            out.append(tok.text)
        elif tok.kind == STRING:
            for sub in tok.exprs:
                out.extend(_all_names(sub))
    return out


def _strings(tokens: list[Token]) -> list[str]:
    return [t.text for t in tokens if t.kind == STRING and not t.exprs]


def extract_def_use(source: str, builtins: frozenset[str] | set[str] = DEFAULT_BUILTINS) -> DefUseSet:
    """Compute the def/use/import sets of one cell's source text.

    Names in ``builtins`` never appear in ``uses``. Function bodies are
    attributed to the cell at definition time.
    """
    analyzer = _Analyzer()
    stmts = _build_tree(scan(source))
    analyzer.run(stmts, _Scope("module", None))
    result = analyzer.result
    result.uses = [u for u in result.uses if u not in builtins]
    result.exposed = [u for u in result.exposed if u not in builtins]
    result.definite = [d for d in result.defs if d in analyzer._defined]
    return result
