"""Lexer and recursive-descent parser for the supported Verilog subset.

The grammar covers: module/endmodule, ANSI and non-ANSI port lists, wire/reg
declarations with ranges, parameter/localparam, assign (with optional #delay),
initial/always with @ sensitivity, blocking/nonblocking assignment, if/else,
case/endcase, begin/end, #delay statements, integer and based literals, the
primitive operator set plus !, &&, ||, >, <=, >= (rewritten during
elaboration), bit/part select, concatenation, and module instantiation with
named port and parameter connections. Out-of-subset keywords produce an
"unsupported construct" diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ast_nodes as A
from .ast_nodes import Loc
from .errors import ParseError, UnsupportedConstructError


@dataclass
class SourceUnit:
    """Input bundle: (path, text) pairs plus the requested top module."""

    files: list[tuple[str, str]]
    top_module_name: str


KEYWORDS = {
    "module", "endmodule", "input", "output", "inout", "wire", "reg",
    "assign", "initial", "always", "begin", "end", "if", "else", "case",
    "endcase", "default", "posedge", "negedge", "or", "parameter",
    "localparam",
}

UNSUPPORTED_KEYWORDS = {
    "task", "function", "endfunction", "endtask", "generate", "endgenerate",
    "for", "while", "repeat", "forever", "fork", "join", "casez", "casex",
    "specify", "defparam", "genvar", "integer", "real", "time", "signed",
    "tri", "trireg", "wand", "wor", "supply0", "supply1", "event", "wait",
    "deassign", "force", "release", "primitive", "table", "disable",
    "inout",
}

_PUNCT = [
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "~&", "~|", "~^", "^~",
    "(", ")", "[", "]", "{", "}", ";", ",", ".", ":", "#", "@", "*", "?",
    "~", "&", "|", "^", "+", "-", "<", ">", "=", "/", "%", "!",
]


@dataclass
class Token:
    kind: str  # ID KEYWORD NUMBER BASED PUNCT EOF
    text: str
    loc: Loc


class Lexer:
    def __init__(self, path: str, text: str):
        self.path = path
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _loc(self) -> Loc:
        return Loc(self.path, self.line, self.col)

    def _advance(self, n: int) -> None:
        for c in self.text[self.pos : self.pos + n]:
            if c == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def tokens(self) -> list[Token]:
        out = []
        text, n = self.text, len(self.text)
        while self.pos < n:
            c = text[self.pos]
            if c in " \t\r\n":
                self._advance(1)
                continue
            if text.startswith("//", self.pos):
                end = text.find("\n", self.pos)
                self._advance((end if end != -1 else n) - self.pos)
                continue
            if text.startswith("/*", self.pos):
                end = text.find("*/", self.pos + 2)
                if end == -1:
                    raise ParseError("unterminated block comment", self._loc())
                self._advance(end + 2 - self.pos)
                continue
            loc = self._loc()
            if c.isalpha() or c == "_":
                j = self.pos
                while j < n and (text[j].isalnum() or text[j] == "_" or text[j] == "$"):
                    j += 1
                word = text[self.pos : j]
                self._advance(j - self.pos)
                kind = "KEYWORD" if word in KEYWORDS or word in UNSUPPORTED_KEYWORDS else "ID"
                out.append(Token(kind, word, loc))
                continue
            if c.isdigit():
                j = self.pos
                while j < n and (text[j].isdigit() or text[j] == "_"):
                    j += 1
                out.append(Token("NUMBER", text[self.pos : j].replace("_", ""), loc))
                self._advance(j - self.pos)
                continue
            if c == "'":
                j = self.pos + 1
                if j >= n or text[j].lower() not in "bdho":
                    raise ParseError("malformed based literal", loc)
                j += 1
                while j < n and (text[j].isalnum() or text[j] in "_?"):
                    j += 1
                out.append(Token("BASED", text[self.pos : j], loc))
                self._advance(j - self.pos)
                continue
            for p in _PUNCT:
                if text.startswith(p, self.pos):
                    out.append(Token("PUNCT", p, loc))
                    self._advance(len(p))
                    break
            else:
                raise ParseError(f"unexpected character {c!r}", loc)
        out.append(Token("EOF", "", self._loc()))
        return out


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers ---------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("PUNCT", "KEYWORD")

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.loc)
        return self.next()

    def expect_id(self) -> Token:
        t = self.peek()
        if t.kind != "ID":
            self._check_unsupported(t)
            raise ParseError(f"expected identifier, found {t.text!r}", t.loc)
        return self.next()

    def _check_unsupported(self, t: Token) -> None:
        if t.kind == "KEYWORD" and t.text in UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstructError(t.text, t.loc)

    # -- grammar ----------------------------------------------------------

    def source(self) -> list[A.Module]:
        mods = []
        while self.peek().kind != "EOF":
            t = self.peek()
            self._check_unsupported(t)
            if not self.at("module"):
                raise ParseError(f"expected 'module', found {t.text!r}", t.loc)
            mods.append(self.module())
        return mods

    def module(self) -> A.Module:
        loc = self.expect("module").loc
        name = self.expect_id().text
        mod = A.Module(name=name, port_order=[], items=[], loc=loc)
        if self.accept("("):
            self._port_list(mod)
        self.expect(";")
        while not self.at("endmodule"):
            t = self.peek()
            if t.kind == "EOF":
                raise ParseError(f"missing 'endmodule' for module {name}", t.loc)
            self._module_item(mod)
        self.expect("endmodule")
        return mod

    def _range(self) -> Optional[A.Range]:
        if not self.accept("["):
            return None
        msb = self.expression()
        self.expect(":")
        lsb = self.expression()
        self.expect("]")
        return A.Range(msb, lsb)

    def _port_list(self, mod: A.Module) -> None:
        if self.accept(")"):
            return
        # ANSI header if a direction keyword appears; plain name list otherwise.
        direction = None
        kind = "wire"
        rng = None
        while True:
            t = self.peek()
            self._check_unsupported(t)
            if t.text in ("input", "output"):
                direction = self.next().text
                kind = "wire"
                if self.accept("reg"):
                    kind = "reg"
                elif self.accept("wire"):
                    kind = "wire"
                rng = self._range()
            name_tok = self.expect_id()
            mod.port_order.append(name_tok.text)
            if direction is not None:
                mod.items.append(A.PortDecl(direction, name_tok.text, name_tok.loc))
                mod.items.append(A.NetDecl(kind, name_tok.text, rng, name_tok.loc))
            if self.accept(")"):
                break
            self.expect(",")

    def _module_item(self, mod: A.Module) -> None:
        t = self.peek()
        self._check_unsupported(t)
        if t.text in ("input", "output"):
            direction = self.next().text
            kind = "reg" if self.accept("reg") else "wire"
            rng = self._range()
            while True:
                name_tok = self.expect_id()
                mod.items.append(A.PortDecl(direction, name_tok.text, name_tok.loc))
                mod.items.append(A.NetDecl(kind, name_tok.text, rng, name_tok.loc))
                if not self.accept(","):
                    break
            self.expect(";")
            return
        if t.text in ("wire", "reg"):
            kind = self.next().text
            rng = self._range()
            while True:
                name_tok = self.expect_id()
                mod.items.append(A.NetDecl(kind, name_tok.text, rng, name_tok.loc))
                if not self.accept(","):
                    break
            self.expect(";")
            return
        if t.text in ("parameter", "localparam"):
            local = self.next().text == "localparam"
            while True:
                name_tok = self.expect_id()
                self.expect("=")
                value = self.expression()
                mod.items.append(A.ParamDecl(name_tok.text, value, local, name_tok.loc))
                if not self.accept(","):
                    break
            self.expect(";")
            return
        if t.text == "assign":
            loc = self.next().loc
            delay = None
            if self.accept("#"):
                delay = self.primary()
            lhs = self._lvalue_expr()
            self.expect("=")
            rhs = self.expression()
            self.expect(";")
            mod.items.append(A.ContinuousAssign(lhs, rhs, delay, loc))
            return
        if t.text in ("initial", "always"):
            kind = self.next().text
            triggers: list[A.Trigger] = []
            if self.accept("@"):
                if kind == "initial":
                    raise ParseError("initial block cannot have a sensitivity list", t.loc)
                triggers = self._sensitivity()
            body = self.statement()
            mod.items.append(A.ProcessBlock(kind, triggers, body, t.loc))
            return
        if t.kind == "ID":
            # Module instantiation: <module> [#(...)] <inst> ( .port(expr), ... );
            mod_name = self.next().text
            params: list[tuple[str, A.Expr]] = []
            if self.accept("#"):
                self.expect("(")
                params = self._named_connections()
            inst_tok = self.expect_id()
            self.expect("(")
            ports = self._named_connections(allow_empty_expr=True)
            self.expect(";")
            mod.items.append(A.Instance(mod_name, inst_tok.text, params, ports, t.loc))
            return
        raise ParseError(f"unexpected token {t.text!r} in module body", t.loc)

    def _named_connections(self, allow_empty_expr: bool = False):
        out = []
        if self.accept(")"):
            return out
        while True:
            self.expect(".")
            name = self.expect_id().text
            self.expect("(")
            if allow_empty_expr and self.at(")"):
                expr = None
            else:
                expr = self.expression()
            self.expect(")")
            out.append((name, expr))
            if self.accept(")"):
                return out
            self.expect(",")

    def _sensitivity(self) -> list[A.Trigger]:
        if self.accept("*"):
            return [A.Trigger("star", None)]
        self.expect("(")
        if self.accept("*"):
            self.expect(")")
            return [A.Trigger("star", None)]
        out = []
        while True:
            t = self.peek()
            if t.text in ("posedge", "negedge"):
                kind = self.next().text
                name = self.expect_id().text
                out.append(A.Trigger(kind, name))
            else:
                name = self.expect_id().text
                out.append(A.Trigger("level", name))
            if self.accept(")"):
                return out
            if not (self.accept("or") or self.accept(",")):
                raise ParseError(
                    f"expected 'or', ',' or ')' in sensitivity list, found {self.peek().text!r}",
                    self.peek().loc,
                )

    def statement(self) -> A.Stmt:
        t = self.peek()
        self._check_unsupported(t)
        if self.at("begin"):
            loc = self.next().loc
            stmts = []
            while not self.at("end"):
                if self.peek().kind == "EOF":
                    raise ParseError("missing 'end'", self.peek().loc)
                stmts.append(self.statement())
            self.expect("end")
            return A.Block(stmts, loc)
        if self.at("if"):
            loc = self.next().loc
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.statement()
            other = self.statement() if self.accept("else") else None
            return A.If(cond, then, other, loc)
        if self.at("case"):
            loc = self.next().loc
            self.expect("(")
            selector = self.expression()
            self.expect(")")
            items: list[A.CaseItem] = []
            while not self.at("endcase"):
                it = self.peek()
                if it.kind == "EOF":
                    raise ParseError("missing 'endcase'", it.loc)
                if self.accept("default"):
                    self.accept(":")
                    items.append(A.CaseItem([], self.statement(), it.loc))
                    continue
                labels = [self.expression()]
                while self.accept(","):
                    labels.append(self.expression())
                self.expect(":")
                items.append(A.CaseItem(labels, self.statement(), it.loc))
            self.expect("endcase")
            return A.Case(selector, items, loc)
        if self.at("#"):
            loc = self.next().loc
            amount = self.primary()
            if self.accept(";"):
                return A.DelayStmt(amount, None, loc)
            return A.DelayStmt(amount, self.statement(), loc)
        # Assignment: lvalue (= | <=) expr ;
        lhs = self._lvalue_expr()
        if self.accept("="):
            blocking = True
        elif self.accept("<="):
            blocking = False
        else:
            raise ParseError(
                f"expected '=' or '<=', found {self.peek().text!r}", self.peek().loc
            )
        rhs = self.expression()
        self.expect(";")
        return A.Assign(lhs, rhs, blocking, t.loc)

    def _lvalue_expr(self) -> A.Expr:
        t = self.peek()
        if self.at("{"):
            loc = self.next().loc
            parts = [self._lvalue_expr()]
            while self.accept(","):
                parts.append(self._lvalue_expr())
            self.expect("}")
            return A.Concat(parts, loc)
        name = self.expect_id()
        base = A.Ident(name.text, name.loc)
        if self.at("["):
            loc = self.next().loc
            first = self.expression()
            if self.accept(":"):
                lsb = self.expression()
                self.expect("]")
                return A.PartSelect(base, first, lsb, loc)
            self.expect("]")
            return A.BitSelect(base, first, loc)
        return base

    # Expression precedence, loosest binding handled first.
    def expression(self) -> A.Expr:
        return self._ternary()

    def _ternary(self) -> A.Expr:
        cond = self._binary(0)
        if self.accept("?"):
            then = self.expression()
            self.expect(":")
            other = self.expression()
            return A.Ternary(cond, then, other, cond.loc)
        return cond

    _LEVELS = [
        ["||"],
        ["&&"],
        ["|"],
        ["^", "~^", "^~"],
        ["&"],
        ["==", "!="],
        ["<", "<=", ">", ">="],
        ["<<", ">>"],
        ["+", "-"],
        ["*"],
    ]

    def _binary(self, level: int) -> A.Expr:
        if level >= len(self._LEVELS):
            return self._unary()
        lhs = self._binary(level + 1)
        ops = self._LEVELS[level]
        while True:
            t = self.peek()
            if t.kind == "PUNCT" and t.text in ops:
                self.next()
                rhs = self._binary(level + 1)
                op = "~^" if t.text == "^~" else t.text
                lhs = A.Binary(op, lhs, rhs, t.loc)
            else:
                return lhs

    def _unary(self) -> A.Expr:
        t = self.peek()
        if t.kind == "PUNCT" and t.text in ("~", "!", "&", "|", "^", "~&", "~|", "~^", "^~", "-", "+"):
            self.next()
            operand = self._unary()
            if t.text == "+":
                return operand
            op = "~^" if t.text == "^~" else t.text
            return A.Unary(op, operand, t.loc)
        return self.primary()

    def primary(self) -> A.Expr:
        t = self.peek()
        self._check_unsupported(t)
        if t.kind == "NUMBER":
            self.next()
            if self.peek().kind == "BASED":
                tail = self.next()
                return A.Number(t.text + tail.text, t.loc)
            return A.Number(t.text, t.loc)
        if t.kind == "BASED":
            self.next()
            return A.Number(t.text, t.loc)
        if self.at("("):
            self.next()
            e = self.expression()
            self.expect(")")
            return e
        if self.at("{"):
            loc = self.next().loc
            parts = [self.expression()]
            if self.at("{"):
                raise UnsupportedConstructError("replication", self.peek().loc)
            while self.accept(","):
                parts.append(self.expression())
            self.expect("}")
            return A.Concat(parts, loc)
        if t.kind == "ID":
            self.next()
            base = A.Ident(t.text, t.loc)
            if self.at("["):
                loc = self.next().loc
                first = self.expression()
                if self.accept(":"):
                    lsb = self.expression()
                    self.expect("]")
                    return A.PartSelect(base, first, lsb, loc)
                self.expect("]")
                return A.BitSelect(base, first, loc)
            return base
        raise ParseError(f"expected expression, found {t.text!r}", t.loc)


def _declared_names(mod: A.Module) -> set[str]:
    names = set(mod.port_order)
    for item in mod.items:
        if isinstance(item, A.NetDecl):
            names.add(item.name)
        elif isinstance(item, A.ParamDecl):
            names.add(item.name)
        elif isinstance(item, A.Instance):
            names.add(item.instance_name)
    return names


def _walk_exprs(mod: A.Module):
    def stmt_exprs(s: A.Stmt):
        if isinstance(s, A.Assign):
            yield s.lhs
            yield s.rhs
        elif isinstance(s, A.If):
            yield s.cond
            yield from stmt_exprs(s.then)
            if s.other is not None:
                yield from stmt_exprs(s.other)
        elif isinstance(s, A.Case):
            yield s.selector
            for item in s.items:
                yield from item.labels
                yield from stmt_exprs(item.body)
        elif isinstance(s, A.Block):
            for sub in s.stmts:
                yield from stmt_exprs(sub)
        elif isinstance(s, A.DelayStmt):
            yield s.amount
            if s.stmt is not None:
                yield from stmt_exprs(s.stmt)

    for item in mod.items:
        if isinstance(item, A.ContinuousAssign):
            yield item.lhs
            yield item.rhs
            if item.delay is not None:
                yield item.delay
        elif isinstance(item, A.ParamDecl):
            yield item.value
        elif isinstance(item, A.NetDecl) and item.rng is not None:
            yield item.rng.msb
            yield item.rng.lsb
        elif isinstance(item, A.ProcessBlock):
            yield from stmt_exprs(item.body)
        elif isinstance(item, A.Instance):
            for _, e in item.param_overrides:
                yield e
            for _, e in item.port_map:
                if e is not None:
                    yield e


def _idents(e: A.Expr):
    if isinstance(e, A.Ident):
        yield e
    elif isinstance(e, A.Unary):
        yield from _idents(e.operand)
    elif isinstance(e, A.Binary):
        yield from _idents(e.lhs)
        yield from _idents(e.rhs)
    elif isinstance(e, A.Ternary):
        yield from _idents(e.cond)
        yield from _idents(e.then)
        yield from _idents(e.other)
    elif isinstance(e, A.Concat):
        for p in e.parts:
            yield from _idents(p)
    elif isinstance(e, A.BitSelect):
        yield e.base
        yield from _idents(e.index)
    elif isinstance(e, A.PartSelect):
        yield e.base
        yield from _idents(e.msb)
        yield from _idents(e.lsb)


def _resolve_names(mod: A.Module) -> None:
    names = _declared_names(mod)
    for expr in _walk_exprs(mod):
        for ident in _idents(expr):
            if ident.name not in names:
                raise ParseError(
                    f"undeclared identifier '{ident.name}' in module {mod.name}",
                    ident.loc,
                )
    for item in mod.items:
        if isinstance(item, A.ProcessBlock):
            for trig in item.triggers:
                if trig.name is not None and trig.name not in names:
                    raise ParseError(
                        f"undeclared identifier '{trig.name}' in module {mod.name}",
                        item.loc,
                    )


def parse(source: SourceUnit) -> A.Ast:
    """Parse all files of a source unit into one AST.

    Raises :class:`ParseError` (with file/line/col) on lexical or syntax
    errors, undeclared identifiers, duplicate module names, or when the
    requested top module is missing.
    """
    modules: list[A.Module] = []
    for path, text in source.files:
        toks = Lexer(path, text).tokens()
        modules.extend(_Parser(toks).source())
    seen: dict[str, A.Module] = {}
    for m in modules:
        if m.name in seen:
            raise ParseError(f"duplicate module name '{m.name}'", m.loc)
        seen[m.name] = m
        _resolve_names(m)
    if source.top_module_name not in seen:
        raise ParseError(
            f"top module '{source.top_module_name}' not found "
            f"(known: {', '.join(sorted(seen)) or 'none'})"
        )
    return A.Ast(modules)


def parse_files(paths: list[str], top: str) -> A.Ast:
    files = []
    for p in paths:
        with open(p, "r", encoding="utf-8") as f:
            files.append((p, f.read()))
    return parse(SourceUnit(files, top))
