"""Source-level AST for the supported Verilog subset, plus a deterministic
text dump used by golden tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Loc:
    path: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}"


# -- expressions ------------------------------------------------------------

@dataclass
class Ident:
    name: str
    loc: Loc


@dataclass
class Number:
    text: str  # literal as written, e.g. "4'b01xz" or "12"
    loc: Loc


@dataclass
class Unary:
    op: str  # ~ ! & | ^ ~& ~| ~^ -
    operand: "Expr"
    loc: Loc


@dataclass
class Binary:
    op: str  # & | ^ ~^ + - * == != < <= > >= << >> && ||
    lhs: "Expr"
    rhs: "Expr"
    loc: Loc


@dataclass
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    loc: Loc


@dataclass
class Concat:
    parts: list["Expr"]
    loc: Loc


@dataclass
class BitSelect:
    base: Ident
    index: "Expr"
    loc: Loc


@dataclass
class PartSelect:
    base: Ident
    msb: "Expr"
    lsb: "Expr"
    loc: Loc


Expr = Union[Ident, Number, Unary, Binary, Ternary, Concat, BitSelect, PartSelect]


# -- statements ---------------------------------------------------------------

@dataclass
class Assign:
    lhs: Expr
    rhs: Expr
    blocking: bool
    loc: Loc


@dataclass
class If:
    cond: Expr
    then: "Stmt"
    other: Optional["Stmt"]
    loc: Loc


@dataclass
class CaseItem:
    labels: list[Expr]  # empty labels list means default
    body: "Stmt"
    loc: Loc


@dataclass
class Case:
    selector: Expr
    items: list[CaseItem]
    loc: Loc


@dataclass
class Block:
    stmts: list["Stmt"]
    loc: Loc


@dataclass
class DelayStmt:
    amount: Expr  # constant expression, folded at elaboration
    stmt: Optional["Stmt"]
    loc: Loc


Stmt = Union[Assign, If, Case, Block, DelayStmt]


# -- module items -------------------------------------------------------------

@dataclass
class Range:
    msb: Expr
    lsb: Expr


@dataclass
class NetDecl:
    kind: str  # "wire" | "reg"
    name: str
    rng: Optional[Range]
    loc: Loc


@dataclass
class PortDecl:
    direction: str  # "input" | "output"
    name: str
    loc: Loc


@dataclass
class ParamDecl:
    name: str
    value: Expr
    local: bool
    loc: Loc


@dataclass
class ContinuousAssign:
    lhs: Expr
    rhs: Expr
    delay: Optional[Expr]
    loc: Loc


@dataclass
class Trigger:
    kind: str  # "posedge" | "negedge" | "level" | "star"
    name: Optional[str]


@dataclass
class ProcessBlock:
    kind: str  # "initial" | "always"
    triggers: list[Trigger]
    body: Stmt
    loc: Loc


@dataclass
class Instance:
    module_name: str
    instance_name: str
    param_overrides: list[tuple[str, Expr]]
    port_map: list[tuple[str, Optional[Expr]]]
    loc: Loc


Item = Union[NetDecl, PortDecl, ParamDecl, ContinuousAssign, ProcessBlock, Instance]


@dataclass
class Module:
    name: str
    port_order: list[str]
    items: list[Item] = field(default_factory=list)
    loc: Loc = None


@dataclass
class Ast:
    modules: list[Module]

    def module(self, name: str) -> Module:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)


# -- deterministic dump -------------------------------------------------------

def _expr_text(e: Expr) -> str:
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Number):
        return e.text
    if isinstance(e, Unary):
        return f"({e.op} {_expr_text(e.operand)})"
    if isinstance(e, Binary):
        return f"({e.op} {_expr_text(e.lhs)} {_expr_text(e.rhs)})"
    if isinstance(e, Ternary):
        return f"(?: {_expr_text(e.cond)} {_expr_text(e.then)} {_expr_text(e.other)})"
    if isinstance(e, Concat):
        return "{" + " ".join(_expr_text(p) for p in e.parts) + "}"
    if isinstance(e, BitSelect):
        return f"{e.base.name}[{_expr_text(e.index)}]"
    if isinstance(e, PartSelect):
        return f"{e.base.name}[{_expr_text(e.msb)}:{_expr_text(e.lsb)}]"
    raise TypeError(type(e))


def _dump_stmt(s: Stmt, out: list[str], ind: str) -> None:
    if isinstance(s, Assign):
        op = "=" if s.blocking else "<="
        out.append(f"{ind}assign{op} {_expr_text(s.lhs)} {_expr_text(s.rhs)}")
    elif isinstance(s, If):
        out.append(f"{ind}if {_expr_text(s.cond)}")
        _dump_stmt(s.then, out, ind + "  ")
        if s.other is not None:
            out.append(f"{ind}else")
            _dump_stmt(s.other, out, ind + "  ")
    elif isinstance(s, Case):
        out.append(f"{ind}case {_expr_text(s.selector)}")
        for item in s.items:
            label = " ".join(_expr_text(v) for v in item.labels) or "default"
            out.append(f"{ind}  item {label}")
            _dump_stmt(item.body, out, ind + "    ")
    elif isinstance(s, Block):
        out.append(f"{ind}begin")
        for sub in s.stmts:
            _dump_stmt(sub, out, ind + "  ")
    elif isinstance(s, DelayStmt):
        out.append(f"{ind}delay {_expr_text(s.amount)}")
        if s.stmt is not None:
            _dump_stmt(s.stmt, out, ind + "  ")
    else:
        raise TypeError(type(s))


def dump(ast: Ast) -> str:
    """Indented text form of the AST; stable line-by-line across runs."""
    out: list[str] = []
    for m in ast.modules:
        out.append(f"module {m.name} ({' '.join(m.port_order)})")
        for item in m.items:
            if isinstance(item, PortDecl):
                out.append(f"  port {item.direction} {item.name}")
            elif isinstance(item, NetDecl):
                rng = ""
                if item.rng is not None:
                    rng = f" [{_expr_text(item.rng.msb)}:{_expr_text(item.rng.lsb)}]"
                out.append(f"  {item.kind}{rng} {item.name}")
            elif isinstance(item, ParamDecl):
                kw = "localparam" if item.local else "parameter"
                out.append(f"  {kw} {item.name} = {_expr_text(item.value)}")
            elif isinstance(item, ContinuousAssign):
                d = f" #{_expr_text(item.delay)}" if item.delay is not None else ""
                out.append(f"  assign{d} {_expr_text(item.lhs)} = {_expr_text(item.rhs)}")
            elif isinstance(item, ProcessBlock):
                trig = " ".join(
                    t.kind if t.kind in ("star",) else f"{t.kind}({t.name})"
                    for t in item.triggers
                )
                out.append(f"  {item.kind} @({trig})" if trig else f"  {item.kind}")
                _dump_stmt(item.body, out, "    ")
            elif isinstance(item, Instance):
                out.append(f"  instance {item.module_name} {item.instance_name}")
                for name, value in item.param_overrides:
                    out.append(f"    param .{name}({_expr_text(value)})")
                for name, conn in item.port_map:
                    text = _expr_text(conn) if conn is not None else ""
                    out.append(f"    port .{name}({text})")
            else:
                raise TypeError(type(item))
    return "\n".join(out) + "\n"
