"""Elaboration: flatten the AST into the two-part design IR.

The result is a :class:`Design` holding nets, netlist nodes (decomposed
continuous assigns), and behavioral processes with statement IR and
read/write sets. Hierarchical paths use '.' separators relative to the top
instance; elaboration-created nets are prefixed with '$' and flagged
internal.

Width discipline: operands of arithmetic, bitwise, compare, and select
operators are zero-extended to their context (so every emitted node meets
its primitive width rule exactly); assignment roots, port connections, and
concatenation parts must match widths exactly. A MUL result (width = sum of
operand widths) is implicitly sliced or zero-extended to fit its consumer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import ast_nodes as A
from .ast_nodes import Loc
from .errors import ElabError, UnsupportedConstructError
from .logic import LogicVector, PrimitiveKind, result_width


# -- design IR ----------------------------------------------------------------

@dataclass
class Net:
    id: int
    path: str
    width: int
    kind: str  # "wire" | "reg"
    internal: bool = False
    aliases: list[str] = field(default_factory=list)


@dataclass
class NetlistNode:
    id: int
    kind: PrimitiveKind
    input_nets: list[int]
    output_net: int
    delay: int = 0
    params: tuple = ()


@dataclass
class DriverRef:
    """One structural driver of a net: a node output or a direct connection."""

    node: Optional[int]  # NetlistNode id, or None for a direct net connection
    src_net: Optional[int]  # set for direct connections
    delay: int = 0


# Typed expression IR (width-annotated, used by process bodies).

@dataclass
class TConst:
    width: int
    value: LogicVector


@dataclass
class TNet:
    width: int
    net: int


@dataclass
class TOp:
    width: int
    kind: PrimitiveKind
    args: list["TExpr"]
    params: tuple = ()


TExpr = Union[TConst, TNet, TOp]


@dataclass
class LValue:
    net: int
    low: int
    width: int


@dataclass
class SAssign:
    targets: list[LValue]  # MSB-first when more than one (concat target)
    rhs: TExpr
    blocking: bool


@dataclass
class SIf:
    cond: TExpr
    then: "Stmt"
    other: Optional["Stmt"]


@dataclass
class SCase:
    selector: TExpr
    items: list[tuple[list[LogicVector], "Stmt"]]
    default: Optional["Stmt"]


@dataclass
class SBlock:
    stmts: list["Stmt"]


@dataclass
class SDelay:
    amount: int


Stmt = Union[SAssign, SIf, SCase, SBlock, SDelay]


@dataclass
class Process:
    id: int
    kind: str  # "initial" | "always"
    path: str
    triggers: list[tuple[str, int]]  # (posedge|negedge|level, net id)
    body: SBlock
    read_set: frozenset[int]
    write_set: frozenset[int]
    free_running: bool  # no sensitivity list; may contain delays


@dataclass
class Design:
    top: str
    nets: list[Net]
    nodes: list[NetlistNode]
    processes: list[Process]
    inputs: list[int]
    outputs: list[int]
    name_table: dict[str, int]
    const_inits: list[tuple[int, LogicVector]]
    warnings: list[str] = field(default_factory=list)
    # Derived indexes, built by _finalize:
    drivers: list[list[DriverRef]] = field(default_factory=list)
    successors: list[list[int]] = field(default_factory=list)
    net_triggers: list[list[tuple[int, str]]] = field(default_factory=list)
    behavioral_writer: list[Optional[int]] = field(default_factory=list)

    def net_by_path(self, path: str) -> Net:
        try:
            return self.nets[self.name_table[path]]
        except KeyError:
            raise KeyError(f"no net named '{path}'") from None


def list_wires(design: Design, include_internal: bool = False) -> list[tuple[str, int]]:
    """Deterministic (path, width) listing of the fault universe,
    lexicographic by canonical path."""
    out = [
        (n.path, n.width)
        for n in design.nets
        if include_internal or not n.internal
    ]
    out.sort(key=lambda pw: pw[0])
    return out


# -- constant expressions -----------------------------------------------------

def _const_eval(expr: A.Expr, params: dict[str, int]) -> int:
    if isinstance(expr, A.Number):
        v = LogicVector.parse_literal(expr.text)
        if not v.is_fully_defined:
            raise ElabError(f"constant expression contains x/z: {expr.text}", expr.loc)
        return v.to_int()
    if isinstance(expr, A.Ident):
        if expr.name in params:
            return params[expr.name]
        raise ElabError(f"'{expr.name}' is not a parameter", expr.loc)
    if isinstance(expr, A.Unary) and expr.op == "-":
        return -_const_eval(expr.operand, params)
    if isinstance(expr, A.Binary):
        a = _const_eval(expr.lhs, params)
        b = _const_eval(expr.rhs, params)
        ops = {
            "+": lambda: a + b,
            "-": lambda: a - b,
            "*": lambda: a * b,
            "<<": lambda: a << b,
            ">>": lambda: a >> b,
        }
        if expr.op in ops:
            return ops[expr.op]()
    raise ElabError("not a constant expression", getattr(expr, "loc", None))


# -- elaboration --------------------------------------------------------------

class _Builder:
    def __init__(self, ast: A.Ast):
        self.ast = ast
        self.nets: list[Net] = []
        self.nodes: list[NetlistNode] = []
        self.processes: list[Process] = []
        self.name_table: dict[str, int] = {}
        self.const_nets: dict[LogicVector, int] = {}
        self.const_inits: list[tuple[int, LogicVector]] = []
        self.drivers: dict[int, list[DriverRef]] = {}
        self.behavioral_writers: dict[int, list[Process]] = {}
        self.warnings: list[str] = []
        self.inputs: list[int] = []
        self.outputs: list[int] = []
        self._tmp_prefix = ""
        self._tmp_counts: dict[str, int] = {}

    # -- net management ----------------------------------------------------

    def new_net(self, path: str, width: int, kind: str, internal: bool = False) -> int:
        nid = len(self.nets)
        self.nets.append(Net(nid, path, width, kind, internal))
        self.name_table[path] = nid
        return nid

    def alias_net(self, path: str, nid: int) -> None:
        self.name_table[path] = nid
        self.nets[nid].aliases.append(path)

    def const_net(self, value: LogicVector) -> int:
        nid = self.const_nets.get(value)
        if nid is None:
            nid = self.new_net(f"$const{len(self.const_nets)}", value.width, "wire", True)
            self.const_nets[value] = nid
            self.const_inits.append((nid, value))
        return nid

    def add_driver(self, net: int, ref: DriverRef) -> None:
        self.drivers.setdefault(net, []).append(ref)

    # -- module instantiation ----------------------------------------------

    def instantiate(
        self,
        module: A.Module,
        prefix: str,
        param_overrides: dict[str, int],
        port_bindings: dict[str, Optional[int]],
        loc: Optional[Loc],
        top: bool = False,
    ) -> None:
        outer_prefix = self._tmp_prefix
        self._tmp_prefix = prefix
        try:
            self._instantiate(module, prefix, param_overrides, port_bindings, loc, top)
        finally:
            self._tmp_prefix = outer_prefix

    def _instantiate(
        self,
        module: A.Module,
        prefix: str,
        param_overrides: dict[str, int],
        port_bindings: dict[str, Optional[int]],
        loc: Optional[Loc],
        top: bool = False,
    ) -> None:
        scope = _Scope(self, module, prefix)

        for item in module.items:
            if isinstance(item, A.ParamDecl):
                if item.name in param_overrides and not item.local:
                    scope.params[item.name] = param_overrides[item.name]
                else:
                    if item.name in param_overrides and item.local:
                        raise ElabError(
                            f"cannot override localparam '{item.name}'", item.loc
                        )
                    scope.params[item.name] = _const_eval(item.value, scope.params)
        for name in param_overrides:
            if name not in scope.params:
                raise ElabError(
                    f"module {module.name} has no parameter '{name}'", loc
                )

        decls: dict[str, tuple[str, int, Loc]] = {}
        port_dirs: dict[str, str] = {}
        for item in module.items:
            if isinstance(item, A.PortDecl):
                if item.name not in module.port_order:
                    raise ElabError(
                        f"'{item.name}' declared {item.direction} but not in port list",
                        item.loc,
                    )
                prev = port_dirs.get(item.name)
                if prev is not None and prev != item.direction:
                    raise ElabError(f"conflicting directions for port '{item.name}'", item.loc)
                port_dirs[item.name] = item.direction
            elif isinstance(item, A.NetDecl):
                width = 1
                if item.rng is not None:
                    msb = _const_eval(item.rng.msb, scope.params)
                    lsb = _const_eval(item.rng.lsb, scope.params)
                    if lsb != 0 or msb < lsb:
                        raise ElabError(
                            f"only [msb:0] ranges are supported, got [{msb}:{lsb}]",
                            item.loc,
                        )
                    width = msb + 1
                prev = decls.get(item.name)
                if prev is None:
                    decls[item.name] = (item.kind, width, item.loc)
                else:
                    kind = "reg" if "reg" in (prev[0], item.kind) else "wire"
                    if item.rng is not None and prev[1] != width and prev[1] != 1:
                        raise ElabError(
                            f"conflicting widths for '{item.name}': {prev[1]} vs {width}",
                            item.loc,
                        )
                    decls[item.name] = (kind, max(prev[1], width), prev[2])
        for name in module.port_order:
            if name not in port_dirs:
                raise ElabError(f"port '{name}' has no direction declaration", module.loc)

        for name, (kind, width, dloc) in decls.items():
            path = f"{prefix}{name}"
            bound = port_bindings.get(name)
            if bound is not None:
                outer = self.nets[bound]
                if outer.width != width:
                    raise ElabError(
                        f"port '{name}' of {module.name} is {width} bits but "
                        f"connects to '{outer.path}' of {outer.width} bits",
                        loc,
                    )
                if kind == "reg" and outer.kind != "reg":
                    outer.kind = "reg"
                self.alias_net(path, bound)
                scope.nets[name] = bound
            else:
                scope.nets[name] = self.new_net(path, width, kind)
        if top:
            for name in module.port_order:
                nid = scope.nets[name]
                if port_dirs[name] == "input":
                    self.inputs.append(nid)
                else:
                    self.outputs.append(nid)
        scope.port_dirs = port_dirs

        for item in module.items:
            if isinstance(item, A.ContinuousAssign):
                self._continuous_assign(scope, item)
            elif isinstance(item, A.ProcessBlock):
                self._process(scope, item)
            elif isinstance(item, A.Instance):
                self._instance(scope, item)

    def _instance(self, scope: "_Scope", item: A.Instance) -> None:
        try:
            submod = self.ast.module(item.module_name)
        except KeyError:
            raise ElabError(f"unknown module '{item.module_name}'", item.loc) from None
        sub_ports = set(submod.port_order)
        overrides = {
            name: _const_eval(e, scope.params) for name, e in item.param_overrides
        }
        sub_dirs = {
            it.name: it.direction
            for it in submod.items
            if isinstance(it, A.PortDecl)
        }
        bindings: dict[str, Optional[int]] = {}
        for port, conn in item.port_map:
            if port not in sub_ports:
                raise ElabError(
                    f"module {item.module_name} has no port '{port}'", item.loc
                )
            if port in bindings:
                raise ElabError(f"port '{port}' connected twice", item.loc)
            if conn is None:
                bindings[port] = None
            elif isinstance(conn, A.Ident) and conn.name in scope.nets:
                bindings[port] = scope.nets[conn.name]
            elif sub_dirs.get(port) == "input":
                # Arbitrary expression feeding an input: elaborate it here.
                texpr = scope.build(conn, None)
                bindings[port] = self._emit_expr(scope, texpr)
            else:
                raise ElabError(
                    f"output port '{port}' must connect to a plain net", item.loc
                )
        self.instantiate(
            submod,
            f"{scope.prefix}{item.instance_name}.",
            overrides,
            bindings,
            item.loc,
        )

    # -- continuous assigns --------------------------------------------------

    def _continuous_assign(self, scope: "_Scope", item: A.ContinuousAssign) -> None:
        delay = _const_eval(item.delay, scope.params) if item.delay is not None else 0
        if delay < 0:
            raise ElabError("negative delay", item.loc)
        targets = scope.lvalue(item.lhs, continuous=True)
        total = sum(t.width for t in targets)
        rhs = scope.build(item.rhs, total)
        if rhs.width != total:
            raise ElabError(
                f"assignment width mismatch: target is {total} bits, "
                f"expression is {rhs.width} bits",
                item.loc,
            )
        for t in targets:
            net = self.nets[t.net]
            if net.kind == "reg":
                raise ElabError(
                    f"continuous assign drives reg '{net.path}'", item.loc
                )
        if len(targets) == 1:
            t = targets[0]
            if isinstance(rhs, TNet):
                self.add_driver(t.net, DriverRef(None, rhs.net, delay))
            elif isinstance(rhs, TConst):
                self.add_driver(t.net, DriverRef(None, self.const_net(rhs.value), delay))
            else:
                out = self._emit_expr(scope, rhs, out_net=t.net, delay=delay)
                self.add_driver(t.net, DriverRef(out, None, delay))
        else:
            src = self._emit_expr(scope, rhs)
            low = total
            for t in targets:  # MSB-first
                low -= t.width
                node = self._emit_node(
                    PrimitiveKind.SLICE, [src], t.width, (low, t.width),
                    out_net=t.net, delay=delay,
                )
                self.add_driver(t.net, DriverRef(node, None, delay))

    def _emit_expr(
        self,
        scope: "_Scope",
        t: TExpr,
        out_net: Optional[int] = None,
        delay: int = 0,
    ) -> int:
        """Lower a typed expression to netlist nodes; returns the node id when
        out_net is given, else the net holding the value."""
        if isinstance(t, TConst):
            return self.const_net(t.value)
        if isinstance(t, TNet):
            return t.net
        ins = [self._emit_expr(scope, a) for a in t.args]
        return self._emit_node(t.kind, ins, t.width, t.params, out_net, delay)

    def _emit_node(
        self,
        kind: PrimitiveKind,
        input_nets: list[int],
        width: int,
        params: tuple = (),
        out_net: Optional[int] = None,
        delay: int = 0,
    ):
        got = result_width(kind, [self.nets[i].width for i in input_nets], params)
        if got != width:
            raise ElabError(f"internal width bug: {kind.name} {got} != {width}")
        if out_net is None:
            out = self.new_net(self._tmp_path(), width, "wire", True)
            node_id = len(self.nodes)
            self.nodes.append(NetlistNode(node_id, kind, input_nets, out, 0, params))
            self.add_driver(out, DriverRef(node_id, None, 0))
            return out
        node_id = len(self.nodes)
        self.nodes.append(NetlistNode(node_id, kind, input_nets, out_net, delay, params))
        return node_id

    def _tmp_path(self) -> str:
        n = self._tmp_counts.setdefault(self._tmp_prefix, 0)
        self._tmp_counts[self._tmp_prefix] += 1
        return f"{self._tmp_prefix}$tmp{n}"

    # -- processes -----------------------------------------------------------

    def _process(self, scope: "_Scope", item: A.ProcessBlock) -> None:
        pid = len(self.processes)
        free_running = not item.triggers
        body, reads, writes, has_delay = scope.statement(
            item.body, allow_delay=free_running
        )
        if item.kind == "always" and free_running and not has_delay:
            raise ElabError(
                "always block without sensitivity list must contain a delay",
                item.loc,
            )
        if item.kind == "initial" and item.triggers:
            raise ElabError("initial block cannot have a sensitivity list", item.loc)

        triggers: list[tuple[str, int]] = []
        if item.triggers and item.triggers[0].kind == "star":
            triggers = [("level", n) for n in sorted(reads)]
        else:
            for trig in item.triggers:
                triggers.append((trig.kind, scope.nets[trig.name]))

        for nid in writes:
            net = self.nets[nid]
            if net.kind != "reg":
                raise ElabError(
                    f"procedural assignment to wire '{net.path}'", item.loc
                )
        proc = Process(
            id=pid,
            kind=item.kind,
            path=f"{scope.prefix}{item.kind}#{pid}",
            triggers=triggers,
            body=body,
            read_set=frozenset(reads),
            write_set=frozenset(writes),
            free_running=free_running,
        )
        if item.kind == "always" and free_running:
            ext = reads - writes - {n for n, _ in self.const_inits}
            if ext:
                names = ", ".join(sorted(self.nets[n].path for n in ext))
                self.warnings.append(
                    f"free-running process {proc.path} reads {names}; such "
                    "processes execute fault-free (stimulus-class code)"
                )
        self.processes.append(proc)
        for nid in writes:
            self.behavioral_writers.setdefault(nid, []).append(proc)

    # -- finalize --------------------------------------------------------------

    def finalize(self, top: str) -> Design:
        for nid, writers in self.behavioral_writers.items():
            if len(writers) > 1:
                paths = ", ".join(p.path for p in writers)
                raise ElabError(
                    f"reg '{self.nets[nid].path}' is written by multiple "
                    f"processes: {paths}"
                )
            if self.drivers.get(nid):
                raise ElabError(
                    f"'{self.nets[nid].path}' has both a continuous driver "
                    "and a behavioral writer"
                )
        for nid in self.inputs:
            if self.drivers.get(nid) or nid in self.behavioral_writers:
                self.warnings.append(
                    f"input port '{self.nets[nid].path}' is also driven "
                    "inside the design"
                )

        design = Design(
            top=top,
            nets=self.nets,
            nodes=self.nodes,
            processes=self.processes,
            inputs=self.inputs,
            outputs=self.outputs,
            name_table=self.name_table,
            const_inits=self.const_inits,
            warnings=self.warnings,
        )
        design.drivers = [self.drivers.get(n.id, []) for n in self.nets]
        design.successors = [[] for _ in self.nets]
        for node in self.nodes:
            for i in sorted(set(node.input_nets)):
                design.successors[i].append(node.id)
        design.net_triggers = [[] for _ in self.nets]
        for proc in self.processes:
            for kind, nid in proc.triggers:
                design.net_triggers[nid].append((proc.id, kind))
        design.behavioral_writer = [None] * len(self.nets)
        for nid, writers in self.behavioral_writers.items():
            design.behavioral_writer[nid] = writers[0].id
        _check_acyclic(design)
        return design


def _check_acyclic(design: Design) -> None:
    """The combinational netlist-node subgraph must be acyclic; cycles
    through processes are fine (registers cut them)."""
    edges: dict[int, list[int]] = {}
    for node in design.nodes:
        for i in node.input_nets:
            edges.setdefault(i, []).append(node.output_net)
    for net in design.nets:
        for ref in design.drivers[net.id]:
            if ref.src_net is not None:
                edges.setdefault(ref.src_net, []).append(net.id)

    state = [0] * len(design.nets)  # 0 unvisited, 1 on stack, 2 done
    stack: list[int] = []

    def visit(n: int):
        state[n] = 1
        stack.append(n)
        for m in edges.get(n, ()):
            if state[m] == 1:
                cycle = stack[stack.index(m):] + [m]
                names = " -> ".join(design.nets[x].path for x in cycle)
                raise ElabError(f"combinational loop through nets: {names}")
            if state[m] == 0:
                visit(m)
        stack.pop()
        state[n] = 2

    for net in design.nets:
        if state[net.id] == 0:
            visit(net.id)


class _Scope:
    """Per-instance elaboration context: parameter env and local net map."""

    def __init__(self, builder: _Builder, module: A.Module, prefix: str):
        self.b = builder
        self.module = module
        self.prefix = prefix
        self.params: dict[str, int] = {}
        self.nets: dict[str, int] = {}
        self.port_dirs: dict[str, str] = {}

    # -- typed expression building -----------------------------------------

    def _self_width(self, e: A.Expr) -> Optional[int]:
        if isinstance(e, A.Number):
            if "'" in e.text and e.text.split("'")[0].strip():
                return LogicVector.parse_literal(e.text).width
            return None
        if isinstance(e, A.Ident):
            if e.name in self.params:
                return None
            return self.b.nets[self.nets[e.name]].width
        if isinstance(e, A.Unary):
            if e.op in ("&", "|", "^", "~&", "~|", "~^", "!"):
                return 1
            return self._self_width(e.operand)
        if isinstance(e, A.Binary):
            if e.op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
                return 1
            if e.op in ("<<", ">>"):
                return self._self_width(e.lhs)
            if e.op == "*":
                a, b_ = self._self_width(e.lhs), self._self_width(e.rhs)
                return None if a is None or b_ is None else a + b_
            a, b_ = self._self_width(e.lhs), self._self_width(e.rhs)
            if a is None:
                return b_
            if b_ is None:
                return a
            return max(a, b_)
        if isinstance(e, A.Ternary):
            a = self._self_width(e.then)
            b_ = self._self_width(e.other)
            if a is None:
                return b_
            if b_ is None:
                return a
            return max(a, b_)
        if isinstance(e, A.Concat):
            total = 0
            for p in e.parts:
                w = self._self_width(p)
                if w is None:
                    raise ElabError("unsized literal inside concatenation", e.loc)
                total += w
            return total
        if isinstance(e, A.BitSelect):
            return 1
        if isinstance(e, A.PartSelect):
            msb = _const_eval(e.msb, self.params)
            lsb = _const_eval(e.lsb, self.params)
            if msb < lsb:
                raise ElabError(f"reversed part select [{msb}:{lsb}]", e.loc)
            return msb - lsb + 1
        raise ElabError(f"unsupported expression {type(e).__name__}", getattr(e, "loc", None))

    def _extend(self, t: TExpr, width: int, loc) -> TExpr:
        if t.width == width:
            return t
        if t.width > width:
            raise ElabError(
                f"expression is {t.width} bits, context needs {width}", loc
            )
        pad = TConst(width - t.width, LogicVector(width - t.width))
        return TOp(width, PrimitiveKind.CONCAT, [pad, t])

    def build(self, e: A.Expr, ctx: Optional[int]) -> TExpr:
        """AST expression to width-annotated typed tree."""
        if isinstance(e, A.Number):
            text = e.text
            sized = "'" in text and text.split("'")[0].strip()
            v = LogicVector.parse_literal(text)
            if not sized and ctx is not None:
                if "'" in text:
                    # Base without width: stretch to context (x/z fill).
                    v = LogicVector.parse_literal(f"{ctx}'{text.split(chr(39))[1]}")
                else:
                    if v.to_int() >> ctx:
                        raise ElabError(
                            f"literal {text} does not fit in {ctx} bits", e.loc
                        )
                    v = LogicVector.from_int(v.to_int(), ctx)
            return TConst(v.width, v)
        if isinstance(e, A.Ident):
            if e.name in self.params:
                value = self.params[e.name]
                width = ctx if ctx is not None else max(32, value.bit_length())
                if value < 0 or value >> width:
                    raise ElabError(
                        f"parameter {e.name}={value} does not fit in {width} bits",
                        e.loc,
                    )
                return TConst(width, LogicVector.from_int(value, width))
            nid = self.nets[e.name]
            return TNet(self.b.nets[nid].width, nid)
        if isinstance(e, A.Unary):
            return self._build_unary(e, ctx)
        if isinstance(e, A.Binary):
            return self._build_binary(e, ctx)
        if isinstance(e, A.Ternary):
            tgt = ctx
            if tgt is None:
                tgt = self._self_width(e.then) or self._self_width(e.other)
                if tgt is None:
                    raise ElabError("cannot size conditional expression", e.loc)
            cond = self.build(e.cond, None)
            then = self._extend(self.build(e.then, tgt), tgt, e.loc)
            other = self._extend(self.build(e.other, tgt), tgt, e.loc)
            return TOp(tgt, PrimitiveKind.COND, [cond, then, other])
        if isinstance(e, A.Concat):
            parts = [self.build(p, self._self_width(p)) for p in e.parts]
            return TOp(sum(p.width for p in parts), PrimitiveKind.CONCAT, parts)
        if isinstance(e, A.BitSelect):
            base = self.build(e.base, None)
            try:
                idx = _const_eval(e.index, self.params)
            except ElabError:
                shifted = TOp(
                    base.width,
                    PrimitiveKind.SHR_LOGICAL,
                    [base, self.build(e.index, None)],
                )
                return TOp(1, PrimitiveKind.SLICE, [shifted], (0, 1))
            if not 0 <= idx < base.width:
                raise ElabError(
                    f"bit index {idx} out of range for '{e.base.name}' "
                    f"({base.width} bits)",
                    e.loc,
                )
            return TOp(1, PrimitiveKind.SLICE, [base], (idx, 1))
        if isinstance(e, A.PartSelect):
            base = self.build(e.base, None)
            msb = _const_eval(e.msb, self.params)
            lsb = _const_eval(e.lsb, self.params)
            if msb < lsb or lsb < 0 or msb >= base.width:
                raise ElabError(
                    f"part select [{msb}:{lsb}] out of range for "
                    f"'{e.base.name}' ({base.width} bits)",
                    e.loc,
                )
            return TOp(msb - lsb + 1, PrimitiveKind.SLICE, [base], (lsb, msb - lsb + 1))
        raise ElabError(f"unsupported expression {type(e).__name__}", getattr(e, "loc", None))

    _UNARY_GATE = {
        "&": PrimitiveKind.REDUCE_AND,
        "|": PrimitiveKind.REDUCE_OR,
        "^": PrimitiveKind.REDUCE_XOR,
    }

    def _build_unary(self, e: A.Unary, ctx: Optional[int]) -> TExpr:
        if e.op == "~":
            operand = self.build(e.operand, ctx)
            if ctx is not None:
                operand = self._extend(operand, ctx, e.loc)
            return TOp(operand.width, PrimitiveKind.NOT, [operand])
        if e.op == "-":
            tgt = ctx if ctx is not None else self._self_width(e.operand)
            if tgt is None:
                raise ElabError("cannot size unary minus", e.loc)
            operand = self._extend(self.build(e.operand, tgt), tgt, e.loc)
            zero = TConst(tgt, LogicVector(tgt))
            return TOp(tgt, PrimitiveKind.SUB, [zero, operand])
        if e.op == "!":
            operand = self.build(e.operand, None)
            red = TOp(1, PrimitiveKind.REDUCE_OR, [operand])
            return TOp(1, PrimitiveKind.NOT, [red])
        if e.op in self._UNARY_GATE:
            operand = self.build(e.operand, None)
            return TOp(1, self._UNARY_GATE[e.op], [operand])
        if e.op in ("~&", "~|", "~^"):
            operand = self.build(e.operand, None)
            red = TOp(1, self._UNARY_GATE[e.op[1]], [operand])
            return TOp(1, PrimitiveKind.NOT, [red])
        raise ElabError(f"unsupported unary operator {e.op}", e.loc)

    _BIN_GATE = {
        "&": PrimitiveKind.AND,
        "|": PrimitiveKind.OR,
        "^": PrimitiveKind.XOR,
        "~^": PrimitiveKind.XNOR,
        "+": PrimitiveKind.ADD,
        "-": PrimitiveKind.SUB,
    }

    def _build_binary(self, e: A.Binary, ctx: Optional[int]) -> TExpr:
        op = e.op
        if op in self._BIN_GATE:
            tgt = ctx
            for side in (e.lhs, e.rhs):
                w = self._self_width(side)
                if w is not None:
                    tgt = max(tgt or 0, w)
            if tgt is None:
                raise ElabError("cannot size expression", e.loc)
            lhs = self._extend(self.build(e.lhs, tgt), tgt, e.loc)
            rhs = self._extend(self.build(e.rhs, tgt), tgt, e.loc)
            return TOp(tgt, self._BIN_GATE[op], [lhs, rhs])
        if op in ("==", "!=", "<", "<=", ">", ">="):
            tgt = max(self._self_width(e.lhs) or 0, self._self_width(e.rhs) or 0)
            if tgt == 0:
                tgt = 32
            lhs = self._extend(self.build(e.lhs, tgt), tgt, e.loc)
            rhs = self._extend(self.build(e.rhs, tgt), tgt, e.loc)
            if op == "==":
                return TOp(1, PrimitiveKind.EQ, [lhs, rhs])
            if op == "!=":
                return TOp(1, PrimitiveKind.NEQ, [lhs, rhs])
            if op == "<":
                return TOp(1, PrimitiveKind.LT_UNSIGNED, [lhs, rhs])
            if op == ">":
                return TOp(1, PrimitiveKind.LT_UNSIGNED, [rhs, lhs])
            if op == "<=":
                lt = TOp(1, PrimitiveKind.LT_UNSIGNED, [rhs, lhs])
                return TOp(1, PrimitiveKind.NOT, [lt])
            lt = TOp(1, PrimitiveKind.LT_UNSIGNED, [lhs, rhs])
            return TOp(1, PrimitiveKind.NOT, [lt])
        if op in ("<<", ">>"):
            value = self.build(e.lhs, ctx)
            if ctx is not None:
                value = self._extend(value, ctx, e.loc)
            amount = self.build(e.rhs, None)
            kind = PrimitiveKind.SHL if op == "<<" else PrimitiveKind.SHR_LOGICAL
            return TOp(value.width, kind, [value, amount])
        if op == "*":
            lhs = self.build(e.lhs, self._self_width(e.lhs))
            rhs = self.build(e.rhs, self._self_width(e.rhs))
            prod = TOp(lhs.width + rhs.width, PrimitiveKind.MUL, [lhs, rhs])
            if ctx is not None and ctx != prod.width:
                if ctx < prod.width:
                    return TOp(ctx, PrimitiveKind.SLICE, [prod], (0, ctx))
                return self._extend(prod, ctx, e.loc)
            return prod
        if op in ("&&", "||"):
            lhs = TOp(1, PrimitiveKind.REDUCE_OR, [self.build(e.lhs, None)])
            rhs = TOp(1, PrimitiveKind.REDUCE_OR, [self.build(e.rhs, None)])
            kind = PrimitiveKind.AND if op == "&&" else PrimitiveKind.OR
            return TOp(1, kind, [lhs, rhs])
        raise ElabError(f"unsupported binary operator {op}", e.loc)

    # -- lvalues and statements ----------------------------------------------

    def lvalue(self, e: A.Expr, continuous: bool) -> list[LValue]:
        if isinstance(e, A.Concat):
            out = []
            for p in e.parts:
                out.extend(self.lvalue(p, continuous))
            return out
        if isinstance(e, A.Ident):
            nid = self.nets[e.name]
            return [LValue(nid, 0, self.b.nets[nid].width)]
        if isinstance(e, (A.BitSelect, A.PartSelect)):
            if continuous:
                raise UnsupportedConstructError(
                    "bit/part select on continuous assign target", e.loc
                )
            nid = self.nets[e.base.name]
            width = self.b.nets[nid].width
            if isinstance(e, A.BitSelect):
                idx = _const_eval(e.index, self.params)
                if not 0 <= idx < width:
                    raise ElabError(f"bit index {idx} out of range", e.loc)
                return [LValue(nid, idx, 1)]
            msb = _const_eval(e.msb, self.params)
            lsb = _const_eval(e.lsb, self.params)
            if msb < lsb or lsb < 0 or msb >= width:
                raise ElabError(f"part select [{msb}:{lsb}] out of range", e.loc)
            return [LValue(nid, lsb, msb - lsb + 1)]
        raise ElabError("invalid assignment target", getattr(e, "loc", None))

    def statement(self, s: A.Stmt, allow_delay: bool):
        reads: set[int] = set()
        writes: set[int] = set()
        has_delay = False

        def nets_of(t: TExpr, acc: set[int]):
            if isinstance(t, TNet):
                acc.add(t.net)
            elif isinstance(t, TOp):
                for a in t.args:
                    nets_of(a, acc)

        def walk(s: A.Stmt) -> Stmt:
            nonlocal has_delay
            if isinstance(s, A.Block):
                return SBlock([walk(x) for x in s.stmts])
            if isinstance(s, A.Assign):
                targets = self.lvalue(s.lhs, continuous=False)
                total = sum(t.width for t in targets)
                rhs = self.build(s.rhs, total)
                if rhs.width != total:
                    raise ElabError(
                        f"assignment width mismatch: target is {total} bits, "
                        f"expression is {rhs.width} bits",
                        s.loc,
                    )
                nets_of(rhs, reads)
                for t in targets:
                    writes.add(t.net)
                return SAssign(targets, rhs, s.blocking)
            if isinstance(s, A.If):
                cond = self.build(s.cond, None)
                nets_of(cond, reads)
                return SIf(
                    cond,
                    walk(s.then),
                    walk(s.other) if s.other is not None else None,
                )
            if isinstance(s, A.Case):
                selector = self.build(s.selector, None)
                nets_of(selector, reads)
                items = []
                default = None
                for item in s.items:
                    if not item.labels:
                        if default is not None:
                            raise ElabError("multiple default items", item.loc)
                        default = walk(item.body)
                        continue
                    labels = []
                    for lab in item.labels:
                        t = self.build(lab, selector.width)
                        if not isinstance(t, TConst):
                            raise ElabError("case label must be constant", item.loc)
                        if t.width != selector.width:
                            raise ElabError(
                                f"case label is {t.width} bits, selector is "
                                f"{selector.width} bits",
                                item.loc,
                            )
                        labels.append(t.value)
                    items.append((labels, walk(item.body)))
                return SCase(selector, items, default)
            if isinstance(s, A.DelayStmt):
                if not allow_delay:
                    raise UnsupportedConstructError(
                        "delay inside a triggered always block", s.loc
                    )
                has_delay = True
                amount = _const_eval(s.amount, self.params)
                if amount < 0:
                    raise ElabError("negative delay", s.loc)
                stmts: list[Stmt] = [SDelay(amount)]
                if s.stmt is not None:
                    stmts.append(walk(s.stmt))
                return SBlock(stmts)
            raise ElabError(f"unsupported statement {type(s).__name__}")

        body = walk(s)
        if not isinstance(body, SBlock):
            body = SBlock([body])
        return body, reads, writes, has_delay


def elaborate(ast: A.Ast, top: str) -> Design:
    """Flatten the hierarchy under ``top`` into a Design.

    Raises :class:`ElabError` for width mismatches, combinational loops,
    multiple behavioral writers, and related structural problems.
    """
    builder = _Builder(ast)
    try:
        top_mod = ast.module(top)
    except KeyError:
        raise ElabError(f"top module '{top}' not found") from None
    builder.instantiate(top_mod, "", {}, {}, top_mod.loc, top=True)
    return builder.finalize(top)
