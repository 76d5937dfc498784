"""Event-driven simulation kernel: time wheel, delta waves, two event
regions (ACTIVE, NBA), process triggering, and strobing.

One Simulation owns one scheduler and one good-machine state; it is
single-threaded. Parallelism happens by running independent Simulation
instances over a shared immutable Design. A fault engine can attach through
the ``hooks`` object to ride the same event flow with per-fault divergences;
the kernel itself only knows good values.

Delta discipline per time step: ACTIVE events drain in FIFO waves (events
scheduled during a wave join the next wave), and when the ACTIVE queue is
empty all pending nonblocking commits apply (good commits first, then the
fault plane's), possibly spawning new ACTIVE waves. Each wave or commit
round counts one delta against the configurable limit.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

from .elaborate import Design, LValue, Process, SAssign, SBlock, SCase, SDelay, SIf
from .elaborate import Stmt, TConst, TNet
from .errors import ConfigError, DeltaLimitError, KernelInvariantError
from .logic import LogicBit, LogicVector, eval_primitive, resolve_drivers
from .stimulus import StimulusProgram

GOOD = -1  # event tag for the fault-free machine; fault ids are >= 0

# Event kinds
EV_NET = 0      # good value arriving at a net
EV_BAD = 1      # fault-plane value arriving at a net (delegated to hooks)
EV_ACT = 2      # process activation
EV_RESUME = 3   # continuation of a suspended (free-running) instance
EV_NEVAL = 4    # evaluate a node and schedule its output

# Commit sources (site-refilter policy differs per source)
SRC_STRUCT = 0    # node output or direct connection
SRC_BEHAV = 1     # triggered process write
SRC_STIM = 2      # force, const init, free-running process write


class Event:
    __slots__ = ("kind", "net", "value", "tag", "slot", "source", "proc", "payload")

    def __init__(self, kind, net=-1, value=None, tag=GOOD, slot=None,
                 source=SRC_STRUCT, proc=-1, payload=None):
        self.kind = kind
        self.net = net
        self.value = value
        self.tag = tag
        self.slot = slot
        self.source = source
        self.proc = proc
        self.payload = payload


@dataclass
class SimTrace:
    """Strobe observations plus kernel counters."""

    rows: list[tuple[int, str, str]] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    node_evals: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def edge_fires(kind: str, old: LogicBit, new: LogicBit) -> bool:
    if old is new:
        return False
    if kind == "posedge":
        return (old is LogicBit.ZERO) or (new is LogicBit.ONE)
    if kind == "negedge":
        return (old is LogicBit.ONE) or (new is LogicBit.ZERO)
    raise KernelInvariantError(f"bad edge kind {kind}")


# -- process body interpretation ---------------------------------------------

def eval_expr(t, read: Callable[[int], LogicVector]) -> LogicVector:
    if isinstance(t, TNet):
        return read(t.net)
    if isinstance(t, TConst):
        return t.value
    args = [eval_expr(a, read) for a in t.args]
    return eval_primitive(t.kind, args, t.params)


class Accessor:
    """Read/write surface a process instance executes against.

    Subclasses route reads and writes to the good machine or to one fault's
    view. Nonblocking writes accumulate per net and flush as full-width
    values at delays and at body end.
    """

    def __init__(self):
        self._nba_pending: dict[int, LogicVector] = {}
        self.reads_touched: set[int] = set()
        self.writes_touched: set[int] = set()

    def read(self, net: int) -> LogicVector:
        self.reads_touched.add(net)
        return self._read(net)

    def assign(self, targets: list[LValue], value: LogicVector, blocking: bool) -> None:
        offset = value.width
        for t in targets:  # MSB-first
            offset -= t.width
            sub = value.slice(offset, t.width) if value.width != t.width else value
            self.writes_touched.add(t.net)
            if blocking:
                if sub.width == self._net_width(t.net):
                    self._write_now(t.net, sub)
                else:
                    cur = self._read_for_merge(t.net)
                    self._write_now(t.net, cur.replaced(t.low, sub))
            else:
                base = self._nba_pending.get(t.net)
                if sub.width == self._net_width(t.net):
                    self._nba_pending[t.net] = sub
                else:
                    if base is None:
                        base = self._read_for_merge(t.net)
                    self._nba_pending[t.net] = base.replaced(t.low, sub)

    def flush_nba(self) -> None:
        for net, value in self._nba_pending.items():
            self._emit_nba(net, value)
        self._nba_pending.clear()

    # subclass surface
    def _read(self, net: int) -> LogicVector:
        raise NotImplementedError

    def _read_for_merge(self, net: int) -> LogicVector:
        return self._read(net)

    def _net_width(self, net: int) -> int:
        raise NotImplementedError

    def _write_now(self, net: int, value: LogicVector) -> None:
        raise NotImplementedError

    def _emit_nba(self, net: int, value: LogicVector) -> None:
        raise NotImplementedError


def run_body(body: SBlock, acc: Accessor):
    """Interpret a process body; yields delay amounts at # statements."""
    yield from _exec_stmt(body, acc)
    acc.flush_nba()


def _exec_stmt(s: Stmt, acc: Accessor):
    if isinstance(s, SBlock):
        for sub in s.stmts:
            yield from _exec_stmt(sub, acc)
    elif isinstance(s, SAssign):
        acc.assign(s.targets, eval_expr(s.rhs, acc.read), s.blocking)
    elif isinstance(s, SIf):
        if eval_expr(s.cond, acc.read).any_one:
            yield from _exec_stmt(s.then, acc)
        elif s.other is not None:
            yield from _exec_stmt(s.other, acc)
    elif isinstance(s, SCase):
        sel = eval_expr(s.selector, acc.read)
        for labels, body in s.items:
            if any(sel == lab for lab in labels):
                yield from _exec_stmt(body, acc)
                return
        if s.default is not None:
            yield from _exec_stmt(s.default, acc)
    elif isinstance(s, SDelay):
        acc.flush_nba()
        yield s.amount
    else:
        raise KernelInvariantError(f"unknown statement {type(s).__name__}")


@dataclass
class GoodRunRecord:
    """What the good instance did during one activation; the fault plane
    replays or reconciles against it."""

    blocking: list[tuple[int, LogicVector, LogicVector]] = field(default_factory=list)
    nba: list[tuple[int, LogicVector]] = field(default_factory=list)
    pre_values: dict[int, LogicVector] = field(default_factory=dict)
    entries_pre: dict[int, dict] = field(default_factory=dict)

    def written_nets(self) -> set[int]:
        return {n for n, _, _ in self.blocking} | {n for n, _ in self.nba}


class GoodAccessor(Accessor):
    def __init__(self, sim: "Simulation", source: int, record: Optional[GoodRunRecord]):
        super().__init__()
        self.sim = sim
        self.source = source
        self.record = record

    def _read(self, net: int) -> LogicVector:
        return self.sim.values[net]

    def _read_for_merge(self, net: int) -> LogicVector:
        return self.sim.values[net]

    def _net_width(self, net: int) -> int:
        return self.sim.design.nets[net].width

    def _write_now(self, net: int, value: LogicVector) -> None:
        if self.record is not None:
            pre = self.sim.values[net]
            self.record.pre_values.setdefault(net, pre)
            if self.sim.hooks is not None:
                self.record.entries_pre.setdefault(
                    net, self.sim.hooks.snapshot_entries(net)
                )
            self.sim.commit_good(net, value, self.source)
            self.record.blocking.append((net, pre, self.sim.values[net]))
        else:
            self.sim.commit_good(net, value, self.source)

    def _emit_nba(self, net: int, value: LogicVector) -> None:
        if self.record is not None:
            self.record.nba.append((net, value))
        self.sim.nba_q.append((net, value, self.source))


class _FreeInstance:
    """A free-running (initial or sensitivity-less always) instance."""

    __slots__ = ("proc", "gen", "done")

    def __init__(self, proc: Process, acc: Accessor):
        self.proc = proc
        self.done = False
        if proc.kind == "initial":
            self.gen = run_body(proc.body, acc)
        else:
            self.gen = self._loop(proc, acc)

    @staticmethod
    def _loop(proc: Process, acc: Accessor):
        while True:
            yield from run_body(proc.body, acc)


class Simulation:
    """One event-driven run over an immutable Design."""

    def __init__(
        self,
        design: Design,
        stim: StimulusProgram,
        hooks=None,
        delta_limit: int = 10_000,
        site_filter: Optional[tuple[int, int, str]] = None,
    ):
        if delta_limit < 1:
            raise ConfigError("delta limit must be positive")
        self.design = design
        self.stim = stim
        self.hooks = hooks
        self.delta_limit = delta_limit
        self.site_filter = site_filter

        self.now = 0
        self.values: list[LogicVector] = [
            LogicVector.all_x(n.width) for n in design.nets
        ]
        # Driver contributions, only materialized for multi-driven nets.
        self.contribs: dict[int, list[LogicVector]] = {
            n.id: [LogicVector.all_x(n.width)] * len(design.drivers[n.id])
            for n in design.nets
            if len(design.drivers[n.id]) > 1
        }
        # Direct (net-to-net) connections: src -> [(dst, slot, delay)]
        self.direct_succs: dict[int, list[tuple[int, int, int]]] = {}
        for net in design.nets:
            for slot, ref in enumerate(design.drivers[net.id]):
                if ref.src_net is not None:
                    self.direct_succs.setdefault(ref.src_net, []).append(
                        (net.id, slot, ref.delay)
                    )
        # Node output slot in its net's driver list.
        self.node_slot: dict[int, int] = {}
        for net in design.nets:
            for slot, ref in enumerate(design.drivers[net.id]):
                if ref.node is not None:
                    self.node_slot[ref.node] = slot

        self.active: list[Event] = []
        self.nba_q: list[tuple[int, LogicVector, int]] = []
        self.future: dict[int, list[Event]] = {}
        self.future_times: list[int] = []

        self.events_processed = 0
        self.process_activations = 0
        self.node_evals = [0] * len(design.nodes)
        self.node_evaluations = 0
        self.free_instances: dict[int, _FreeInstance] = {}
        self._free_accessors: dict[int, "GoodAccessor"] = {}
        self.trace = SimTrace(warnings=list(design.warnings))
        self._recent_commits: list[set[int]] = []
        # Optional per-strobe watcher; may set stop_requested to end the run
        # early (serial mode drops a fault after its first detection).
        self.strobe_watch: Optional[Callable[[int], None]] = None
        self.stop_requested = False
        # Optional instrumentation: called with (process, accessor) after
        # every instance execution; tests use it to audit read/write sets.
        self.instance_hook: Optional[Callable] = None

    # -- scheduling --------------------------------------------------------

    def schedule(self, ev: Event, time: Optional[int] = None) -> None:
        t = self.now if time is None else time
        if t < self.now:
            raise KernelInvariantError(
                f"event scheduled at t={t} before now={self.now}"
            )
        if t == self.now:
            self.active.append(ev)
        else:
            q = self.future.get(t)
            if q is None:
                self.future[t] = [ev]
                heapq.heappush(self.future_times, t)
            else:
                q.append(ev)

    def schedule_bad(self, net: int, fault_id: int, value: LogicVector,
                     delay: int = 0) -> None:
        self.schedule(Event(EV_BAD, net=net, value=value, tag=fault_id),
                      self.now + delay)

    # -- good machine commit ------------------------------------------------

    def _apply_site_filter(self, net: int, value: LogicVector) -> LogicVector:
        sf = self.site_filter
        if sf is not None and sf[0] == net:
            bit = LogicBit.ZERO if sf[2] == "sa0" else LogicBit.ONE
            return value.forced_bit(sf[1], bit)
        return value

    def commit_good(self, net: int, value: LogicVector, source: int,
                    slot: Optional[int] = None) -> None:
        """Apply a good value at a net; on change, propagate to successor
        nodes, direct connections, triggers, and the fault plane."""
        contribs = self.contribs.get(net)
        if slot is not None and contribs is not None:
            contribs[slot] = value
            resolved = resolve_drivers(contribs)
        else:
            resolved = value
        resolved = self._apply_site_filter(net, resolved)
        old = self.values[net]
        if resolved == old:
            return
        self.values[net] = resolved
        if self._recent_commits:
            self._recent_commits[-1].add(net)

        entries_pre = None
        if self.hooks is not None:
            entries_pre = self.hooks.after_good_commit(net, old, resolved, source)

        design = self.design
        for node_id in design.successors[net]:
            node = design.nodes[node_id]
            out = self.eval_node(node_id)
            self.schedule(
                Event(EV_NET, net=node.output_net, value=out,
                      slot=self.node_slot.get(node_id), source=SRC_STRUCT),
                self.now + node.delay,
            )
        # Direct-connection propagation goes out before the fault plane's so
        # bad events always compare against the already-updated good value.
        for dst, dslot, delay in self.direct_succs.get(net, ()):
            self.schedule(
                Event(EV_NET, net=dst, value=resolved, slot=dslot,
                      source=SRC_STRUCT),
                self.now + delay,
            )
        if self.hooks is not None:
            self.hooks.after_successor_evals(net, entries_pre)

        for proc_id, kind in design.net_triggers[net]:
            fired = (
                old != resolved
                if kind == "level"
                else edge_fires(kind, old.bit(0), resolved.bit(0))
            )
            if self.hooks is not None:
                suppressed, solo = self.hooks.adjust_trigger(
                    proc_id, kind, net, old, resolved, entries_pre, fired
                )
                if fired:
                    self.schedule(Event(EV_ACT, proc=proc_id,
                                        payload=("good", suppressed)))
                for f in solo:
                    self.schedule(Event(EV_ACT, proc=proc_id, payload=("bad", f)))
            elif fired:
                self.schedule(Event(EV_ACT, proc=proc_id, payload=("good", frozenset())))

    def eval_node(self, node_id: int) -> LogicVector:
        node = self.design.nodes[node_id]
        self.node_evals[node_id] += 1
        self.node_evaluations += 1
        values = self.values
        return eval_primitive(
            node.kind, [values[i] for i in node.input_nets], node.params
        )

    def count_bad_eval(self, node_id: int) -> None:
        self.node_evals[node_id] += 1
        self.node_evaluations += 1

    # -- event processing ----------------------------------------------------

    def _process(self, ev: Event) -> None:
        self.events_processed += 1
        if ev.kind == EV_NET:
            # value None = recommit the current value (the serial mode's
            # injection event: the site filter applies at commit time).
            value = ev.value if ev.value is not None else self.values[ev.net]
            self.commit_good(ev.net, value, ev.source, ev.slot)
        elif ev.kind == EV_BAD:
            if self.hooks is None:
                raise KernelInvariantError("bad event without a fault plane")
            self.hooks.process_bad_event(ev.net, ev.tag, ev.value)
        elif ev.kind == EV_ACT:
            self._activate(ev.proc, ev.payload)
        elif ev.kind == EV_RESUME:
            self._resume(ev.proc)
        elif ev.kind == EV_NEVAL:
            node = self.design.nodes[ev.proc]
            out = self.eval_node(ev.proc)
            self.schedule(
                Event(EV_NET, net=node.output_net, value=out,
                      slot=self.node_slot.get(ev.proc), source=SRC_STRUCT),
                self.now + node.delay,
            )
        else:
            raise KernelInvariantError(f"unknown event kind {ev.kind}")

    def _activate(self, proc_id: int, payload) -> None:
        proc = self.design.processes[proc_id]
        if payload == ("init",):
            self._start_free_instance(proc)
            return
        if proc.free_running:
            raise KernelInvariantError("free-running process activated by trigger")
        if self.hooks is not None:
            self.hooks.run_activation(proc, payload)
        else:
            self.run_good_instance(proc, SRC_BEHAV, record=False)

    def run_good_instance(self, proc: Process, source: int,
                          record: bool = True) -> GoodRunRecord:
        rec = GoodRunRecord() if record else None
        acc = GoodAccessor(self, source, rec)
        self.process_activations += 1
        for _ in run_body(proc.body, acc):
            raise KernelInvariantError(
                f"delay inside triggered process {proc.path}"
            )
        if self.instance_hook is not None:
            self.instance_hook(proc, acc)
        return rec if rec is not None else GoodRunRecord()

    def _start_free_instance(self, proc: Process) -> None:
        acc = GoodAccessor(self, SRC_STIM, None)
        inst = _FreeInstance(proc, acc)
        self._free_accessors[proc.id] = acc
        self.free_instances[proc.id] = inst
        self.process_activations += 1
        self._step_instance(inst)

    def _resume(self, proc_id: int) -> None:
        inst = self.free_instances.get(proc_id)
        if inst is None or inst.done:
            return
        self._step_instance(inst)

    def _step_instance(self, inst: _FreeInstance) -> None:
        try:
            delay = next(inst.gen)
        except StopIteration:
            inst.done = True
        if self.instance_hook is not None:
            self.instance_hook(inst.proc, self._free_accessors[inst.proc.id])
        if not inst.done:
            self.schedule(Event(EV_RESUME, proc=inst.proc.id), self.now + delay)

    # -- main loop -------------------------------------------------------------

    def setup(self) -> None:
        for net, value in self.design.const_inits:
            self.schedule(Event(EV_NET, net=net, value=value, source=SRC_STIM), 0)
        for node in self.design.nodes:
            self.schedule(Event(EV_NEVAL, proc=node.id), 0)
        for proc in self.design.processes:
            if proc.free_running:
                self.schedule(Event(EV_ACT, proc=proc.id, payload=("init",)), 0)
        design = self.design
        for time, path, literal in self.stim.expand_forces():
            nid = design.name_table.get(path)
            if nid is None:
                raise ConfigError(f"stimulus names unknown net '{path}'")
            width = design.nets[nid].width
            value = LogicVector.parse_literal(literal)
            if "'" not in literal:
                value = LogicVector.from_int(value.to_int(), width)
            if value.width != width:
                raise ConfigError(
                    f"stimulus value {literal} is {value.width} bits but "
                    f"'{path}' is {width} bits"
                )
            if design.behavioral_writer[nid] is not None:
                self.trace.warnings.append(
                    f"force on behaviorally driven net '{path}' at t={time}; "
                    "later process writes win"
                )
            self.schedule(Event(EV_NET, net=nid, value=value, source=SRC_STIM), time)
        # Fault injection (or the serial site-filter's initializing event)
        # goes last at t=0: the filtered site value is computed against the
        # good value current when the event processes.
        if self.site_filter is not None:
            self.schedule(
                Event(EV_NET, net=self.site_filter[0], value=None, source=SRC_STIM), 0
            )
        if self.hooks is not None:
            self.hooks.at_setup()

    def _drain_step(self) -> None:
        delta = 0
        self._recent_commits = [set()]
        while self.active or self.nba_q or (
            self.hooks is not None and self.hooks.has_pending_nba()
        ):
            delta += 1
            if delta > self.delta_limit:
                recent = sorted(
                    {self.design.nets[n].path for s in self._recent_commits[-4:] for n in s}
                )
                raise DeltaLimitError(self.now, recent)
            self._recent_commits.append(set())
            if len(self._recent_commits) > 8:
                self._recent_commits.pop(0)
            if self.active:
                wave = self.active
                self.active = []
                for ev in wave:
                    self._process(ev)
                continue
            nba = self.nba_q
            self.nba_q = []
            nba_pre: dict[int, LogicVector] = {}
            if self.hooks is not None:
                self.hooks.nba_begin()
            for net, value, source in nba:
                self.events_processed += 1
                nba_pre.setdefault(net, self.values[net])
                if self.hooks is not None:
                    self.hooks.before_nba_commit(net)
                self.commit_good(net, value, source)
            if self.hooks is not None:
                self.hooks.nba_phase(nba_pre)
        self._recent_commits = []

    def run_to_end(self) -> SimTrace:
        self.setup()
        design = self.design
        end = self.stim.end_time
        strobe_set = set(self.stim.strobe_times())
        visits = sorted(strobe_set | {0})
        vi = 0

        t = 0
        while True:
            self.now = t
            self._drain_step()
            if t in strobe_set:
                for out in sorted(design.outputs, key=lambda n: design.nets[n].path):
                    self.trace.rows.append(
                        (t, design.nets[out].path, self.values[out].to_literal())
                    )
                if self.hooks is not None:
                    self.hooks.at_strobe(t)
                if self.strobe_watch is not None:
                    self.strobe_watch(t)
            if self.hooks is not None:
                self.hooks.at_step_end(t)
            if self.stop_requested:
                break

            while vi < len(visits) and visits[vi] <= t:
                vi += 1
            while self.future_times and not self.future.get(self.future_times[0]):
                heapq.heappop(self.future_times)
            nxt_event = self.future_times[0] if self.future_times else None
            if nxt_event is not None and nxt_event > end:
                nxt_event = None
            nxt_visit = visits[vi] if vi < len(visits) else None
            if nxt_event is None and nxt_visit is None:
                break
            t = min(x for x in (nxt_event, nxt_visit) if x is not None)
            q = self.future.pop(t, None)
            if q:
                self.active.extend(q)

        self.trace.counters = {
            "events_processed": self.events_processed,
            "node_evaluations": self.node_evaluations,
            "process_activations": self.process_activations,
        }
        self.trace.node_evals = self.node_evals
        return self.trace


def run(
    design: Design,
    stim: StimulusProgram,
    hooks=None,
    delta_limit: int = 10_000,
    site_filter: Optional[tuple[int, int, str]] = None,
) -> SimTrace:
    """Run one simulation to the stimulus end time and return its trace."""
    sim = Simulation(design, stim, hooks=hooks, delta_limit=delta_limit,
                     site_filter=site_filter)
    return sim.run_to_end()
