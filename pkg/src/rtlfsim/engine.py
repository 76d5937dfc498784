"""Concurrent batch fault simulation plus the serial single-fault oracle.

Concurrent mode shares one good machine per batch and tracks only
divergences: a sparse per-net store maps fault id to that fault's value
wherever it differs from the good value (entries equal to good are removed,
with a notification event so successors converge too). Netlist propagation
follows the five steps: bad-gate allocation, injection, evaluation through
site filters, visibility checks, and good/bad event propagation. Behavioral
code runs per-fault instances keyed by fault id; faults whose reads match
the good machine are reconciled by replaying the good instance's writes
through their site filters instead of re-executing the body.

Serial mode defines ground truth: one fresh simulation per fault with the
site permanently filtered, compared against a fault-free reference at
strobes under the same detection rule.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .elaborate import Design, Process
from .errors import ConfigError, DeltaLimitError, KernelInvariantError, SimulationError
from .faults import Fault, FaultBatch, filter_through_fault
from .kernel import (
    EV_ACT,
    SRC_BEHAV,
    Accessor,
    Event,
    Simulation,
    edge_fires,
    eval_primitive,
    run_body,
)
from .logic import LogicVector, resolve_drivers
from .report import DetectionReport, FaultRecord
from .stimulus import StimulusProgram

MAX_BATCH_W = 1 << 16
DEFAULT_W = 256

DETECT = "detect"
POTENTIAL = "potential"


def classify_pair(good: LogicVector, bad: LogicVector) -> Optional[str]:
    """Detection rule at a strobed output, per bit: a hard detect needs both
    bits binary and unequal; exactly one unknown (x or z) bit is a potential
    detect; anything else is silent."""
    gu = good._x | good._z
    bu = bad._x | bad._z
    if (good._ones ^ bad._ones) & ~gu & ~bu:
        return DETECT
    if gu ^ bu:
        return POTENTIAL
    return None


@dataclass
class FaultOutcome:
    fault: Fault
    status: str = "undetected"
    detect_time: Optional[int] = None
    detect_output: Optional[str] = None
    good_value: Optional[str] = None
    bad_value: Optional[str] = None
    potential: bool = False
    potential_time: Optional[int] = None
    potential_output: Optional[str] = None
    reason: Optional[str] = None

    def record(self) -> FaultRecord:
        return FaultRecord(
            net=self.fault.path,
            bit=self.fault.site_bit,
            polarity=self.fault.polarity,
            status=self.status,
            detect_time=self.detect_time,
            detect_output=self.detect_output,
            good_value=self.good_value,
            bad_value=self.bad_value,
            potential=self.potential,
            potential_time=self.potential_time,
            potential_output=self.potential_output,
            reason=self.reason,
        )


class FaultAccessor(Accessor):
    """Per-fault behavioral instance: reads go private value -> bad gate ->
    pre-activation snapshot -> good value; writes route through the fault's
    visibility check."""

    def __init__(self, plane: "FaultPlane", fault_id: int,
                 pre_values: dict[int, LogicVector]):
        super().__init__()
        self.plane = plane
        self.fault_id = fault_id
        self.pre = pre_values
        self.private: dict[int, LogicVector] = {}

    def _read(self, net: int) -> LogicVector:
        v = self.private.get(net)
        if v is not None:
            return v
        v = self.plane.store[net].get(self.fault_id)
        if v is not None:
            return v
        v = self.pre.get(net)
        if v is not None:
            return v
        return self.plane.sim.values[net]

    def _net_width(self, net: int) -> int:
        return self.plane.design.nets[net].width

    def _write_now(self, net: int, value: LogicVector) -> None:
        # Site-filter immediately so same-activation read-back sees the
        # stuck bit, exactly as the serial machine would.
        value = self.plane._filter(net, self.fault_id, value)
        self.private[net] = value
        self.plane.process_bad_event(net, self.fault_id, value)

    def _emit_nba(self, net: int, value: LogicVector) -> None:
        self.plane.bad_nba.append((net, self.fault_id, value))


def allocate_bad_gates(design: Design, batch: FaultBatch) -> list[dict]:
    """Empty sparse bad-gate store covering every net, capacity-checked."""
    if not batch.faults:
        raise ConfigError("batch must contain at least one fault")
    if batch.width > MAX_BATCH_W:
        raise ConfigError(f"W={batch.width} exceeds maximum {MAX_BATCH_W}")
    return [dict() for _ in design.nets]


class FaultPlane:
    """Hooks object implementing the concurrent fault machinery for one
    batch riding one kernel Simulation."""

    def __init__(self, design: Design, batch: FaultBatch, *,
                 no_drop: bool = False, audit: bool = False):
        self.design = design
        self.batch = batch
        self.faults = batch.faults
        self.no_drop = no_drop
        self.audit = audit

        self.store: list[dict[int, LogicVector]] = allocate_bad_gates(design, batch)
        self.active = [True] * len(self.faults)
        self.outcomes = [FaultOutcome(f) for f in self.faults]
        self.fault_nets: list[set[int]] = [set() for _ in self.faults]
        self.bad_eval_count = [0] * len(self.faults)
        self.bad_nba: list[tuple[int, int, Optional[LogicVector]]] = []
        self.audit_violations: list[tuple[int, str, int]] = []

        self.site_faults: dict[int, list[int]] = {}
        self.site_of: list[int] = []
        for fid, fault in enumerate(self.faults):
            if fault.site_net is None:
                raise KernelInvariantError("invalid fault in batch")
            self.site_of.append(fault.site_net)
            self.site_faults.setdefault(fault.site_net, []).append(fid)

        self.proc_site_faults: list[list[int]] = []
        for proc in design.processes:
            self.proc_site_faults.append(
                [fid for fid, f in enumerate(self.faults)
                 if f.site_net in proc.write_set]
            )
        self.sorted_outputs = sorted(
            ((design.nets[n].path, n) for n in design.outputs)
        )
        self.sim: Simulation = None  # bound by run_batch
        self._vanished: list[int] = []
        self._nba_entries_pre: dict[int, dict] = {}

    def bind(self, sim: Simulation) -> None:
        self.sim = sim

    # -- store primitives ----------------------------------------------------

    def _set_entry(self, net: int, fid: int, value: LogicVector) -> None:
        self.store[net][fid] = value
        self.fault_nets[fid].add(net)

    def _del_entry(self, net: int, fid: int) -> None:
        del self.store[net][fid]
        self.fault_nets[fid].discard(net)

    def _filter(self, net: int, fid: int, value: LogicVector) -> LogicVector:
        if self.site_of[fid] == net:
            return filter_through_fault(self.faults[fid], value)
        return value

    def _view(self, net: int, fid: int) -> LogicVector:
        v = self.store[net].get(fid)
        return v if v is not None else self.sim.values[net]

    def _eval_bad(self, node, fid: int) -> LogicVector:
        store = self.store
        values = self.sim.values
        inputs = []
        for i in node.input_nets:
            v = store[i].get(fid)
            inputs.append(v if v is not None else values[i])
        self.sim.count_bad_eval(node.id)
        self.bad_eval_count[fid] += 1
        return eval_primitive(node.kind, inputs, node.params)

    def _has_upstream_entries(self, net: int, fid: int) -> bool:
        for ref in self.design.drivers[net]:
            if ref.node is not None:
                node = self.design.nodes[ref.node]
                if any(fid in self.store[i] for i in node.input_nets):
                    return True
            elif fid in self.store[ref.src_net]:
                return True
        return False

    def _resolve_under(self, net: int, fid: int) -> LogicVector:
        outs = []
        for ref in self.design.drivers[net]:
            if ref.node is not None:
                outs.append(self._eval_bad(self.design.nodes[ref.node], fid))
            else:
                outs.append(self._view(ref.src_net, fid))
        return outs[0] if len(outs) == 1 else resolve_drivers(outs)

    # -- kernel hook interface -------------------------------------------------

    def at_setup(self) -> None:
        # Injection: one bad event per fault at t=0, evaluated against the
        # good value current when the event is processed (value=None asks
        # process_bad_event to compute the filtered site value itself).
        for fid in range(len(self.faults)):
            self.sim.schedule_bad(self.site_of[fid], fid, None)

    def snapshot_entries(self, net: int) -> dict:
        return dict(self.store[net])

    def has_pending_nba(self) -> bool:
        return bool(self.bad_nba)

    def after_good_commit(self, net: int, old: LogicVector, new: LogicVector,
                          source: int) -> dict:
        st = self.store[net]
        sites = self.site_faults.get(net)
        entries_pre = dict(st) if (st or sites) else {}
        vanished: list[int] = []
        if st:
            for fid in sorted(st):
                if st[fid] == new:
                    self._del_entry(net, fid)
                    vanished.append(fid)
        if sites and source != SRC_BEHAV:
            # Re-filter site faults; behavioral writes are reconciled by the
            # activation machinery instead.
            driven = bool(self.design.drivers[net])
            for fid in sites:
                if not self.active[fid]:
                    continue
                raw = new
                if driven and self._has_upstream_entries(net, fid):
                    raw = self._resolve_under(net, fid)
                filtered = filter_through_fault(self.faults[fid], raw)
                cur = st.get(fid)
                if filtered == new:
                    if cur is not None:
                        self._del_entry(net, fid)
                        if fid not in vanished:
                            vanished.append(fid)
                elif cur != filtered:
                    self._set_entry(net, fid, filtered)
        self._vanished = vanished
        return entries_pre

    def after_successor_evals(self, net: int, entries_pre: dict) -> None:
        design = self.design
        sim = self.sim
        st = self.store[net]
        vanished = self._vanished
        self._vanished = []
        for node_id in design.successors[net]:
            node = design.nodes[node_id]
            fids = set()
            for i in node.input_nets:
                fids.update(self.store[i])
            fids.update(vanished)
            for fid in sorted(fids):
                if self.active[fid]:
                    out = self._eval_bad(node, fid)
                    sim.schedule_bad(node.output_net, fid, out, node.delay)
        direct = sim.direct_succs.get(net)
        if direct:
            fids = sorted(set(st) | set(vanished))
            for dst, _slot, delay in direct:
                for fid in fids:
                    if self.active[fid]:
                        sim.schedule_bad(dst, fid, self._view(net, fid), delay)

    def adjust_trigger(self, proc_id: int, kind: str, net: int,
                       old: LogicVector, new: LogicVector,
                       entries_pre: dict, good_fired: bool):
        st = self.store[net]
        cands = set(entries_pre) | set(st)
        for fid in self.site_faults.get(net, ()):
            cands.add(fid)
        if not cands:
            return _EMPTY_SET, ()
        suppressed = set()
        solo = []
        for fid in sorted(cands):
            if not self.active[fid]:
                continue
            old_f = entries_pre.get(fid, old)
            new_f = st.get(fid, new)
            if kind == "level":
                fired = old_f != new_f
            else:
                fired = edge_fires(kind, old_f.bit(0), new_f.bit(0))
            if good_fired and not fired:
                suppressed.add(fid)
            elif fired and not good_fired:
                solo.append(fid)
        return frozenset(suppressed), solo

    def process_bad_event(self, net: int, fid: int,
                          value: Optional[LogicVector]) -> None:
        """Visibility check at a net for one fault: write/update the bad
        gate if the value diverges from good, remove it on convergence, and
        propagate a bad event to successors on any change."""
        if not self.active[fid]:
            return
        refs = self.design.drivers[net]
        if refs:
            if value is None or len(refs) > 1:
                raw = self._resolve_under(net, fid)
            else:
                raw = value
        else:
            raw = value if value is not None else self.sim.values[net]
        new_f = self._filter(net, fid, raw)
        good = self.sim.values[net]
        st = self.store[net]
        old_entry = st.get(fid)
        old_f = old_entry if old_entry is not None else good
        if new_f == good:
            if old_entry is None:
                return
            self._del_entry(net, fid)
            new_view = good
        else:
            if old_entry == new_f:
                return
            self._set_entry(net, fid, new_f)
            new_view = new_f

        design = self.design
        sim = self.sim
        for node_id in design.successors[net]:
            node = design.nodes[node_id]
            out = self._eval_bad(node, fid)
            sim.schedule_bad(node.output_net, fid, out, node.delay)
        for dst, _slot, delay in sim.direct_succs.get(net, ()):
            sim.schedule_bad(dst, fid, new_view, delay)
        for proc_id, kind in design.net_triggers[net]:
            if kind == "level":
                fired = old_f != new_view
            else:
                fired = edge_fires(kind, old_f.bit(0), new_view.bit(0))
            if fired:
                sim.schedule(Event(EV_ACT, proc=proc_id, payload=("bad", fid)))

    def nba_begin(self) -> None:
        self._nba_entries_pre = {}

    def before_nba_commit(self, net: int) -> None:
        self._nba_entries_pre.setdefault(net, dict(self.store[net]))

    def nba_phase(self, nba_pre: dict[int, LogicVector]) -> None:
        queue = self.bad_nba
        self.bad_nba = []
        for net, fid, value in queue:
            if not self.active[fid]:
                continue
            if value is None:
                # Hold: the fault's machine did not write this net; it keeps
                # the view it had just before the good commit moved on.
                value = self._nba_entries_pre.get(net, {}).get(fid)
                if value is None:
                    value = nba_pre.get(net, self.sim.values[net])
            self.sim.events_processed += 1
            self.process_bad_event(net, fid, value)

    def run_activation(self, proc: Process, payload) -> None:
        if payload[0] == "bad":
            fid = payload[1]
            if self.active[fid]:
                self._run_fault_instance(proc, fid, None)
            return
        suppressed = payload[1]
        rec = self.sim.run_good_instance(proc, SRC_BEHAV, record=True)

        read_cands: set[int] = set()
        for n in proc.read_set:
            read_cands.update(self.store[n])
        # A fault sited on a net the process writes and then reads back in
        # the same activation diverges mid-body: the shadow replay is not
        # exact for it, so it re-executes in full.
        for fid in self.proc_site_faults[proc.id]:
            if self.site_of[fid] in proc.read_set:
                read_cands.add(fid)
        write_cands: set[int] = set()
        for n in proc.write_set:
            write_cands.update(self.store[n])
        write_cands.update(self.proc_site_faults[proc.id])

        full = sorted(
            fid for fid in read_cands
            if self.active[fid] and fid not in suppressed
        )
        shadows = sorted(
            fid for fid in write_cands
            if self.active[fid] and fid not in suppressed
            and fid not in read_cands
        )
        held = sorted(fid for fid in suppressed if self.active[fid])

        for fid in full:
            self._run_fault_instance(proc, fid, rec)
        for fid in shadows:
            for net, _pre, post in rec.blocking:
                self.process_bad_event(net, fid, post)
            for net, value in rec.nba:
                self.bad_nba.append((net, fid, value))
        for fid in held:
            self._apply_holds(fid, rec, set())

    def _apply_holds(self, fid: int, rec, written: set[int]) -> None:
        for net, pre, _post in rec.blocking:
            if net not in written:
                h = rec.entries_pre.get(net, {}).get(fid, pre)
                self.process_bad_event(net, fid, h)
        for net, _value in rec.nba:
            if net not in written:
                self.bad_nba.append((net, fid, None))

    def _run_fault_instance(self, proc: Process, fid: int, rec) -> None:
        acc = FaultAccessor(self, fid, rec.pre_values if rec is not None else {})
        self.sim.process_activations += 1
        for _ in run_body(proc.body, acc):
            raise KernelInvariantError(
                f"delay inside triggered process {proc.path}"
            )
        if self.sim.instance_hook is not None:
            self.sim.instance_hook(proc, acc)
        if rec is not None:
            self._apply_holds(fid, rec, acc.writes_touched)

    def at_strobe(self, time: int) -> None:
        values = self.sim.values
        hard: dict[int, tuple] = {}
        pot: dict[int, tuple] = {}
        for path, out in self.sorted_outputs:
            st = self.store[out]
            if not st:
                continue
            good = values[out]
            for fid in sorted(st):
                if not self.active[fid] or self.outcomes[fid].status != "undetected":
                    continue
                verdict = classify_pair(good, st[fid])
                if verdict == DETECT and fid not in hard:
                    hard[fid] = (path, good, st[fid])
                elif verdict == POTENTIAL and fid not in pot:
                    pot[fid] = (path,)
        for fid in sorted(hard):
            path, good, bad = hard[fid]
            o = self.outcomes[fid]
            o.status = "detected"
            o.detect_time = time
            o.detect_output = path
            o.good_value = good.to_literal()
            o.bad_value = bad.to_literal()
            self._drop(fid)
        for fid in sorted(pot):
            if fid in hard:
                continue
            o = self.outcomes[fid]
            if o.status == "undetected" and not o.potential:
                o.potential = True
                o.potential_time = time
                o.potential_output = pot[fid][0]
        if hard and not self.no_drop and not any(self.active):
            # Whole batch resolved: nothing left to observe.
            self.sim.stop_requested = True

    def _drop(self, fid: int) -> None:
        if self.no_drop:
            return
        for net in list(self.fault_nets[fid]):
            self.store[net].pop(fid, None)
        self.fault_nets[fid].clear()
        self.active[fid] = False

    def at_step_end(self, time: int) -> None:
        if not self.audit:
            return
        values = self.sim.values
        for net, st in enumerate(self.store):
            for fid, v in st.items():
                if v == values[net]:
                    self.audit_violations.append(
                        (time, self.design.nets[net].path, fid)
                    )


_EMPTY_SET: frozenset = frozenset()


# -- batch and mode drivers ----------------------------------------------------

def run_batch(design: Design, batch: FaultBatch, stim: StimulusProgram, *,
              no_drop: bool = False, audit: bool = False,
              delta_limit: int = 10_000):
    """One concurrent kernel pass over a fault batch; returns
    (outcomes, counters, plane) where counters are this batch's kernel
    totals."""
    plane = FaultPlane(design, batch, no_drop=no_drop, audit=audit)
    sim = Simulation(design, stim, hooks=plane, delta_limit=delta_limit)
    plane.bind(sim)
    trace = sim.run_to_end()
    return plane.outcomes, dict(trace.counters), plane


def _chunk(seq: list, size: int) -> list[list]:
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def _zero_counters() -> dict:
    return {"events_processed": 0, "node_evaluations": 0,
            "process_activations": 0}


def _merge_counters(total: dict, part: dict) -> None:
    for k, v in part.items():
        total[k] = total.get(k, 0) + v


def run_concurrent(design: Design, faults: list[Fault], stim: StimulusProgram,
                   w: int = DEFAULT_W, *, no_drop: bool = False,
                   audit: bool = False, delta_limit: int = 10_000,
                   workers: int = 1) -> DetectionReport:
    """Partition ``faults`` into ceil(N/W) batches (list order preserved)
    and run each batch in one kernel pass; batches may run on parallel
    threads. A batch that trips the delta limit is bisected to isolate the
    oscillating fault, which is reported HYPERACTIVE."""
    if w < 1:
        raise ConfigError(f"W must be >= 1, got {w}")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    valid = [f for f in faults if f.site_net is not None]
    batches = _chunk(valid, w)
    counters = _zero_counters()
    good_ok: list[Optional[bool]] = [None]  # lazily computed fault-free check

    def fault_free_oscillates() -> bool:
        if good_ok[0] is None:
            try:
                Simulation(design, stim, delta_limit=delta_limit).run_to_end()
                good_ok[0] = True
            except DeltaLimitError:
                good_ok[0] = False
        return not good_ok[0]

    audit_violations: list = []

    def safe_run(chunk: list[Fault]):
        try:
            outcomes, part, plane = run_batch(
                design, FaultBatch(chunk, w), stim,
                no_drop=no_drop, audit=audit, delta_limit=delta_limit,
            )
            audit_violations.extend(plane.audit_violations)
            return outcomes, part
        except DeltaLimitError as e:
            if len(chunk) == 1:
                if fault_free_oscillates():
                    raise SimulationError(
                        f"design oscillates with no faults injected: {e}"
                    ) from e
                out = FaultOutcome(chunk[0])
                out.status = "hyperactive"
                out.reason = "oscillation"
                return [out], _zero_counters()
            mid = len(chunk) // 2
            left_out, left_c = safe_run(chunk[:mid])
            right_out, right_c = safe_run(chunk[mid:])
            _merge_counters(left_c, right_c)
            return left_out + right_out, left_c

    t0 = _time.perf_counter()
    per_batch: list = [None] * len(batches)
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, result in enumerate(pool.map(safe_run, batches)):
                per_batch[i] = result
    else:
        for i, chunk in enumerate(batches):
            per_batch[i] = safe_run(chunk)
    wall = _time.perf_counter() - t0

    by_key = {}
    for outcomes, part in per_batch:
        _merge_counters(counters, part)
        for o in outcomes:
            by_key[o.fault.key] = o

    records = []
    for f in faults:
        if f.site_net is None:
            records.append(FaultRecord(
                net=f.path, bit=f.site_bit, polarity=f.polarity,
                status="invalid", reason=f.invalid_reason,
            ))
        else:
            records.append(by_key[f.key].record())
    report = DetectionReport(
        mode="concurrent", records=records, counters=counters,
        wall_time_s=wall, w=w, batches=len(batches),
    )
    report.audit_violations = audit_violations
    return report


class _SerialWatch:
    """Per-strobe comparison of one filtered run against the reference."""

    def __init__(self, sim: Simulation, outcome: FaultOutcome,
                 reference: dict[int, dict[str, LogicVector]],
                 outputs: list[tuple[str, int]], no_drop: bool):
        self.sim = sim
        self.outcome = outcome
        self.reference = reference
        self.outputs = outputs
        self.no_drop = no_drop

    def __call__(self, time: int) -> None:
        o = self.outcome
        if o.status != "undetected":
            return
        ref = self.reference[time]
        values = self.sim.values
        first_pot = None
        for path, out in self.outputs:
            good = ref[path]
            bad = values[out]
            verdict = classify_pair(good, bad)
            if verdict == DETECT:
                o.status = "detected"
                o.detect_time = time
                o.detect_output = path
                o.good_value = good.to_literal()
                o.bad_value = bad.to_literal()
                if not self.no_drop:
                    self.sim.stop_requested = True
                return
            if verdict == POTENTIAL and first_pot is None:
                first_pot = path
        if first_pot is not None and not o.potential:
            o.potential = True
            o.potential_time = time
            o.potential_output = first_pot


def run_serial(design: Design, faults: list[Fault], stim: StimulusProgram, *,
               no_drop: bool = False, delta_limit: int = 10_000,
               reference=None) -> DetectionReport:
    """Ground-truth oracle: each fault gets a fresh full simulation with its
    site permanently filtered; outputs are compared against the fault-free
    reference trace at every strobe under the same detection rule."""
    outputs = sorted((design.nets[n].path, n) for n in design.outputs)
    if reference is None:
        reference = Simulation(design, stim, delta_limit=delta_limit).run_to_end()
    ref_values: dict[int, dict[str, LogicVector]] = {}
    for t, path, literal in reference.rows:
        ref_values.setdefault(t, {})[path] = LogicVector.parse_literal(literal)

    counters = _zero_counters()
    records: list[FaultRecord] = []
    t0 = _time.perf_counter()
    for fault in faults:
        if fault.site_net is None:
            records.append(FaultRecord(
                net=fault.path, bit=fault.site_bit, polarity=fault.polarity,
                status="invalid", reason=fault.invalid_reason,
            ))
            continue
        outcome = FaultOutcome(fault)
        sim = Simulation(
            design, stim, delta_limit=delta_limit,
            site_filter=(fault.site_net, fault.site_bit, fault.polarity),
        )
        sim.strobe_watch = _SerialWatch(sim, outcome, ref_values, outputs, no_drop)
        try:
            trace = sim.run_to_end()
            _merge_counters(counters, trace.counters)
        except DeltaLimitError:
            outcome = FaultOutcome(fault)
            outcome.status = "hyperactive"
            outcome.reason = "oscillation"
        records.append(outcome.record())
    wall = _time.perf_counter() - t0
    return DetectionReport(
        mode="serial", records=records, counters=counters,
        wall_time_s=wall, w=None, batches=0,
    )


def run_good_only(design: Design, stim: StimulusProgram, *,
                  delta_limit: int = 10_000):
    """Fault-free simulation; returns the SimTrace."""
    return Simulation(design, stim, delta_limit=delta_limit).run_to_end()
