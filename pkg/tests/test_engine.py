"""Concurrent fault engine: the five netlist steps, behavioral instancing,
detection, dropping, batching, and equivalence against the serial oracle."""

import random

import pytest

from rtlfsim import (
    ConfigError,
    FaultBatch,
    LogicVector,
    Simulation,
    allocate_bad_gates,
    classify_pair,
    generate_fault_list,
    run_batch,
    run_concurrent,
    run_good_only,
    run_serial,
)
from rtlfsim.faults import SA0, SA1, Fault
from rtlfsim.engine import DETECT, POTENTIAL, FaultPlane

from helpers import build, stim

lit = LogicVector.parse_literal


def fault(design, path, bit, polarity):
    return Fault(path, bit, polarity, design.name_table[path])


# -- allocation and injection ---------------------------------------------------

def test_allocate_bad_gates_empty_and_sized(corpus):
    d, _ = corpus["fig1"]
    f = fault(d, "a", 0, SA1)
    store = allocate_bad_gates(d, FaultBatch([f, f], 64))
    assert len(store) == len(d.nets)
    assert all(not entries for entries in store)
    with pytest.raises(ConfigError):
        allocate_bad_gates(d, FaultBatch([], 64))
    with pytest.raises(ConfigError):
        FaultBatch([f], 0)


def test_inject_visible_against_initial_x(corpus):
    # SA1 at a with no stimulus: filtered 1 differs from x, entry appears.
    d, _ = corpus["fig1"]
    f = fault(d, "a", 0, SA1)
    outcomes, _, plane = run_batch(d, FaultBatch([f], 4),
                                   stim("strobe at 2\nend 2\n"), no_drop=True)
    assert plane.store[d.name_table["a"]] == {0: lit("1'b1")}


def test_inject_masked_when_stimulus_matches_stuck_value(corpus):
    d, _ = corpus["fig1"]
    f = fault(d, "a", 0, SA1)
    outcomes, _, plane = run_batch(d, FaultBatch([f], 4),
                                   stim("@0 a = 1\nstrobe at 2\nend 2\n"),
                                   no_drop=True)
    assert plane.store[d.name_table["a"]] == {}
    assert plane.bad_eval_count[0] == 0  # masked all run: zero bad work


def test_inject_visible_after_stimulus_drives_opposite(corpus):
    d, _ = corpus["fig1"]
    f = fault(d, "a", 0, SA1)
    outcomes, _, plane = run_batch(d, FaultBatch([f], 4),
                                   stim("@0 a = 0\nstrobe at 2\nend 2\n"),
                                   no_drop=True)
    assert plane.store[d.name_table["a"]] == {0: lit("1'b1")}


# -- evaluation, visibility, convergence ------------------------------------------

def test_bad_value_propagates_through_gate(corpus):
    d, _ = corpus["fig1"]
    f = fault(d, "a", 0, SA1)
    outcomes, _, plane = run_batch(
        d, FaultBatch([f], 4),
        stim("@0 a = 0\n@0 b = 1\nstrobe at 2\nend 2\n"), no_drop=True,
    )
    # good d = and(0,1) = 0; f's d = and(1,1) = 1
    assert plane.store[d.name_table["d"]] == {0: lit("1'b1")}


def test_masking_input_converges_entry():
    d = build("module m(input a, input b, output y); assign y = a | b; endmodule", "m")
    f = fault(d, "a", 0, SA1)
    # b=1 masks the fault at the OR output even though a diverges
    outcomes, _, plane = run_batch(
        d, FaultBatch([f], 4),
        stim("@0 a = 0\n@0 b = 1\nstrobe at 2\nend 2\n"), no_drop=True,
    )
    assert plane.store[d.name_table["a"]] == {0: lit("1'b1")}
    assert plane.store[d.name_table["y"]] == {}


def test_good_change_converges_stale_entry():
    d = build("module m(input a, output y); assign y = a; endmodule", "m")
    f = fault(d, "a", 0, SA1)
    # good flips to the stuck value mid-run: the divergence disappears
    outcomes, _, plane = run_batch(
        d, FaultBatch([f], 4),
        stim("@0 a = 0\n@10 a = 1\nstrobe at 15\nend 15\n"), no_drop=True,
    )
    assert plane.store[d.name_table["a"]] == {}
    assert plane.store[d.name_table["y"]] == {}


def test_sparsity_one_bad_eval_per_divergent_input():
    d = build("module m(input a, input b, output y); assign y = a & b; endmodule", "m")
    f1 = fault(d, "a", 0, SA1)
    f2 = fault(d, "b", 0, SA1)
    outcomes, _, plane = run_batch(
        d, FaultBatch([f1, f2], 8),
        stim("@0 a = 0\n@0 b = 1\nstrobe at 2\nend 2\n"), no_drop=True,
    )
    # f2 is masked at its site (b==1): zero evaluations for it
    assert plane.bad_eval_count[1] == 0
    assert plane.bad_eval_count[0] >= 1


# -- behavioral instancing ----------------------------------------------------------

def test_fault_instance_reads_and_writes_its_bad_gates(corpus):
    d, _ = corpus["fig1"]
    f1 = fault(d, "a", 0, SA1)
    f2 = fault(d, "b", 0, SA1)
    outcomes, _, plane = run_batch(
        d, FaultBatch([f1, f2], 4),
        stim("@0 a = 0\n@0 b = 1\nclock clock period 10 start 5\nstrobe at 8\nend 8\n"),
        no_drop=True,
    )
    q = d.name_table["q"]
    # F1's instance read bad d (1) and wrote bad q; F2 stayed masked.
    assert plane.store[q] == {0: lit("1'b1")}
    assert outcomes[0].status == "detected"
    assert outcomes[1].status == "undetected"


def test_clock_stuck_fault_never_sees_posedge(corpus):
    d, _ = corpus["fig1"]
    f = fault(d, "clock", 0, SA0)
    outcomes, _, plane = run_batch(
        d, FaultBatch([f], 4),
        stim("@0 a = 1\n@0 b = 1\nclock clock period 10 start 5\nstrobe at 8\nend 8\n"),
        no_drop=True,
    )
    q = d.name_table["q"]
    # good q latched 1; the stuck-clock copy kept x
    assert plane.store[q] == {0: lit("1'bx")}
    ser = run_serial(d, [f], stim(
        "@0 a = 1\n@0 b = 1\nclock clock period 10 start 5\nstrobe at 8\nend 8\n"
    ))
    con = run_concurrent(d, [f], stim(
        "@0 a = 1\n@0 b = 1\nclock clock period 10 start 5\nstrobe at 8\nend 8\n"
    ), w=4)
    assert ser.semantic_map() == con.semantic_map()


def test_only_good_instance_runs_without_divergence(corpus):
    d, _ = corpus["fig1"]
    f = fault(d, "a", 0, SA1)
    st = stim("@0 a = 1\n@0 b = 1\nclock clock period 10 start 5\nstrobe at 8\nend 8\n")
    outcomes, counters, plane = run_batch(d, FaultBatch([f], 4), st, no_drop=True)
    # masked fault: no instance work beyond the good machine's
    good = Simulation(d, st)
    good.run_to_end()
    assert counters["process_activations"] == good.process_activations


# -- strobing, detection, dropping ------------------------------------------------

def test_classify_pair_rule():
    assert classify_pair(lit("1'b0"), lit("1'b1")) == DETECT
    assert classify_pair(lit("1'bx"), lit("1'b1")) == POTENTIAL
    assert classify_pair(lit("1'b1"), lit("1'bx")) == POTENTIAL
    assert classify_pair(lit("1'bx"), lit("1'bx")) is None
    assert classify_pair(lit("1'b1"), lit("1'b1")) is None
    assert classify_pair(lit("4'b00x1"), lit("4'b01x1")) == DETECT
    assert classify_pair(lit("4'b0001"), lit("4'b00x1")) == POTENTIAL
    assert classify_pair(lit("1'bz"), lit("1'b0")) == POTENTIAL


def test_detected_fault_drops_entries_everywhere(corpus):
    d, _ = corpus["counter8"]
    f = fault(d, "count", 0, SA0)
    st = stim("clock clk period 10 start 5\n@0 rst = 1\n@12 rst = 0\n"
              "strobe every 10 from 20\nend 60\n")
    outcomes, _, plane = run_batch(d, FaultBatch([f], 4), st)
    assert outcomes[0].status == "detected"
    assert outcomes[0].detect_time == 20
    assert all(not entries for entries in plane.store)
    assert not plane.active[0]


def test_no_drop_keeps_simulating_same_first_detection(corpus):
    d, _ = corpus["counter8"]
    faults = generate_fault_list(d)
    st = stim("clock clk period 10 start 5\n@0 rst = 1\n@12 rst = 0\n"
              "strobe every 10 from 20\nend 100\n")
    a = run_concurrent(d, faults, st, w=8)
    b = run_concurrent(d, faults, st, w=8, no_drop=True)
    assert a.semantic_map() == b.semantic_map()


def test_potential_detect_x_vs_binary():
    d = build("module m(input c, input di, output q); reg q;"
              " always @(posedge c) q <= di; endmodule", "m")
    f = fault(d, "q", 0, SA1)
    # q never clocks (c held 0): good q stays x, faulty q is 1
    ser = run_serial(d, [f], stim("@0 c = 0\nstrobe at 5\nend 5\n"))
    rec = ser.records[0]
    assert rec.status == "undetected"
    assert rec.potential
    con = run_concurrent(d, [f], stim("@0 c = 0\nstrobe at 5\nend 5\n"), w=4)
    assert con.semantic_map() == ser.semantic_map()


# -- batching ------------------------------------------------------------------------

def test_batch_partition_sizes(corpus):
    d, _ = corpus["fig1"]
    faults = generate_fault_list(d)
    report = run_concurrent(d, faults, corpus["fig1"][1], w=4)
    assert len(faults) == 10
    assert report.batches == 3  # 4 + 4 + 2
    assert report.w == 4


def test_invalid_faults_reported_and_skipped(corpus):
    d, st = corpus["fig1"]
    faults = [Fault("ghost", 0, SA0, None, invalid_reason="unknown net 'ghost'"),
              fault(d, "a", 0, SA1)]
    report = run_concurrent(d, faults, st, w=4)
    assert report.records[0].status == "invalid"
    assert "ghost" in report.records[0].reason
    agg = report.aggregates()
    assert agg["invalid"] == 1
    assert agg["total"] == 1  # invalid faults stay out of the partition


def test_hyperactive_fault_isolated_by_bisection():
    src = """
module m(input rst_n, input osc_en, output q, output z);
  reg p, q;
  assign z = rst_n & ~osc_en;
  always @* p = rst_n ? (q ^ osc_en) : 1'b0;
  always @* q = p;
endmodule
"""
    d = build(src, "m")
    st = stim("@0 rst_n = 0\n@0 osc_en = 0\n@10 rst_n = 1\n"
              "strobe every 10 from 5\nend 35\n")
    faults = generate_fault_list(d)
    ser = run_serial(d, faults, st, delta_limit=500)
    con = run_concurrent(d, faults, st, w=8, delta_limit=500)
    assert ser.semantic_map() == con.semantic_map()
    by_key = con.by_key()
    rec = by_key[("osc_en", 0, "sa1")]
    assert rec.status == "hyperactive"
    assert rec.reason == "oscillation"
    agg = con.aggregates()
    assert agg["hyperactive"] == 1


def test_counters_accumulate_across_batches(corpus):
    d, st = corpus["adder4"]
    faults = generate_fault_list(d)
    one = run_concurrent(d, faults, st, w=len(faults))
    many = run_concurrent(d, faults, st, w=5)
    for key in ("events_processed", "node_evaluations"):
        assert many.counters[key] > 0
        # more batches re-run the good machine, so never cheaper
        assert many.counters[key] >= one.counters[key]


# -- the central properties ---------------------------------------------------------

@pytest.mark.parametrize("w", [1, 7, 32, 256])
def test_oracle_equivalence_all_corpus_designs(corpus, corpus_faults, w):
    for name, (design, st) in corpus.items():
        ser = run_serial(design, corpus_faults[name], st)
        con = run_concurrent(design, corpus_faults[name], st, w=w)
        assert con.semantic_map() == ser.semantic_map(), (name, w)


def test_batch_partition_independence(corpus, corpus_faults):
    d, st = corpus["counter8"]
    base = run_concurrent(d, corpus_faults["counter8"], st, w=7).semantic_map()
    rng = random.Random(1301)
    for _ in range(5):
        perm = corpus_faults["counter8"][:]
        rng.shuffle(perm)
        got = run_concurrent(d, perm, st, w=7).semantic_map()
        assert got == base


def test_good_machine_purity(corpus, corpus_faults):
    # The batch simulation's own strobe rows are the good machine's: they
    # must be bit-identical to a fault-free run.
    for name, (design, st) in corpus.items():
        reference = run_good_only(design, st)
        faults = corpus_faults[name]
        plane = FaultPlane(design, FaultBatch(faults, max(1, len(faults))))
        sim = Simulation(design, st, hooks=plane)
        plane.bind(sim)
        trace = sim.run_to_end()
        assert trace.rows == reference.rows, name


def test_monotone_work_concurrent_below_serial_sum(corpus, corpus_faults):
    for name, (design, st) in corpus.items():
        faults = corpus_faults[name]
        ser = run_serial(design, faults, st)
        con = run_concurrent(design, faults, st, w=256)
        assert (con.counters["events_processed"]
                <= ser.counters["events_processed"]), name


def test_workers_do_not_change_results(corpus, corpus_faults):
    d, st = corpus["adder4"]
    faults = corpus_faults["adder4"]
    a = run_concurrent(d, faults, st, w=8, workers=1)
    b = run_concurrent(d, faults, st, w=8, workers=4)
    assert a.semantic_map() == b.semantic_map()


def test_convergence_audit_clean_on_corpus(corpus, corpus_faults):
    for name, (design, st) in corpus.items():
        con = run_concurrent(design, corpus_faults[name], st, w=32, audit=True)
        assert con.audit_violations == [], name


def test_equivalence_under_randomized_stimulus(corpus, corpus_faults):
    # Seeded mini-fuzz: random forces (including x/z) against the oracle.
    rng = random.Random(9182)
    for _ in range(6):
        name = rng.choice(list(corpus))
        design, _ = corpus[name]
        inputs = [design.nets[n] for n in design.inputs]
        lines = []
        for net in inputs:
            if net.path in ("clk", "clock"):
                lines.append(f"clock {net.path} period 10 start 5")
                continue
            for t in sorted(rng.sample(range(0, 60, 2), rng.randint(1, 3))):
                if rng.random() < 0.2:
                    digits = rng.choice("xz") * net.width
                    lines.append(f"@{t} {net.path} = {net.width}'b{digits}")
                else:
                    value = rng.randrange(1 << net.width)
                    lines.append(f"@{t} {net.path} = {net.width}'d{value}")
        lines += ["strobe every 10 from 7", "end 60"]
        st = stim("\n".join(lines) + "\n")
        ser = run_serial(design, corpus_faults[name], st)
        con = run_concurrent(design, corpus_faults[name], st,
                             w=rng.choice([1, 5, 64]), audit=True)
        assert con.semantic_map() == ser.semantic_map(), name
        assert con.audit_violations == []


def test_equivalence_with_compare_and_shift_operators():
    src = """
module cmp(input [3:0] a, input [3:0] b, input [1:0] n,
           output lt, output ge, output eq, output [3:0] sl, output [3:0] sr);
  assign lt = a < b;
  assign ge = a >= b;
  assign eq = a == b;
  assign sl = a << n;
  assign sr = a >> n;
endmodule
"""
    d = build(src, "cmp")
    st = stim("""
@0 a = 4'd5
@0 b = 4'd9
@0 n = 2'd1
@10 b = 4'd5
@20 n = 2'd3
@30 a = 4'd12
strobe every 10 from 5
end 45
""")
    faults = generate_fault_list(d)
    ser = run_serial(d, faults, st)
    for w in (1, 16):
        con = run_concurrent(d, faults, st, w=w, audit=True)
        assert con.semantic_map() == ser.semantic_map()
        assert con.audit_violations == []
