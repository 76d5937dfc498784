"""Report schema: aggregates, JSON round-trip, CSV."""

import pytest

from rtlfsim import DetectionReport, FaultRecord, generate_fault_list, run_concurrent


def sample_report():
    return DetectionReport(
        mode="concurrent",
        records=[
            FaultRecord("a", 0, "sa0", "detected", detect_time=20,
                        detect_output="y", good_value="1'b0", bad_value="1'b1"),
            FaultRecord("a", 0, "sa1", "undetected", potential=True,
                        potential_time=30, potential_output="y"),
            FaultRecord("b", 1, "sa0", "undetected"),
            FaultRecord("c", 0, "sa1", "hyperactive", reason="oscillation"),
            FaultRecord("ghost", 0, "sa0", "invalid", reason="unknown net 'ghost'"),
        ],
        counters={"events_processed": 123, "node_evaluations": 45,
                  "process_activations": 6},
        wall_time_s=0.125,
        w=32,
        batches=2,
    )


def test_aggregates_partition():
    agg = sample_report().aggregates()
    assert agg["detected"] == 1
    assert agg["potential"] == 1
    assert agg["undetected"] == 1
    assert agg["hyperactive"] == 1
    assert agg["invalid"] == 1
    assert agg["total"] == 4  # invalid excluded
    assert (agg["detected"] + agg["undetected"] + agg["hyperactive"]
            + agg["potential"]) == agg["total"]
    assert agg["coverage"] == pytest.approx(0.25)


def test_json_roundtrip_identity():
    report = sample_report()
    again = DetectionReport.from_json(report.to_json())
    assert again == report


def test_json_roundtrip_of_real_run(corpus):
    d, st = corpus["counter8"]
    report = run_concurrent(d, generate_fault_list(d), st, w=8)
    assert DetectionReport.from_json(report.to_json()) == report


def test_unsupported_schema_rejected():
    text = sample_report().to_json().replace('"schema_version": 1', '"schema_version": 99')
    with pytest.raises(ValueError):
        DetectionReport.from_json(text)


def test_csv_has_header_and_all_rows():
    csv_text = sample_report().to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0].startswith("net,bit,polarity,status")
    assert len(lines) == 6
    assert lines[1].split(",")[:4] == ["a", "0", "sa0", "detected"]


def test_summary_lines_mention_everything():
    text = "\n".join(sample_report().summary_lines())
    assert "coverage: 25.00%" in text
    assert "1 detected" in text
    assert "1 hyperactive" in text
    assert "wall time" in text
    assert "events processed: 123" in text
