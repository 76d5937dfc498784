"""Detection reports: per-fault records, aggregates, JSON/CSV export.

JSON schema (version 1)::

    {"schema_version": 1, "mode": "concurrent"|"serial", "w": int|null,
     "batches": int, "wall_time_s": float,
     "counters": {"events_processed": int, "node_evaluations": int,
                  "process_activations": int},
     "faults": [{"net": str, "bit": int, "polarity": "sa0"|"sa1",
                 "status": "detected"|"undetected"|"hyperactive"|"invalid",
                 "detect_time": int|null, "detect_output": str|null,
                 "good_value": str|null, "bad_value": str|null,
                 "potential": bool, "potential_time": int|null,
                 "potential_output": str|null, "reason": str|null}, ...]}

``load(emit(report)) == report`` holds field for field.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

SCHEMA_VERSION = 1


@dataclass
class FaultRecord:
    net: str
    bit: int
    polarity: str
    status: str  # detected | undetected | hyperactive | invalid
    detect_time: Optional[int] = None
    detect_output: Optional[str] = None
    good_value: Optional[str] = None
    bad_value: Optional[str] = None
    potential: bool = False
    potential_time: Optional[int] = None
    potential_output: Optional[str] = None
    reason: Optional[str] = None

    @property
    def key(self) -> tuple[str, int, str]:
        return (self.net, self.bit, self.polarity)

    def semantic(self) -> tuple:
        """Everything the oracle-equivalence comparison looks at."""
        return (
            self.key,
            self.status,
            self.detect_time,
            self.detect_output,
            self.good_value,
            self.bad_value,
            self.potential,
            self.potential_time,
            self.potential_output,
        )


@dataclass
class DetectionReport:
    mode: str
    records: list[FaultRecord]
    counters: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    w: Optional[int] = None
    batches: int = 0
    schema_version: int = SCHEMA_VERSION

    def aggregates(self) -> dict:
        detected = undetected = hyperactive = invalid = potential = 0
        for r in self.records:
            if r.status == "detected":
                detected += 1
            elif r.status == "hyperactive":
                hyperactive += 1
            elif r.status == "invalid":
                invalid += 1
            elif r.potential:
                potential += 1
            else:
                undetected += 1
        total = detected + undetected + hyperactive + potential
        coverage = detected / total if total else 0.0
        return {
            "total": total,
            "detected": detected,
            "potential": potential,
            "undetected": undetected,
            "hyperactive": hyperactive,
            "invalid": invalid,
            "coverage": coverage,
        }

    def by_key(self) -> dict:
        return {r.key: r for r in self.records}

    def semantic_map(self) -> dict:
        """key -> semantic tuple, for mode/partition equivalence checks."""
        return {r.key: r.semantic() for r in self.records}

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "w": self.w,
            "batches": self.batches,
            "wall_time_s": self.wall_time_s,
            "counters": self.counters,
            "aggregates": self.aggregates(),
            "faults": [asdict(r) for r in self.records],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DetectionReport":
        payload = json.loads(text)
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported report schema {payload.get('schema_version')!r}"
            )
        return cls(
            mode=payload["mode"],
            records=[FaultRecord(**r) for r in payload["faults"]],
            counters=payload["counters"],
            wall_time_s=payload["wall_time_s"],
            w=payload["w"],
            batches=payload["batches"],
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["net", "bit", "polarity", "status", "detect_time", "detect_output",
             "good_value", "bad_value", "potential", "potential_time",
             "potential_output", "reason"]
        )
        for r in self.records:
            writer.writerow(
                [r.net, r.bit, r.polarity, r.status,
                 "" if r.detect_time is None else r.detect_time,
                 r.detect_output or "", r.good_value or "", r.bad_value or "",
                 int(r.potential),
                 "" if r.potential_time is None else r.potential_time,
                 r.potential_output or "", r.reason or ""]
            )
        return buf.getvalue()

    def summary_lines(self) -> list[str]:
        agg = self.aggregates()
        c = self.counters
        return [
            f"mode: {self.mode}" + (f" (W={self.w}, {self.batches} batches)"
                                    if self.mode == "concurrent" else ""),
            f"faults: {agg['total']} total, {agg['detected']} detected, "
            f"{agg['potential']} potential, {agg['undetected']} undetected, "
            f"{agg['hyperactive']} hyperactive"
            + (f", {agg['invalid']} invalid" if agg["invalid"] else ""),
            f"coverage: {100.0 * agg['coverage']:.2f}%",
            f"wall time: {self.wall_time_s:.3f} s",
            f"events processed: {c.get('events_processed', 0)}",
        ]
