"""Stuck-at fault model: fault descriptors, exhaustive generation over the
wire universe, the fault-list file format, and site filtering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .elaborate import Design, list_wires
from .errors import ConfigError
from .logic import LogicBit, LogicVector

SA0 = "sa0"
SA1 = "sa1"


@dataclass(frozen=True)
class Fault:
    """One stuck-at fault at (net, bit). ``site_net`` is None when the site
    could not be resolved; such faults are reported INVALID and skipped."""

    path: str
    site_bit: int
    polarity: str  # "sa0" | "sa1"
    site_net: Optional[int] = None
    invalid_reason: Optional[str] = None

    @property
    def key(self) -> tuple[str, int, str]:
        """Identity independent of list order and batch-local ids."""
        return (self.path, self.site_bit, self.polarity)

    def label(self) -> str:
        return f"{self.path}[{self.site_bit}] {self.polarity}"


@dataclass
class FaultBatch:
    """A dense slice of the fault list simulated in one kernel pass."""

    faults: list[Fault]
    width: int  # W, the configured batch capacity

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError(f"batch size W must be >= 1, got {self.width}")
        if len(self.faults) > self.width:
            raise ConfigError(
                f"batch holds {len(self.faults)} faults, capacity is {self.width}"
            )


def filter_through_fault(fault: Fault, value: LogicVector) -> LogicVector:
    """Force the fault's site bit to its stuck value; pure."""
    bit = LogicBit.ZERO if fault.polarity == SA0 else LogicBit.ONE
    return value.forced_bit(fault.site_bit, bit)


def generate_fault_list(design: Design, include_internal: bool = False) -> list[Fault]:
    """One SA0 and one SA1 fault for every bit of every wire, ordered by
    (path, bit, sa0 before sa1)."""
    out: list[Fault] = []
    for path, width in list_wires(design, include_internal):
        nid = design.name_table[path]
        for bit in range(width):
            out.append(Fault(path, bit, SA0, nid))
            out.append(Fault(path, bit, SA1, nid))
    return out


def parse_fault_list(text: str, design: Design, path: str = "<faults>") -> list[Fault]:
    """Fault list file: one ``<net_path>[<bit>] sa0|sa1`` per line, '#'
    comments. An omitted ``[bit]`` means bit 0 and requires a 1-bit net.
    Unknown nets or out-of-range bits yield INVALID faults, not errors."""
    out: list[Fault] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in (SA0, SA1):
            raise ConfigError(
                f"{path}:{lineno}: malformed fault line: {raw.strip()!r}"
            )
        target, polarity = parts
        bit = 0
        explicit_bit = False
        net_path = target
        if target.endswith("]") and "[" in target:
            net_path, _, idx = target[:-1].rpartition("[")
            try:
                bit = int(idx)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: bad bit index in {target!r}"
                ) from None
            explicit_bit = True
        nid = design.name_table.get(net_path)
        if nid is None:
            out.append(Fault(net_path, bit, polarity,
                             invalid_reason=f"unknown net '{net_path}'"))
            continue
        width = design.nets[nid].width
        if not explicit_bit and width != 1:
            out.append(Fault(net_path, bit, polarity,
                             invalid_reason=f"'{net_path}' is {width} bits; "
                                            "a bit index is required"))
            continue
        if not 0 <= bit < width:
            out.append(Fault(net_path, bit, polarity,
                             invalid_reason=f"bit {bit} out of range for "
                                            f"'{net_path}' ({width} bits)"))
            continue
        out.append(Fault(net_path, bit, polarity, nid))
    return out


def load_fault_list(file_path: str, design: Design) -> list[Fault]:
    with open(file_path, "r", encoding="utf-8") as f:
        return parse_fault_list(f.read(), design, file_path)
