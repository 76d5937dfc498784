"""Stimulus programs: clocks, timed forces, strobes, and their text format.

Line-oriented UTF-8 format::

    clock <net_path> period <int> start <int>
    @<time> <net_path> = <logic literal>
    strobe every <int> from <int>
    strobe at <time>[,<time>...]
    end <time>

'#' starts a comment. A clock drives 0 from t=0, rises at ``start + k*period``
and falls half a period later. Logic literals are Verilog-style
(``4'b01xz``) or bare decimals sized to the target net.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .logic import LogicError, LogicVector


@dataclass
class StimulusProgram:
    forces: list[tuple[int, str, str]] = field(default_factory=list)  # (time, net, literal)
    clocks: list[tuple[str, int, int]] = field(default_factory=list)  # (net, period, first_edge)
    strobes: list[int] = field(default_factory=list)
    end_time: int = 0

    def validate(self) -> None:
        for net, period, start in self.clocks:
            if period < 2:
                raise ConfigError(f"clock on '{net}': period must be >= 2, got {period}")
            if start < 0:
                raise ConfigError(f"clock on '{net}': negative start time")
        for t, net, _ in self.forces:
            if t < 0:
                raise ConfigError(f"force on '{net}' at negative time {t}")
        for t in self.strobes:
            if t > self.end_time:
                raise ConfigError(
                    f"strobe at {t} is beyond end time {self.end_time}"
                )
        if self.end_time < 0:
            raise ConfigError("negative end time")

    def strobe_times(self) -> list[int]:
        return sorted(set(self.strobes))

    def expand_forces(self) -> list[tuple[int, str, str]]:
        """All scheduled value changes including clock edges, time-sorted
        (stable: file order within one time)."""
        out = list(self.forces)
        for net, period, start in self.clocks:
            if start > 0:
                out.append((0, net, "1'b0"))
            half = period // 2
            t = start
            while t <= self.end_time:
                out.append((t, net, "1'b1"))
                if t + half <= self.end_time:
                    out.append((t + half, net, "1'b0"))
                t += period
        out.sort(key=lambda f: f[0])
        return out


def parse_stimulus(text: str, path: str = "<stimulus>") -> StimulusProgram:
    prog = StimulusProgram()
    saw_end = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        def bad(msg: str):
            return ConfigError(f"{path}:{lineno}: {msg}")

        try:
            if line.startswith("@"):
                parts = line[1:].split(None, 1)
                if len(parts) != 2 or "=" not in parts[1]:
                    raise bad(f"malformed force line: {raw.strip()!r}")
                time = int(parts[0])
                net, _, literal = parts[1].partition("=")
                literal = literal.strip()
                LogicVector.parse_literal(literal)  # syntax check only
                prog.forces.append((time, net.strip(), literal))
            elif line.startswith("clock"):
                toks = line.split()
                if len(toks) != 6 or toks[2] != "period" or toks[4] != "start":
                    raise bad(f"malformed clock line: {raw.strip()!r}")
                prog.clocks.append((toks[1], int(toks[3]), int(toks[5])))
            elif line.startswith("strobe"):
                toks = line.split(None, 2)
                if len(toks) >= 3 and toks[1] == "at":
                    prog.strobes.extend(int(t) for t in toks[2].split(","))
                elif len(toks) == 3 and toks[1] == "every":
                    rest = toks[2].split()
                    if len(rest) != 3 or rest[1] != "from":
                        raise bad(f"malformed strobe line: {raw.strip()!r}")
                    prog.strobes.append(("every", int(rest[0]), int(rest[2])))  # type: ignore
                else:
                    raise bad(f"malformed strobe line: {raw.strip()!r}")
            elif line.startswith("end"):
                toks = line.split()
                if len(toks) != 2:
                    raise bad(f"malformed end line: {raw.strip()!r}")
                prog.end_time = int(toks[1])
                saw_end = True
            else:
                raise bad(f"unrecognized stimulus line: {raw.strip()!r}")
        except (ValueError, LogicError) as e:
            raise bad(str(e)) from None
    if not saw_end:
        raise ConfigError(f"{path}: missing 'end <time>' line")
    # Expand periodic strobes now that end_time is known.
    expanded: list[int] = []
    for s in prog.strobes:
        if isinstance(s, tuple):
            _, period, start = s
            if period <= 0:
                raise ConfigError(f"{path}: strobe period must be positive")
            t = start
            while t <= prog.end_time:
                expanded.append(t)
                t += period
        else:
            expanded.append(s)
    prog.strobes = expanded
    prog.validate()
    return prog


def load_stimulus(path: str) -> StimulusProgram:
    with open(path, "r", encoding="utf-8") as f:
        return parse_stimulus(f.read(), path)
