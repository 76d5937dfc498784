"""Exception taxonomy: source diagnostics, simulation failures, bug traps."""

from __future__ import annotations

from typing import Optional

from .ast_nodes import Loc


class SourceError(Exception):
    """Diagnostic tied to a source location: ``path:line:col: severity: msg``."""

    severity = "error"

    def __init__(self, message: str, loc: Optional[Loc] = None):
        self.message = message
        self.loc = loc
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.loc is None:
            return f"{self.severity}: {self.message}"
        return f"{self.loc.path}:{self.loc.line}:{self.loc.col}: {self.severity}: {self.message}"


class ParseError(SourceError):
    pass


class UnsupportedConstructError(ParseError):
    def __init__(self, construct: str, loc: Optional[Loc] = None):
        self.construct = construct
        super().__init__(f"unsupported construct: {construct}", loc)


class ElabError(SourceError):
    """Structural error found while elaborating (widths, loops, drivers)."""


class ConfigError(Exception):
    """Bad run configuration (flags, file formats, limits)."""


class SimulationError(Exception):
    """The simulation itself failed (e.g. zero-delay oscillation)."""


class DeltaLimitError(SimulationError):
    def __init__(self, time: int, nets: list[str]):
        self.time = time
        self.nets = nets
        names = ", ".join(nets) if nets else "<unknown>"
        super().__init__(
            f"delta limit exceeded at t={time}; oscillating nets: {names}"
        )


class KernelInvariantError(Exception):
    """Internal consistency violation; indicates a simulator bug."""
