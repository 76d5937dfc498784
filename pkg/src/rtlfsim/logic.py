"""Four-state (0/1/X/Z) scalar and vector logic with primitive evaluation.

Values are stored as three bit planes (ones, x, z) packed into Python ints,
so gate evaluation is a handful of bitwise operations regardless of width.
Z entering a primitive behaves as X; Z survives only through
:func:`resolve_drivers` and direct net connections.
"""

from __future__ import annotations

import enum
from typing import Iterable, Sequence


class LogicBit(enum.Enum):
    """One four-state bit."""

    ZERO = "0"
    ONE = "1"
    X = "x"
    Z = "z"

    def __str__(self) -> str:
        return self.value


_BIT_FROM_CHAR = {
    "0": LogicBit.ZERO,
    "1": LogicBit.ONE,
    "x": LogicBit.X,
    "X": LogicBit.X,
    "z": LogicBit.Z,
    "Z": LogicBit.Z,
    "?": LogicBit.Z,
}


class LogicError(ValueError):
    """Structural misuse of the logic algebra (bad width, arity, literal)."""


class LogicVector:
    """Width-parameterized four-state bit vector, bit 0 = least significant.

    Instances are immutable and hashable; equality is four-state identity
    (x == x for storage comparison, which is not Verilog ``==``).
    """

    __slots__ = ("width", "_ones", "_x", "_z")

    def __init__(self, width: int, ones: int = 0, x: int = 0, z: int = 0):
        if width < 1:
            raise LogicError(f"vector width must be >= 1, got {width}")
        mask = (1 << width) - 1
        x &= mask
        z &= mask
        z &= ~x
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "_ones", ones & mask & ~x & ~z)
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_z", z)

    def __setattr__(self, name, value):
        raise AttributeError("LogicVector is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_int(cls, value: int, width: int) -> "LogicVector":
        if value < 0:
            raise LogicError("negative values have no unsigned encoding")
        return cls(width, ones=value)

    @classmethod
    def all_x(cls, width: int) -> "LogicVector":
        return cls(width, x=(1 << width) - 1)

    @classmethod
    def all_z(cls, width: int) -> "LogicVector":
        return cls(width, z=(1 << width) - 1)

    @classmethod
    def from_bits(cls, bits: Iterable[LogicBit]) -> "LogicVector":
        ones = x = z = 0
        width = 0
        for i, b in enumerate(bits):
            if b is LogicBit.ONE:
                ones |= 1 << i
            elif b is LogicBit.X:
                x |= 1 << i
            elif b is LogicBit.Z:
                z |= 1 << i
            width = i + 1
        if width == 0:
            raise LogicError("empty bit sequence")
        return cls(width, ones, x, z)

    @classmethod
    def from_string(cls, bits_msb_first: str) -> "LogicVector":
        """Build from a bare digit string like ``"01xz"`` (MSB first)."""
        try:
            return cls.from_bits(_BIT_FROM_CHAR[c] for c in reversed(bits_msb_first))
        except KeyError as e:
            raise LogicError(f"invalid logic digit {e.args[0]!r}") from None

    @classmethod
    def parse_literal(cls, text: str) -> "LogicVector":
        """Parse a Verilog-style literal: ``<width>'b01xz``, ``'h``, ``'o``, ``'d``.

        Case-insensitive; underscores allowed between digits. A bare decimal
        (no base) gets the minimal width needed, at least 1.
        """
        text = text.strip()
        if "'" not in text:
            if not text.isdigit():
                raise LogicError(f"invalid logic literal {text!r}")
            value = int(text)
            return cls.from_int(value, max(1, value.bit_length()))
        wpart, _, rest = text.partition("'")
        rest = rest.replace("_", "")
        if not rest:
            raise LogicError(f"invalid logic literal {text!r}")
        base = rest[0].lower()
        digits = rest[1:]
        if not digits:
            raise LogicError(f"invalid logic literal {text!r}")
        if base == "b":
            per_digit = 1
        elif base == "o":
            per_digit = 3
        elif base == "h":
            per_digit = 4
        elif base == "d":
            if not digits.isdigit():
                raise LogicError(f"invalid decimal literal {text!r}")
            value = int(digits)
            width = int(wpart) if wpart else max(1, value.bit_length())
            if value >> width:
                raise LogicError(f"value {value} does not fit in {width} bits")
            return cls.from_int(value, width)
        else:
            raise LogicError(f"unknown literal base {base!r} in {text!r}")
        ones = x = z = 0
        for c in digits:
            ones <<= per_digit
            x <<= per_digit
            z <<= per_digit
            lc = c.lower()
            if lc == "x":
                x |= (1 << per_digit) - 1
            elif lc in ("z", "?"):
                z |= (1 << per_digit) - 1
            else:
                try:
                    ones |= int(c, 1 << per_digit)
                except ValueError:
                    raise LogicError(f"invalid digit {c!r} in {text!r}") from None
        natural = per_digit * len(digits)
        width = int(wpart) if wpart else natural
        if width > natural:
            # A leading x/z digit extends with x/z, per Verilog sizing rules.
            lead = digits[0].lower()
            ext = ((1 << (width - natural)) - 1) << natural
            if lead == "x":
                x |= ext
            elif lead in ("z", "?"):
                z |= ext
        if width < natural:
            # Truncation is allowed only when it drops zero bits.
            drop = natural - width
            if (ones >> width) or (x >> width) or (z >> width):
                raise LogicError(f"literal {text!r} does not fit in {width} bits")
            del drop
        return cls(width, ones, x, z)

    # -- accessors ---------------------------------------------------------

    @property
    def bits(self) -> tuple[LogicBit, ...]:
        return tuple(self.bit(i) for i in range(self.width))

    def bit(self, i: int) -> LogicBit:
        if not 0 <= i < self.width:
            raise LogicError(f"bit index {i} out of range for width {self.width}")
        m = 1 << i
        if self._x & m:
            return LogicBit.X
        if self._z & m:
            return LogicBit.Z
        return LogicBit.ONE if self._ones & m else LogicBit.ZERO

    @property
    def has_unknown(self) -> bool:
        return bool(self._x | self._z)

    @property
    def any_one(self) -> bool:
        """True iff at least one bit is a definite 1 (Verilog truthiness)."""
        return self._ones != 0

    @property
    def is_fully_defined(self) -> bool:
        return not (self._x | self._z)

    def to_int(self) -> int:
        if self._x | self._z:
            raise LogicError(f"{self} contains x/z bits")
        return self._ones

    def to_literal(self) -> str:
        """Verilog-style text form, lowercase binary: ``4'b01xz``."""
        return f"{self.width}'b{self.digits()}"

    def digits(self) -> str:
        out = []
        for i in range(self.width - 1, -1, -1):
            m = 1 << i
            if self._x & m:
                out.append("x")
            elif self._z & m:
                out.append("z")
            else:
                out.append("1" if self._ones & m else "0")
        return "".join(out)

    def slice(self, low: int, width: int) -> "LogicVector":
        if low < 0 or width < 1 or low + width > self.width:
            raise LogicError(
                f"slice [{low +width - 1}:{low}] out of range for width {self.width}"
            )
        return LogicVector(width, self._ones >> low, self._x >> low, self._z >> low)

    def replaced(self, low: int, sub: "LogicVector") -> "LogicVector":
        """Copy with ``sub`` written at bit offset ``low``."""
        if low < 0 or low + sub.width > self.width:
            raise LogicError(
                f"replace at [{low}+:{sub.width}] out of range for width {self.width}"
            )
        hole = ~(((1 << sub.width) - 1) << low)
        return LogicVector(
            self.width,
            (self._ones & hole) | (sub._ones << low),
            (self._x & hole) | (sub._x << low),
            (self._z & hole) | (sub._z << low),
        )

    def forced_bit(self, i: int, bit: LogicBit) -> "LogicVector":
        return self.replaced(i, LogicVector.from_bits([bit]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogicVector):
            return NotImplemented
        return (
            self.width == other.width
            and self._ones == other._ones
            and self._x == other._x
            and self._z == other._z
        )

    def __hash__(self) -> int:
        return hash((self.width, self._ones, self._x, self._z))

    def __repr__(self) -> str:
        return f"LogicVector({self.to_literal()!r})"

    def __str__(self) -> str:
        return self.to_literal()


class PrimitiveKind(enum.Enum):
    """Netlist primitive operations; each has a fixed arity and width rule."""

    AND = "and"
    OR = "or"
    XOR = "xor"
    NOT = "not"
    BUF = "buf"
    NAND = "nand"
    NOR = "nor"
    XNOR = "xnor"
    MUX2 = "mux2"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    EQ = "eq"
    NEQ = "neq"
    LT_UNSIGNED = "lt"
    SHL = "shl"
    SHR_LOGICAL = "shr"
    CONCAT = "concat"
    SLICE = "slice"
    REDUCE_AND = "rand"
    REDUCE_OR = "ror"
    REDUCE_XOR = "rxor"
    COND = "cond"


_GATES2 = {
    PrimitiveKind.AND,
    PrimitiveKind.OR,
    PrimitiveKind.XOR,
    PrimitiveKind.NAND,
    PrimitiveKind.NOR,
    PrimitiveKind.XNOR,
}
_ARITH2 = {PrimitiveKind.ADD, PrimitiveKind.SUB}
_CMP2 = {PrimitiveKind.EQ, PrimitiveKind.NEQ, PrimitiveKind.LT_UNSIGNED}
_SHIFTS = {PrimitiveKind.SHL, PrimitiveKind.SHR_LOGICAL}
_REDUCE = {PrimitiveKind.REDUCE_AND, PrimitiveKind.REDUCE_OR, PrimitiveKind.REDUCE_XOR}


def result_width(
    kind: PrimitiveKind, input_widths: Sequence[int], params: tuple = ()
) -> int:
    """Arity/width rule per kind; raises :class:`LogicError` on violation.

    Width rules: 2-input gates and MUX2/COND branches need equal widths and
    keep them; ADD/SUB give max(input widths) with carry discarded; MUL gives
    the sum of widths; compares and reductions give 1; shifts keep the value
    operand's width; CONCAT sums (inputs MSB-first); SLICE takes params
    (low, width).
    """

    def need(n: int):
        if len(input_widths) != n:
            raise LogicError(f"{kind.name} takes {n} inputs, got {len(input_widths)}")

    if kind in _GATES2 or kind in _CMP2:
        need(2)
        if input_widths[0] != input_widths[1]:
            raise LogicError(
                f"{kind.name} width mismatch: {input_widths[0]} vs {input_widths[1]}"
            )
        return input_widths[0] if kind in _GATES2 else 1
    if kind in (PrimitiveKind.NOT, PrimitiveKind.BUF):
        need(1)
        return input_widths[0]
    if kind in _REDUCE:
        need(1)
        return 1
    if kind in _ARITH2:
        need(2)
        return max(input_widths)
    if kind is PrimitiveKind.MUL:
        need(2)
        return input_widths[0] + input_widths[1]
    if kind in _SHIFTS:
        need(2)
        return input_widths[0]
    if kind is PrimitiveKind.CONCAT:
        if not input_widths:
            raise LogicError("CONCAT needs at least one input")
        return sum(input_widths)
    if kind is PrimitiveKind.SLICE:
        need(1)
        if len(params) != 2:
            raise LogicError("SLICE needs params (low, width)")
        low, width = params
        if low < 0 or width < 1 or low + width > input_widths[0]:
            raise LogicError(
                f"SLICE [{low}+:{width}] out of range for width {input_widths[0]}"
            )
        return width
    if kind in (PrimitiveKind.MUX2, PrimitiveKind.COND):
        need(3)
        if input_widths[1] != input_widths[2]:
            raise LogicError(
                f"{kind.name} branch width mismatch: "
                f"{input_widths[1]} vs {input_widths[2]}"
            )
        if kind is PrimitiveKind.MUX2 and input_widths[0] != 1:
            raise LogicError("MUX2 select must be 1 bit")
        return input_widths[1]
    raise LogicError(f"unknown primitive kind {kind!r}")


def _merge(a: LogicVector, b: LogicVector) -> LogicVector:
    # Bitwise combine for an unknown select: agreeing known bits survive.
    mask = (1 << a.width) - 1
    unk = a._x | a._z | b._x | b._z
    ones = a._ones & b._ones & ~unk
    zeros = ~a._ones & ~b._ones & ~unk & mask
    return LogicVector(a.width, ones, x=mask & ~ones & ~zeros)


def eval_primitive(
    kind: PrimitiveKind, inputs: Sequence[LogicVector], params: tuple = ()
) -> LogicVector:
    """Evaluate one primitive over four-state inputs.

    Unknown propagation is pessimistic: any x/z operand bit makes the whole
    result x for arithmetic, compares, and unknown shift amounts; per-bit
    rules apply for gates. Z on any input behaves as X. Arity and width rules
    are validated at elaboration, not here.
    """
    if kind in _GATES2:
        a, b = inputs
        mask = (1 << a.width) - 1
        au, bu = a._x | a._z, b._x | b._z
        a0 = mask & ~a._ones & ~au
        b0 = mask & ~b._ones & ~bu
        if kind is PrimitiveKind.AND or kind is PrimitiveKind.NAND:
            ones = a._ones & b._ones
            zeros = a0 | b0
        elif kind is PrimitiveKind.OR or kind is PrimitiveKind.NOR:
            ones = a._ones | b._ones
            zeros = a0 & b0
        else:  # XOR / XNOR
            unk = au | bu
            ones = (a._ones ^ b._ones) & ~unk
            zeros = mask & ~ones & ~unk
        if kind in (PrimitiveKind.NAND, PrimitiveKind.NOR, PrimitiveKind.XNOR):
            ones, zeros = zeros, ones
        return LogicVector(a.width, ones, x=mask & ~ones & ~zeros)

    if kind is PrimitiveKind.NOT:
        (a,) = inputs
        mask = (1 << a.width) - 1
        au = a._x | a._z
        return LogicVector(a.width, mask & ~a._ones & ~au, x=au)

    if kind is PrimitiveKind.BUF:
        (a,) = inputs
        return LogicVector(a.width, a._ones, x=a._x | a._z)

    if kind in _REDUCE:
        (a,) = inputs
        mask = (1 << a.width) - 1
        au = a._x | a._z
        if kind is PrimitiveKind.REDUCE_AND:
            if mask & ~a._ones & ~au:
                return _V0
            return _VX if au else _V1
        if kind is PrimitiveKind.REDUCE_OR:
            if a._ones:
                return _V1
            return _VX if au else _V0
        if au:
            return _VX
        return _V1 if bin(a._ones).count("1") & 1 else _V0

    if kind in _ARITH2 or kind in _CMP2 or kind is PrimitiveKind.MUL:
        a, b = inputs
        if (a._x | a._z) or (b._x | b._z):
            return LogicVector.all_x(result_width(kind, [a.width, b.width]))
        if kind is PrimitiveKind.ADD:
            w = max(a.width, b.width)
            return LogicVector(w, (a._ones + b._ones) & ((1 << w) - 1))
        if kind is PrimitiveKind.SUB:
            w = max(a.width, b.width)
            return LogicVector(w, (a._ones - b._ones) & ((1 << w) - 1))
        if kind is PrimitiveKind.MUL:
            return LogicVector(a.width + b.width, a._ones * b._ones)
        if kind is PrimitiveKind.EQ:
            return _V1 if a._ones == b._ones else _V0
        if kind is PrimitiveKind.NEQ:
            return _V1 if a._ones != b._ones else _V0
        return _V1 if a._ones < b._ones else _V0

    if kind in _SHIFTS:
        a, n = inputs
        if n._x | n._z:
            return LogicVector.all_x(a.width)
        amount = min(n._ones, a.width)
        if kind is PrimitiveKind.SHL:
            return LogicVector(a.width, a._ones << amount, a._x << amount, a._z << amount)
        return LogicVector(a.width, a._ones >> amount, a._x >> amount, a._z >> amount)

    if kind is PrimitiveKind.CONCAT:
        ones = x = z = 0
        width = 0
        for part in inputs:  # MSB-first input order
            ones = (ones << part.width) | part._ones
            x = (x << part.width) | part._x | part._z
            width += part.width
        return LogicVector(width, ones, x=x)

    if kind is PrimitiveKind.SLICE:
        (a,) = inputs
        low, width = params
        v = a.slice(low, width)
        return LogicVector(width, v._ones, x=v._x | v._z)

    if kind is PrimitiveKind.MUX2:
        sel, a, b = inputs
        if sel._x | sel._z:
            return _merge(a, b)
        return b if sel._ones else a

    if kind is PrimitiveKind.COND:
        cond, t, e = inputs
        if cond._ones:
            return t
        if not (cond._x | cond._z):
            return e
        return _merge(t, e)

    raise LogicError(f"unknown primitive kind {kind!r}")


def resolve_drivers(drivers: Sequence[LogicVector]) -> LogicVector:
    """Multi-driver net resolution, per bit: all-Z yields Z, one non-Z wins,
    agreeing non-Z values win, conflicting non-Z values yield X."""
    if not drivers:
        raise LogicError("resolve_drivers needs at least one driver")
    width = drivers[0].width
    for d in drivers[1:]:
        if d.width != width:
            raise LogicError(f"driver width mismatch: {d.width} vs {width}")
    mask = (1 << width) - 1
    got1 = got0 = gotx = 0
    for d in drivers:
        got1 |= d._ones
        got0 |= mask & ~d._ones & ~d._x & ~d._z
        gotx |= d._x
    seen = got1 | got0 | gotx
    xs = gotx | (got1 & got0)
    return LogicVector(width, got1 & ~xs, x=xs, z=mask & ~seen)


_V0 = LogicVector(1, 0)
_V1 = LogicVector(1, 1)
_VX = LogicVector.all_x(1)
