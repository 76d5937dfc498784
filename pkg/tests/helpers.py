"""Shared building blocks for the unit and acceptance suites."""

import itertools
import random

from rtlfsim import LogicBit, LogicVector, PrimitiveKind, eval_primitive
from rtlfsim import SourceUnit, elaborate, parse, parse_stimulus

B0, B1, BX, BZ = LogicBit.ZERO, LogicBit.ONE, LogicBit.X, LogicBit.Z

SCALAR_GATES = [
    PrimitiveKind.AND, PrimitiveKind.OR, PrimitiveKind.XOR,
    PrimitiveKind.NAND, PrimitiveKind.NOR, PrimitiveKind.XNOR,
]

VECTOR_KINDS = SCALAR_GATES + [
    PrimitiveKind.ADD, PrimitiveKind.SUB, PrimitiveKind.MUL,
    PrimitiveKind.EQ, PrimitiveKind.NEQ, PrimitiveKind.LT_UNSIGNED,
    PrimitiveKind.SHL, PrimitiveKind.SHR_LOGICAL,
    PrimitiveKind.REDUCE_AND, PrimitiveKind.REDUCE_OR, PrimitiveKind.REDUCE_XOR,
]

REDUCTIONS = {PrimitiveKind.REDUCE_AND, PrimitiveKind.REDUCE_OR,
              PrimitiveKind.REDUCE_XOR}


def build(src: str, top: str, path: str = "test.v"):
    return elaborate(parse(SourceUnit([(path, src)], top)), top)


def stim(text: str):
    return parse_stimulus(text)


def random_vector(rng: random.Random, width: int, states="01xz") -> LogicVector:
    return LogicVector.from_bits(LogicBit(rng.choice(states)) for _ in range(width))


def boolean_truth_tables_pass() -> bool:
    tables = {
        PrimitiveKind.AND: lambda a, b: a & b,
        PrimitiveKind.OR: lambda a, b: a | b,
        PrimitiveKind.XOR: lambda a, b: a ^ b,
        PrimitiveKind.NAND: lambda a, b: 1 - (a & b),
        PrimitiveKind.NOR: lambda a, b: 1 - (a | b),
        PrimitiveKind.XNOR: lambda a, b: 1 - (a ^ b),
    }
    for kind, fn in tables.items():
        for a, b in itertools.product((0, 1), repeat=2):
            got = eval_primitive(kind, [LogicVector(1, a), LogicVector(1, b)])
            if got != LogicVector(1, fn(a, b)):
                return False
    for a in (0, 1):
        if eval_primitive(PrimitiveKind.NOT, [LogicVector(1, a)]) != LogicVector(1, 1 - a):
            return False
        if eval_primitive(PrimitiveKind.BUF, [LogicVector(1, a)]) != LogicVector(1, a):
            return False
    return True


def x_monotonicity_failures(rng: random.Random, cases: int) -> tuple[int, int]:
    """Randomized vector check: replacing an x/z input bit by 0 and by 1,
    any output bit both runs agree on must match the x run or be x there.
    Returns (cases_checked, failures)."""
    checked = failures = 0
    for _ in range(cases):
        kind = rng.choice(VECTOR_KINDS)
        w = rng.randint(1, 6)
        arity = 1 if kind in REDUCTIONS else 2
        inputs = [random_vector(rng, w) for _ in range(arity)]
        slots = [
            (i, j)
            for i, v in enumerate(inputs)
            for j in range(w)
            if v.bit(j) in (BX, BZ)
        ]
        if not slots:
            continue
        i, j = rng.choice(slots)
        base = eval_primitive(kind, inputs)
        runs = []
        for c in (B0, B1):
            forced = list(inputs)
            forced[i] = forced[i].forced_bit(j, c)
            runs.append(eval_primitive(kind, forced))
        checked += 1
        for k in range(base.width):
            a, b = runs[0].bit(k), runs[1].bit(k)
            if a == b and a in (B0, B1) and base.bit(k) not in (a, BX):
                failures += 1
                break
    return checked, failures


def resolve_property_failures(rng: random.Random, cases: int) -> tuple[int, int]:
    """Commutativity and associativity of multi-driver resolution."""
    from rtlfsim import resolve_drivers

    checked = failures = 0
    for _ in range(cases):
        w = rng.randint(1, 4)
        ds = [random_vector(rng, w) for _ in range(rng.randint(2, 4))]
        base = resolve_drivers(ds)
        shuffled = ds[:]
        rng.shuffle(shuffled)
        left = ds[0]
        for d in ds[1:]:
            left = resolve_drivers([left, d])
        right = ds[-1]
        for d in reversed(ds[:-1]):
            right = resolve_drivers([d, right])
        checked += 1
        if not (resolve_drivers(shuffled) == base == left == right):
            failures += 1
    return checked, failures
