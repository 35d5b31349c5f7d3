"""Game of 24: exact-arithmetic puzzle states, moves and the brute-force solver.

Numbers are :class:`fractions.Fraction` so intermediate results such as
``8/3`` stay exact; ``8 / (3 - 8/3)`` reaches 24 only under exact equality.

Rule variant: intermediate values may be negative or fractional, as in the
4nums-style solvers. Division by zero is simply not a legal move.
"""
from __future__ import annotations

import csv
import hashlib
import io
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

TARGET = Fraction(24)
OPERATORS = ("+", "-", "*", "/")

Number = Fraction

# LM output often uses typographic operators.
_OPERATOR_ALIASES = {"×": "*", "·": "*", "x": "*", "÷": "/", "−": "-", "–": "-"}


class PuzzleParseError(ValueError):
    """Raised for malformed puzzle text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IllegalMoveError(ValueError):
    pass


def format_number(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def to_number(token: str | int | Fraction) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {token!r}") from exc


@dataclass(frozen=True, order=True)
class PuzzleState:
    """Multiset of remaining numbers, stored as a sorted tuple."""

    numbers: tuple[Fraction, ...]

    def __post_init__(self):
        canonical = tuple(sorted(Fraction(n) for n in self.numbers))
        object.__setattr__(self, "numbers", canonical)
        object.__setattr__(self, "_hash", hash(canonical))

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def of(cls, *numbers: int | str | Fraction) -> PuzzleState:
        return cls(tuple(to_number(n) for n in numbers))

    def __len__(self) -> int:
        return len(self.numbers)

    def __str__(self) -> str:
        return " ".join(format_number(n) for n in self.numbers)

    def digest(self) -> str:
        """Stable short hash of the canonical multiset."""
        return hashlib.sha1(str(self).encode()).hexdigest()[:16]

    def without(self, *operands: Fraction) -> list[Fraction]:
        remaining = list(self.numbers)
        for x in operands:
            try:
                remaining.remove(x)
            except ValueError:
                raise IllegalMoveError(f"{format_number(x)} not in {{{self}}}") from None
        return remaining


@dataclass(frozen=True)
class Move:
    """One equation line ``a op b = result``."""

    a: Fraction
    op: str
    b: Fraction
    result: Fraction

    def __str__(self) -> str:
        return f"{format_number(self.a)} {self.op} {format_number(self.b)} = {format_number(self.result)}"

    def sort_key(self):
        return (self.result, OPERATORS.index(self.op), self.a, self.b)


def compute(a: Fraction, op: str, b: Fraction) -> Fraction | None:
    """Exact ``a op b``; None for division by zero."""
    op = _OPERATOR_ALIASES.get(op, op)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return None if b == 0 else a / b
    raise ValueError(f"unknown operator {op!r}")


def make_move(a, op: str, b) -> Move:
    a, b = to_number(a), to_number(b)
    op = _OPERATOR_ALIASES.get(op, op)
    result = compute(a, op, b)
    if result is None:
        raise IllegalMoveError("division by zero")
    return Move(a, op, b, result)


def parse_puzzle(text: str, line: int | None = None, count: int | None = None) -> PuzzleState:
    """Parse whitespace-separated numbers into a canonical state.

    ``count`` pins the number of values (4 for dataset rows); otherwise
    1 to 4 values are accepted.
    """
    tokens = text.split()
    try:
        numbers = [to_number(t) for t in tokens]
    except ValueError as exc:
        raise PuzzleParseError(str(exc), line) from None
    if count is not None and len(numbers) != count:
        raise PuzzleParseError(f"expected {count} numbers, got {len(numbers)}", line)
    if not 1 <= len(numbers) <= 4:
        raise PuzzleParseError(f"expected 1 to 4 numbers, got {len(numbers)}", line)
    return PuzzleState(tuple(numbers))


def legal_moves(state: PuzzleState) -> list[Move]:
    """All distinct moves combining one pair of numbers, in deterministic order."""
    return list(_legal_moves(state))


@lru_cache(maxsize=1 << 16)
def _legal_moves(state: PuzzleState) -> tuple[Move, ...]:
    nums = state.numbers
    seen: set[tuple] = set()
    moves: list[Move] = []
    for i in range(len(nums)):
        for j in range(i + 1, len(nums)):
            x, y = nums[i], nums[j]
            for a, op, b in (
                (x, "+", y),
                (x, "*", y),
                (x, "-", y),
                (y, "-", x),
                (x, "/", y),
                (y, "/", x),
            ):
                result = compute(a, op, b)
                if result is None:
                    continue
                # + and * commute; for - and / the operand order is kept.
                operands = tuple(sorted((a, b))) if op in "+*" else (a, b)
                key = (operands, op, result)
                if key in seen:
                    continue
                seen.add(key)
                moves.append(Move(a, op, b, result))
    moves.sort(key=Move.sort_key)
    return tuple(moves)


@lru_cache(maxsize=1 << 16)
def successors(state: PuzzleState) -> tuple[tuple[Move, PuzzleState], ...]:
    """``(move, next_state)`` for every legal move, in legal_moves order."""
    return tuple((m, _apply(state, m)) for m in _legal_moves(state))


@lru_cache(maxsize=1 << 16)
def _successor_map(state: PuzzleState) -> dict[Move, PuzzleState]:
    return dict(successors(state))


def apply_move(state: PuzzleState, move: Move) -> PuzzleState:
    nxt = _successor_map(state).get(move)
    if nxt is not None:
        return nxt
    return _apply(state, move)


def _apply(state: PuzzleState, move: Move) -> PuzzleState:
    if compute(move.a, move.op, move.b) != move.result:
        raise IllegalMoveError(f"wrong arithmetic in {move}")
    remaining = state.without(move.a, move.b)
    return PuzzleState(tuple(remaining) + (move.result,))


def is_success(state: PuzzleState) -> bool:
    return state.numbers == (TARGET,)


@lru_cache(maxsize=None)
def solvable(state: PuzzleState) -> bool:
    """True iff some move sequence reduces ``state`` to exactly {24}."""
    if len(state) == 1:
        return is_success(state)
    return any(solvable(nxt) for _, nxt in successors(state))


def solution(state: PuzzleState) -> list[Move] | None:
    """One solving move sequence, or None."""
    if len(state) == 1:
        return [] if is_success(state) else None
    for m, nxt in successors(state):
        if solvable(nxt):
            return [m] + solution(nxt)
    return None


def replay(puzzle: PuzzleState, moves: Iterable[Move]) -> PuzzleState:
    state = puzzle
    for m in moves:
        state = apply_move(state, m)
    return state


_NUM = r"-?\d+(?:\.\d+)?(?:/\d+)?"
_MOVE_RE = re.compile(
    rf"(?P<a>{_NUM})\s*(?P<op>[-+*/×÷−–·x])\s*(?P<b>{_NUM})\s*=\s*(?P<c>{_NUM})"
    r"(?:\s*\(\s*left\s*:\s*(?P<left>[^)]*)\))?",
    re.IGNORECASE,
)


def parse_move_line(text: str) -> tuple[Move, PuzzleState | None]:
    """Parse ``"a op b = c (left: ...)"``.

    Returns the move (with the *claimed* result) and the claimed remaining
    numbers if a ``left:`` clause is present. Arithmetic is not checked here.
    """
    m = _MOVE_RE.search(text)
    if m is None:
        raise ValueError(f"no equation in {text!r}")
    op = _OPERATOR_ALIASES.get(m["op"].lower(), m["op"])
    move = Move(to_number(m["a"]), op, to_number(m["b"]), to_number(m["c"]))
    left = None
    if m["left"] is not None and m["left"].strip():
        left = PuzzleState(tuple(to_number(t) for t in m["left"].replace(",", " ").split()))
    return move, left


def load_dataset(path: str | Path) -> list[PuzzleState]:
    """Load puzzles in file order.

    Accepts plain text (one puzzle per line) or a CSV whose header has a
    ``Puzzles`` column. Blank lines in plain text are skipped.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PuzzleParseError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if lines and "Puzzles" in lines[0].split(","):
        reader = csv.DictReader(io.StringIO(text))
        return [
            parse_puzzle(row["Puzzles"] or "", line=n, count=4)
            for n, row in enumerate(reader, start=2)
        ]
    return [
        parse_puzzle(line, line=n, count=4)
        for n, line in enumerate(lines, start=1)
        if line.strip()
    ]


def write_dataset(path: str | Path, puzzles: Sequence[PuzzleState]) -> None:
    Path(path).write_text("".join(f"{p}\n" for p in puzzles), encoding="utf-8")


def slice_puzzles(puzzles: Sequence[PuzzleState], bounds: str | None) -> list[tuple[int, PuzzleState]]:
    """Select a 1-based inclusive ``start:end`` range, e.g. ``"901:1000"``.

    Either bound may be omitted. Returns ``(index, puzzle)`` pairs.
    """
    indexed = list(enumerate(puzzles, start=1))
    if not bounds:
        return indexed
    try:
        lo, _, hi = bounds.partition(":")
        start = int(lo) if lo.strip() else 1
        end = int(hi) if hi.strip() else len(puzzles)
    except ValueError:
        raise ValueError(f"bad slice {bounds!r}, expected START:END") from None
    if start < 1 or end < start:
        raise ValueError(f"bad slice {bounds!r}")
    return indexed[start - 1 : end]
