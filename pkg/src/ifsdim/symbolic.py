"""One-sided full shift over {1, .., l}: finite words, eventually periodic
points, common prefixes, and budgeted enumeration of all words of a length."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

from .errors import BudgetError

Word = tuple[int, ...]

DEFAULT_WORD_BUDGET = 1 << 24


def validate_word(word, alphabet_size: int) -> Word:
    w = tuple(int(s) for s in word)
    for s in w:
        if not 1 <= s <= alphabet_size:
            raise ValueError(f"symbol {s} outside alphabet 1..{alphabet_size}")
    return w


def word_to_string(word: Word) -> str:
    """Digit-string form used in reports, e.g. (1,2,2,1) -> "1221"."""
    if any(s > 9 for s in word):
        return ",".join(str(s) for s in word)
    return "".join(str(s) for s in word)


@dataclass(frozen=True)
class PeriodicPoint:
    """Eventually periodic point of the shift, ``preperiod . period period ..``.

    Instances are kept in canonical form (shortest preperiod, primitive
    period), so equality of instances is equality of infinite sequences.
    """

    preperiod: Word
    period: Word

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be non-empty")

    def symbol_at(self, k: int) -> int:
        """Symbol at 0-based position k."""
        if k < len(self.preperiod):
            return self.preperiod[k]
        return self.period[(k - len(self.preperiod)) % len(self.period)]

    def prefix(self, n: int) -> Word:
        return tuple(self.symbol_at(k) for k in range(n))

    def to_string(self) -> str:
        return f"pre:{word_to_string(self.preperiod)}|per:{word_to_string(self.period)}"


def _primitive(period: Word) -> Word:
    n = len(period)
    for length in range(1, n):
        if n % length == 0 and period == period[:length] * (n // length):
            return period[:length]
    return period


def periodic_point(preperiod, period, alphabet_size: int | None = None) -> PeriodicPoint:
    """Build a PeriodicPoint in canonical form."""
    pre = tuple(int(s) for s in preperiod)
    per = tuple(int(s) for s in period)
    if alphabet_size is not None:
        validate_word(pre, alphabet_size)
        validate_word(per, alphabet_size)
    if not per:
        raise ValueError("period must be non-empty")
    per = _primitive(per)
    # absorb a preperiod tail that merely re-phases the period
    while pre and pre[-1] == per[-1]:
        per = (per[-1],) + per[:-1]
        pre = pre[:-1]
    return PeriodicPoint(pre, per)


def fixed_point(symbol: int) -> PeriodicPoint:
    """The constant sequence symbol^infinity."""
    return periodic_point((), (symbol,))


def shift(p: PeriodicPoint, n: int) -> PeriodicPoint:
    """Left shift by n, returned in canonical form."""
    if n < 0:
        raise ValueError("shift count must be non-negative")
    if n <= len(p.preperiod):
        return periodic_point(p.preperiod[n:], p.period)
    k = (n - len(p.preperiod)) % len(p.period)
    return periodic_point((), p.period[k:] + p.period[:k])


def common_prefix(a: PeriodicPoint, b: PeriodicPoint) -> Word:
    """Longest common initial word of two distinct eventually periodic points.

    Two distinct such points must differ within max preperiod length plus the
    lcm of the period lengths, which bounds the scan.
    """
    if a == b:
        raise ValueError("identical sequences have no finite common prefix")
    limit = max(len(a.preperiod), len(b.preperiod)) + math.lcm(
        len(a.period), len(b.period)
    )
    out: list[int] = []
    for k in range(limit + 1):
        sa, sb = a.symbol_at(k), b.symbol_at(k)
        if sa != sb:
            return tuple(out)
        out.append(sa)
    raise RuntimeError("canonical distinct points must differ within the scan limit")


def enumerate_words(
    n: int, alphabet_size: int, budget: int = DEFAULT_WORD_BUDGET
) -> Iterator[Word]:
    """All words of length n in lexicographic order; errors out before
    yielding anything if alphabet_size**n exceeds the budget."""
    if alphabet_size < 2:
        raise ValueError("alphabet must have at least 2 symbols")
    if n < 0:
        raise ValueError("word length must be non-negative")
    count = alphabet_size ** n
    if count > budget:
        raise BudgetError(
            f"enumeration budget exceeded: {alphabet_size}^{n} = {count} > {budget}"
        )
    return iter(itertools.product(range(1, alphabet_size + 1), repeat=n))
