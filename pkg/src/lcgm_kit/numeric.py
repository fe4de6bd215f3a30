"""Dual numeric backend: exact rationals and tolerance-based floats.

Every probability-carrying object in this package stores its entries either
as :class:`fractions.Fraction` (exact mode) or as :class:`float` (float
mode).  Operations that *decide* something (equality, support, feasibility)
take a :class:`NumericMode` so callers choose which regime governs the
decision.  Exact mode demands all-rational inputs and compares with ``==``;
float mode compares within an explicit tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral

Number = Fraction | float


@dataclass(frozen=True)
class NumericMode:
    """Decision regime: exact rational arithmetic, or floats within ``tolerance``."""

    tolerance: float | None = None

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("float-mode tolerance must be > 0")

    @property
    def is_exact(self) -> bool:
        return self.tolerance is None

    def eq(self, a: Number, b: Number) -> bool:
        """Mode-aware scalar equality."""
        if self.is_exact:
            return a == b
        return abs(a - b) <= self.tolerance

    def is_positive(self, a: Number) -> bool:
        """Mode-aware strict positivity (above tolerance in float mode)."""
        if self.is_exact:
            return a > 0
        return a > self.tolerance

    def describe(self) -> str:
        return "exact" if self.is_exact else f"float(tol={self.tolerance:g})"


EXACT = NumericMode()


def float_mode(tolerance: float) -> NumericMode:
    return NumericMode(tolerance=float(tolerance))


def coerce_number(value) -> Number:
    """Normalize an input entry: integral types become exact Fractions."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Integral):
        return Fraction(int(value))
    if isinstance(value, float):
        return value
    raise TypeError(f"unsupported numeric entry: {value!r}")


def is_exact_number(value: Number) -> bool:
    return isinstance(value, Fraction)


def all_exact(values) -> bool:
    return all(is_exact_number(v) for v in values)
