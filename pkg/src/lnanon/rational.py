"""Exact rational type used for amounts, fees and costs.

gmpy2's ``mpq`` is used when installed; it compares, hashes and mixes with
:class:`fractions.Fraction` transparently and is about ten times faster.
Annotations elsewhere say ``Fraction`` for either.
"""

from fractions import Fraction

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover
    Q = Fraction


def to_q(value) -> "Q":
    """Exact conversion; floats go through their shortest decimal repr."""
    if isinstance(value, Q):
        return value
    if isinstance(value, float):
        return Q(str(value))
    return Q(value)
