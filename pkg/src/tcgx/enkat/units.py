"""Unit registry with affine (factor + offset) units.

Each unit maps to its quantity's base unit as ``base = v * factor + offset``.
Base units: pressure MPa, length mm, temperature K, mass kg.  Factors are
kept as exact rationals of their decimal definitions, so a conversion is
computed exactly and rounded once.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import QuantityMismatch, UnknownUnit


@dataclass(frozen=True)
class Unit:
    name: str
    quantity: str
    factor: Fraction
    offset: Fraction = Fraction(0)


class UnitRegistry:
    def __init__(self):
        self._units: dict[str, Unit] = {}
        self._aliases: dict[str, str] = {}

    def add(self, quantity, name, factor, offset=0.0, aliases=()):
        if not _exact(factor) > 0:
            raise ValueError(f"unit {name}: factor must be positive")
        if name in self._aliases:
            raise ValueError(f"unit {name} already registered")
        self._units[name] = Unit(name, quantity, _exact(factor), _exact(offset))
        for a in (name, *aliases):
            self._aliases[a] = name

    def __contains__(self, name):
        return name in self._aliases

    def get(self, name) -> Unit:
        try:
            return self._units[self._aliases[name.strip()]]
        except KeyError:
            raise UnknownUnit(f"unknown unit {name!r}") from None

    def canonical(self, name) -> str:
        return self.get(name).name

    def units(self, quantity=None) -> list[Unit]:
        return [u for u in self._units.values() if quantity is None or u.quantity == quantity]

    def quantities(self) -> list[str]:
        return sorted({u.quantity for u in self._units.values()})

    def convert_exact(self, v, from_unit: str, to_unit: str) -> Fraction:
        a, b = self.get(from_unit), self.get(to_unit)
        if a.quantity != b.quantity:
            raise QuantityMismatch(f"cannot convert {a.name} ({a.quantity}) to {b.name} ({b.quantity})")
        v = Fraction(v)
        if a is b:
            return v
        return (v * a.factor + a.offset - b.offset) / b.factor

    def convert(self, v: float, from_unit: str, to_unit: str) -> float:
        """``v`` converted and rounded to the nearest float."""
        return float(self.convert_exact(float(v), from_unit, to_unit))


def _exact(x) -> Fraction:
    # a float stands for the decimal it was written as
    return x if isinstance(x, Fraction) else Fraction(x if isinstance(x, str) else repr(float(x)))


def default_registry() -> UnitRegistry:
    r = UnitRegistry()
    # pressure, base MPa; 1 kgf = 9.80665 N exactly, 1 mH2O = 9806.65 Pa
    r.add("pressure", "MPa", 1.0, aliases=("МПа",))
    r.add("pressure", "kPa", 1e-3, aliases=("кПа",))
    r.add("pressure", "Pa", 1e-6, aliases=("Па",))
    r.add("pressure", "bar", 0.1, aliases=("бар",))
    r.add("pressure", "kgf/cm2", 0.0980665,
          aliases=("kgf/cm²", "кгс/см2", "кгс/см²", "кгс/кв.см", "at"))
    r.add("pressure", "mH2O", 0.00980665, aliases=("m H2O", "mH₂O", "м вод.ст.", "м.вод.ст."))
    r.add("pressure", "mmH2O", 9.80665e-6, aliases=("мм вод.ст.",))
    r.add("pressure", "mmHg", 1.33322387415e-4, aliases=("мм рт.ст.",))
    r.add("pressure", "atm", 0.101325, aliases=("атм",))
    # length, base mm
    r.add("length", "mm", 1.0, aliases=("мм",))
    r.add("length", "cm", 10.0, aliases=("см",))
    r.add("length", "m", 1000.0, aliases=("м",))
    r.add("length", "km", 1e6, aliases=("км",))
    r.add("length", "in", 25.4, aliases=("дюйм", '"'))
    # temperature, base K
    r.add("temperature", "K", 1.0, aliases=("К",))
    r.add("temperature", "°C", 1, "273.15", aliases=("C", "degC", "град.С", "°С"))
    r.add("temperature", "°F", Fraction(5, 9), Fraction("273.15") - Fraction(160, 9), aliases=("F", "degF"))
    # mass, base kg
    r.add("mass", "kg", 1.0, aliases=("кг",))
    r.add("mass", "g", 1e-3, aliases=("г",))
    r.add("mass", "t", 1000.0, aliases=("т",))
    # counts
    r.add("count", "pcs", 1.0, aliases=("шт", "шт."))
    return r


UNITS = default_registry()


def convert(v: float, from_unit: str, to_unit: str) -> float:
    return UNITS.convert(v, from_unit, to_unit)
