"""Deterministic JSON reports.

Exact rationals become ``{"num": .., "den": ..}``; floats are rounded to a
fixed number of decimals, recorded in the report's ``float_rounding`` field.
Keys are sorted and nothing time-dependent is written, so equal inputs give
byte-identical output.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

FLOAT_DIGITS = 6


def fraction_json(x: Fraction) -> dict:
    return {"num": x.numerator, "den": x.denominator}


def parse_fraction(value) -> Fraction:
    """Accept ints, ``"1/8"`` strings and ``{"num", "den"}`` objects."""
    if isinstance(value, dict):
        return Fraction(int(value["num"]), int(value["den"]))
    if isinstance(value, float):
        raise ValueError(f"use an exact rational instead of float {value!r}")
    return Fraction(value)


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, Fraction):
        return fraction_json(obj)
    if isinstance(obj, float):
        return round(obj, FLOAT_DIGITS)
    if isinstance(obj, bytes):
        return obj.hex()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "describe"):
        return to_jsonable(obj.describe())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report: dict) -> str:
    body = dict(report)
    body["float_rounding"] = {"decimals": FLOAT_DIGITS, "mode": "round-half-even"}
    return json.dumps(to_jsonable(body), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
