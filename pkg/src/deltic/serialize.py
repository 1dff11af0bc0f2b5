"""Textual formats for values, changes, types and shapes.

Everything is type-directed JSON:

  scalars        numbers / strings / null ("keep" and {"set": s} for
                 replacement-style scalar changes)
  mappings       sorted arrays of [index, payload] pairs
  pairs          two-element arrays
  injections     {"inl": v} / {"inr": v}
  sum changes    {"cl": d} / {"cr": d} / {"sl": v} / {"sr": v} / "null"
  indices        numbers, strings, or arrays of indices (tuples)

Types use a prefix grammar: `real`, `int`, `nat`, `scalar` are bases,
`<container>[<payload>] <elem>` applies a container, `*` and `+` build
products and sums (right-associative, `*` binds tighter), parentheses group.
"""

from __future__ import annotations

import json

from .core import (
    KEEP, SUM_NULL, Cl, Cr, Left, Right, Sl, Sr,
    ConformanceError, Shape, TBase, TCont, TProd, TSum, UsageError,
    index_sort_key,
)


# ---------------------------------------------------------------------------
# Indices
# ---------------------------------------------------------------------------

def index_to_json(i):
    if isinstance(i, tuple):
        return [index_to_json(x) for x in i]
    return i


def index_from_json(j):
    if isinstance(j, list):
        return tuple(index_from_json(x) for x in j)
    if isinstance(j, bool) or not isinstance(j, (int, str)):
        raise ConformanceError(f"bad index literal: {j!r}")
    return j


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

def value_to_json(ty, v):
    match ty:
        case TBase():
            return v
        case TCont(_, elem):
            items = sorted(v.items(), key=lambda kv: index_sort_key(kv[0]))
            return [[index_to_json(i), value_to_json(elem, ev)] for i, ev in items]
        case TProd(a, b):
            return [value_to_json(a, v[0]), value_to_json(b, v[1])]
        case TSum(a, b):
            if type(v) is Left:
                return {"inl": value_to_json(a, v.value)}
            return {"inr": value_to_json(b, v.value)}
        case _:
            raise UsageError(f"not a type: {ty!r}")


def value_from_json(ty, j):
    match ty:
        case TBase(base):
            if base.kind == "real" and isinstance(j, int) and not isinstance(j, bool):
                return float(j)
            return j
        case TCont(_, elem):
            if not isinstance(j, list):
                raise ConformanceError(f"expected mapping entries, got {j!r}")
            out = {}
            for entry in j:
                if not (isinstance(entry, list) and len(entry) == 2):
                    raise ConformanceError(f"bad mapping entry: {entry!r}")
                out[index_from_json(entry[0])] = value_from_json(elem, entry[1])
            return out
        case TProd(a, b):
            if not (isinstance(j, list) and len(j) == 2):
                raise ConformanceError(f"expected a pair, got {j!r}")
            return (value_from_json(a, j[0]), value_from_json(b, j[1]))
        case TSum(a, b):
            if isinstance(j, dict) and len(j) == 1:
                if "inl" in j:
                    return Left(value_from_json(a, j["inl"]))
                if "inr" in j:
                    return Right(value_from_json(b, j["inr"]))
            raise ConformanceError(f"expected an injection, got {j!r}")
        case _:
            raise UsageError(f"not a type: {ty!r}")


# ---------------------------------------------------------------------------
# Changes
# ---------------------------------------------------------------------------

def change_to_json(ty, d):
    match ty:
        case TBase(base):
            if base.kind == "scalar":
                return "keep" if d is KEEP else {"set": d}
            return d
        case TCont(_, elem):
            items = sorted(d.items(), key=lambda kv: index_sort_key(kv[0]))
            return [[index_to_json(i), change_to_json(elem, di)] for i, di in items]
        case TProd(a, b):
            return [change_to_json(a, d[0]), change_to_json(b, d[1])]
        case TSum(a, b):
            if d is SUM_NULL:
                return "null"
            match d:
                case Cl(change=c):
                    return {"cl": change_to_json(a, c)}
                case Cr(change=c):
                    return {"cr": change_to_json(b, c)}
                case Sl(value=x):
                    return {"sl": value_to_json(a, x)}
                case Sr(value=x):
                    return {"sr": value_to_json(b, x)}
            raise ConformanceError(f"bad sum change {d!r}")
        case _:
            raise UsageError(f"not a type: {ty!r}")


def change_from_json(ty, j):
    match ty:
        case TBase(base):
            if base.kind == "scalar":
                if j == "keep":
                    return KEEP
                if isinstance(j, dict) and set(j) == {"set"}:
                    return j["set"]
                raise ConformanceError(f"bad scalar change: {j!r}")
            if base.kind == "real" and isinstance(j, int) and not isinstance(j, bool):
                return float(j)
            return j
        case TCont(_, elem):
            if not isinstance(j, list):
                raise ConformanceError(f"expected change entries, got {j!r}")
            out = {}
            for entry in j:
                if not (isinstance(entry, list) and len(entry) == 2):
                    raise ConformanceError(f"bad change entry: {entry!r}")
                out[index_from_json(entry[0])] = change_from_json(elem, entry[1])
            return out
        case TProd(a, b):
            if not (isinstance(j, list) and len(j) == 2):
                raise ConformanceError(f"expected a pair change, got {j!r}")
            return (change_from_json(a, j[0]), change_from_json(b, j[1]))
        case TSum(a, b):
            if j == "null":
                return SUM_NULL
            if isinstance(j, dict) and len(j) == 1:
                if "cl" in j:
                    return Cl(change_from_json(a, j["cl"]))
                if "cr" in j:
                    return Cr(change_from_json(b, j["cr"]))
                if "sl" in j:
                    return Sl(value_from_json(a, j["sl"]))
                if "sr" in j:
                    return Sr(value_from_json(b, j["sr"]))
            raise ConformanceError(f"bad sum change: {j!r}")
        case _:
            raise UsageError(f"not a type: {ty!r}")


def value_to_text(ty, v) -> str:
    return json.dumps(value_to_json(ty, v), separators=(",", ":"))


def value_from_text(ty, text) -> object:
    return value_from_json(ty, json.loads(text))


def change_to_text(ty, d) -> str:
    return json.dumps(change_to_json(ty, d), separators=(",", ":"))


def change_from_text(ty, text) -> object:
    return change_from_json(ty, json.loads(text))


# ---------------------------------------------------------------------------
# Types and shapes
# ---------------------------------------------------------------------------

def shape_to_text(shape: Shape) -> str:
    return f"{shape.container.id}[{shape.container.payload_to_text(shape.payload)}]"


def type_to_text(ty) -> str:
    def go(t, level):
        # level: 0 sum, 1 prod, 2 atom
        match t:
            case TBase(base):
                return base.tag
            case TCont(shape, elem):
                s = f"{shape_to_text(shape)} {go(elem, 2)}"
                return s if level <= 2 else f"({s})"
            case TProd(a, b):
                s = f"{go(a, 2)} * {go(b, 1)}"
                return s if level <= 1 else f"({s})"
            case TSum(a, b):
                s = f"{go(a, 1)} + {go(b, 0)}"
                return s if level <= 0 else f"({s})"
            case _:
                raise UsageError(f"not a type: {t!r}")
    return go(ty, 0)


class _TypeParser:
    def __init__(self, text, registry):
        self.text = text
        self.pos = 0
        self.registry = registry

    def error(self, msg):
        raise ConformanceError(f"type syntax error at {self.pos}: {msg} in {self.text!r}")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_ident(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        if start == self.pos:
            self.error("expected a name")
        return self.text[start:self.pos]

    def parse_sum(self):
        left = self.parse_prod()
        if self.peek() == "+":
            self.pos += 1
            return TSum(left, self.parse_sum())
        return left

    def parse_prod(self):
        left = self.parse_factor()
        if self.peek() == "*":
            self.pos += 1
            return TProd(left, self.parse_prod())
        return left

    def parse_factor(self):
        if self.peek() == "(":
            self.pos += 1
            inner = self.parse_sum()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return inner
        name = self.take_ident()
        if self.peek() == "[":
            depth = 0
            self.pos += 1
            start = self.pos
            while self.pos < len(self.text):
                c = self.text[self.pos]
                if c == "[":
                    depth += 1
                elif c == "]":
                    if depth == 0:
                        break
                    depth -= 1
                self.pos += 1
            else:
                self.error("unterminated '['")
            payload_text = self.text[start:self.pos]
            self.pos += 1
            cdef = self.registry.container(name)
            shape = Shape(cdef, cdef.payload_from_text(payload_text))
            return TCont(shape, self.parse_factor())
        return TBase(self.registry.base(name))


def type_from_text(text, registry):
    p = _TypeParser(text, registry)
    ty = p.parse_sum()
    p.skip_ws()
    if p.pos != len(text):
        p.error("trailing input")
    return ty
