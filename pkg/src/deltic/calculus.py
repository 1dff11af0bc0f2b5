"""The point-free term language: syntax, typing rules, registry, interpreter.

Terms are plain syntax; `typecheck` produces a TypedTerm tree annotated with
input/output types and resolved registry entries, and `denote` evaluates a
TypedTerm on a value by compiling it to a closure once.

Shape transformations (reshape) and index predicates (filter) are registered
named functions, so terms stay serializable; `map2 f` and `⟨f, g⟩` are
construction-time sugar for `zip ; map f` and `dup ; (f × g)`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional

from .core import (
    ConformanceError, DelticError, Left, Right, Shape, SupportError,
    TCont, TProd, TSum, UsageError,
    add_values, check_value, default_value, plus_capable,
)
from .serialize import index_from_json, index_to_json, shape_to_text, type_from_text, type_to_text


class TermTypeError(DelticError):
    """A term violates its typing rule."""


class RegistryError(DelticError):
    """Bad registration: duplicate name, unresolved name, or frozen registry."""


# ---------------------------------------------------------------------------
# Syntax
# ---------------------------------------------------------------------------

class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Seq(Term):
    first: Term
    second: Term


@dataclass(frozen=True)
class Par(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Id(Term):
    pass


@dataclass(frozen=True)
class Dup(Term):
    pass


@dataclass(frozen=True)
class Fst(Term):
    pass


@dataclass(frozen=True)
class Snd(Term):
    pass


@dataclass(frozen=True)
class Plus(Term):
    pass


@dataclass(frozen=True)
class Cst(Term):
    ty: Any
    value: Any


@dataclass(frozen=True)
class Map(Term):
    body: Term


@dataclass(frozen=True)
class Zip(Term):
    pass


@dataclass(frozen=True)
class Get(Term):
    index: Any


@dataclass(frozen=True)
class SetAt(Term):
    index: Any


@dataclass(frozen=True)
class Reshape(Term):
    fn: str
    out_shape: Shape


@dataclass(frozen=True)
class Replicate(Term):
    shape: Shape


@dataclass(frozen=True)
class Tp(Term):
    pass


@dataclass(frozen=True)
class Filter(Term):
    pred: str


@dataclass(frozen=True)
class Fuse(Term):
    pass


@dataclass(frozen=True)
class Distr(Term):
    pass


@dataclass(frozen=True)
class Inl(Term):
    right_ty: Any


@dataclass(frozen=True)
class Inr(Term):
    left_ty: Any


@dataclass(frozen=True)
class CasePar(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class OpCall(Term):
    name: str


def seq(*terms: Term) -> Term:
    """Left-to-right composition of one or more terms."""
    out = terms[0]
    for t in terms[1:]:
        out = Seq(out, t)
    return out


def map2(body: Term) -> Term:
    return Seq(Zip(), Map(body))


def fanout(f: Term, g: Term) -> Term:
    """⟨f, g⟩ = dup ; (f × g)."""
    return Seq(Dup(), Par(f, g))


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass
class OpDef:
    """A user operation: batch semantics plus a cached incrementalization.

    typer maps an actual input type to the output type (None rejects);
    make_machine builds the incrementalization for one instantiation.
    sample_in_tys are representative input types for the law validator.
    """

    name: str
    typer: Callable[[Any], Optional[Any]]
    fn: Callable[[Any], Any]
    make_machine: Callable[[Any, Any], Any]
    sample_in_tys: tuple = ()


@dataclass
class IndexFn:
    """A named index transformation pos(s_out) -> pos(s_in) for reshape.

    fibers, when given, maps an input index to the finitely many output
    indices it comes from; required to evaluate reshape over infinite-index
    containers.
    """

    name: str
    fn: Callable[[Any], Any]
    fibers: Optional[Callable[[Any], Iterable]] = None


@dataclass
class IndexPred:
    name: str
    fn: Callable[[Any], bool]


@dataclass
class ProgramDef:
    """A named derived program; build returns a Term for an input type."""

    name: str
    build: Callable[[Any], Optional[Term]]
    params: Optional[tuple] = None  # ((name, TypeExpr), ...) for documentation


class Registry:
    """Named bases, containers, ops, index functions/predicates, programs."""

    def __init__(self):
        self.bases = {}
        self.containers = {}
        self.ops = {}
        self.index_fns = {}
        self.index_preds = {}
        self.programs = {}
        self.frozen = False

    def _add(self, table, name, item, what):
        if self.frozen:
            raise RegistryError(f"registry is frozen; cannot register {what} {name!r}")
        if name in table:
            raise RegistryError(f"duplicate {what} name: {name!r}")
        table[name] = item
        return item

    def register_base(self, base):
        return self._add(self.bases, base.tag, base, "base")

    def register_container(self, cdef):
        return self._add(self.containers, cdef.id, cdef, "container")

    def register_op(self, opdef: OpDef):
        return self._add(self.ops, opdef.name, opdef, "op")

    def register_index_fn(self, name, fn, fibers=None):
        return self._add(self.index_fns, name, IndexFn(name, fn, fibers), "index function")

    def register_index_pred(self, name, fn):
        return self._add(self.index_preds, name, IndexPred(name, fn), "index predicate")

    def register_program(self, progdef: ProgramDef):
        return self._add(self.programs, progdef.name, progdef, "program")

    def freeze(self):
        self.frozen = True
        return self

    def base(self, tag):
        if tag not in self.bases:
            raise RegistryError(f"unknown base type: {tag!r}")
        return self.bases[tag]

    def container(self, cid):
        if cid not in self.containers:
            raise RegistryError(f"unknown container: {cid!r}")
        return self.containers[cid]

    def op(self, name):
        if name not in self.ops:
            raise RegistryError(f"unknown op: {name!r}")
        return self.ops[name]

    def index_fn(self, name):
        if name not in self.index_fns:
            raise RegistryError(f"unknown index function: {name!r}")
        return self.index_fns[name]

    def index_pred(self, name):
        if name not in self.index_preds:
            raise RegistryError(f"unknown index predicate: {name!r}")
        return self.index_preds[name]

    def program(self, name):
        if name not in self.programs:
            raise RegistryError(f"unknown program: {name!r}")
        return self.programs[name]


def monomorphic(in_ty, out_ty):
    """typer for an op usable at exactly one signature."""
    return lambda ty: out_ty if ty == in_ty else None


# ---------------------------------------------------------------------------
# Typing
# ---------------------------------------------------------------------------

class TypedTerm:
    __slots__ = ("term", "in_ty", "out_ty", "children", "info", "_fn")

    def __init__(self, term, in_ty, out_ty, children=(), info=None):
        self.term = term
        self.in_ty = in_ty
        self.out_ty = out_ty
        self.children = children
        self.info = info
        self._fn = None

    def __repr__(self):
        return f"TypedTerm({self.term!r} : {self.in_ty!r} ~> {self.out_ty!r})"


def _mismatch(t, in_ty, why):
    raise TermTypeError(f"{type(t).__name__} at input {type_to_text(in_ty)}: {why}")


def typecheck(t: Term, in_ty, registry: Registry) -> TypedTerm:
    """Check t against the typing rules at input type in_ty."""
    match t:
        case Seq(first, second):
            f = typecheck(first, in_ty, registry)
            g = typecheck(second, f.out_ty, registry)
            return TypedTerm(t, in_ty, g.out_ty, (f, g))
        case Par(left, right):
            if not isinstance(in_ty, TProd):
                _mismatch(t, in_ty, "parallel composition needs a product input")
            f = typecheck(left, in_ty.left, registry)
            g = typecheck(right, in_ty.right, registry)
            return TypedTerm(t, in_ty, TProd(f.out_ty, g.out_ty), (f, g))
        case Id():
            return TypedTerm(t, in_ty, in_ty)
        case Dup():
            return TypedTerm(t, in_ty, TProd(in_ty, in_ty))
        case Fst():
            if not isinstance(in_ty, TProd):
                _mismatch(t, in_ty, "projection needs a product input")
            return TypedTerm(t, in_ty, in_ty.left)
        case Snd():
            if not isinstance(in_ty, TProd):
                _mismatch(t, in_ty, "projection needs a product input")
            return TypedTerm(t, in_ty, in_ty.right)
        case Plus():
            if not (isinstance(in_ty, TProd) and in_ty.left == in_ty.right):
                _mismatch(t, in_ty, "plus needs a pair of equal types")
            if not plus_capable(in_ty.left):
                _mismatch(t, in_ty, "plus needs values=changes with commutative/associative ⊕")
            return TypedTerm(t, in_ty, in_ty.left)
        case Cst(ty, value):
            try:
                check_value(ty, value)
            except ConformanceError as e:
                _mismatch(t, in_ty, f"literal does not conform: {e}")
            return TypedTerm(t, in_ty, ty)
        case Map(body):
            if not isinstance(in_ty, TCont):
                _mismatch(t, in_ty, "map needs a container input")
            f = typecheck(body, in_ty.elem, registry)
            return TypedTerm(t, in_ty, TCont(in_ty.shape, f.out_ty), (f,))
        case Zip():
            ok = (isinstance(in_ty, TProd)
                  and isinstance(in_ty.left, TCont) and isinstance(in_ty.right, TCont)
                  and in_ty.left.shape == in_ty.right.shape)
            if not ok:
                _mismatch(t, in_ty, "zip needs two containers of the same shape")
            out = TCont(in_ty.left.shape, TProd(in_ty.left.elem, in_ty.right.elem))
            return TypedTerm(t, in_ty, out)
        case Get(index):
            if not isinstance(in_ty, TCont):
                _mismatch(t, in_ty, "get needs a container input")
            if not in_ty.shape.valid_index(index):
                _mismatch(t, in_ty, f"index {index!r} outside the shape's positions")
            return TypedTerm(t, in_ty, in_ty.elem)
        case SetAt(index):
            ok = (isinstance(in_ty, TProd) and isinstance(in_ty.right, TCont)
                  and in_ty.right.elem == in_ty.left)
            if not ok:
                _mismatch(t, in_ty, "set needs an (element, container) pair")
            if not in_ty.right.shape.valid_index(index):
                _mismatch(t, in_ty, f"index {index!r} outside the shape's positions")
            return TypedTerm(t, in_ty, in_ty.right)
        case Reshape(fn, out_shape):
            if not isinstance(in_ty, TCont):
                _mismatch(t, in_ty, "reshape needs a container input")
            ifn = registry.index_fn(fn)
            return TypedTerm(t, in_ty, TCont(out_shape, in_ty.elem), info=ifn)
        case Replicate(shape):
            return TypedTerm(t, in_ty, TCont(shape, in_ty))
        case Tp():
            ok = isinstance(in_ty, TCont) and isinstance(in_ty.elem, TCont)
            if not ok:
                _mismatch(t, in_ty, "transpose needs a nested container input")
            out = TCont(in_ty.elem.shape, TCont(in_ty.shape, in_ty.elem.elem))
            return TypedTerm(t, in_ty, out)
        case Filter(pred):
            ok = (isinstance(in_ty, TProd) and isinstance(in_ty.right, TCont)
                  and in_ty.right.elem == in_ty.left)
            if not ok:
                _mismatch(t, in_ty, "filter needs a (default, container) pair")
            p = registry.index_pred(pred)
            return TypedTerm(t, in_ty, in_ty.right, info=p)
        case Fuse():
            if not (isinstance(in_ty, TSum) and in_ty.left == in_ty.right):
                _mismatch(t, in_ty, "fuse needs a sum of equal types")
            return TypedTerm(t, in_ty, in_ty.left)
        case Distr():
            ok = isinstance(in_ty, TProd) and isinstance(in_ty.right, TSum)
            if not ok:
                _mismatch(t, in_ty, "distr needs an (A, B + C) pair")
            a, s = in_ty.left, in_ty.right
            out = TSum(TProd(a, s.left), TProd(a, s.right))
            return TypedTerm(t, in_ty, out)
        case Inl(right_ty):
            return TypedTerm(t, in_ty, TSum(in_ty, right_ty))
        case Inr(left_ty):
            return TypedTerm(t, in_ty, TSum(left_ty, in_ty))
        case CasePar(left, right):
            if not isinstance(in_ty, TSum):
                _mismatch(t, in_ty, "case needs a sum input")
            f = typecheck(left, in_ty.left, registry)
            g = typecheck(right, in_ty.right, registry)
            return TypedTerm(t, in_ty, TSum(f.out_ty, g.out_ty), (f, g))
        case OpCall(name):
            opdef = registry.op(name)
            out_ty = opdef.typer(in_ty)
            if out_ty is None:
                _mismatch(t, in_ty, f"op {name!r} does not accept this input type")
            return TypedTerm(t, in_ty, out_ty, info=opdef)
        case _:
            raise TermTypeError(f"unknown term constructor: {t!r}")


# ---------------------------------------------------------------------------
# Denotational evaluation (compiled to closures)
# ---------------------------------------------------------------------------

def map_batch(shape: Shape, elem_in, elem_out, fn):
    """Pointwise map over a container value, canonical-sparse.

    Over finite shapes absent positions evaluate fn(ε) exactly; over
    infinite-index shapes fn must preserve the default.
    """
    din = default_value(elem_in)
    dout = default_value(elem_out)

    def run(x):
        fe = fn(din)
        if fe == dout:
            out = {}
            for i, xi in x.items():
                fv = fn(xi)
                if fv != dout:
                    out[i] = fv
            return out
        indices = shape.indices()
        if indices is None:
            raise SupportError(
                f"map over {shape!r} needs f(ε)=ε; got {fe!r} for an infinite index set")
        out = {}
        for i in indices:
            fv = fn(x.get(i, din))
            if fv != dout:
                out[i] = fv
        return out

    return run


def _compile(tt: TypedTerm):
    t = tt.term
    match t:
        case Seq():
            f = compiled(tt.children[0])
            g = compiled(tt.children[1])
            return lambda x: g(f(x))
        case Par():
            f = compiled(tt.children[0])
            g = compiled(tt.children[1])
            return lambda xy: (f(xy[0]), g(xy[1]))
        case Id():
            return lambda x: x
        case Dup():
            return lambda x: (x, x)
        case Fst():
            return lambda xy: xy[0]
        case Snd():
            return lambda xy: xy[1]
        case Plus():
            ty = tt.out_ty
            return lambda xy: add_values(ty, xy[0], xy[1])
        case Cst(_, value):
            return lambda _x: value
        case Map():
            body = compiled(tt.children[0])
            return map_batch(tt.in_ty.shape, tt.in_ty.elem, tt.children[0].out_ty, body)
        case Zip():
            da = default_value(tt.in_ty.left.elem)
            db = default_value(tt.in_ty.right.elem)

            def run_zip(xy):
                x, y = xy
                out = {}
                for i in x.keys() | y.keys():
                    out[i] = (x.get(i, da), y.get(i, db))
                return out
            return run_zip
        case Get(index):
            elem = tt.out_ty

            def run_get(x, _i=index):
                if _i in x:
                    return x[_i]
                return default_value(elem)
            return run_get
        case SetAt(index):
            elem = tt.in_ty.left
            dft = default_value(elem)

            def run_set(xa, _i=index):
                v, a = xa
                out = dict(a)
                if v == dft:
                    out.pop(_i, None)
                else:
                    out[_i] = v
                return out
            return run_set
        case Reshape():
            ifn = tt.info
            r = ifn.fn
            in_shape = tt.in_ty.shape
            out_shape = tt.out_ty.shape
            dft = default_value(tt.in_ty.elem)

            def run_reshape(x):
                if not x:
                    return {}
                indices = out_shape.indices()
                out = {}
                if indices is not None:
                    for j in indices:
                        i = r(j)
                        if not in_shape.valid_index(i):
                            raise UsageError(
                                f"index function {ifn.name!r} maps {j!r} outside {in_shape!r}")
                        v = x.get(i, dft)
                        if v != dft:
                            out[j] = v
                    return out
                if ifn.fibers is None:
                    raise SupportError(
                        f"reshape {ifn.name!r} over {out_shape!r} needs registered fibers")
                for i, v in x.items():
                    for j in ifn.fibers(i):
                        if r(j) != i:
                            raise UsageError(
                                f"fibers of {ifn.name!r} are inconsistent at {i!r}")
                        out[j] = v
                return out
            return run_reshape
        case Replicate():
            shape = tt.out_ty.shape
            dft = default_value(tt.in_ty)

            def run_replicate(x):
                if x == dft:
                    return {}
                indices = shape.indices()
                if indices is None:
                    raise SupportError(
                        f"replicate of a non-default value over {shape!r} has infinite support")
                return {i: x for i in indices}
            return run_replicate
        case Tp():
            def run_tp(x):
                out = {}
                for j, row in x.items():
                    for i, v in row.items():
                        out.setdefault(i, {})[j] = v
                return out
            return run_tp
        case Filter():
            p = tt.info.fn
            shape = tt.out_ty.shape
            elem = tt.in_ty.left
            dft = default_value(elem)

            def run_filter(xa):
                x, a = xa
                if x == dft:
                    return {i: v for i, v in a.items() if p(i)}
                indices = shape.indices()
                if indices is None:
                    raise SupportError(
                        f"filter with a non-default fallback over {shape!r} has infinite support")
                out = {}
                for i in indices:
                    v = a.get(i, dft) if p(i) else x
                    if v != dft:
                        out[i] = v
                return out
            return run_filter
        case Fuse():
            return lambda s: s.value
        case Distr():
            def run_distr(xs):
                x, s = xs
                if type(s) is Left:
                    return Left((x, s.value))
                return Right((x, s.value))
            return run_distr
        case Inl():
            return lambda x: Left(x)
        case Inr():
            return lambda x: Right(x)
        case CasePar():
            f = compiled(tt.children[0])
            g = compiled(tt.children[1])

            def run_case(s):
                if type(s) is Left:
                    return Left(f(s.value))
                return Right(g(s.value))
            return run_case
        case OpCall():
            return tt.info.fn
        case _:
            raise TermTypeError(f"unknown term constructor: {t!r}")


def compiled(tt: TypedTerm):
    if tt._fn is None:
        tt._fn = _compile(tt)
    return tt._fn


def denote(tt: TypedTerm, v):
    """Evaluate the batch semantics of a typechecked term."""
    return compiled(tt)(v)


# ---------------------------------------------------------------------------
# Term serialization
# ---------------------------------------------------------------------------

def term_to_text(t: Term) -> str:
    match t:
        case Seq(a, b):
            return f"seq({term_to_text(a)}, {term_to_text(b)})"
        case Par(a, b):
            return f"par({term_to_text(a)}, {term_to_text(b)})"
        case Id():
            return "id"
        case Dup():
            return "dup"
        case Fst():
            return "fst"
        case Snd():
            return "snd"
        case Plus():
            return "plus"
        case Cst(ty, value):
            from .serialize import value_to_json
            return f"cst({type_to_text(ty)}, {json.dumps(value_to_json(ty, value))})"
        case Map(body):
            return f"map({term_to_text(body)})"
        case Zip():
            return "zip"
        case Get(index):
            return f"get({json.dumps(index_to_json(index))})"
        case SetAt(index):
            return f"set({json.dumps(index_to_json(index))})"
        case Reshape(fn, out_shape):
            return f"reshape({fn}, {shape_to_text(out_shape)})"
        case Replicate(shape):
            return f"replicate({shape_to_text(shape)})"
        case Tp():
            return "tp"
        case Filter(pred):
            return f"filter({pred})"
        case Fuse():
            return "fuse"
        case Distr():
            return "distr"
        case Inl(right_ty):
            return f"inl({type_to_text(right_ty)})"
        case Inr(left_ty):
            return f"inr({type_to_text(left_ty)})"
        case CasePar(a, b):
            return f"case({term_to_text(a)}, {term_to_text(b)})"
        case OpCall(name):
            return f"op({name})"
        case _:
            raise UsageError(f"unknown term constructor: {t!r}")


def _split_args(text: str) -> list[str]:
    """Split at top-level commas, respecting brackets and JSON strings."""
    parts, depth, start, i = [], 0, 0, 0
    in_str = False
    while i < len(text):
        c = text[i]
        if in_str:
            if c == "\\":
                i += 1
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        elif c in "([{":
            depth += 1
        elif c in ")]}":
            depth -= 1
        elif c == "," and depth == 0:
            parts.append(text[start:i].strip())
            start = i + 1
        i += 1
    parts.append(text[start:].strip())
    return parts


def _read_head(text: str):
    """Split 'name(args)' into (name, args-or-None); text is pre-stripped."""
    i = 0
    while i < len(text) and (text[i].isalnum() or text[i] == "_"):
        i += 1
    name = text[:i]
    rest = text[i:].strip()
    if not name:
        raise ConformanceError(f"term syntax error: expected a name in {text!r}")
    if not rest:
        return name, None
    if rest[0] != "(" or rest[-1] != ")":
        raise ConformanceError(f"term syntax error near {text!r}")
    return name, rest[1:-1]


def shape_from_text(text: str, registry: Registry) -> Shape:
    text = text.strip()
    if "[" not in text or not text.endswith("]"):
        raise ConformanceError(f"shape syntax error: {text!r}")
    name, payload = text.split("[", 1)
    cdef = registry.container(name.strip())
    return Shape(cdef, cdef.payload_from_text(payload[:-1]))


def term_from_text(text: str, registry: Registry) -> Term:
    from .serialize import value_from_json
    name, args = _read_head(text.strip())
    nullary = {"id": Id, "dup": Dup, "fst": Fst, "snd": Snd, "plus": Plus,
               "zip": Zip, "tp": Tp, "fuse": Fuse, "distr": Distr}
    if args is None:
        if name in nullary:
            return nullary[name]()
        raise ConformanceError(f"term syntax error: {name!r} needs arguments or is unknown")
    parts = _split_args(args)

    def want(n):
        if len(parts) != n:
            raise ConformanceError(f"{name} expects {n} argument(s), got {len(parts)}")

    match name:
        case "seq":
            want(2)
            return Seq(term_from_text(parts[0], registry), term_from_text(parts[1], registry))
        case "par":
            want(2)
            return Par(term_from_text(parts[0], registry), term_from_text(parts[1], registry))
        case "case":
            want(2)
            return CasePar(term_from_text(parts[0], registry), term_from_text(parts[1], registry))
        case "map":
            want(1)
            return Map(term_from_text(parts[0], registry))
        case "cst":
            want(2)
            ty = type_from_text(parts[0], registry)
            return Cst(ty, value_from_json(ty, json.loads(parts[1])))
        case "get":
            want(1)
            return Get(index_from_json(json.loads(parts[0])))
        case "set":
            want(1)
            return SetAt(index_from_json(json.loads(parts[0])))
        case "reshape":
            want(2)
            return Reshape(parts[0], shape_from_text(parts[1], registry))
        case "replicate":
            want(1)
            return Replicate(shape_from_text(parts[0], registry))
        case "filter":
            want(1)
            return Filter(parts[0])
        case "inl":
            want(1)
            return Inl(type_from_text(parts[0], registry))
        case "inr":
            want(1)
            return Inr(type_from_text(parts[0], registry))
        case "op":
            want(1)
            return OpCall(parts[0])
        case _:
            raise ConformanceError(f"unknown term constructor: {name!r}")
