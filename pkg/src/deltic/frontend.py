"""Named-variable surface syntax: parser, de Bruijn resolution, lowering.

Surface form:

    bundle linalg
    param m : arr[2] arr[3] real
    param v : arr[3] real

    map sum # (map2 (map2 mul) # (replicate 2 # v, m))

`#` applies a head to a runtime argument; heads are op/program names or the
generic operations, with static arguments by juxtaposition (`map relu`,
`map2 (map2 mul)`, `replicate 2`, `get 0`, `filter p`, `reshape r arr[4]`).
`let x = e; e` binds; `(a, b)` and `[a, b, ...]` build right-nested tuples.
`--` starts a comment.  Lowering turns contexts into right-nested products,
variables into projection chains, and `let` into `dup ; (e1 × id) ; e2`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .calculus import (
    Cst, Distr, Dup, Filter, Fst, Fuse, Get, Id, Map, OpCall, Par, Plus,
    Registry, Replicate, Reshape, SetAt, Snd, Term, TermTypeError, Tp,
    TypedTerm, Zip, denote, fanout, map2, seq, typecheck,
)
from .core import DelticError, TBase, TCont, TProd
from .serialize import type_from_text


class SurfaceSyntaxError(DelticError):
    def __init__(self, msg, line=None, col=None):
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"syntax error{where}: {msg}")
        self.line = line
        self.col = col


class NameResolutionError(DelticError):
    pass


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------

@dataclass
class Tok:
    kind: str  # name | number | string | punct | eof
    value: Any
    line: int
    col: int


_PUNCT = set("()[],#;=:")


def tokenize(text: str) -> list[Tok]:
    toks = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Tok("name", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            lit = text[i:j]
            toks.append(Tok("number", float(lit) if "." in lit else int(lit), line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise SurfaceSyntaxError("unterminated string", line, start_col)
            toks.append(Tok("string", "".join(out), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c in _PUNCT:
            toks.append(Tok("punct", c, line, start_col))
            i += 1
            col += 1
            continue
        raise SurfaceSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Tok("eof", None, line, col))
    return toks


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass
class HName:
    name: str


@dataclass
class HApply:
    fn: Any
    arg: Any  # HName | HApply | int | str | ("shape", container, payload_text)


@dataclass
class NVar:
    name: str
    line: int = 0
    col: int = 0


@dataclass
class NLet:
    name: str
    bound: Any
    body: Any
    line: int = 0
    col: int = 0


@dataclass
class NApp:
    head: Any
    arg: Any
    line: int = 0
    col: int = 0


@dataclass
class NTuple:
    items: tuple
    line: int = 0
    col: int = 0


@dataclass
class NLit:
    raw: Any
    line: int = 0
    col: int = 0


# de Bruijn forms: same shapes with var(name) replaced by var(index)

@dataclass
class DVar:
    index: int


@dataclass
class DLet:
    bound: Any
    body: Any


@dataclass
class DApp:
    head: Any
    arg: Any


@dataclass
class DTuple:
    items: tuple


@dataclass
class DLit:
    raw: Any


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise SurfaceSyntaxError(msg, tok.line, tok.col)

    def expect(self, kind, value=None):
        t = self.next()
        if t.kind != kind or (value is not None and t.value != value):
            found = "end of input" if t.kind == "eof" else repr(t.value)
            self.fail(f"expected {value or kind}, found {found}", t)
        return t

    def parse_expr(self):
        t = self.peek()
        if t.kind == "name" and t.value == "let":
            self.next()
            name = self.expect("name").value
            self.expect("punct", "=")
            bound = self.parse_expr()
            self.expect("punct", ";")
            body = self.parse_expr()
            return NLet(name, bound, body, t.line, t.col)
        # try: head '#' expr
        save = self.pos
        head = self._try_head()
        if head is not None and self.peek().kind == "punct" and self.peek().value == "#":
            self.next()
            arg = self.parse_expr()
            return NApp(head, arg, t.line, t.col)
        self.pos = save
        return self.parse_primary()

    def parse_primary(self):
        t = self.next()
        if t.kind == "number" or t.kind == "string":
            return NLit(t.value, t.line, t.col)
        if t.kind == "name":
            return NVar(t.value, t.line, t.col)
        if t.kind == "punct" and t.value in "([":
            close = ")" if t.value == "(" else "]"
            items = [self.parse_expr()]
            while self.peek().kind == "punct" and self.peek().value == ",":
                self.next()
                items.append(self.parse_expr())
            self.expect("punct", close)
            if len(items) == 1 and t.value == "(":
                return items[0]
            return NTuple(tuple(items), t.line, t.col)
        self.fail(f"unexpected {t.value!r}", t)

    def _try_head(self):
        try:
            return self._parse_head()
        except SurfaceSyntaxError:
            return None

    def _parse_head(self):
        head = self._parse_head_atom()
        while True:
            t = self.peek()
            if t.kind in ("name", "number") or (t.kind == "punct" and t.value == "("):
                # a '(' only extends the head if it encloses a head
                if t.kind == "punct":
                    save = self.pos
                    self.next()
                    try:
                        inner = self._parse_head()
                    except SurfaceSyntaxError:
                        self.pos = save
                        return head
                    if not (self.peek().kind == "punct" and self.peek().value == ")"):
                        self.pos = save
                        return head
                    self.next()
                    head = HApply(head, inner)
                    continue
                self.next()
                if t.kind == "number":
                    head = HApply(head, t.value)
                    continue
                # name: could be a shape literal name[...]
                if self.peek().kind == "punct" and self.peek().value == "[":
                    self.next()
                    payload = self._bracket_payload()
                    head = HApply(head, ("shape", t.value, payload))
                else:
                    head = HApply(head, HName(t.value))
                continue
            return head

    def _parse_head_atom(self):
        t = self.next()
        if t.kind == "name":
            return HName(t.value)
        if t.kind == "punct" and t.value == "(":
            inner = self._parse_head()
            self.expect("punct", ")")
            return inner
        self.fail("expected a head", t)

    def _bracket_payload(self):
        # collects raw text tokens up to the matching ']'
        parts = []
        depth = 0
        while True:
            t = self.next()
            if t.kind == "eof":
                self.fail("unterminated '['", t)
            if t.kind == "punct" and t.value == "[":
                depth += 1
            if t.kind == "punct" and t.value == "]":
                if depth == 0:
                    return "".join(parts)
                depth -= 1
            parts.append(str(t.value))


def parse_expr_text(text: str):
    p = _Parser(tokenize(text))
    e = p.parse_expr()
    if p.peek().kind != "eof":
        p.fail("trailing input")
    return e


# ---------------------------------------------------------------------------
# Name resolution (de Bruijn, 0-based positions in the context product)
# ---------------------------------------------------------------------------

def resolve(nt, ctx: list) -> Any:
    match nt:
        case NVar(name):
            if name not in ctx:
                raise NameResolutionError(f"unbound name: {name!r}")
            return DVar(ctx.index(name))
        case NLet(name, bound, body):
            return DLet(resolve(bound, ctx), resolve(body, [name] + ctx))
        case NApp(head, arg):
            return DApp(head, resolve(arg, ctx))
        case NTuple(items):
            return DTuple(tuple(resolve(e, ctx) for e in items))
        case NLit(raw):
            return DLit(raw)
        case _:
            raise NameResolutionError(f"bad surface node: {nt!r}")


# ---------------------------------------------------------------------------
# Heads -> terms
# ---------------------------------------------------------------------------

_CORE_NULLARY: dict[str, Callable[[], Term]] = {
    "id": Id, "dup": Dup, "fst": Fst, "snd": Snd, "zip": Zip, "tp": Tp,
    "fuse": Fuse, "distr": Distr, "add": Plus, "plus": Plus,
}


def _static_index(arg):
    if isinstance(arg, int):
        return arg
    if isinstance(arg, HName):
        return arg.name
    raise TermTypeError(f"bad index argument: {arg!r}")


def _static_shape(arg, registry):
    if isinstance(arg, int):
        return registry.container("arr"), arg
    if isinstance(arg, tuple) and arg and arg[0] == "shape":
        cdef = registry.container(arg[1])
        return cdef, cdef.payload_from_text(arg[2])
    raise TermTypeError(f"bad shape argument: {arg!r}")


def head_to_term(head, arg_ty, registry: Registry) -> Term:
    """Elaborate a surface head against the actual argument type."""
    from .core import Shape
    match head:
        case HName(name):
            if name in _CORE_NULLARY:
                return _CORE_NULLARY[name]()
            if name in registry.ops:
                return OpCall(name)
            if name in registry.programs:
                term = registry.programs[name].build(arg_ty)
                if term is None:
                    raise TermTypeError(
                        f"program {name!r} does not accept input {arg_ty!r}")
                return term
            raise TermTypeError(f"unknown operation or program: {name!r}")
        case HApply(HName("map"), inner):
            if not isinstance(arg_ty, TCont):
                raise TermTypeError("map needs a container argument")
            return Map(head_to_term(inner, arg_ty.elem, registry))
        case HApply(HName("map2"), inner):
            ok = (isinstance(arg_ty, TProd) and isinstance(arg_ty.left, TCont)
                  and isinstance(arg_ty.right, TCont))
            if not ok:
                raise TermTypeError("map2 needs a pair of containers")
            elem_ty = TProd(arg_ty.left.elem, arg_ty.right.elem)
            return map2(head_to_term(inner, elem_ty, registry))
        case HApply(HName("replicate"), arg):
            cdef, payload = _static_shape(arg, registry)
            return Replicate(Shape(cdef, payload))
        case HApply(HName("get"), arg):
            return Get(_static_index(arg))
        case HApply(HName("set"), arg):
            return SetAt(_static_index(arg))
        case HApply(HName("filter"), HName(pname)):
            return Filter(pname)
        case HApply(HApply(HName("reshape"), HName(fname)), sarg):
            cdef, payload = _static_shape(sarg, registry)
            return Reshape(fname, Shape(cdef, payload))
        case _:
            raise TermTypeError(f"bad head: {head!r}")


# ---------------------------------------------------------------------------
# Lowering
# ---------------------------------------------------------------------------

def _context_product(tys):
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = TProd(t, out)
    return out


def _var_term(index: int, width: int) -> Term:
    """Projection chain for position `index` in a right-nested product."""
    if width == 1:
        return Id()
    parts = [Snd()] * index
    if index < width - 1:
        parts.append(Fst())
    return seq(*parts) if parts else Id()


def _literal(raw, literal_base, registry):
    if isinstance(raw, str):
        if "scalar" in registry.bases:
            return Cst(TBase(registry.bases["scalar"]), raw)
        raise TermTypeError("string literals need the scalar base")
    if literal_base.kind == "real":
        return Cst(TBase(literal_base), float(raw))
    if isinstance(raw, float):
        raise TermTypeError(f"non-integer literal {raw!r} for base {literal_base.tag}")
    return Cst(TBase(literal_base), raw)


def lower(dt, ctx_tys: list, registry: Registry, literal_base) -> tuple[Term, Any]:
    """Translate a resolved term into the point-free calculus.

    Returns (term, output type); the term's input is the right-nested
    product of ctx_tys.
    """
    in_ty = _context_product(ctx_tys)
    match dt:
        case DVar(index):
            return _var_term(index, len(ctx_tys)), ctx_tys[index]
        case DLet(bound, body):
            t1, ty1 = lower(bound, ctx_tys, registry, literal_base)
            t2, ty2 = lower(body, [ty1] + ctx_tys, registry, literal_base)
            return seq(Dup(), Par(t1, Id()), t2), ty2
        case DApp(head, arg):
            targ, arg_ty = lower(arg, ctx_tys, registry, literal_base)
            thead = head_to_term(head, arg_ty, registry)
            out_ty = typecheck(thead, arg_ty, registry).out_ty
            return seq(targ, thead), out_ty
        case DTuple(items):
            lowered = [lower(e, ctx_tys, registry, literal_base) for e in items]
            term, ty = lowered[-1]
            for t, t_ty in reversed(lowered[:-1]):
                term = fanout(t, term)
                ty = TProd(t_ty, ty)
            return term, ty
        case DLit(raw):
            cst = _literal(raw, literal_base, registry)
            return cst, cst.ty
        case _:
            raise TermTypeError(f"bad resolved node: {dt!r}")


# ---------------------------------------------------------------------------
# Program files
# ---------------------------------------------------------------------------

@dataclass
class SurfaceProgram:
    bundle_name: str
    params: tuple          # ((name, TypeExpr), ...)
    body: Any              # NamedTerm
    in_ty: Any

    @property
    def param_names(self):
        return [n for n, _ in self.params]

    @property
    def param_tys(self):
        return [t for _, t in self.params]


def parse_program_file(text: str, bundle_lookup=None):
    """Parse a program file; returns (bundle, SurfaceProgram)."""
    if bundle_lookup is None:
        from .domains import get_bundle
        bundle_lookup = get_bundle
    bundle_name = None
    params = []
    body_lines = []     # header lines kept blank so positions match the file
    in_body = False
    bundle = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("--", 1)[0].strip()
        if not in_body and not stripped:
            body_lines.append("")
            continue
        if not in_body and stripped.startswith("bundle "):
            bundle_name = stripped[len("bundle "):].strip()
            bundle = bundle_lookup(bundle_name)
            body_lines.append("")
            continue
        if not in_body and stripped.startswith("param "):
            if bundle is None:
                raise SurfaceSyntaxError("'param' before 'bundle'", lineno, 1)
            rest = stripped[len("param "):]
            if ":" not in rest:
                raise SurfaceSyntaxError("param needs 'name : type'", lineno, 1)
            name, ty_text = rest.split(":", 1)
            params.append((name.strip(), type_from_text(ty_text.strip(), bundle.registry)))
            body_lines.append("")
            continue
        in_body = True
        body_lines.append(line.split("--", 1)[0])
    if bundle is None:
        raise SurfaceSyntaxError("missing 'bundle' header", 1, 1)
    if not params:
        raise SurfaceSyntaxError("missing 'param' declarations", 1, 1)
    body = parse_expr_text("\n".join(body_lines))
    prog = SurfaceProgram(
        bundle_name=bundle_name,
        params=tuple(params),
        body=body,
        in_ty=_context_product([t for _, t in params]),
    )
    return bundle, prog


def compile_program(prog: SurfaceProgram, registry: Registry, literal_base) -> TypedTerm:
    dt = resolve(prog.body, prog.param_names)
    term, _ = lower(dt, prog.param_tys, registry, literal_base)
    return typecheck(term, prog.in_ty, registry)


# ---------------------------------------------------------------------------
# Reference environment-passing evaluator (the lowering oracle)
# ---------------------------------------------------------------------------

def eval_named(nt, env: dict, registry: Registry, literal_base):
    """Direct interpreter over (type, value) environments."""
    match nt:
        case NVar(name):
            if name not in env:
                raise NameResolutionError(f"unbound name: {name!r}")
            return env[name]
        case NLet(name, bound, body):
            tv = eval_named(bound, env, registry, literal_base)
            return eval_named(body, {**env, name: tv}, registry, literal_base)
        case NApp(head, arg):
            arg_ty, arg_v = eval_named(arg, env, registry, literal_base)
            thead = head_to_term(head, arg_ty, registry)
            tt = typecheck(thead, arg_ty, registry)
            return tt.out_ty, denote(tt, arg_v)
        case NTuple(items):
            parts = [eval_named(e, env, registry, literal_base) for e in items]
            ty, v = parts[-1]
            for pty, pv in reversed(parts[:-1]):
                ty, v = TProd(pty, ty), (pv, v)
            return ty, v
        case NLit(raw):
            cst = _literal(raw, literal_base, registry)
            return cst.ty, cst.value
        case _:
            raise NameResolutionError(f"bad surface node: {nt!r}")
