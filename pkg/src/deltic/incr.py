"""Cached incrementalization: combinators, term transformation, iteration.

An IncrMachine is the executable meaning of cached incrementalization: a
cache descriptor, an initializer x -> (f x, cache), and a step
(change, cache) -> (output change, cache) forming a Mealy-style transducer.
Machines are stateless (the cache is threaded by the caller), but step may
update cache dictionaries in place, so a cache must never be reused after
being passed to step.

The laws every machine satisfies (checked by the oracle module, not assumed):

  Law-1   init(x).value  == f(x)
  Law-2   f(x ⊕ dx)      == f(x) ⊕ step(dx, init(x).cache).change
  Law-3   step(dx, init(x).cache).cache  ~  init(x ⊕ dx).cache
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import calculus as ca
from .core import (
    SUM_NULL, Cl, Cr, Left, Right, Sl, Sr, SupportError, TBase, TCont, TProd, TSum,
    UsageError, add_fn, add_values, apply_change, apply_fn, default_value,
    diff_fn, diff_values, is_nil, is_nil_fn, nil_change, plus_capable,
    values_are_changes, values_equal, index_sort_key,
)
from .serialize import index_to_json, value_to_json


class _Unit:
    __slots__ = ()

    def __repr__(self):
        return "UNIT"


UNIT = _Unit()


# ---------------------------------------------------------------------------
# Cache descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CUnit:
    pass


@dataclass(frozen=True)
class CPair:
    left: Any
    right: Any


@dataclass(frozen=True)
class CValue:
    """Cache holding a plain value of the given object type."""
    ty: Any


@dataclass(frozen=True)
class CIndexed:
    """Per-index sub-caches with a lazily instantiable default entry.

    Indices absent from the runtime dict are logically make_default();
    equality and serialization treat them that way.
    """
    shape: Any
    elem: Any
    make_default: Callable[[], Any]


@dataclass(frozen=True)
class CCase:
    """Branch cache of case: (sub-cache, previous output) on the live side."""
    left: Any
    left_out: Any
    right: Any
    right_out: Any


@dataclass(frozen=True)
class COpaque:
    name: str
    to_json: Optional[Callable[[Any], Any]] = None
    equal: Optional[Callable[[Any, Any, float], bool]] = None
    count: Optional[Callable[[Any], int]] = None


def cache_equal(desc, c1, c2, rel_tol=0.0) -> bool:
    match desc:
        case CUnit():
            return True
        case CPair(left, right):
            return cache_equal(left, c1[0], c2[0], rel_tol) and cache_equal(right, c1[1], c2[1], rel_tol)
        case CValue(ty):
            return values_equal(ty, c1, c2, rel_tol)
        case CIndexed(_, elem, make_default):
            keys = c1.keys() | c2.keys()
            for k in keys:
                e1 = c1[k] if k in c1 else make_default()
                e2 = c2[k] if k in c2 else make_default()
                if not cache_equal(elem, e1, e2, rel_tol):
                    return False
            return True
        case CCase(left, left_out, right, right_out):
            if type(c1) is not type(c2):
                return False
            sub, out_ty = (left, left_out) if type(c1) is Left else (right, right_out)
            return (cache_equal(sub, c1.value[0], c2.value[0], rel_tol)
                    and values_equal(out_ty, c1.value[1], c2.value[1], rel_tol))
        case COpaque():
            return desc.equal(c1, c2, rel_tol) if desc.equal else c1 == c2
        case _:
            raise UsageError(f"not a cache descriptor: {desc!r}")


def cache_to_json(desc, c):
    """Canonical debug serialization (sorted, default entries elided)."""
    match desc:
        case CUnit():
            return "unit"
        case CPair(left, right):
            return [cache_to_json(left, c[0]), cache_to_json(right, c[1])]
        case CValue(ty):
            return {"value": value_to_json(ty, c)}
        case CIndexed(_, elem, make_default):
            dft = make_default()
            entries = []
            for k in sorted(c.keys(), key=index_sort_key):
                if not cache_equal(elem, c[k], dft, 0.0):
                    entries.append([index_to_json(k), cache_to_json(elem, c[k])])
            return {"indexed": entries}
        case CCase(left, left_out, right, right_out):
            if type(c) is Left:
                return {"case_left": [cache_to_json(left, c.value[0]),
                                      value_to_json(left_out, c.value[1])]}
            return {"case_right": [cache_to_json(right, c.value[0]),
                                   value_to_json(right_out, c.value[1])]}
        case COpaque(name):
            return {"opaque": desc.to_json(c) if desc.to_json else repr(c)}
        case _:
            raise UsageError(f"not a cache descriptor: {desc!r}")


def descriptor_is_unit(desc) -> bool:
    match desc:
        case CUnit():
            return True
        case CPair(left, right):
            return descriptor_is_unit(left) and descriptor_is_unit(right)
        case _:
            return False


def _value_scalar_count(ty, v) -> int:
    match ty:
        case TBase():
            return 1
        case TCont(_, elem):
            return sum(_value_scalar_count(elem, ev) for ev in v.values())
        case TProd(a, b):
            return _value_scalar_count(a, v[0]) + _value_scalar_count(b, v[1])
        case TSum(a, b):
            return _value_scalar_count(a if type(v) is Left else b, v.value)
        case _:
            raise UsageError(f"not a type: {ty!r}")


def cache_entry_count(desc, c) -> int:
    """Number of scalar payload entries held by a cache."""
    match desc:
        case CUnit():
            return 0
        case CPair(left, right):
            return cache_entry_count(left, c[0]) + cache_entry_count(right, c[1])
        case CValue(ty):
            return _value_scalar_count(ty, c)
        case CIndexed(_, elem, _):
            return sum(cache_entry_count(elem, sub) for sub in c.values())
        case CCase(left, left_out, right, right_out):
            sub, out_ty = (left, left_out) if type(c) is Left else (right, right_out)
            return cache_entry_count(sub, c.value[0]) + _value_scalar_count(out_ty, c.value[1])
        case COpaque():
            return desc.count(c) if desc.count else 0
        case _:
            raise UsageError(f"not a cache descriptor: {desc!r}")


# ---------------------------------------------------------------------------
# Machines and combinators
# ---------------------------------------------------------------------------

@dataclass
class IncrMachine:
    in_ty: Any
    out_ty: Any
    cache: Any
    init: Callable[[Any], tuple]
    step: Callable[[Any, Any], tuple]


def comb_triv(fn, in_ty, out_ty) -> IncrMachine:
    """Trivial incrementalization: cache the input, reevaluate on change."""
    ap = apply_fn(in_ty)
    df = diff_fn(out_ty)

    def init(x):
        return fn(x), x

    def step(dx, x):
        x2 = ap(x, dx)
        return df(fn(x2), fn(x)), x2

    return IncrMachine(in_ty, out_ty, CValue(in_ty), init, step)


def comb_triv2(fn, in_ty, out_ty) -> IncrMachine:
    """Like Triv but caches the output too, so fn runs once per step."""
    ap = apply_fn(in_ty)
    df = diff_fn(out_ty)

    def init(x):
        y = fn(x)
        return y, (x, y)

    def step(dx, c):
        x, y1 = c
        x2 = ap(x, dx)
        y2 = fn(x2)
        return df(y2, y1), (x2, y2)

    return IncrMachine(in_ty, out_ty, CPair(CValue(in_ty), CValue(out_ty)), init, step)


def comb_self(fn, dfn, in_ty, out_ty) -> IncrMachine:
    """Self-maintainable incrementalization: no cache, derivative dfn.

    Caller guarantees f(x ⊕ dx) = f(x) ⊕ dfn(dx); the oracle samples it.
    """
    def init(x):
        return fn(x), UNIT

    def step(dx, _c):
        return dfn(dx), UNIT

    return IncrMachine(in_ty, out_ty, CUnit(), init, step)


def comb_lin(fn, in_ty, out_ty) -> IncrMachine:
    """A linear function is its own derivative; needs values = changes."""
    if not (values_are_changes(in_ty) and values_are_changes(out_ty)):
        raise ca.TermTypeError(
            f"Lin needs values=changes on {in_ty!r} and {out_ty!r}")
    return comb_self(fn, fn, in_ty, out_ty)


def comb_bilin(fn, in_ty, out_ty) -> IncrMachine:
    """Bilinear binary function; caches both inputs.

    step((dx, dy), (x, y)) emits f(dx,dy) ⊕ f(dx,y) ⊕ f(x,dy); nil sides are
    skipped, which is sound exactly because f is (bi)linear.
    """
    if not isinstance(in_ty, TProd):
        raise ca.TermTypeError("BiLin needs a product input type")
    a_ty, b_ty = in_ty.left, in_ty.right
    if not (values_are_changes(a_ty) and values_are_changes(b_ty)):
        raise ca.TermTypeError("BiLin needs values=changes argument types")
    if not plus_capable(out_ty):
        raise ca.TermTypeError("BiLin needs a commutative/associative ⊕ on the output")

    nil_a = is_nil_fn(a_ty)
    nil_b = is_nil_fn(b_ty)
    add_c = add_fn(out_ty)
    ap_a = apply_fn(a_ty)
    ap_b = apply_fn(b_ty)

    def init(xy):
        return fn(xy), xy

    def step(d, c):
        dx, dy = d
        x, y = c
        nx = nil_a(dx)
        ny = nil_b(dy)
        out = nil_change(out_ty)
        if not nx and not ny:
            out = add_c(out, fn((dx, dy)))
        if not nx:
            out = add_c(out, fn((dx, y)))
        if not ny:
            out = add_c(out, fn((x, dy)))
        x2 = x if nx else ap_a(x, dx)
        y2 = y if ny else ap_b(y, dy)
        return out, (x2, y2)

    return IncrMachine(in_ty, out_ty, CValue(in_ty), init, step)


def comb_add(ty) -> IncrMachine:
    """⊕ as an operation; its own derivative when commutative/associative."""
    if not plus_capable(ty):
        raise ca.TermTypeError(f"Add needs a commutative/associative ⊕ on {ty!r}")
    in_ty = TProd(ty, ty)
    addf = add_fn(ty)
    nilf = is_nil_fn(ty)

    def init(xy):
        return addf(xy[0], xy[1]), UNIT

    def step(d, _c):
        dx, dy = d
        if nilf(dx):
            return dy, UNIT
        if nilf(dy):
            return dx, UNIT
        return addf(dx, dy), UNIT

    return IncrMachine(in_ty, ty, CUnit(), init, step)


# ---------------------------------------------------------------------------
# Incrementalization of terms
# ---------------------------------------------------------------------------

def _self_machine(tt, dfn):
    return comb_self(ca.compiled(tt), dfn, tt.in_ty, tt.out_ty)


def _incr_id(tt):
    return _self_machine(tt, lambda d: d)


def _incr_dup(tt):
    return _self_machine(tt, lambda d: (d, d))


def _incr_fst(tt):
    return _self_machine(tt, lambda d: d[0])


def _incr_snd(tt):
    return _self_machine(tt, lambda d: d[1])


def _incr_cst(tt):
    out_ty = tt.out_ty
    return _self_machine(tt, lambda _d: nil_change(out_ty))


def _incr_plus(tt):
    return comb_add(tt.out_ty)


def _incr_zip(tt):
    na = nil_change(tt.in_ty.left.elem)
    nb = nil_change(tt.in_ty.right.elem)

    def dz(d):
        dx, dy = d
        return {i: (dx.get(i, na), dy.get(i, nb)) for i in dx.keys() | dy.keys()}

    return _self_machine(tt, dz)


def _incr_get(tt):
    elem = tt.out_ty
    i = tt.term.index

    def dg(d):
        return d[i] if i in d else nil_change(elem)

    return _self_machine(tt, dg)


def _incr_set(tt):
    elem = tt.in_ty.left
    i = tt.term.index

    def ds(d):
        dv, da = d
        out = dict(da)
        if is_nil(elem, dv):
            out.pop(i, None)
        else:
            out[i] = dv
        return out

    return _self_machine(tt, ds)


def _incr_tp(tt):
    def dt(d):
        out = {}
        for j, row in d.items():
            for i, di in row.items():
                out.setdefault(i, {})[j] = di
        return out

    return _self_machine(tt, dt)


def _incr_reshape(tt):
    ifn = tt.info
    r = ifn.fn
    out_shape = tt.out_ty.shape
    indices = out_shape.indices()
    if indices is not None:
        inv = {}
        for j in indices:
            inv.setdefault(r(j), []).append(j)

        def dr(d):
            out = {}
            for i, di in d.items():
                for j in inv.get(i, ()):
                    out[j] = di
            return out
    else:
        fibers = ifn.fibers

        def dr(d):
            if not d:
                return {}
            if fibers is None:
                raise SupportError(
                    f"reshape {ifn.name!r} over {out_shape!r} needs registered fibers")
            out = {}
            for i, di in d.items():
                for j in fibers(i):
                    out[j] = di
            return out

    return _self_machine(tt, dr)


def _incr_replicate(tt):
    shape = tt.out_ty.shape
    in_ty = tt.in_ty

    def drep(d):
        if is_nil(in_ty, d):
            return {}
        indices = shape.indices()
        if indices is None:
            raise SupportError(
                f"replicate of a non-nil change over {shape!r} has infinite support")
        return {i: d for i in indices}

    return _self_machine(tt, drep)


def _incr_filter(tt):
    p = tt.info.fn
    elem = tt.in_ty.left
    shape = tt.out_ty.shape
    nil_e = nil_change(elem)

    def dfil(d):
        dv, da = d
        if is_nil(elem, dv):
            return {i: di for i, di in da.items() if p(i)}
        indices = shape.indices()
        if indices is None:
            raise SupportError(
                f"filter with a non-nil fallback change over {shape!r} has infinite support")
        out = {}
        for i in indices:
            di = da.get(i, nil_e) if p(i) else dv
            if not is_nil(elem, di):
                out[i] = di
        return out

    return _self_machine(tt, dfil)


def _incr_inl(tt):
    return _self_machine(tt, lambda d: Cl(d))


def _incr_inr(tt):
    return _self_machine(tt, lambda d: Cr(d))


def _incr_seq(tt):
    mf = incrementalize(tt.children[0])
    mg = incrementalize(tt.children[1])
    if descriptor_is_unit(mf.cache) and descriptor_is_unit(mg.cache):
        f_init, g_init = mf.init, mg.init
        f_step, g_step = mf.step, mg.step

        def init(x):
            y, _ = f_init(x)
            z, _ = g_init(y)
            return z, UNIT

        def step(dx, _c):
            dy, _ = f_step(dx, UNIT)
            dz, _ = g_step(dy, UNIT)
            return dz, UNIT

        return IncrMachine(tt.in_ty, tt.out_ty, CUnit(), init, step)

    f_init, g_init = mf.init, mg.init
    f_step, g_step = mf.step, mg.step

    def init(x):
        y, c1 = f_init(x)
        z, c2 = g_init(y)
        return z, (c1, c2)

    def step(dx, c):
        dy, c1 = f_step(dx, c[0])
        dz, c2 = g_step(dy, c[1])
        return dz, (c1, c2)

    return IncrMachine(tt.in_ty, tt.out_ty, CPair(mf.cache, mg.cache), init, step)


def _incr_par(tt):
    mf = incrementalize(tt.children[0])
    mg = incrementalize(tt.children[1])
    f_init, g_init = mf.init, mg.init
    f_step, g_step = mf.step, mg.step
    if descriptor_is_unit(mf.cache) and descriptor_is_unit(mg.cache):
        def init(xy):
            y1, _ = f_init(xy[0])
            y2, _ = g_init(xy[1])
            return (y1, y2), UNIT

        def step(d, _c):
            d1, _ = f_step(d[0], UNIT)
            d2, _ = g_step(d[1], UNIT)
            return (d1, d2), UNIT

        return IncrMachine(tt.in_ty, tt.out_ty, CUnit(), init, step)

    def init(xy):
        y1, c1 = f_init(xy[0])
        y2, c2 = g_init(xy[1])
        return (y1, y2), (c1, c2)

    def step(d, c):
        d1, c1 = f_step(d[0], c[0])
        d2, c2 = g_step(d[1], c[1])
        return (d1, d2), (c1, c2)

    return IncrMachine(tt.in_ty, tt.out_ty, CPair(mf.cache, mg.cache), init, step)


def _incr_map(tt):
    body = tt.children[0]
    mf = incrementalize(body)
    shape = tt.in_ty.shape
    elem_in = tt.in_ty.elem
    elem_out = body.out_ty
    f_init, f_step = mf.init, mf.step
    din = default_value(elem_in)
    dout = default_value(elem_out)

    out_nil = is_nil_fn(body.out_ty)
    if descriptor_is_unit(mf.cache):
        batch = ca.map_batch(shape, elem_in, elem_out, lambda v: f_init(v)[0])

        def init(x):
            return batch(x), UNIT

        def step(dx, _c):
            out = {}
            for i, di in dx.items():
                dy, _ = f_step(di, UNIT)
                if not out_nil(dy):
                    out[i] = dy
            return out, UNIT

        return IncrMachine(tt.in_ty, tt.out_ty, CUnit(), init, step)

    def make_default():
        return f_init(default_value(elem_in))[1]

    def init(x):
        fe, _ = f_init(din)
        out = {}
        caches = {}
        if fe == dout:
            for i, xi in x.items():
                y, c = f_init(xi)
                caches[i] = c
                if y != dout:
                    out[i] = y
            return out, caches
        indices = shape.indices()
        if indices is None:
            raise SupportError(
                f"map over {shape!r} needs f(ε)=ε for an infinite index set")
        for i in indices:
            y, c = f_init(x.get(i, din))
            caches[i] = c
            if y != dout:
                out[i] = y
        return out, caches

    def step(dx, c):
        out = {}
        for i, di in dx.items():
            sub = c[i] if i in c else make_default()
            dy, sub2 = f_step(di, sub)
            c[i] = sub2
            if not out_nil(dy):
                out[i] = dy
        return out, c

    desc = CIndexed(shape, mf.cache, make_default)
    return IncrMachine(tt.in_ty, tt.out_ty, desc, init, step)


def _incr_fuse(tt):
    a_ty = tt.out_ty

    def init(s):
        return s.value, s

    def step(d, c):
        on_left = type(c) is Left
        x = c.value
        if d is SUM_NULL:
            return diff_values(a_ty, x, x), c
        match d:
            case Cl(change=dc):
                if on_left:
                    return dc, Left(apply_change(a_ty, x, dc))
                return diff_values(a_ty, x, x), c
            case Cr(change=dc):
                if on_left:
                    return diff_values(a_ty, x, x), c
                return dc, Right(apply_change(a_ty, x, dc))
            case Sl(value=v):
                return diff_values(a_ty, v, x), Left(v)
            case Sr(value=v):
                return diff_values(a_ty, v, x), Right(v)
        raise UsageError(f"bad sum change {d!r}")

    return IncrMachine(tt.in_ty, tt.out_ty, CValue(TSum(a_ty, a_ty)), init, step)


def _incr_distr(tt):
    a_ty = tt.in_ty.left
    b_ty = tt.in_ty.right.left
    c_ty = tt.in_ty.right.right

    def init(xs):
        x, s = xs
        out = Left((x, s.value)) if type(s) is Left else Right((x, s.value))
        return out, xs

    def step(d, cache):
        dx, ds = d
        x, s = cache
        x2 = apply_change(a_ty, x, dx)
        on_left = type(s) is Left
        y = s.value
        if ds is SUM_NULL:
            if on_left:
                return Cl((dx, diff_values(b_ty, y, y))), (x2, s)
            return Cr((dx, diff_values(c_ty, y, y))), (x2, s)
        match ds:
            case Cl(change=dy):
                if on_left:
                    return Cl((dx, dy)), (x2, Left(apply_change(b_ty, y, dy)))
                return Cr((dx, diff_values(c_ty, y, y))), (x2, s)
            case Cr(change=dz):
                if on_left:
                    return Cl((dx, diff_values(b_ty, y, y))), (x2, s)
                return Cr((dx, dz)), (x2, Right(apply_change(c_ty, y, dz)))
            case Sl(value=v):
                return Sl((x2, v)), (x2, Left(v))
            case Sr(value=v):
                return Sr((x2, v)), (x2, Right(v))
        raise UsageError(f"bad sum change {ds!r}")

    return IncrMachine(tt.in_ty, tt.out_ty, CValue(tt.in_ty), init, step)


def _incr_case(tt):
    mf = incrementalize(tt.children[0])
    mg = incrementalize(tt.children[1])
    b1 = tt.children[0].out_ty
    b2 = tt.children[1].out_ty

    def init(s):
        if type(s) is Left:
            y, c = mf.init(s.value)
            return Left(y), Left((c, y))
        y, c = mg.init(s.value)
        return Right(y), Right((c, y))

    def step(d, cc):
        on_left = type(cc) is Left
        if d is SUM_NULL:
            return SUM_NULL, cc
        match d:
            case Cl(change=dx):
                if not on_left:
                    return SUM_NULL, cc
                c, y = cc.value
                dy, c2 = mf.step(dx, c)
                return Cl(dy), Left((c2, apply_change(b1, y, dy)))
            case Cr(change=dx):
                if on_left:
                    return SUM_NULL, cc
                c, y = cc.value
                dy, c2 = mg.step(dx, c)
                return Cr(dy), Right((c2, apply_change(b2, y, dy)))
            case Sl(value=v):
                y, c2 = mf.init(v)
                if on_left:
                    y0 = cc.value[1]
                    return Cl(diff_values(b1, y, y0)), Left((c2, y))
                return Sl(y), Left((c2, y))
            case Sr(value=v):
                y, c2 = mg.init(v)
                if on_left:
                    return Sr(y), Right((c2, y))
                y0 = cc.value[1]
                return Cr(diff_values(b2, y, y0)), Right((c2, y))
        raise UsageError(f"bad sum change {d!r}")

    desc = CCase(mf.cache, b1, mg.cache, b2)
    return IncrMachine(tt.in_ty, tt.out_ty, desc, init, step)


def _incr_op(tt):
    return tt.info.make_machine(tt.in_ty, tt.out_ty)


_BUILDERS = {
    ca.Id: _incr_id,
    ca.Dup: _incr_dup,
    ca.Fst: _incr_fst,
    ca.Snd: _incr_snd,
    ca.Cst: _incr_cst,
    ca.Plus: _incr_plus,
    ca.Zip: _incr_zip,
    ca.Get: _incr_get,
    ca.SetAt: _incr_set,
    ca.Tp: _incr_tp,
    ca.Reshape: _incr_reshape,
    ca.Replicate: _incr_replicate,
    ca.Filter: _incr_filter,
    ca.Inl: _incr_inl,
    ca.Inr: _incr_inr,
    ca.Seq: _incr_seq,
    ca.Par: _incr_par,
    ca.Map: _incr_map,
    ca.Fuse: _incr_fuse,
    ca.Distr: _incr_distr,
    ca.CasePar: _incr_case,
    ca.OpCall: _incr_op,
}


def incrementalize(tt: ca.TypedTerm) -> IncrMachine:
    """Build the cached incrementalization of a typechecked term."""
    builder = _BUILDERS.get(type(tt.term))
    if builder is None:
        raise UsageError(f"no incrementalization for {tt.term!r}")
    return builder(tt)


# ---------------------------------------------------------------------------
# Iterated updates
# ---------------------------------------------------------------------------

def sum_changes(ty, x, ds):
    """Fold a change list into a value, back to front (head applied last)."""
    for d in reversed(ds):
        x = apply_change(ty, x, d)
    return x


def iter_changes(m: IncrMachine, x, ds):
    """Initialize on x, then step through ds back to front, accumulating.

    Returns (final output value, final cache); the first component equals the
    batch result on sum_changes(x, ds) for any law-abiding machine.
    """
    y, c = m.init(x)
    ap = apply_fn(m.out_ty)
    for d in reversed(ds):
        dy, c = m.step(d, c)
        y = ap(y, dy)
    return y, c
