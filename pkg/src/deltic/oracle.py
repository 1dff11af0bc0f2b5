"""Randomized law checking: the executable stand-in for mechanized proofs.

Everything here is reproducible from (seed, check name): generators draw from
a Random seeded by a stable digest, and reports carry no non-deterministic
content.  Failures are reported with full (x, dx) witnesses, never raised.

The five documented fault injections (for mutation-sensitivity testing):

  triv-stale-cache       Triv step returns the old cache         -> Law-3
  swap-fst-snd           fst's derivative projects the other leg -> Law-2
  seq-drop-propagation   seq's derivative feeds g a nil change   -> Law-2
  bilin-missing-term     BiLin drops the f(x, dy) cross term     -> Law-2
  debruijn-off-by-one    variable lowering shifts every index    -> lowering
"""

from __future__ import annotations

import hashlib
import random
from contextlib import contextmanager
from dataclasses import dataclass, field
from . import calculus as ca
from . import frontend as fe
from . import incr
from .core import (
    DelticError, INT, KEEP, NAT, REAL, SCALAR, Cl, Cr, Left, Right, Sl, Sr,
    SUM_NULL, SupportError, TBase, TCont, TProd, TSum, apply_change,
    default_value, diff_values, is_nil, nil_change, plus_capable, values_equal,
)
from .domains.containers import (
    ARRAY, RELATION, TREE, arr, arr_shape, dict_shape, rel_shape, tree_shape,
)
from .serialize import change_to_text, value_to_text

R = TBase(REAL)
Z = TBase(INT)
N = TBase(NAT)
S = TBase(SCALAR)


class GenerationFailure(DelticError):
    """No artifact satisfying the request could be generated."""


@dataclass
class GenConfig:
    """Knobs for reproducible generation.

    Random terms draw base types from `bases`; nat stays out of the default
    because branch-switch changes (sl/sr) force ⊖ on cached values, and the
    truncated natural difference is only complete on monotone pairs.  nat
    constructs are exercised by dedicated samplers over sum-free types.
    """

    seed: int = 20240901
    max_term_size: int = 12
    max_shape: int = 4
    max_changes: int = 5
    bases: tuple = ("real", "int")
    tol_real: float = 1e-9
    tol_iter: float = 1e-6


def stable_rng(seed, label: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass
class CheckReport:
    name: str
    seed: int
    samples: int
    passed: bool
    failures: list = field(default_factory=list)

    def to_json(self):
        return {
            "check": self.name,
            "seed": self.seed,
            "samples": self.samples,
            "passed": self.passed,
            "failures": self.failures[:3],
        }


def _witness(**kv):
    return {k: v for k, v in kv.items()}


def _show_value(ty, v):
    try:
        return value_to_text(ty, v)
    except Exception:
        return repr(v)


def _show_change(ty, d):
    try:
        return change_to_text(ty, d)
    except Exception:
        return repr(d)


# ---------------------------------------------------------------------------
# Value / change / type generators
# ---------------------------------------------------------------------------

_WORDS = ("a", "b", "c", "x", "y", "tok", "key", "addison")
_STEPS = ("title", "year", "n", "k")


def gen_index(rng: random.Random, shape):
    cid = shape.container.id
    p = shape.payload
    if cid == "arr":
        if p <= 0:
            raise GenerationFailure("no indices in an empty array")
        return rng.randrange(p)
    if cid == "rel":
        def tup(s):
            if s == "int":
                return rng.randint(-5, 5)
            if s == "str":
                return rng.choice(_WORDS)
            return (tup(s[0]), tup(s[1]))
        return tup(p)
    if cid == "dict":
        if p == "str":
            return rng.choice(_WORDS)
        if p == "nat":
            return rng.randint(0, 6)
        if p == "int":
            return rng.randint(-6, 6)
        return rng.choice([rng.randint(0, 6), rng.choice(_WORDS)])
    if cid == "tree":
        depth = rng.randint(1, 3)
        return tuple(
            rng.choice(_STEPS) if rng.random() < 0.7 else rng.randint(0, 2)
            for _ in range(depth))
    if cid == "nodes":
        return rng.choice(p)
    raise GenerationFailure(f"no index generator for container {cid!r}")


def gen_scalar(rng, base, nonzero=False):
    for _ in range(20):
        if base.kind == "real":
            v = round(rng.uniform(-8.0, 8.0), 3)
        elif base.kind == "int":
            v = rng.randint(-8, 8)
        elif base.kind == "nat":
            v = rng.randint(0, 8)
        else:
            v = rng.choice([None, rng.choice(_WORDS), rng.randint(0, 2200),
                            round(rng.uniform(0, 200), 2)])
        if not nonzero or v != base.default:
            return v
    raise GenerationFailure(f"could not draw a non-default {base.tag}")


def gen_value(rng: random.Random, ty):
    match ty:
        case TBase(base):
            return gen_scalar(rng, base)
        case TCont(shape, elem):
            indices = shape.indices()
            out = {}
            if indices is not None:
                k = rng.randint(0, len(indices))
                chosen = rng.sample(indices, k)
            else:
                chosen = {gen_index(rng, shape) for _ in range(rng.randint(0, 4))}
            dft = default_value(elem)
            for i in chosen:
                for _ in range(5):
                    v = gen_value(rng, elem)
                    if v != dft:
                        out[i] = v
                        break
            return out
        case TProd(a, b):
            return (gen_value(rng, a), gen_value(rng, b))
        case TSum(a, b):
            if rng.random() < 0.5:
                return Left(gen_value(rng, a))
            return Right(gen_value(rng, b))
        case _:
            raise GenerationFailure(f"not a type: {ty!r}")


def gen_base_change(rng, base, nonnil=False):
    for _ in range(20):
        if base.kind == "real":
            d = round(rng.uniform(-4.0, 4.0), 3)
        elif base.kind == "int":
            d = rng.randint(-4, 4)
        elif base.kind == "nat":
            d = rng.randint(0, 4)
        else:
            d = KEEP if rng.random() < 0.3 else rng.choice(
                [None, rng.choice(_WORDS), rng.randint(0, 2200)])
        if not nonnil or not is_nil(TBase(base), d):
            return d
    raise GenerationFailure(f"could not draw a non-nil {base.tag} change")


def gen_change(rng: random.Random, ty, nonnil=False, monotone=False):
    """Random change; monotone=True keeps sum values on their side (no sl/sr),
    so applying it can never decrease a natural leaf that ⊖ later compares."""
    match ty:
        case TBase(base):
            return gen_base_change(rng, base, nonnil)
        case TCont(shape, elem):
            indices = shape.indices()
            if indices is not None:
                k = rng.randint(1 if nonnil and indices else 0, len(indices))
                chosen = rng.sample(indices, k) if indices else []
            else:
                lo = 1 if nonnil else 0
                chosen = list({gen_index(rng, shape) for _ in range(rng.randint(lo, 3))})
            out = {}
            for i in chosen:
                di = gen_change(rng, elem, nonnil=True, monotone=monotone)
                if not is_nil(elem, di):
                    out[i] = di
            return out
        case TProd(a, b):
            return (gen_change(rng, a, nonnil, monotone),
                    gen_change(rng, b, False, monotone))
        case TSum(a, b):
            roll = rng.random()
            if monotone:
                if roll < 0.45:
                    return Cl(gen_change(rng, a, monotone=True))
                if roll < 0.9:
                    return Cr(gen_change(rng, b, monotone=True))
                return SUM_NULL
            if roll < 0.3:
                return Cl(gen_change(rng, a))
            if roll < 0.6:
                return Cr(gen_change(rng, b))
            if roll < 0.75:
                return Sl(gen_value(rng, a))
            if roll < 0.9:
                return Sr(gen_value(rng, b))
            return SUM_NULL
        case _:
            raise GenerationFailure(f"not a type: {ty!r}")


_BASE_BY_TAG = {"real": R, "int": Z, "nat": N, "scalar": S}


def gen_type(cfg: GenConfig, rng: random.Random, depth=3, containers=("arr",),
             bases=None):
    """Random object type over the four formers; arrays unless told otherwise."""
    bases = bases or cfg.bases
    choices = ["base"]
    if depth > 0:
        choices += ["cont", "prod", "sum"]
    kind = rng.choice(choices)
    if kind == "base":
        return _BASE_BY_TAG[rng.choice(bases)]
    if kind == "cont":
        cid = rng.choice(containers)
        elem = gen_type(cfg, rng, depth - 1, containers, bases)
        if cid == "arr":
            return TCont(arr_shape(rng.randint(0, cfg.max_shape)), elem)
        if cid == "rel":
            return TCont(rel_shape(rng.choice(["int", "str", ("int", "str")])), elem)
        if cid == "dict":
            return TCont(dict_shape(rng.choice(["int", "str", "nat"])), elem)
        if cid == "tree":
            return TCont(tree_shape(), elem)
        raise GenerationFailure(f"no generator for container {cid!r}")
    a = gen_type(cfg, rng, depth - 1, containers, bases)
    b = gen_type(cfg, rng, depth - 1, containers, bases)
    return TProd(a, b) if kind == "prod" else TSum(a, b)


def reachable_pair(rng, ty):
    """(x, y) with y above x along side-preserving changes; ⊖-safe on naturals."""
    x = gen_value(rng, ty)
    y = apply_change(ty, x, gen_change(rng, ty, monotone=True))
    if rng.random() < 0.3:
        y = apply_change(ty, y, gen_change(rng, ty, monotone=True))
    return x, y


def _contains_nat(ty):
    match ty:
        case TBase(base):
            return base.kind == "nat"
        case TCont(_, elem):
            return _contains_nat(elem)
        case TProd(a, b) | TSum(a, b):
            return _contains_nat(a) or _contains_nat(b)
    return False


# ---------------------------------------------------------------------------
# The oracle's own op registry (exercises every combinator inside terms)
# ---------------------------------------------------------------------------

def _shift5(x):
    return x + 5.0


def _scalar_mul(xy):
    return xy[0] * xy[1]


def _int_mul(xy):
    return xy[0] * xy[1]


def _int_sub(xy):
    return xy[0] - xy[1]


def _int_neg(x):
    return -x


def _nat_dbl(x):
    return 2 * x


def _nat_max(xy):
    return xy[0] if xy[0] >= xy[1] else xy[1]


def _relu(x):
    return x if x > 0 else 0.0


def _fsum(v):
    return float(sum(v.values()))


def _isum(v):
    return sum(v.values())


def oracle_registry() -> ca.Registry:
    """Arrays over real/int/nat plus ops built with all six combinators."""
    reg = ca.Registry()
    for b in (REAL, INT, NAT):
        reg.register_base(b)
    reg.register_container(ARRAY)

    def vec_typer(base_ty):
        def typer(ty):
            if (isinstance(ty, TCont) and ty.shape.container is ARRAY
                    and ty.elem == base_ty):
                return base_ty
            return None
        return typer

    mk = reg.register_op
    mk(ca.OpDef("o_relu", ca.monomorphic(R, R), _relu,
                lambda i, o: incr.comb_triv2(_relu, i, o), (R,)))
    mk(ca.OpDef("o_shift5", ca.monomorphic(R, R), _shift5,
                lambda i, o: incr.comb_self(_shift5, lambda d: d, i, o), (R,)))
    mk(ca.OpDef("o_mul", ca.monomorphic(TProd(R, R), R), _scalar_mul,
                lambda i, o: incr.comb_triv(_scalar_mul, i, o), (TProd(R, R),)))
    mk(ca.OpDef("o_bmul", ca.monomorphic(TProd(R, R), R), _scalar_mul,
                lambda i, o: incr.comb_bilin(_scalar_mul, i, o), (TProd(R, R),)))
    mk(ca.OpDef("o_sum", vec_typer(R), _fsum,
                lambda i, o: incr.comb_lin(_fsum, i, o), (arr(3, R),)))
    mk(ca.OpDef("o_imul", ca.monomorphic(TProd(Z, Z), Z), _int_mul,
                lambda i, o: incr.comb_triv(_int_mul, i, o), (TProd(Z, Z),)))
    mk(ca.OpDef("o_ibmul", ca.monomorphic(TProd(Z, Z), Z), _int_mul,
                lambda i, o: incr.comb_bilin(_int_mul, i, o), (TProd(Z, Z),)))
    mk(ca.OpDef("o_isub", ca.monomorphic(TProd(Z, Z), Z), _int_sub,
                lambda i, o: incr.comb_lin(_int_sub, i, o), (TProd(Z, Z),)))
    mk(ca.OpDef("o_ineg", ca.monomorphic(Z, Z), _int_neg,
                lambda i, o: incr.comb_lin(_int_neg, i, o), (Z,)))
    mk(ca.OpDef("o_isum", vec_typer(Z), _isum,
                lambda i, o: incr.comb_lin(_isum, i, o), (arr(3, Z),)))
    mk(ca.OpDef("o_nmax", ca.monomorphic(TProd(N, N), N), _nat_max,
                lambda i, o: incr.comb_triv(_nat_max, i, o), (TProd(N, N),)))
    mk(ca.OpDef("o_ndbl", ca.monomorphic(N, N), _nat_dbl,
                lambda i, o: incr.comb_lin(_nat_dbl, i, o), (N,)))
    mk(ca.OpDef("o_nsum", vec_typer(N), _isum,
                lambda i, o: incr.comb_lin(_isum, i, o), (arr(3, N),)))
    return reg


# ---------------------------------------------------------------------------
# Term generation (type-directed, forward from the input type)
# ---------------------------------------------------------------------------

def term_size(t: ca.Term) -> int:
    match t:
        case ca.Seq(a, b) | ca.Par(a, b) | ca.CasePar(a, b):
            return 1 + term_size(a) + term_size(b)
        case ca.Map(body):
            return 1 + term_size(body)
        case _:
            return 1


class _TermGen:
    """Forward, type-directed term generation.

    self_only restricts to the cache-free constructor set (the Self-built
    generics plus cst/plus/seq/par/map) for the self-maintainability suite.
    """

    def __init__(self, cfg, rng, reg, self_only=False):
        self.cfg = cfg
        self.rng = rng
        self.reg = reg
        self.self_only = self_only
        self.fresh = 0

    def _name(self, prefix):
        self.fresh += 1
        return f"{prefix}{self.fresh}_{self.rng.randrange(1 << 20)}"

    def small_type(self, depth=2):
        return gen_type(self.cfg, self.rng, depth, bases=("real", "int"))

    def link(self, ty, budget):
        """One constructor applicable at ty -> (term, out_ty, cost)."""
        rng = self.rng
        opts = []

        def add(w, f):
            opts.append((w, f))

        add(0.6, lambda: (ca.Id(), ty, 1))
        add(1.5, lambda: (ca.Dup(), TProd(ty, ty), 1))
        if budget >= 1:
            def mk_repl():
                n = rng.randint(0, self.cfg.max_shape)
                return ca.Replicate(arr_shape(n)), TCont(arr_shape(n), ty), 1
            add(1.0, mk_repl)

            if not _contains_nat(ty):
                def mk_inl():
                    other = self.small_type(1)
                    return ca.Inl(other), TSum(ty, other), 1
                add(0.7, mk_inl)

                def mk_inr():
                    other = self.small_type(1)
                    return ca.Inr(other), TSum(other, ty), 1
                add(0.7, mk_inr)

            def mk_cst():
                out = self.small_type(1)
                return ca.Cst(out, gen_value(rng, out)), out, 1
            add(0.7, mk_cst)

            def mk_pair_repl():
                # ⟨id, replicate⟩ manufactures the (elem, container) input
                # that set/filter need
                n = rng.randint(0, self.cfg.max_shape)
                t = ca.seq(ca.Dup(), ca.Par(ca.Id(), ca.Replicate(arr_shape(n))))
                return t, TProd(ty, TCont(arr_shape(n), ty)), 3
            add(0.8, mk_pair_repl)

        if not self.self_only:
            for opname, opdef in self.reg.ops.items():
                out = opdef.typer(ty)
                if out is not None:
                    add(2.0, lambda od=opdef, o=out: (ca.OpCall(od.name), o, 1))

        if isinstance(ty, TProd):
            a, b = ty.left, ty.right
            add(1.5, lambda: (ca.Fst(), a, 1))
            add(1.5, lambda: (ca.Snd(), b, 1))
            if budget >= 3:
                def mk_par():
                    sub = max(1, (budget - 1) // 2)
                    t1, o1 = self.chain(a, sub)
                    t2, o2 = self.chain(b, sub)
                    t = ca.Par(t1, t2)
                    return t, TProd(o1, o2), term_size(t)
                add(2.0, mk_par)
            if a == b and plus_capable(a):
                add(2.0, lambda: (ca.Plus(), a, 1))
            if (isinstance(a, TCont) and isinstance(b, TCont)
                    and a.shape == b.shape):
                add(2.0, lambda: (ca.Zip(), TCont(a.shape, TProd(a.elem, b.elem)), 1))
            if (isinstance(b, TCont) and b.elem == a
                    and b.shape.container is ARRAY):
                n = b.shape.payload
                if n > 0:
                    add(1.5, lambda: (ca.SetAt(rng.randrange(n)), b, 1))

                def mk_filter():
                    keep = {i for i in range(n) if rng.random() < 0.5}
                    name = self._name("gpred")
                    self.reg.register_index_pred(name, lambda i, _k=frozenset(keep): i in _k)
                    return ca.Filter(name), b, 1
                add(1.2, mk_filter)
            if isinstance(b, TSum) and not self.self_only:
                add(1.5, lambda: (ca.Distr(), TSum(TProd(a, b.left), TProd(a, b.right)), 1))

        if isinstance(ty, TCont) and ty.shape.container is ARRAY:
            n = ty.shape.payload
            elem = ty.elem
            if budget >= 2:
                def mk_map():
                    body, out = self.chain(elem, max(1, budget - 1))
                    t = ca.Map(body)
                    return t, TCont(ty.shape, out), term_size(t)
                add(2.5, mk_map)
            if n > 0:
                add(1.5, lambda: (ca.Get(rng.randrange(n)), elem, 1))

            def mk_reshape():
                k = rng.randint(0, self.cfg.max_shape)
                name = self._name("gfn")
                table = tuple(rng.randrange(n) for _ in range(k)) if n > 0 else ()
                if n == 0:
                    k = 0
                self.reg.register_index_fn(name, lambda j, _t=table: _t[j])
                return ca.Reshape(name, arr_shape(k)), TCont(arr_shape(k), elem), 1
            add(1.2, mk_reshape)
            if isinstance(elem, TCont) and elem.shape.container is ARRAY:
                add(1.8, lambda: (ca.Tp(), TCont(elem.shape, TCont(ty.shape, elem.elem)), 1))

        if isinstance(ty, TSum) and not self.self_only:
            a, b = ty.left, ty.right
            if budget >= 3 and not (_contains_nat(a) or _contains_nat(b)):
                def mk_case():
                    sub = max(1, (budget - 1) // 2)
                    t1, o1 = self.chain(a, sub)
                    t2, o2 = self.chain(b, sub)
                    t = ca.CasePar(t1, t2)
                    return t, TSum(o1, o2), term_size(t)
                add(2.5, mk_case)
            if a == b and not _contains_nat(a):
                add(2.0, lambda: (ca.Fuse(), a, 1))

        total = sum(w for w, _ in opts)
        roll = rng.uniform(0, total)
        acc = 0.0
        for w, f in opts:
            acc += w
            if roll <= acc:
                return f()
        return opts[-1][1]()

    def chain(self, ty, budget):
        links = []
        cur = ty
        spent = 0
        while spent < budget:
            if links and self.rng.random() < 0.3:
                break
            t, cur, cost = self.link(cur, budget - spent)
            links.append(t)
            spent += cost
        if not links:
            return ca.Id(), ty
        return ca.seq(*links), cur


def gen_term(cfg: GenConfig, rng: random.Random, reg: ca.Registry,
             in_ty, out_ty=None, size=None, attempts=60, self_only=False):
    """Generate a typechecked term from in_ty; optionally hit out_ty exactly."""
    size = size or cfg.max_term_size
    gen = _TermGen(cfg, rng, reg, self_only=self_only)
    if out_ty is not None and in_ty == out_ty and size >= 1:
        if rng.random() < 0.2:
            return ca.typecheck(ca.Id(), in_ty, reg)
    for _ in range(attempts):
        term, got = gen.chain(in_ty, size)
        if term_size(term) > size:
            continue
        if out_ty is not None and got != out_ty:
            continue
        return ca.typecheck(term, in_ty, reg)
    raise GenerationFailure(
        f"no term of size <= {size} from {in_ty!r}"
        + (f" to {out_ty!r}" if out_ty is not None else ""))


# ---------------------------------------------------------------------------
# Law checking
# ---------------------------------------------------------------------------

def check_machine_laws(name, machine: incr.IncrMachine, fn, rng, samples=100,
                       rel_tol=0.0, depth=2, value_gen=None) -> CheckReport:
    """Laws 1-3 on random samples, with step-after-step iteration to `depth`."""
    in_ty, out_ty = machine.in_ty, machine.out_ty
    gen = value_gen or (lambda r: gen_value(r, in_ty))
    failures = []
    for k in range(samples):
        x = gen(rng)
        try:
            y0, c = machine.init(x)
            fx = fn(x)
            if not values_equal(out_ty, y0, fx, rel_tol):
                failures.append(_witness(law="Law-1", sample=k, x=_show_value(in_ty, x)))
                break
            y_acc = y0
            x_cur = x
            for it in range(depth):
                dx = gen_change(rng, in_ty)
                dy, c = machine.step(dx, c)
                x_cur = apply_change(in_ty, x_cur, dx)
                y_acc = apply_change(out_ty, y_acc, dy)
                if not values_equal(out_ty, fn(x_cur), y_acc, rel_tol):
                    failures.append(_witness(
                        law="Law-2", sample=k, iterate=it,
                        x=_show_value(in_ty, x), dx=_show_change(in_ty, dx)))
                    break
                c_ref = machine.init(x_cur)[1]
                if not incr.cache_equal(machine.cache, c, c_ref, rel_tol):
                    failures.append(_witness(
                        law="Law-3", sample=k, iterate=it,
                        x=_show_value(in_ty, x), dx=_show_change(in_ty, dx)))
                    break
        except Exception as e:  # a crashing machine is a failed law, with witness
            failures.append(_witness(law="exception", sample=k,
                                     x=_show_value(in_ty, x), error=repr(e)))
        if failures:
            break
    return CheckReport(name, 0, samples, not failures, failures)


def check_op_laws(opdef: ca.OpDef, in_ty, samples=60, seed=11) -> CheckReport:
    out_ty = opdef.typer(in_ty)
    if out_ty is None:
        raise GenerationFailure(f"op {opdef.name!r} rejects {in_ty!r}")
    machine = opdef.make_machine(in_ty, out_ty)
    rng = stable_rng(seed, f"op:{opdef.name}:{in_ty!r}")
    rep = check_machine_laws(f"op:{opdef.name}", machine, opdef.fn, rng,
                             samples=samples, rel_tol=1e-9)
    rep.seed = seed
    return rep


def check_term_laws(tt: ca.TypedTerm, rng, samples=60, rel_tol=1e-9, name="term") -> CheckReport:
    machine = incr.incrementalize(tt)
    return check_machine_laws(name, machine, ca.compiled(tt), rng,
                              samples=samples, rel_tol=rel_tol)


def check_value_preservation(tt: ca.TypedTerm, rng, samples=20,
                             max_changes=5, rel_tol=1e-6, name="preservation") -> CheckReport:
    """iter(incr(t), x, ds).value == denote(t, sum_changes(x, ds))."""
    machine = incr.incrementalize(tt)
    fn = ca.compiled(tt)
    in_ty, out_ty = tt.in_ty, tt.out_ty
    failures = []
    for k in range(samples):
        x = gen_value(rng, in_ty)
        ds = [gen_change(rng, in_ty) for _ in range(rng.randint(0, max_changes))]
        try:
            got, cache = incr.iter_changes(machine, x, ds)
            want = fn(incr.sum_changes(in_ty, x, ds))
            if not values_equal(out_ty, got, want, rel_tol):
                failures.append(_witness(
                    sample=k, x=_show_value(in_ty, x),
                    ds=[_show_change(in_ty, d) for d in ds]))
                break
            cache_ref = machine.init(incr.sum_changes(in_ty, x, ds))[1]
            if not incr.cache_equal(machine.cache, cache, cache_ref, rel_tol):
                failures.append(_witness(
                    sample=k, law="iter-cache", x=_show_value(in_ty, x),
                    ds=[_show_change(in_ty, d) for d in ds]))
                break
        except Exception as e:
            failures.append(_witness(sample=k, law="exception",
                                     x=_show_value(in_ty, x), error=repr(e)))
            break
    return CheckReport(name, 0, samples, not failures, failures)


def check_completeness(ty, rng, samples=200, rel_tol=1e-9, name="completeness") -> CheckReport:
    """x ⊕ (y ⊖ x) == y; on nat-containing types y is sampled reachable."""
    monotone = _contains_nat(ty)
    failures = []
    for k in range(samples):
        if monotone:
            x, y = reachable_pair(rng, ty)
        else:
            x, y = gen_value(rng, ty), gen_value(rng, ty)
        got = apply_change(ty, x, diff_values(ty, y, x))
        if not values_equal(ty, got, y, rel_tol):
            failures.append(_witness(
                sample=k, x=_show_value(ty, x), y=_show_value(ty, y)))
            break
    return CheckReport(name, 0, samples, not failures, failures)


def check_nil_law(ty, rng, samples=100, name="nil-law") -> CheckReport:
    failures = []
    for k in range(samples):
        v = gen_value(rng, ty)
        if not values_equal(ty, apply_change(ty, v, nil_change(ty)), v):
            failures.append(_witness(sample=k, v=_show_value(ty, v)))
            break
    return CheckReport(name, 0, samples, not failures, failures)


# ---------------------------------------------------------------------------
# Finite-support suite
# ---------------------------------------------------------------------------

def check_finite_support(seed=17, samples=40) -> list[CheckReport]:
    """Support bounds for the seven container ops, plus violation detection."""
    rng = stable_rng(seed, "finite-support")
    reg = ca.Registry()
    reg.register_base(INT)
    reg.register_container(RELATION)
    reg.register_container(ARRAY)
    reg.register_container(TREE)

    def dbl(x):
        return 2 * x
    reg.register_op(ca.OpDef("dbl", ca.monomorphic(Z, Z), dbl,
                             lambda i, o: incr.comb_lin(dbl, i, o)))
    five = 5

    def plus5(x):
        return x + five
    reg.register_op(ca.OpDef("plus5", ca.monomorphic(Z, Z), plus5,
                             lambda i, o: incr.comb_self(plus5, lambda d: d, i, o)))
    reg.register_index_fn("swap", lambda ij: (ij[1], ij[0]),
                          fibers=lambda ij: [(ij[1], ij[0])])
    reg.register_index_fn("const0", lambda ij: (0, 0))
    reg.register_index_pred("even_key", lambda t: t[0] % 2 == 0)

    rel_ii = TCont(rel_shape(("int", "int")), Z)
    rel_i = TCont(rel_shape("int"), Z)
    reports = []

    def run(name, fn):
        failures = []
        for k in range(samples):
            try:
                fn(k)
            except AssertionError as e:
                failures.append(_witness(sample=k, error=str(e)))
                break
        reports.append(CheckReport(f"finite-support:{name}", seed, samples,
                                   not failures, failures))

    def case_set(k):
        tt = ca.typecheck(ca.SetAt(rng.randint(-3, 3)), TProd(Z, rel_i), reg)
        x, a = gen_scalar(rng, INT), gen_value(rng, rel_i)
        out = ca.denote(tt, (x, a))
        assert set(out) <= set(a) | {tt.term.index}, "set support grew"
    run("set", case_set)

    def case_replicate(k):
        tt = ca.typecheck(ca.Replicate(rel_shape("int")), Z, reg)
        assert ca.denote(tt, 0) == {}, "replicate of ε must be empty"
    run("replicate", case_replicate)

    def case_map(k):
        tt = ca.typecheck(ca.Map(ca.OpCall("dbl")), rel_i, reg)
        a = gen_value(rng, rel_i)
        out = ca.denote(tt, a)
        assert set(out) <= set(a), "map support grew"
    run("map", case_map)

    def case_reshape(k):
        tt = ca.typecheck(ca.Reshape("swap", rel_shape(("int", "int"))), rel_ii, reg)
        a = gen_value(rng, rel_ii)
        out = ca.denote(tt, a)
        assert set(out) <= {(j, i) for (i, j) in a}, "reshape support beyond fibers"
    run("reshape", case_reshape)

    def case_filter(k):
        tt = ca.typecheck(ca.Filter("even_key"), TProd(Z, rel_ii), reg)
        a = gen_value(rng, rel_ii)
        out = ca.denote(tt, (0, a))
        assert set(out) <= set(a), "filter support grew"
    run("filter", case_filter)

    def case_zip(k):
        tt = ca.typecheck(ca.Zip(), TProd(rel_i, rel_i), reg)
        a, b = gen_value(rng, rel_i), gen_value(rng, rel_i)
        out = ca.denote(tt, (a, b))
        assert set(out) <= set(a) | set(b), "zip support grew"
    run("zip", case_zip)

    def case_tp(k):
        nested = TCont(rel_shape("int"), rel_i)
        tt = ca.typecheck(ca.Tp(), nested, reg)
        a = gen_value(rng, nested)
        out = ca.denote(tt, a)
        bound = {i for row in a.values() for i in row}
        assert set(out) <= bound, "tp outer support grew"
        for i, row in out.items():
            assert set(row) <= set(a), "tp inner support grew"
    run("tp", case_tp)

    tree_i = TCont(tree_shape(), Z)

    def case_map_tree(k):
        tt = ca.typecheck(ca.Map(ca.OpCall("dbl")), tree_i, reg)
        a = gen_value(rng, tree_i)
        out = ca.denote(tt, a)
        assert set(out) <= set(a), "tree map support grew"
    run("map-tree", case_map_tree)

    def case_set_tree(k):
        path = gen_index(rng, tree_shape())
        tt = ca.typecheck(ca.SetAt(path), TProd(Z, tree_i), reg)
        a = gen_value(rng, tree_i)
        out = ca.denote(tt, (gen_scalar(rng, INT), a))
        assert set(out) <= set(a) | {path}, "tree set support grew"
    run("set-tree", case_set_tree)

    # precondition violations must be detected, not silently mis-evaluated
    def violations():
        failures = []
        tt = ca.typecheck(ca.Map(ca.OpCall("plus5")), rel_i, reg)
        try:
            ca.denote(tt, {1: 2})
            failures.append(_witness(case="map-non-default-preserving"))
        except SupportError:
            pass
        tt = ca.typecheck(ca.Reshape("const0", rel_shape(("int", "int"))), rel_ii, reg)
        try:
            ca.denote(tt, {(1, 2): 1})
            failures.append(_witness(case="reshape-without-fibers"))
        except SupportError:
            pass
        tt = ca.typecheck(ca.Replicate(rel_shape("int")), Z, reg)
        try:
            ca.denote(tt, 7)
            failures.append(_witness(case="replicate-non-default"))
        except SupportError:
            pass
        reports.append(CheckReport("finite-support:violations-detected", seed, 3,
                                   not failures, failures))
    violations()
    return reports


# ---------------------------------------------------------------------------
# Fault injection
# ---------------------------------------------------------------------------

FAULTS = ("triv-stale-cache", "swap-fst-snd", "seq-drop-propagation",
          "bilin-missing-term", "debruijn-off-by-one")


@contextmanager
def inject_fault(name: str):
    """Temporarily sabotage one engine component (mutation testing)."""
    if name == "triv-stale-cache":
        orig = incr.comb_triv

        def bad(fn, in_ty, out_ty):
            m = orig(fn, in_ty, out_ty)
            good_step = m.step
            m.step = lambda dx, c: (good_step(dx, c)[0], c)
            return m

        incr.comb_triv = bad
        try:
            yield
        finally:
            incr.comb_triv = orig
    elif name == "swap-fst-snd":
        orig = incr._BUILDERS[ca.Fst]

        def bad(tt):
            return incr.comb_self(ca.compiled(tt), lambda d: d[1], tt.in_ty, tt.out_ty)

        incr._BUILDERS[ca.Fst] = bad
        try:
            yield
        finally:
            incr._BUILDERS[ca.Fst] = orig
    elif name == "seq-drop-propagation":
        orig = incr._BUILDERS[ca.Seq]

        def bad(tt):
            m = orig(tt)
            mid_ty = tt.children[0].out_ty
            mf = incr.incrementalize(tt.children[0])
            mg = incr.incrementalize(tt.children[1])

            def step(dx, c):
                if incr.descriptor_is_unit(m.cache):
                    mf.step(dx, UNIT_C)
                    dz, _ = mg.step(nil_change(mid_ty), UNIT_C)
                    return dz, c
                _dy, c1 = mf.step(dx, c[0])
                dz, c2 = mg.step(nil_change(mid_ty), c[1])
                return dz, (c1, c2)

            UNIT_C = incr.UNIT
            m.step = step
            return m

        incr._BUILDERS[ca.Seq] = bad
        try:
            yield
        finally:
            incr._BUILDERS[ca.Seq] = orig
    elif name == "bilin-missing-term":
        orig = incr.comb_bilin

        def bad(fn, in_ty, out_ty):
            m = orig(fn, in_ty, out_ty)
            a_ty, b_ty = in_ty.left, in_ty.right

            def step(d, c):
                dx, dy = d
                x, y = c
                out = nil_change(out_ty)
                if not is_nil(a_ty, dx) and not is_nil(b_ty, dy):
                    out = incr.add_values(out_ty, out, fn((dx, dy)))
                if not is_nil(a_ty, dx):
                    out = incr.add_values(out_ty, out, fn((dx, y)))
                # f(x, dy) forgotten
                x2 = apply_change(a_ty, x, dx)
                y2 = apply_change(b_ty, y, dy)
                return out, (x2, y2)

            m.step = step
            return m

        incr.comb_bilin = bad
        try:
            yield
        finally:
            incr.comb_bilin = orig
    elif name == "debruijn-off-by-one":
        orig = fe._var_term

        def bad(index, width):
            return orig(min(index + 1, width - 1), width)

        fe._var_term = bad
        try:
            yield
        finally:
            fe._var_term = orig
    else:
        raise DelticError(f"unknown fault {name!r}; have {FAULTS}")


# ---------------------------------------------------------------------------
# Per-construct law suites (one entry per term constructor and combinator)
# ---------------------------------------------------------------------------

TERM_CONSTRUCTS = (
    "id", "dup", "fst", "snd", "plus", "cst", "seq", "par", "map", "zip",
    "get", "set", "reshape", "replicate", "tp", "filter", "fuse", "distr",
    "inl", "inr", "case", "op",
)

COMBINATORS = ("triv", "triv2", "self", "lin", "bilin", "add")


def _rel_cross(xy):
    r, s = xy
    out = {}
    for i, a in r.items():
        for j, b in s.items():
            out[(i, j)] = a * b
    return out


def _plus_capable_pool(cfg, rng):
    pool = [R, Z, N, arr(rng.randint(1, cfg.max_shape), R),
            arr(rng.randint(1, cfg.max_shape), Z), TProd(R, Z),
            TCont(rel_shape("int"), Z)]
    return rng.choice(pool)


def _construct_term(name, cfg, rng, gen: "_TermGen"):
    """One randomized typed instance with `name` at the root."""
    reg = gen.reg
    small = gen.small_type

    def chain(ty, budget=3):
        return gen.chain(ty, budget)

    if name == "id":
        return ca.Id(), small()
    if name == "dup":
        return ca.Dup(), small()
    if name == "fst":
        return ca.Fst(), TProd(small(), small())
    if name == "snd":
        return ca.Snd(), TProd(small(), small())
    if name == "plus":
        x = _plus_capable_pool(cfg, rng)
        return ca.Plus(), TProd(x, x)
    if name == "cst":
        out = small()
        return ca.Cst(out, gen_value(rng, out)), small()
    if name == "seq":
        a = small()
        t1, mid = chain(a)
        t2, _ = chain(mid)
        return ca.Seq(t1, t2), a
    if name == "par":
        a, b = small(), small()
        t1, _ = chain(a)
        t2, _ = chain(b)
        return ca.Par(t1, t2), TProd(a, b)
    if name == "map":
        elem = small(1)
        body, _ = chain(elem, 2)
        return ca.Map(body), TCont(arr_shape(rng.randint(0, cfg.max_shape)), elem)
    if name == "zip":
        k = rng.randint(0, cfg.max_shape)
        return ca.Zip(), TProd(arr(k, small(1)), arr(k, small(1)))
    if name == "get":
        k = rng.randint(1, cfg.max_shape)
        return ca.Get(rng.randrange(k)), arr(k, small(1))
    if name == "set":
        k = rng.randint(1, cfg.max_shape)
        e = small(1)
        return ca.SetAt(rng.randrange(k)), TProd(e, arr(k, e))
    if name == "reshape":
        n = rng.randint(1, cfg.max_shape)
        k = rng.randint(0, cfg.max_shape)
        fname = gen._name("cfn")
        table = tuple(rng.randrange(n) for _ in range(k))
        reg.register_index_fn(fname, lambda j, _t=table: _t[j])
        return ca.Reshape(fname, arr_shape(k)), arr(n, small(1))
    if name == "replicate":
        return ca.Replicate(arr_shape(rng.randint(0, cfg.max_shape))), small(1)
    if name == "tp":
        a, b = rng.randint(0, cfg.max_shape), rng.randint(0, cfg.max_shape)
        return ca.Tp(), arr(a, arr(b, small(1)))
    if name == "filter":
        k = rng.randint(0, cfg.max_shape)
        e = small(1)
        pname = gen._name("cpred")
        keep = frozenset(i for i in range(k) if rng.random() < 0.5)
        reg.register_index_pred(pname, lambda i, _k=keep: i in _k)
        return ca.Filter(pname), TProd(e, arr(k, e))
    if name == "fuse":
        x = gen_type(cfg, rng, 1, bases=("real", "int"))
        return ca.Fuse(), TSum(x, x)
    if name == "distr":
        return ca.Distr(), TProd(small(1), TSum(small(1), small(1)))
    if name == "inl":
        return ca.Inl(small(1)), gen_type(cfg, rng, 1, bases=("real", "int"))
    if name == "inr":
        return ca.Inr(small(1)), gen_type(cfg, rng, 1, bases=("real", "int"))
    if name == "case":
        a = gen_type(cfg, rng, 1, bases=("real", "int"))
        b = gen_type(cfg, rng, 1, bases=("real", "int"))
        t1, _ = chain(a)
        t2, _ = chain(b)
        return ca.CasePar(t1, t2), TSum(a, b)
    if name == "op":
        opdef = rng.choice(list(reg.ops.values()))
        in_ty = rng.choice(opdef.sample_in_tys)
        return ca.OpCall(opdef.name), in_ty
    raise GenerationFailure(f"unknown construct {name!r}")


def _combinator_instances(name, cfg, rng):
    """Fresh (machine, fn) pairs for one combinator."""
    if name == "triv":
        picks = [(_relu, R, R), (_scalar_mul, TProd(R, R), R),
                 (_nat_max, TProd(N, N), N), (_int_mul, TProd(Z, Z), Z)]
        f, i, o = rng.choice(picks)
        return incr.comb_triv(f, i, o), f
    if name == "triv2":
        picks = [(_relu, R, R), (_scalar_mul, TProd(R, R), R),
                 (_int_mul, TProd(Z, Z), Z)]
        f, i, o = rng.choice(picks)
        return incr.comb_triv2(f, i, o), f
    if name == "self":
        picks = [(_shift5, lambda d: d, R, R),
                 (_int_neg, _int_neg, Z, Z),
                 (lambda v: {i: 2 * x for i, x in v.items()},
                  lambda d: {i: 2 * x for i, x in d.items()},
                  TCont(rel_shape("int"), Z), TCont(rel_shape("int"), Z))]
        f, d, i, o = rng.choice(picks)
        return incr.comb_self(f, d, i, o), f
    if name == "lin":
        k = rng.randint(0, cfg.max_shape)
        picks = [(_fsum, arr(k, R), R), (_int_sub, TProd(Z, Z), Z),
                 (_isum, arr(k, Z), Z), (_isum, arr(k, N), N)]
        f, i, o = rng.choice(picks)
        return incr.comb_lin(f, i, o), f
    if name == "bilin":
        picks = [(_scalar_mul, TProd(R, R), R), (_int_mul, TProd(Z, Z), Z),
                 (_rel_cross, TProd(TCont(rel_shape("int"), Z),
                                    TCont(rel_shape("str"), Z)),
                  TCont(rel_shape(("int", "str")), Z))]
        f, i, o = rng.choice(picks)
        return incr.comb_bilin(f, i, o), f
    if name == "add":
        ty = _plus_capable_pool(cfg, rng)
        m = incr.comb_add(ty)
        return m, ca.compiled(ca.typecheck(ca.Plus(), TProd(ty, ty), oracle_registry()))
    raise GenerationFailure(f"unknown combinator {name!r}")


def check_construct_laws(name, cfg: GenConfig = None, samples=200,
                         instances=10, seed=None) -> CheckReport:
    """Laws 1-3 for one construct across randomized instantiations."""
    cfg = cfg or GenConfig()
    seed = cfg.seed if seed is None else seed
    rng = stable_rng(seed, f"construct:{name}")
    per = max(1, samples // instances)
    failures = []
    total = 0
    for k in range(instances):
        if name in COMBINATORS:
            machine, fn = _combinator_instances(name, cfg, rng)
            rep = check_machine_laws(f"{name}#{k}", machine, fn, rng,
                                     samples=per, rel_tol=cfg.tol_real)
        else:
            reg = oracle_registry()
            gen = _TermGen(cfg, rng, reg)
            term, in_ty = _construct_term(name, cfg, rng, gen)
            tt = ca.typecheck(term, in_ty, reg)
            rep = check_term_laws(tt, rng, samples=per, rel_tol=cfg.tol_real,
                                  name=f"{name}#{k}")
            if not rep.passed:
                rep.failures[0]["term"] = ca.term_to_text(term)
        total += rep.samples
        if not rep.passed:
            failures.extend(rep.failures)
            break
    return CheckReport(f"laws:{name}", seed, total, not failures, failures)


def check_value_preservation_suite(cfg: GenConfig = None, terms=100,
                                   per_term=2, seed=None) -> CheckReport:
    """Random typechecked terms × change lists: iter == batch on summed input."""
    cfg = cfg or GenConfig()
    seed = cfg.seed if seed is None else seed
    rng = stable_rng(seed, "value-preservation")
    reg = oracle_registry()
    failures = []
    done = 0
    for k in range(terms):
        in_ty = gen_type(cfg, rng, depth=2)
        tt = gen_term(cfg, rng, reg, in_ty)
        rep = check_value_preservation(tt, rng, samples=per_term,
                                       max_changes=cfg.max_changes,
                                       rel_tol=cfg.tol_iter)
        done += 1
        if not rep.passed:
            rep.failures[0]["term"] = ca.term_to_text(tt.term)
            failures.extend(rep.failures)
            break
    return CheckReport("value-preservation", seed, done, not failures, failures)


# ---------------------------------------------------------------------------
# Frontend lowering soundness (also the de Bruijn mutation detector)
# ---------------------------------------------------------------------------

MVMUL_TEXT = """\
bundle linalg
param m : arr[{n}] arr[{m}] real
param v : arr[{m}] real

map sum # (map2 (map2 mul) # (replicate {n} # v, m))
"""

DENSE_TEXT = """\
bundle linalg
param m : arr[{n}] arr[{m}] real
param b : arr[{n}] real
param x : arr[{m}] real

map relu # map2 add # (mvmul # [m, x], b)
"""

LET_TEXT = """\
bundle linalg
param x : real
param y : real

let s = mul # (x, x);
let t = relu # s;
mul # (t, relu # y)
"""


def check_frontend_lowering(seed=23, samples=100) -> CheckReport:
    """Surface texts lower to terms denotationally equal to the catalog and
    to the environment-passing reference evaluator."""
    from .domains import linalg
    bundle = linalg.register_linalg()
    lookup = lambda _name: bundle
    rng = stable_rng(seed, "frontend")
    failures = []
    n, m = 3, 4
    try:
        _, mv_prog = fe.parse_program_file(MVMUL_TEXT.format(n=n, m=m), lookup)
        mv_tt = fe.compile_program(mv_prog, bundle.registry, bundle.literal_base)
        cat_tt = ca.typecheck(linalg.mvmul_term(n, m), mv_prog.in_ty, bundle.registry)
        _, de_prog = fe.parse_program_file(DENSE_TEXT.format(n=n, m=m), lookup)
        de_tt = fe.compile_program(de_prog, bundle.registry, bundle.literal_base)
        _, let_prog = fe.parse_program_file(LET_TEXT, lookup)
        let_tt = fe.compile_program(let_prog, bundle.registry, bundle.literal_base)
    except Exception as e:  # mis-lowered programs often fail to even typecheck
        return CheckReport("frontend-lowering", seed, 0, False,
                           [_witness(case="compile", error=repr(e))])

    for k in range(samples):
        M = gen_value(rng, mv_prog.in_ty.left)
        v = gen_value(rng, mv_prog.in_ty.right)
        got = ca.denote(mv_tt, (M, v))
        want = ca.denote(cat_tt, (M, v))
        if not values_equal(mv_tt.out_ty, got, want, 1e-9):
            failures.append(_witness(case="mvmul", sample=k))
            break
        b = gen_value(rng, arr(n, R))
        x = gen_value(rng, arr(m, R))
        got = ca.denote(de_tt, (M, (b, x)))
        cat_dense = ca.typecheck(linalg.dense_term(n, m, M, b), arr(m, R),
                                 bundle.registry)
        want = ca.denote(cat_dense, x)
        if not values_equal(de_tt.out_ty, got, want, 1e-9):
            failures.append(_witness(case="dense", sample=k))
            break
        env = {"m": (mv_prog.in_ty.left, M), "v": (mv_prog.in_ty.right, v)}
        _, ref = fe.eval_named(mv_prog.body, env, bundle.registry, REAL)
        if not values_equal(mv_tt.out_ty, ca.denote(mv_tt, (M, v)), ref, 1e-9):
            failures.append(_witness(case="mvmul-vs-reference", sample=k))
            break
        xs, ys = gen_scalar(rng, REAL), gen_scalar(rng, REAL)
        got = ca.denote(let_tt, (xs, ys))
        env = {"x": (R, xs), "y": (R, ys)}
        _, ref = fe.eval_named(let_prog.body, env, bundle.registry, REAL)
        if not values_equal(R, got, ref, 1e-9):
            failures.append(_witness(case="let-translation", sample=k,
                                     x=xs, y=ys, got=got, ref=ref))
            break
    return CheckReport("frontend-lowering", seed, samples, not failures, failures)


# ---------------------------------------------------------------------------
# Whole suites (what `deltic laws` runs)
# ---------------------------------------------------------------------------

def _guarded(name, seed, thunk) -> CheckReport:
    """A check that crashes is a failed check with the error as witness."""
    try:
        return thunk()
    except Exception as e:
        return CheckReport(name, seed, 0, False, [_witness(error=repr(e))])


def run_all_suites(bundle_names=("linalg", "relalg", "trees", "gcounter"),
                   seed=None, samples=60) -> list[CheckReport]:
    from .domains import get_bundle
    cfg = GenConfig(seed=seed if seed is not None else GenConfig.seed)
    reports = []
    for bname in bundle_names:
        bundle = get_bundle(bname)
        for opdef in bundle.registry.ops.values():
            for in_ty in opdef.sample_in_tys:
                rep = _guarded(
                    f"{bname}:op:{opdef.name}", cfg.seed,
                    lambda od=opdef, it=in_ty: check_op_laws(
                        od, it, samples=samples, seed=cfg.seed))
                rep.name = f"{bname}:op:{opdef.name}" if rep.name.startswith("op:") else rep.name
                reports.append(rep)
    for cname in TERM_CONSTRUCTS + COMBINATORS:
        reports.append(_guarded(
            f"laws:{cname}", cfg.seed,
            lambda cn=cname: check_construct_laws(cn, cfg, samples=samples,
                                                  instances=5)))
    reports.append(_guarded(
        "value-preservation", cfg.seed,
        lambda: check_value_preservation_suite(cfg, terms=40)))
    rng = stable_rng(cfg.seed, "core-structures")
    for label, bases in (("sums", ("real", "int")), ("nat", ("nat",)),
                         ("scalar", ("scalar",))):
        for k in range(10):
            ty = gen_type(cfg, rng, containers=("arr", "rel", "dict", "tree"),
                          bases=bases)
            rep = check_completeness(ty, rng, samples=40,
                                     name=f"completeness:{label}#{k}")
            rep.seed = cfg.seed
            reports.append(rep)
    reports.extend(check_finite_support(seed=cfg.seed))
    reports.append(check_frontend_lowering(seed=cfg.seed, samples=max(20, samples)))
    return reports
