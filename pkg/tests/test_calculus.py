"""Typing rules and batch interpreter."""

import pytest

from deltic.calculus import (
    CasePar, Cst, Distr, Dup, Filter, Fst, Fuse, Get, Id, Inl, Map, OpCall,
    OpDef, Par, Plus, Registry, RegistryError, Replicate, Reshape, SetAt,
    Seq, Snd, TermTypeError, Tp, Zip, denote, fanout, map2, monomorphic,
    seq, typecheck,
)
from deltic.core import (
    INT, NAT, REAL, SCALAR, Left, Right, TBase, TCont, TProd, TSum,
    add_values, apply_change, values_equal,
)
from deltic.domains import linalg
from deltic.domains.containers import ARRAY, arr, arr_shape
from deltic.oracle import GenConfig, gen_term, gen_type, gen_value, oracle_registry, stable_rng

R = TBase(REAL)
Z = TBase(INT)


@pytest.fixture()
def reg():
    return linalg.register_linalg().registry


def test_typecheck_dup_gives_product(reg):
    tt = typecheck(Dup(), R, reg)
    assert (tt.in_ty, tt.out_ty) == (R, TProd(R, R))


def test_typecheck_dup_projections(reg):
    # par splits the product, so fst/snd under par need a product input
    tt = typecheck(Seq(Dup(), Par(Fst(), Snd())), TProd(R, R), reg)
    assert tt.out_ty == TProd(R, R)
    with pytest.raises(TermTypeError):
        typecheck(Seq(Dup(), Par(Fst(), Snd())), R, reg)


def test_typecheck_map_relu(reg):
    tt = typecheck(Map(OpCall("relu")), arr(3, R), reg)
    assert tt.in_ty == arr(3, R)
    assert tt.out_ty == arr(3, R)


def test_typecheck_negative(reg):
    with pytest.raises(TermTypeError):
        typecheck(Seq(Fst(), Map(Id())), TProd(R, arr(2, R)), reg)


def test_plus_needs_flags(reg):
    S = TBase(SCALAR)
    r2 = Registry()
    r2.register_base(SCALAR)
    with pytest.raises(TermTypeError):
        typecheck(Plus(), TProd(S, S), r2)
    # sums have structurally different change semantics: also rejected
    with pytest.raises(TermTypeError):
        typecheck(Plus(), TProd(TSum(R, R), TSum(R, R)), reg)


def test_get_set_index_bounds(reg):
    with pytest.raises(TermTypeError):
        typecheck(Get(5), arr(3, R), reg)
    with pytest.raises(TermTypeError):
        typecheck(SetAt(3), TProd(R, arr(3, R)), reg)


def test_denote_reshape_reversal(reg):
    n = 3
    r2 = linalg.register_linalg().registry
    r2.register_index_fn("rev3", lambda i: n - 1 - i)
    tt = typecheck(Reshape("rev3", arr_shape(3)), arr(3, R), r2)
    assert denote(tt, {0: 1.0, 1: 2.0, 2: 3.0}) == {0: 3.0, 1: 2.0, 2: 1.0}


def test_denote_set(reg):
    tt = typecheck(SetAt(0), TProd(R, arr(2, R)), reg)
    assert denote(tt, (9.0, {0: 1.0, 1: 2.0})) == {0: 9.0, 1: 2.0}


def test_denote_filter(reg):
    r2 = linalg.register_linalg().registry
    r2.register_index_pred("only1", lambda i: i == 1)
    tt = typecheck(Filter("only1"), TProd(R, arr(2, R)), r2)
    assert denote(tt, (0.0, {0: 5.0, 1: 7.0})) == {1: 7.0}


def test_denote_filter_nonzero_default(reg):
    r2 = linalg.register_linalg().registry
    r2.register_index_pred("only0", lambda i: i == 0)
    tt = typecheck(Filter("only0"), TProd(R, arr(3, R)), r2)
    # positions failing the predicate take the fallback value
    assert denote(tt, (9.0, {0: 5.0})) == {0: 5.0, 1: 9.0, 2: 9.0}


def test_denote_distr(reg):
    tt = typecheck(Distr(), TProd(R, TSum(R, R)), reg)
    assert denote(tt, (4.0, Right(6.0))) == Right((4.0, 6.0))
    assert denote(tt, (4.0, Left(6.0))) == Left((4.0, 6.0))


def test_denote_case_fuse(reg):
    tt = typecheck(Seq(CasePar(OpCall("relu"), Id()), Fuse()), TSum(R, R), reg)
    assert denote(tt, Left(-3.0)) == 0.0
    assert denote(tt, Right(-3.0)) == -3.0


def test_denote_map_non_default_preserving_finite(reg):
    # cst 5 maps ε to 5, so absent positions of a finite shape materialize
    tt = typecheck(Map(Cst(R, 5.0)), arr(3, R), reg)
    assert denote(tt, {}) == {0: 5.0, 1: 5.0, 2: 5.0}


def test_denote_get_absent_returns_default(reg):
    tt = typecheck(Get(1), arr(3, R), reg)
    assert denote(tt, {0: 4.0}) == 0.0


def test_register_duplicate_op():
    reg = Registry()
    reg.register_base(REAL)
    op = OpDef("relu", monomorphic(R, R), lambda x: max(x, 0.0),
               lambda i, o: None)
    reg.register_op(op)
    with pytest.raises(RegistryError):
        reg.register_op(OpDef("relu", monomorphic(R, R), lambda x: x,
                              lambda i, o: None))


def test_frozen_registry_rejects_registration():
    reg = Registry()
    reg.register_base(REAL)
    reg.freeze()
    with pytest.raises(RegistryError):
        reg.register_base(INT)


def test_append_identity_vs_prepend_oracle(reg):
    rng = stable_rng(21, "append")
    for _ in range(40):
        n = rng.randint(0, 5)
        xs = [round(rng.uniform(-5, 5), 3) for _ in range(n)]
        x = round(rng.uniform(-5, 5), 3)
        tt = typecheck(linalg.append_term(n), TProd(R, arr(n, R)), reg)
        got = denote(tt, (x, {i: v for i, v in enumerate(xs) if v != 0.0}))
        want = [x] + xs
        assert values_equal(arr(n + 1, R), got,
                            {i: v for i, v in enumerate(want) if v != 0.0}, 1e-12)


def test_plus_agrees_with_apply_change():
    cfg = GenConfig()
    rng = stable_rng(22, "plus-apply")
    reg = oracle_registry()
    for _ in range(50):
        ty = gen_type(cfg, rng, depth=2, bases=("real", "int"))
        from deltic.core import plus_capable
        if not plus_capable(ty):
            continue
        tt = typecheck(Plus(), TProd(ty, ty), reg)
        x, y = gen_value(rng, ty), gen_value(rng, ty)
        assert values_equal(ty, denote(tt, (x, y)), apply_change(ty, x, y), 1e-12)


def test_interpreter_totality_on_random_terms():
    cfg = GenConfig()
    rng = stable_rng(23, "totality")
    reg = oracle_registry()
    for _ in range(80):
        in_ty = gen_type(cfg, rng, depth=2)
        tt = gen_term(cfg, rng, reg, in_ty)
        v = gen_value(rng, in_ty)
        out = denote(tt, v)
        from deltic.core import check_value
        check_value(tt.out_ty, out)  # conforms, canonical, shape-valid indices
