"""Combinators, the incrementalization transformation, and iterated updates."""

import pytest

from deltic import calculus as ca
from deltic import incr
from deltic.calculus import (
    CasePar, Cst, Dup, Id, Map, OpCall, Plus, Seq, denote, map2, seq, typecheck,
)
from deltic.core import (
    INT, NAT, REAL, Cl, Left, Right, Sl, Sr, SUM_NULL, TBase, TCont, TProd,
    TSum, apply_change, nil_change, values_equal,
)
from deltic.domains import linalg, relalg
from deltic.domains.containers import arr
from deltic.incr import (
    CUnit, cache_entry_count, cache_equal, cache_to_json, comb_add,
    comb_bilin, comb_lin, comb_self, comb_triv, comb_triv2,
    descriptor_is_unit, incrementalize, iter_changes, sum_changes, UNIT,
)
from deltic.oracle import (
    GenConfig, check_machine_laws, gen_change, gen_term, gen_type, gen_value,
    oracle_registry, stable_rng,
)

R = TBase(REAL)
Z = TBase(INT)
N = TBase(NAT)


def relu(x):
    return x if x > 0 else 0.0


def mul(xy):
    return xy[0] * xy[1]


def test_triv_relu_example():
    m = comb_triv(relu, R, R)
    y, c = m.init(-1.0)
    assert (y, c) == (0.0, -1.0)
    dy, c = m.step(3.0, c)
    assert (dy, c) == (2.0, 2.0)


def test_triv_nil_step_is_effective_nil():
    m = comb_triv(relu, R, R)
    y, c = m.init(4.0)
    dy, c2 = m.step(0.0, c)
    assert dy == 0.0 and c2 == 4.0


def test_triv_mul_example():
    m = comb_triv(mul, TProd(R, R), R)
    y, c = m.init((3.0, 4.0))
    assert y == 12.0 and c == (3.0, 4.0)
    dy, c = m.step((1.0, 0.0), c)
    assert dy == 4.0 and c == (4.0, 4.0)


def test_triv2_relu_example():
    m = comb_triv2(relu, R, R)
    y, c = m.init(-1.0)
    assert y == 0.0 and c == (-1.0, 0.0)
    dy, c = m.step(3.0, c)
    assert dy == 2.0 and c == (2.0, 2.0)


def test_triv2_matches_triv_outputs():
    rng = stable_rng(31, "triv2")
    m1 = comb_triv(mul, TProd(R, R), R)
    m2 = comb_triv2(mul, TProd(R, R), R)
    for _ in range(100):
        x = (rng.uniform(-5, 5), rng.uniform(-5, 5))
        dx = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        d1, _ = m1.step(dx, m1.init(x)[1])
        d2, _ = m2.step(dx, m2.init(x)[1])
        assert abs(d1 - d2) < 1e-9


def test_self_zip_derivative():
    reg = oracle_registry()
    ty = TProd(arr(3, R), arr(3, R))
    tt = typecheck(ca.Zip(), ty, reg)
    m = incrementalize(tt)
    assert isinstance(m.cache, CUnit)
    dy, _ = m.step(({0: 1.0}, {2: 5.0}), UNIT)
    assert dy == {0: (1.0, 0.0), 2: (0.0, 5.0)}


def test_self_cst_derivative_is_nil():
    reg = oracle_registry()
    tt = typecheck(Cst(arr(2, R), {0: 7.0}), R, reg)
    m = incrementalize(tt)
    y, c = m.init(1.0)
    assert y == {0: 7.0}
    dy, _ = m.step(5.0, c)
    assert dy == {}


def test_self_dup_derivative():
    reg = oracle_registry()
    tt = typecheck(Dup(), R, reg)
    m = incrementalize(tt)
    dy, _ = m.step(2.5, UNIT)
    assert dy == (2.5, 2.5)


def test_lin_sum_example():
    vsum = lambda v: float(sum(v.values()))
    m = comb_lin(vsum, arr(4, R), R)
    y, c = m.init({0: 1.0, 1: 2.0})
    assert y == 3.0 and c is UNIT
    dy, _ = m.step({1: 5.0}, c)
    assert dy == 5.0


def test_lin_rejects_unflagged_types():
    from deltic.core import SCALAR, TBase as TB
    with pytest.raises(ca.TermTypeError):
        comb_lin(lambda x: x, TB(SCALAR), TB(SCALAR))


def test_lin_identity():
    m = comb_lin(lambda x: x, Z, Z)
    dy, _ = m.step(7, UNIT)
    assert dy == 7


def test_bilin_cross_example():
    bundle = relalg.register_relalg()
    cross = bundle.registry.ops["cross"]
    in_ty = TProd(relalg.rel("str"), relalg.rel("str"))
    m = cross.make_machine(in_ty, cross.typer(in_ty))
    y, c = m.init(({"t": 1}, {"u": 1}))
    assert y == {("t", "u"): 1}
    dy, c = m.step(({"t2": 1}, {}), c)
    assert dy == {("t2", "u"): 1}
    assert c == ({"t": 1, "t2": 1}, {"u": 1})
    # both-nil step: effective nil out, cache unchanged
    dy, c = m.step(({}, {}), c)
    assert dy == {}
    assert c == ({"t": 1, "t2": 1}, {"u": 1})


def test_add_examples():
    m = comb_add(Z)
    y, c = m.init((1, 2))
    assert y == 3
    dy, _ = m.step((10, 20), c)
    assert dy == 30
    assert m.step((0, 0), UNIT)[0] == 0
    mn = comb_add(N)
    assert mn.init((2, 3))[0] == 5
    assert mn.step((1, 0), UNIT)[0] == 1


def test_incrementalize_mvmul_column_change():
    bundle = linalg.register_linalg()
    in_ty = TProd(arr(2, arr(2, R)), arr(2, R))
    tt = typecheck(linalg.mvmul_term(2, 2), in_ty, bundle.registry)
    m = incrementalize(tt)
    M = {0: {0: 1.0, 1: 2.0}, 1: {0: 3.0, 1: 4.0}}
    v = {0: 5.0, 1: 6.0}
    y, c = m.init((M, v))
    assert y == {0: 17.0, 1: 39.0}
    dy, c = m.step(({}, {0: 1.0}), c)
    assert values_equal(arr(2, R), dy, {0: 1.0, 1: 3.0}, 1e-12)


def test_incrementalize_dup_plus():
    reg = oracle_registry()
    tt = typecheck(Seq(Dup(), Plus()), Z, reg)
    m = incrementalize(tt)
    y, c = m.init(5)
    assert y == 10
    dy, _ = m.step(3, c)
    assert dy == 6


def test_case_branch_switch_uses_fresh_init():
    reg = oracle_registry()
    tt = typecheck(CasePar(OpCall("o_relu"), OpCall("o_shift5")), TSum(R, R), reg)
    m = incrementalize(tt)
    y, c = m.init(Right(1.0))
    assert y == Right(6.0)
    dy, c = m.step(Sl(-2.0), c)
    # switching to the left branch initializes relu there
    assert dy == Sl(0.0)
    assert type(c) is Left and c.value[1] == 0.0
    # switching within the same side emits a local change against the cache
    dy, c = m.step(Sl(4.0), c)
    assert dy == Cl(4.0)
    dy, c = m.step(SUM_NULL, c)
    assert dy is SUM_NULL


def test_iter_empty_is_init():
    reg = oracle_registry()
    tt = typecheck(OpCall("o_relu"), R, reg)
    m = incrementalize(tt)
    assert iter_changes(m, -3.0, [])[0] == m.init(-3.0)[0]


def test_iter_constant_program():
    reg = oracle_registry()
    tt = typecheck(Cst(R, 7.0), R, reg)
    m = incrementalize(tt)
    y, _ = iter_changes(m, 0.0, [1.0, 2.0, 3.0])
    assert y == 7.0


def test_sum_changes_examples():
    assert sum_changes(R, 1.0, [2.0, 3.0]) == 6.0
    assert sum_changes(arr(2, R), {0: 1.0}, []) == {0: 1.0}
    assert sum_changes(TSum(R, R), Left(1.0), [Sr(9.0)]) == Right(9.0)


def test_sum_changes_back_to_front():
    # head applied last: sum x [d0, d1] = (x ⊕ d1) ⊕ d0
    assert sum_changes(TSum(R, R), Left(1.0), [Cl(5.0), Sl(2.0)]) == Left(7.0)


def test_iter_matches_batch_on_dense():
    bundle = linalg.register_linalg()
    rng = stable_rng(32, "iter-dense")
    n = 4
    M = {i: {j: rng.uniform(-1, 1) for j in range(n)} for i in range(n)}
    b = {i: rng.uniform(-1, 1) for i in range(n)}
    tt = typecheck(linalg.dense_term(n, n, M, b), arr(n, R), bundle.registry)
    m = incrementalize(tt)
    x = {i: rng.uniform(-1, 1) for i in range(n)}
    ds = [{rng.randrange(n): rng.uniform(-1, 1)} for _ in range(3)]
    got, _ = iter_changes(m, x, ds)
    want = denote(tt, sum_changes(arr(n, R), x, ds))
    assert values_equal(arr(n, R), got, want, 1e-6)


def test_self_maintainable_closure_has_unit_cache():
    # terms from the cache-free set compose to cache-free machines
    from deltic.domains.containers import arr_shape
    reg = oracle_registry()
    term = seq(Dup(), ca.Par(Id(), Cst(R, 1.0)), Plus(), ca.Replicate(arr_shape(3)))
    tt = typecheck(term, R, reg)
    m = incrementalize(tt)
    assert descriptor_is_unit(m.cache)
    assert cache_to_json(m.cache, m.init(2.0)[1]) == "unit"
    assert cache_entry_count(m.cache, m.init(2.0)[1]) == 0


def test_sparse_step_equals_dense_step():
    """Stepping only the change's support matches stepping every index."""
    bundle = linalg.register_linalg()
    reg = bundle.registry
    n = 4
    tt = typecheck(map2(OpCall("mul")), TProd(arr(n, R), arr(n, R)), reg)
    rng = stable_rng(33, "sparse-dense")
    for _ in range(30):
        x = ({i: rng.uniform(-3, 3) for i in range(n)},
             {i: rng.uniform(-3, 3) for i in range(n)})
        sparse = ({1: rng.uniform(-1, 1)}, {})
        dense = ({i: sparse[0].get(i, 0.0) for i in range(n)},
                 {i: 0.0 for i in range(n)})
        m1 = incrementalize(tt)
        m2 = incrementalize(tt)
        y1, c1 = m1.init(x)
        y2, c2 = m2.init(x)
        d1, c1 = m1.step(sparse, c1)
        d2, c2 = m2.step(dense, c2)  # nil entries materialized: the dense oracle
        assert values_equal(arr(n, R), apply_change(arr(n, R), y1, d1),
                            apply_change(arr(n, R), y2, d2), 1e-12)
        assert cache_equal(m1.cache, c1, c2, 1e-12)


def test_effective_nils_flow_through_downstream():
    # a Triv stage emits x ⊖ x (often 0.0) rather than omitting it; downstream
    # machines must treat it exactly like the canonical nil
    reg = oracle_registry()
    tt = typecheck(seq(OpCall("o_relu"), OpCall("o_relu")), R, reg)
    m = incrementalize(tt)
    y, c = m.init(-5.0)
    dy, c = m.step(1.0, c)  # still negative: inner change is effectively nil
    assert y == 0.0 and dy == 0.0
    dy, c = m.step(10.0, c)
    assert dy == 6.0


def test_laws_hold_for_random_terms_quick():
    cfg = GenConfig()
    rng = stable_rng(34, "laws-quick")
    reg = oracle_registry()
    for _ in range(40):
        in_ty = gen_type(cfg, rng, depth=2)
        tt = gen_term(cfg, rng, reg, in_ty)
        m = incrementalize(tt)
        rep = check_machine_laws("quick", m, ca.compiled(tt), rng, samples=5,
                                 rel_tol=1e-9)
        assert rep.passed, (ca.term_to_text(tt.term), rep.failures)


def test_dense_machine_laws_200_samples():
    # the dense layer machine against the full-reevaluation oracle
    bundle = linalg.register_linalg()
    rng = stable_rng(35, "dense-laws")
    n = 3
    M = {i: {j: rng.uniform(-1, 1) for j in range(n)} for i in range(n)}
    b = {i: rng.uniform(-1, 1) for i in range(n)}
    tt = typecheck(linalg.dense_term(n, n, M, b), arr(n, R), bundle.registry)
    m = incrementalize(tt)
    rep = check_machine_laws("dense", m, ca.compiled(tt), rng, samples=200,
                             rel_tol=1e-9)
    assert rep.passed, rep.failures


def test_distinct_machine_instances_run_concurrently():
    # one machine's step sequence is sequential state; distinct instances
    # (even of the same term) must not interfere
    import threading
    bundle = linalg.register_linalg()
    in_ty = TProd(arr(3, arr(3, R)), arr(3, R))
    tt = typecheck(linalg.mvmul_term(3, 3), in_ty, bundle.registry)
    rng = stable_rng(36, "threads")
    M = {i: {j: rng.uniform(-1, 1) for j in range(3)} for i in range(3)}
    v = {i: rng.uniform(-1, 1) for i in range(3)}
    results = {}

    def worker(k):
        m = incrementalize(tt)
        y, c = m.init((M, v))
        for s in range(40):
            dy, c = m.step(({}, {s % 3: 0.5 + k}), c)
            y = apply_change(arr(3, R), y, dy)
        results[k] = y

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for k, got in results.items():
        ds = [({}, {s % 3: 0.5 + k}) for s in range(40)]
        want = denote(tt, sum_changes(in_ty, (M, v), ds))
        assert values_equal(arr(3, R), got, want, 1e-9)
