"""Relational algebra over multiplicity maps vs nested-loop oracles."""

import pytest

from deltic.calculus import denote, typecheck
from deltic.core import INT, TBase, TProd, values_equal
from deltic.domains import relalg
from deltic.incr import incrementalize, iter_changes, sum_changes
from deltic.oracle import check_op_laws, stable_rng

from helpers import oracle_join, oracle_proj, oracle_union, rand_relation

Z = TBase(INT)


@pytest.fixture(scope="module")
def bundle():
    b = relalg.register_relalg()
    b.validate(samples=30)
    return b


def test_union_example(bundle):
    ty = TProd(relalg.rel("str"), relalg.rel("str"))
    tt = typecheck(relalg.union_term(), ty, bundle.registry)
    assert denote(tt, ({"t": 1}, {"t": 2, "u": 1})) == {"t": 3, "u": 1}


def test_proj_example(bundle):
    tt = typecheck(relalg.proj_term("fst"), relalg.rel(("int", "str")),
                   bundle.registry)
    v = {(1, "a"): 1, (1, "b"): 2, (2, "c"): 1}
    assert denote(tt, v) == {1: 3, 2: 1}


def test_join_example(bundle):
    b = relalg.register_relalg()
    b.registry.register_index_pred("p_tu", lambda ij: ij == ("t", "u"))
    ty = TProd(relalg.rel("str"), relalg.rel("str"))
    tt = typecheck(relalg.join_term("p_tu"), ty, b.registry)
    assert denote(tt, ({"t": 1}, {"u": 1, "v": 3})) == {("t", "u"): 1}


def test_table2_vs_oracles_randomized(bundle):
    b = relalg.register_relalg()
    b.registry.register_index_pred("eqkey", lambda ij: ij[0][0] == ij[1][0])
    reg = b.registry
    rng = stable_rng(51, "relalg-oracles")
    pair_rel = relalg.rel(("int", "int"))
    for _ in range(30):
        r = rand_relation(rng, rng.randint(0, 20))
        s = rand_relation(rng, rng.randint(0, 20))

        tt = typecheck(relalg.union_term(), TProd(pair_rel, pair_rel), reg)
        assert denote(tt, (r, s)) == oracle_union(r, s)

        tt = typecheck(relalg.difference_term(), TProd(pair_rel, pair_rel), reg)
        assert denote(tt, (r, s)) == oracle_union(r, {t: -m for t, m in s.items()})

        tt = typecheck(relalg.intersection_term(), TProd(pair_rel, pair_rel), reg)
        want = {t: r[t] * s[t] for t in r.keys() & s.keys() if r[t] * s[t] != 0}
        assert denote(tt, (r, s)) == want

        tt = typecheck(relalg.join_term("eqkey"), TProd(pair_rel, pair_rel), reg)
        assert denote(tt, (r, s)) == oracle_join(r, s, lambda ij: ij[0][0] == ij[1][0])

        tt = typecheck(relalg.proj_term("fst"), pair_rel, reg)
        assert denote(tt, r) == oracle_proj(r, lambda t: t[0])


def test_cross_bilinearity_and_aggregation_self_maintainability(bundle):
    # the combinator preconditions, checked not assumed
    for opname in ("cross", "count", "groupby_fst"):
        opdef = bundle.registry.ops[opname]
        for in_ty in opdef.sample_in_tys:
            rep = check_op_laws(opdef, in_ty, samples=60)
            assert rep.passed, (opname, rep.failures)


def test_incremental_join_matches_batch(bundle):
    b = relalg.register_relalg()
    b.registry.register_index_pred("eqkey2", lambda ij: ij[0][0] == ij[1][0])
    pair_rel = relalg.rel(("int", "int"))
    in_ty = TProd(pair_rel, pair_rel)
    tt = typecheck(relalg.join_term("eqkey2"), in_ty, b.registry)
    m = incrementalize(tt)
    rng = stable_rng(52, "join-incr")
    for _ in range(15):
        r = rand_relation(rng, 12)
        s = rand_relation(rng, 8)
        ds = []
        for _ in range(rng.randint(0, 4)):
            dr = {(rng.randrange(6), rng.randrange(40)): rng.choice((-1, 1, 2))}
            dside = rng.random() < 0.5
            ds.append((dr, {}) if dside else ({}, dr))
        got, _ = iter_changes(m, (r, s), ds)
        want = denote(tt, sum_changes(in_ty, (r, s), ds))
        assert got == want


def test_negative_multiplicities_encode_deletion(bundle):
    tt = typecheck(relalg.proj_term("fst"), relalg.rel(("int", "int")),
                   bundle.registry)
    m = incrementalize(tt)
    r = {(1, 10): 2, (2, 20): 1}
    y, c = m.init(r)
    assert y == {1: 2, 2: 1}
    dy, c = m.step({(1, 10): -2}, c)
    assert dy == {1: -2}
