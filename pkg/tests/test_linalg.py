"""Linear algebra catalog vs textbook oracles."""

import pytest

from deltic.calculus import denote, typecheck
from deltic.core import REAL, TBase, TProd, values_equal
from deltic.domains import linalg
from deltic.domains.containers import arr
from deltic.incr import cache_entry_count, incrementalize
from deltic.oracle import stable_rng

from helpers import (
    lists_to_mat, list_to_vec, mat_to_lists, oracle_dense, oracle_dot,
    oracle_mmmul, oracle_mvmul, vec_to_list,
)

R = TBase(REAL)


@pytest.fixture(scope="module")
def bundle():
    b = linalg.register_linalg()
    b.validate(samples=30)
    return b


def _rand_list(rng, n):
    return [round(rng.uniform(-4, 4), 3) for _ in range(n)]


def test_dot_example(bundle):
    tt = typecheck(linalg.dot_term(), TProd(arr(3, R), arr(3, R)), bundle.registry)
    got = denote(tt, ({0: 1.0, 1: 2.0, 2: 3.0}, {0: 4.0, 1: 5.0, 2: 6.0}))
    assert got == 32.0


def test_mvmul_example(bundle):
    in_ty = TProd(arr(2, arr(2, R)), arr(2, R))
    tt = typecheck(linalg.mvmul_term(2, 2), in_ty, bundle.registry)
    got = denote(tt, ({0: {0: 1.0, 1: 2.0}, 1: {0: 3.0, 1: 4.0}}, {0: 5.0, 1: 6.0}))
    assert got == {0: 17.0, 1: 39.0}


def test_dense_example(bundle):
    M = {0: {0: 1.0}, 1: {1: 1.0}}
    b = {0: -10.0}
    tt = typecheck(linalg.dense_term(2, 2, M, b), arr(2, R), bundle.registry)
    got = denote(tt, {0: 3.0, 1: 4.0})
    assert values_equal(arr(2, R), got, {1: 4.0}, 1e-12)  # relu(I·x+b) = [0, 4]


def test_catalog_matches_oracles_randomized(bundle):
    rng = stable_rng(41, "linalg-oracles")
    reg = bundle.registry
    for trial in range(30):
        n = rng.randint(1, 8)
        m = rng.randint(1, 8)
        k = rng.randint(1, 8)
        xs, ys = _rand_list(rng, n), _rand_list(rng, n)
        mat = [_rand_list(rng, m) for _ in range(n)]
        mat2 = [_rand_list(rng, k) for _ in range(m)]
        vec = _rand_list(rng, m)
        c = round(rng.uniform(-3, 3), 3)

        vady = typecheck(linalg.vadd_term(), TProd(arr(n, R), arr(n, R)), reg)
        got = denote(vady, (list_to_vec(xs), list_to_vec(ys)))
        assert values_equal(arr(n, R), got,
                            list_to_vec([a + b for a, b in zip(xs, ys)]), 1e-9)

        hod = typecheck(linalg.hadamard_term(), TProd(arr(n, R), arr(n, R)), reg)
        got = denote(hod, (list_to_vec(xs), list_to_vec(ys)))
        assert values_equal(arr(n, R), got,
                            list_to_vec([a * b for a, b in zip(xs, ys)]), 1e-9)

        dot = typecheck(linalg.dot_term(), TProd(arr(n, R), arr(n, R)), reg)
        assert abs(denote(dot, (list_to_vec(xs), list_to_vec(ys)))
                   - oracle_dot(xs, ys)) <= 1e-9 * max(1, abs(oracle_dot(xs, ys)))

        sv = typecheck(linalg.svmul_term(m), TProd(R, arr(m, R)), reg)
        got = denote(sv, (c, list_to_vec(vec)))
        assert values_equal(arr(m, R), got, list_to_vec([c * x for x in vec]), 1e-9)

        mv = typecheck(linalg.mvmul_term(n, m),
                       TProd(arr(n, arr(m, R)), arr(m, R)), reg)
        got = denote(mv, (lists_to_mat(mat), list_to_vec(vec)))
        assert values_equal(arr(n, R), got, list_to_vec(oracle_mvmul(mat, vec)), 1e-9)

        mm = typecheck(linalg.mmmul_term(n, m, k),
                       TProd(arr(n, arr(m, R)), arr(m, arr(k, R))), reg)
        got = denote(mm, (lists_to_mat(mat), lists_to_mat(mat2)))
        want = lists_to_mat(oracle_mmmul(mat, mat2))
        assert values_equal(arr(n, arr(k, R)), got, want, 1e-9)

        bias = _rand_list(rng, n)
        dtt = typecheck(linalg.dense_term(n, m, lists_to_mat(mat), list_to_vec(bias)),
                        arr(m, R), reg)
        got = denote(dtt, list_to_vec(vec))
        assert values_equal(arr(n, R), got,
                            list_to_vec(oracle_dense(mat, bias, vec)), 1e-9)

        madd = typecheck(linalg.madd_term(),
                         TProd(arr(n, arr(m, R)), arr(n, arr(m, R))), reg)
        mat3 = [_rand_list(rng, m) for _ in range(n)]
        got = denote(madd, (lists_to_mat(mat), lists_to_mat(mat3)))
        want = lists_to_mat([[a + b for a, b in zip(r1, r2)]
                             for r1, r2 in zip(mat, mat3)])
        assert values_equal(arr(n, arr(m, R)), got, want, 1e-9)


def test_program_builders_resolve_by_type(bundle):
    in_ty = TProd(arr(3, arr(2, R)), arr(2, R))
    term = bundle.registry.program("mvmul").build(in_ty)
    assert term is not None
    assert bundle.registry.program("mvmul").build(TProd(R, R)) is None


def test_dense_cache_holds_2nm_plus_n(bundle):
    # the incrementalized dense layer caches exactly 2nm + n scalars
    rng = stable_rng(42, "cache-count")
    n, m = 5, 7
    M = lists_to_mat([[rng.uniform(-1, 1) for _ in range(m)] for _ in range(n)])
    b = {i: rng.uniform(-1, 1) for i in range(n)}
    tt = typecheck(linalg.dense_term(n, m, M, b), arr(m, R), bundle.registry)
    machine = incrementalize(tt)
    x = {i: rng.uniform(-1, 1) for i in range(m)}
    _, cache = machine.init(x)
    assert cache_entry_count(machine.cache, cache) == 2 * n * m + n
