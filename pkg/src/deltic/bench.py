"""Desk-scale benchmarks: full reevaluation vs incremental update.

Inputs are generated pseudo-randomly from a printed seed; timings are
best-of-N on a monotonic clock.  Sizes mean the input dimension (dense,
mvmul), the tuple count (rel-proj, rel-join), or the tree depth (tree-sum).
The sparsity sweep varies the changed fraction at a fixed size and reports
the crossover fraction where stepping stops beating reevaluation.
"""

from __future__ import annotations

import csv
import gc
import math
import random
import time
from dataclasses import dataclass

from . import calculus as ca
from . import incr
from .core import REAL, TBase, TProd
from .domains import linalg, relalg, trees
from .domains.containers import arr

BENCH_IDS = ("dense", "mvmul", "mvmul-sparsity", "rel-proj", "rel-join", "tree-sum")

R = TBase(REAL)


@dataclass
class BenchSpec:
    bench: str
    sizes: tuple = ()
    fraction: float = 0.01
    reps: int = 5
    seed: int = 42

    def __post_init__(self):
        if self.bench not in BENCH_IDS:
            raise ValueError(f"unknown benchmark {self.bench!r}; have {BENCH_IDS}")
        if not self.sizes:
            self.sizes = _DEFAULT_SIZES[self.bench]
        if any(s <= 0 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError("fraction must be in (0, 1]")


_DEFAULT_SIZES = {
    "dense": (100, 200, 400, 800),
    "mvmul": (100, 200, 400, 800),
    "mvmul-sparsity": (500,),
    "rel-proj": (1000, 10000),
    "rel-join": (1000, 10000),
    "tree-sum": (10, 14),
}

CSV_HEADER = ("bench", "size", "fraction", "full_eval_s", "incr_step_s",
              "ratio", "cache_entries")


@dataclass
class BenchRow:
    bench: str
    size: int
    fraction: float
    full_eval_s: float
    incr_step_s: float
    ratio: float
    cache_entries: int

    def as_list(self):
        return [self.bench, self.size, f"{self.fraction:g}",
                f"{self.full_eval_s:.6f}", f"{self.incr_step_s:.6f}",
                f"{self.ratio:.4f}", self.cache_entries]


def _best_of(fn, reps):
    """Best-of-N on a monotonic clock, with the GC paused while timing."""
    best = math.inf
    gc_was_on = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
    finally:
        if gc_was_on:
            gc.enable()
    return best


def _time_steps(machine, cache, make_change, reps):
    """Time `reps` successive steps (machine state evolves); best-of."""
    best = math.inf
    gc_was_on = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for _ in range(reps):
            dx = make_change()
            t0 = time.perf_counter()
            _, cache = machine.step(dx, cache)
            best = min(best, time.perf_counter() - t0)
    finally:
        if gc_was_on:
            gc.enable()
    return best, cache


def _rand_vec(rng, n):
    return {i: rng.uniform(-1.0, 1.0) for i in range(n)}


def _rand_mat(rng, n, m):
    return {i: _rand_vec(rng, m) for i in range(n)}


def _vec_change(rng, n, fraction):
    k = max(1, math.ceil(fraction * n))
    idxs = rng.sample(range(n), min(k, n))
    return {i: rng.uniform(-1.0, 1.0) for i in idxs}


def _measure_term(tt, value, machine, make_change, reps):
    full = _best_of(lambda: ca.denote(tt, value), reps)
    _, cache = machine.init(value)
    step, cache = _time_steps(machine, cache, make_change, reps)
    entries = incr.cache_entry_count(machine.cache, cache)
    return full, step, entries


def bench_dense(spec: BenchSpec):
    bundle = linalg.register_linalg()
    rows = []
    for n in spec.sizes:
        rng = random.Random(f"{spec.seed}:dense:{n}")
        M = _rand_mat(rng, n, n)
        b = _rand_vec(rng, n)
        x = _rand_vec(rng, n)
        tt = ca.typecheck(linalg.dense_term(n, n, M, b), arr(n, R), bundle.registry)
        machine = incr.incrementalize(tt)
        full, step, entries = _measure_term(
            tt, x, machine, lambda: _vec_change(rng, n, spec.fraction), spec.reps)
        rows.append(BenchRow("dense", n, spec.fraction, full, step,
                             step / full, entries))
    return rows, {}


def bench_mvmul(spec: BenchSpec):
    bundle = linalg.register_linalg()
    rows = []
    for n in spec.sizes:
        rng = random.Random(f"{spec.seed}:mvmul:{n}")
        M = _rand_mat(rng, n, n)
        v = _rand_vec(rng, n)
        in_ty = TProd(arr(n, arr(n, R)), arr(n, R))
        tt = ca.typecheck(linalg.mvmul_term(n, n), in_ty, bundle.registry)
        machine = incr.incrementalize(tt)
        full, step, entries = _measure_term(
            tt, (M, v), machine,
            lambda: ({}, _vec_change(rng, n, spec.fraction)), spec.reps)
        rows.append(BenchRow("mvmul", n, spec.fraction, full, step,
                             step / full, entries))
    return rows, {}


def bench_mvmul_sparsity(spec: BenchSpec):
    bundle = linalg.register_linalg()
    n = spec.sizes[0]
    rng = random.Random(f"{spec.seed}:sparsity:{n}")
    M = _rand_mat(rng, n, n)
    v = _rand_vec(rng, n)
    in_ty = TProd(arr(n, arr(n, R)), arr(n, R))
    tt = ca.typecheck(linalg.mvmul_term(n, n), in_ty, bundle.registry)
    full = _best_of(lambda: ca.denote(tt, (M, v)), spec.reps)
    rows = []
    crossover = None
    for frac in [f / 10 for f in range(1, 11)]:
        machine = incr.incrementalize(tt)
        _, cache = machine.init((M, v))
        step, cache = _time_steps(
            machine, cache, lambda: ({}, _vec_change(rng, n, frac)), spec.reps)
        entries = incr.cache_entry_count(machine.cache, cache)
        rows.append(BenchRow("mvmul-sparsity", n, frac, full, step,
                             step / full, entries))
        if crossover is None and step >= full:
            crossover = frac
    return rows, {"crossover": crossover}


def _rand_relation(rng, size, key_range):
    rel = {}
    while len(rel) < size:
        rel[(rng.randrange(key_range), rng.randrange(10 * size))] = rng.randint(1, 3)
    return rel


def _rel_change(rng, rel_value, size, fraction, key_range):
    k = max(1, math.ceil(fraction * size))
    delta = {}
    keys = list(rel_value)
    for _ in range(k):
        if keys and rng.random() < 0.5:
            t = rng.choice(keys)
            delta[t] = -rel_value[t]
        else:
            delta[(rng.randrange(key_range), rng.randrange(10 * size))] = 1
    return delta


def bench_rel_proj(spec: BenchSpec):
    bundle = relalg.register_relalg()
    rows = []
    for size in spec.sizes:
        rng = random.Random(f"{spec.seed}:proj:{size}")
        key_range = max(2, size // 10)
        value = _rand_relation(rng, size, key_range)
        in_ty = relalg.rel(("int", "int"))
        tt = ca.typecheck(relalg.proj_term("fst"), in_ty, bundle.registry)
        machine = incr.incrementalize(tt)
        full, step, entries = _measure_term(
            tt, value, machine,
            lambda: _rel_change(rng, value, size, spec.fraction, key_range),
            spec.reps)
        rows.append(BenchRow("rel-proj", size, spec.fraction, full, step,
                             step / full, entries))
    return rows, {}


JOIN_RIGHT_SIZE = 20


def bench_rel_join(spec: BenchSpec):
    bundle = relalg.register_relalg()
    bundle.registry.register_index_pred(
        "bench_eq_key", lambda ij: ij[0][0] == ij[1][0])
    rows = []
    for size in spec.sizes:
        rng = random.Random(f"{spec.seed}:join:{size}")
        key_range = max(2, size // 10)
        left = _rand_relation(rng, size, key_range)
        right = _rand_relation(rng, JOIN_RIGHT_SIZE, key_range)
        in_ty = TProd(relalg.rel(("int", "int")), relalg.rel(("int", "int")))
        tt = ca.typecheck(relalg.join_term("bench_eq_key"), in_ty, bundle.registry)
        machine = incr.incrementalize(tt)
        full, step, entries = _measure_term(
            tt, (left, right), machine,
            lambda: (_rel_change(rng, left, size, spec.fraction, key_range), {}),
            spec.reps)
        rows.append(BenchRow("rel-join", size, spec.fraction, full, step,
                             step / full, entries))
    return rows, {}


def complete_tree(depth, branching=2, rng=None):
    """Values for a complete rose tree as an int path map."""
    rng = rng or random.Random(0)
    out = {}

    def grow(path, d):
        out[path] = rng.randint(1, 9)
        if d == 0:
            return
        for c in range(branching):
            grow(path + (c,), d - 1)

    grow((), depth)
    return out


def bench_tree_sum(spec: BenchSpec):
    bundle = trees.register_trees()
    rows = []
    for depth in spec.sizes:
        rng = random.Random(f"{spec.seed}:tree:{depth}")
        value = complete_tree(depth, rng=rng)
        paths = list(value)
        tt = ca.typecheck(trees.tree_sum_term(), trees.INT_TREE, bundle.registry)
        machine = incr.incrementalize(tt)

        def make_change():
            k = max(1, math.ceil(spec.fraction * len(paths)))
            return {p: rng.randint(1, 5) for p in rng.sample(paths, k)}

        full, step, entries = _measure_term(tt, value, machine, make_change,
                                            spec.reps)
        rows.append(BenchRow("tree-sum", depth, spec.fraction, full, step,
                             step / full, entries))
    return rows, {}


_RUNNERS = {
    "dense": bench_dense,
    "mvmul": bench_mvmul,
    "mvmul-sparsity": bench_mvmul_sparsity,
    "rel-proj": bench_rel_proj,
    "rel-join": bench_rel_join,
    "tree-sum": bench_tree_sum,
}


def run_bench(spec: BenchSpec):
    return _RUNNERS[spec.bench](spec)


def write_csv(rows, fh):
    w = csv.writer(fh)
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.as_list())
