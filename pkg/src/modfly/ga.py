"""Genetic algorithm over AIM chromosomes.

One generation: ``t_size`` tournament selections, each selected parent
producing ``c_size`` children (tree crossover with probability ``cross_p``,
otherwise a verbatim copy), then the best ``pop_size`` of parents plus
children survive.  The run stops once the best fitness has not changed for
``k_converge`` consecutive generations.
"""

from __future__ import annotations

import math
import time
from bisect import insort
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import Evaluator, FitnessParams, FitnessValue
from .errors import InvalidParams, Stalled
from .structure import (STEP_CELLS, Aim, ModuleSpec, check_roster, dfs_parents,
                        free_faces, key_from_cells, opposite, place_cells,
                        random_chain, rotate_rows, subtree)

MAX_CROSSOVER_ATTEMPTS = 1000
_CACHE_LIMIT = 200_000


@dataclass(frozen=True)
class GaParams:
    pop_size: int = 1000
    g_size: int = 100
    t_size: int = 100
    c_size: int = 30
    cross_p: float = 0.95
    k_converge: int = 10
    seed: int = 0
    tournament_k: int = 2
    dedup: bool = False

    def validate(self):
        for name in ("pop_size", "t_size", "c_size", "k_converge", "tournament_k"):
            if getattr(self, name) < 1:
                raise InvalidParams(f"{name} must be >= 1")
        if self.g_size < 0:
            raise InvalidParams("g_size must be >= 0")
        if not 0.0 <= self.cross_p <= 1.0:
            raise InvalidParams("cross_p must lie in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParams("seed must be a 64-bit unsigned integer")


@dataclass(eq=False)
class Individual:
    aim: Aim
    fitness: FitnessValue
    cells: tuple
    key: bytes | None = None
    _tree: tuple | None = field(default=None, repr=False)

    def tree(self):
        """(parent ids, parent faces, free faces), computed once per individual."""
        if self._tree is None:
            rows = self.aim.rows
            self._tree = dfs_parents(rows) + (free_faces(rows),)
        return self._tree


@dataclass
class GaTrace:
    best_fitness: list = field(default_factory=list)
    mean_fitness: list = field(default_factory=list)
    retries: list = field(default_factory=list)
    millis: list = field(default_factory=list)
    best_aims: list = field(default_factory=list)
    converged: bool = False

    @property
    def generations(self) -> int:
        return len(self.best_fitness) - 1

    def record(self, pop, retries, millis):
        finite = [ind.fitness.value for ind in pop if ind.fitness.finite]
        self.best_fitness.append(pop[0].fitness.value)
        self.mean_fitness.append(math.fsum(finite) / len(finite) if finite else math.nan)
        self.retries.append(retries)
        self.millis.append(millis)
        self.best_aims.append(pop[0].aim)


def _sort_key(ind):
    return -ind.fitness.value


def pop_select(candidates: Sequence[Individual], pop_size: int, dedup: bool = False,
               roster: Sequence[ModuleSpec] | None = None) -> list[Individual]:
    """Top ``pop_size`` by fitness; ties keep input order.  Optionally one per canonical class."""
    ranked = sorted(candidates, key=_sort_key)
    if not dedup:
        return ranked[:pop_size]
    if roster is None:
        raise ValueError("dedup needs the roster to build canonical keys")
    out, seen = [], set()
    for ind in ranked:
        if ind.key is None:
            ind.key = key_from_cells(ind.cells, roster)
        if ind.key in seen:
            continue
        seen.add(ind.key)
        out.append(ind)
        if len(out) == pop_size:
            break
    return out


def tournament_select(fitness: Sequence[float], k: int, rng: np.random.Generator) -> int:
    """Index of the fittest among ``min(k, len)`` distinct uniformly drawn members.

    Ties go to the lowest index, so an exhaustive tournament returns the
    first global maximum.
    """
    n = len(fitness)
    if n == 0:
        raise ValueError("empty population")
    if k >= n:
        pool = range(n)
    else:
        chosen: set[int] = set()
        while len(chosen) < k:
            chosen.add(int(rng.random() * n))
        pool = chosen
    return max(pool, key=lambda i: (fitness[i], -i))


def _crossover_once(rows, cells, parent, pface, free, u):
    """One crossover attempt driven by three uniforms in [0, 1).

    Returns (rows, cells) of the child or None when the re-docked right
    fragment overlaps the left one.  Equivalent to split -> reconnect ->
    feasibility check, but places only the moved fragment.
    """
    n = len(rows)
    r = 2 + int(u[0] * (n - 1))
    par, fp = parent[r - 1], pface[r - 1]
    fr = opposite(fp)
    right = subtree(rows, r, par)
    in_right = [False] * (n + 1)
    for k in right:
        in_right[k] = True

    lf = [f for f in free if not in_right[f[0]]]
    rf = [f for f in free if in_right[f[0]]]
    insort(lf, (par, fp))
    insort(rf, (r, fr))
    li, lp = lf[int(u[1] * len(lf))]
    ri, rp = rf[int(u[2] * len(rf))]

    target = opposite(lp)
    j = (target - rp) % 4
    ax, ay = cells[li - 1]
    ax += STEP_CELLS[lp][0]
    ay += STEP_CELLS[lp][1]
    cx, cy = cells[ri - 1]
    occupied = {cells[i - 1] for i in range(1, n + 1) if not in_right[i]}
    new_cells = list(cells)
    for k in right:
        dx, dy = cells[k - 1][0] - cx, cells[k - 1][1] - cy
        for _ in range(j):
            dx, dy = -dy, dx
        c = (ax + dx, ay + dy)
        if c in occupied:
            return None
        new_cells[k - 1] = c

    new_rows = [list(row) for row in rows]
    new_rows[par - 1][fp] = 0
    new_rows[r - 1][fr] = 0
    rotate_rows(new_rows, right, j)
    new_rows[li - 1][lp] = ri
    new_rows[ri - 1][target] = li
    return new_rows, new_cells


def _crossover_cells(rows, cells, tree, rng, max_attempts=MAX_CROSSOVER_ATTEMPTS):
    parent, pface, free = tree
    for attempt in range(1, max_attempts + 1):
        out = _crossover_once(rows, cells, parent, pface, free, rng.random(3))
        if out is not None:
            return out[0], out[1], attempt
    raise Stalled(f"no feasible child after {max_attempts} crossover attempts")


def crossover(parent: Aim, rng: np.random.Generator,
              max_attempts: int = MAX_CROSSOVER_ATTEMPTS) -> Aim:
    """Cut a random non-root edge, re-dock the split-off subtree at random free faces.

    Retries until the new placement has no overlap.  Each attempt draws three
    uniforms: split module, left face, right face.
    """
    if parent.n < 2:
        raise ValueError("crossover needs at least two modules")
    rows = parent.rows
    cells = place_cells(rows)
    tree = dfs_parents(rows) + (free_faces(rows),)
    new_rows, _, _ = _crossover_cells(rows, cells, tree, rng, max_attempts)
    return Aim.trusted(new_rows)


def _cells_key(cells):
    return tuple(v for c in cells for v in c)


class _Scorer:
    """Fitness lookup with a bounded memo; results never depend on the memo."""

    def __init__(self, evaluator: Evaluator, threads: int = 1):
        self.evaluator = evaluator
        self.threads = max(1, int(threads))
        self.cache: dict = {}

    def score(self, cell_lists):
        keys = [_cells_key(c) for c in cell_lists]
        todo, todo_cells = [], []
        pending = set()
        for k, c in zip(keys, cell_lists):
            if k not in self.cache and k not in pending:
                pending.add(k)
                todo.append(k)
                todo_cells.append(c)
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                values = list(ex.map(self.evaluator.from_flat, todo))
        else:
            values = [self.evaluator.from_flat(k) for k in todo]
        result = dict(zip(todo, values))
        out = [result[k] if k in result else self.cache[k] for k in keys]
        if len(self.cache) + len(todo) > _CACHE_LIMIT:
            self.cache.clear()
        self.cache.update(result)
        return out


def initialize(n: int, roster: Sequence[ModuleSpec], pop_size: int, rng: np.random.Generator,
               evaluator: Evaluator | None = None, scorer: _Scorer | None = None) -> list[Individual]:
    """``pop_size`` random serial chains with their fitness."""
    if n < 1 or len(roster) != n:
        raise ValueError("roster must hold n >= 1 modules")
    scorer = scorer or _Scorer(evaluator or Evaluator(roster))
    aims = [random_chain(n, rng) for _ in range(pop_size)]
    cells = [tuple(place_cells(a.rows)) for a in aims]
    fits = scorer.score(cells)
    return [Individual(a, f, c) for a, f, c in zip(aims, fits, cells)]


def evolve(roster: Sequence[ModuleSpec], ga: GaParams = GaParams(),
           fit: FitnessParams = FitnessParams(), l: float = 1.0,
           threads: int = 1) -> tuple[Individual, GaTrace]:
    """Run the GA to convergence or ``g_size`` generations; deterministic in ``ga.seed``.

    ``threads`` only parallelises fitness evaluation; selection, crossover and
    all random draws stay on one serial stream, so results do not depend on it.
    """
    ga.validate()
    check_roster(roster)
    n = len(roster)
    rng = np.random.default_rng(ga.seed)
    scorer = _Scorer(Evaluator(roster, l, fit), threads)
    trace = GaTrace()

    t0 = time.perf_counter()
    pop = pop_select(initialize(n, roster, ga.pop_size, rng, scorer=scorer),
                     ga.pop_size, ga.dedup, roster)
    trace.record(pop, 0, (time.perf_counter() - t0) * 1e3)

    stall = 0
    for _ in range(ga.g_size):
        t0 = time.perf_counter()
        fitness = [ind.fitness.value for ind in pop]
        children: list = []
        pending_rows, pending_cells, slots = [], [], []
        retries = 0
        for _ in range(ga.t_size):
            parent = pop[tournament_select(fitness, ga.tournament_k, rng)]
            for _ in range(ga.c_size):
                if n >= 2 and rng.random() < ga.cross_p:
                    rows, cells, attempts = _crossover_cells(
                        parent.aim.rows, parent.cells, parent.tree(), rng)
                    retries += attempts - 1
                    slots.append(len(children))
                    children.append(None)
                    pending_rows.append(rows)
                    pending_cells.append(tuple(cells))
                else:
                    children.append(parent)
        for slot, rows, cells, fv in zip(slots, pending_rows, pending_cells,
                                         scorer.score(pending_cells)):
            children[slot] = Individual(Aim.trusted(rows), fv, cells)

        prev_best = pop[0].fitness.value
        pop = pop_select(pop + children, ga.pop_size, ga.dedup, roster)
        trace.record(pop, retries, (time.perf_counter() - t0) * 1e3)
        stall = stall + 1 if pop[0].fitness.value == prev_best else 0
        if stall >= ga.k_converge:
            trace.converged = True
            break

    best = pop[0]
    if best.key is None:
        best.key = key_from_cells(best.cells, roster)
    return best, trace
