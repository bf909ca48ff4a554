"""Exhaustive search over every connected placement of a small roster.

Placements are generated shape first: all polyominoes of ``n`` cells up to
the roster's lattice symmetry group, then every distinct assignment of
module types to the cells of each shape, skipping assignments that a shape
automorphism maps onto a lexicographically smaller one.  Each canonical
class is therefore scored exactly once, in a vectorised pass; the leading
candidates are re-scored with the scalar evaluator the GA uses, so the two
optimisers report bit-comparable numbers.

:func:`enumerate_by_growth` is a much slower reference that grows partial
placements one module at a time and de-duplicates them by canonical form.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .dynamics import Evaluator, FitnessParams, fitness_values_batch, planar_sigma_batch
from .errors import TooLarge
from .ga import Individual
from .structure import (STEP_CELLS, ModuleSpec, aim_from_cells, canonical_form,
                        check_roster, identical_roster, key_from_cells, normalize_cells,
                        place_cells, symmetry_group)

N_CAP = 8


@dataclass
class EnumerationResult:
    count_raw: int
    count_canonical: int
    best: Individual
    wall_time: float

    def as_row(self) -> dict:
        return {"n": len(self.best.cells), "count_raw": self.count_raw,
                "count_canonical": self.count_canonical,
                "best_fitness": self.best.fitness.value, "seconds": self.wall_time}


@lru_cache(maxsize=None)
def fixed_polyominoes(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All translation-normalised connected n-cell sets, sorted."""
    if n < 1:
        raise ValueError("n must be >= 1")
    level = {((0, 0),)}
    for _ in range(n - 1):
        grown = set()
        for shape in level:
            occ = set(shape)
            for x, y in shape:
                for dx, dy in STEP_CELLS:
                    c = (x + dx, y + dy)
                    if c not in occ:
                        grown.add(tuple(sorted(normalize_cells(shape + (c,)))))
        level = grown
    return tuple(sorted(level))


def free_shapes(n: int, group) -> list[tuple[tuple[int, int], ...]]:
    """One representative (the lexicographically smallest image) per orbit under ``group``."""
    reps = set()
    for shape in fixed_polyominoes(n):
        reps.add(min(tuple(sorted(normalize_cells(shape, g))) for g in group))
    return sorted(reps)


def automorphisms(shape, group) -> list[np.ndarray]:
    """Cell permutations ``perm`` with ``shape[perm[j]]`` the image of ``shape[j]``."""
    index = {c: j for j, c in enumerate(shape)}
    out = []
    for g in group:
        img = normalize_cells(shape, g)
        if sorted(img) == list(shape):
            out.append(np.array([index[c] for c in img]))
    return out


def label_classes(roster: Sequence[ModuleSpec]) -> tuple[list[int], list[list[int]]]:
    """Class index per module and module ids per class; equal labels share a class."""
    seen: dict = {}
    members: list[list[int]] = []
    cls = []
    for m in roster:
        k = seen.setdefault(m.label, len(seen))
        if k == len(members):
            members.append([])
        members[k].append(m.id)
        cls.append(k)
    return cls, members


def distinct_labelings(classes: Sequence[int]) -> np.ndarray:
    """Every distinct arrangement of the class multiset, as rows in lexicographic order."""
    counts = np.bincount(np.asarray(classes))
    out: list[tuple[int, ...]] = []

    def rec(prefix, left):
        if len(prefix) == len(classes):
            out.append(tuple(prefix))
            return
        for k, c in enumerate(left):
            if c:
                left[k] -= 1
                prefix.append(k)
                rec(prefix, left)
                prefix.pop()
                left[k] += 1

    rec([], list(counts))
    return np.array(out, dtype=np.int64).reshape(len(out), len(classes))


def _minimal_under(labelings: np.ndarray, auts: Sequence[np.ndarray]) -> np.ndarray:
    """Mask of rows that no automorphism maps to a lexicographically smaller row."""
    keep = np.ones(len(labelings), dtype=bool)
    for perm in auts:
        if np.array_equal(perm, np.arange(len(perm))):
            continue
        # the cell shape[perm[j]] receives the label of shape[j]
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        image = labelings[:, inv]
        diff = image != labelings
        first = diff.argmax(axis=1)
        rows = np.arange(len(labelings))
        smaller = diff[rows, first] & (image[rows, first] < labelings[rows, first])
        keep &= ~smaller
    return keep


def _cells_for_modules(shape, labeling, members) -> list[tuple[int, int]]:
    n = len(shape)
    cells: list = [None] * n
    queues = [list(ids) for ids in members]
    for j, k in enumerate(labeling):
        cells[queues[k].pop(0) - 1] = shape[j]
    return cells


def _score_shape(shape, group, labelings, class_mass, inertia_sum, l, fit):
    auts = automorphisms(shape, group)
    keep = _minimal_under(labelings, auts)
    lab = labelings[keep]
    xy = np.asarray(shape, dtype=float) * l
    m = class_mass[lab]
    total = m.sum(axis=1, keepdims=True)
    x = xy[:, 0][None, :] - (m @ xy[:, 0])[:, None] / total
    y = xy[:, 1][None, :] - (m @ xy[:, 1])[:, None] / total
    values = fitness_values_batch(planar_sigma_batch(x, y, m, inertia_sum), fit)
    raw = len(labelings) * (len(group) // len(auts))
    return raw, int(keep.sum()), lab, values


def enumerate_all(roster: Sequence[ModuleSpec], l: float = 1.0,
                  fit: FitnessParams = FitnessParams(), n_cap: int = N_CAP,
                  workers: int = 1) -> EnumerationResult:
    """Score every canonical class of connected placements and return the best.

    ``count_raw`` counts labelled placements up to translation only (every
    orientation separately); ``count_canonical`` counts classes up to lattice
    symmetry as well.  Modules with equal (mass, inertia) are interchangeable
    in both counts.  Ties on the best fitness go to the first class in
    (shape, labelling) order, so the result does not depend on ``workers``.
    """
    check_roster(roster)
    n = len(roster)
    if n > n_cap:
        raise TooLarge(f"enumeration is capped at n = {n_cap} modules, got n = {n}")
    t0 = time.perf_counter()
    group = symmetry_group(roster)
    classes, members = label_classes(roster)
    class_mass = np.array([roster[ids[0] - 1].mass for ids in members])
    inertia_sum = np.array([m.inertia_diag for m in roster]).sum(axis=0)
    labelings = distinct_labelings(classes)
    shapes = free_shapes(n, group)

    def job(shape):
        return _score_shape(shape, group, labelings, class_mass, inertia_sum, l, fit)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(job, shapes))
    else:
        results = [job(s) for s in shapes]

    evaluator = Evaluator(roster, l, fit)
    count_raw = count_canonical = 0
    best = None
    top = max((float(v.max()) for _, _, _, v in results if len(v)), default=-math.inf)
    # the batch kernel only screens; near-ties are settled by the scalar evaluator
    margin = 1e-9 * abs(top) if math.isfinite(top) else 0.0
    for shape, (raw, canon, lab, values) in zip(shapes, results):
        count_raw += raw
        count_canonical += canon
        if math.isfinite(top):
            idx = np.flatnonzero(values >= top - margin)
        else:
            idx = [0] if best is None and len(lab) else []
        for i in idx:
            cells = _cells_for_modules(shape, lab[i], members)
            aim = aim_from_cells(cells)
            cells = tuple(place_cells(aim.rows))
            fv = evaluator(cells)
            if best is None or fv.value > best.fitness.value:
                best = Individual(aim, fv, cells)
    best.key = key_from_cells(best.cells, roster)
    return EnumerationResult(count_raw, count_canonical, best, time.perf_counter() - t0)


def count_check(n: int, n_cap: int = N_CAP) -> int:
    """Number of canonical classes for ``n`` identical modules (the free polyomino count)."""
    if n > n_cap:
        raise TooLarge(f"enumeration is capped at n = {n_cap} modules, got n = {n}")
    return enumerate_all(identical_roster(n), n_cap=n_cap).count_canonical


def enumerate_by_growth(roster: Sequence[ModuleSpec], l: float = 1.0,
                        fit: FitnessParams = FitnessParams(), n_cap: int = 5):
    """Reference enumeration: grow placements module by module, dedup by canonical form.

    Returns (number of classes, best fitness value, number of expansions).
    Exponentially slower than :func:`enumerate_all`; meant for cross-checks.
    """
    check_roster(roster)
    n = len(roster)
    if n > n_cap:
        raise TooLarge(f"reference enumeration is capped at n = {n_cap}, got n = {n}")
    group = symmetry_group(roster)
    classes, members = label_classes(roster)
    start = canonical_form([(0, 0)], [classes[0]], group)
    level = {start}
    expansions = 0
    for _ in range(n - 1):
        grown = set()
        for form in level:
            cells = [c for c, _ in form]
            used = np.bincount([k for _, k in form], minlength=len(members))
            occ = set(cells)
            free = sorted({(x + dx, y + dy) for x, y in cells for dx, dy in STEP_CELLS} - occ)
            for k, ids in enumerate(members):
                if used[k] == len(ids):
                    continue
                for c in free:
                    expansions += 1
                    grown.add(canonical_form(cells + [c], [lab for _, lab in form] + [k], group))
        level = grown
    evaluator = Evaluator(roster, l, fit)
    best = -math.inf
    for form in level:
        cells = _cells_for_modules([c for c, _ in form], [k for _, k in form], members)
        best = max(best, evaluator(cells).value)
    return len(level), best, expansions


def _all_classes(roster: Sequence[ModuleSpec]):
    """(cells in module order) for one representative of every canonical class; for tests."""
    group = symmetry_group(roster)
    classes, members = label_classes(roster)
    labelings = distinct_labelings(classes)
    for shape in free_shapes(len(roster), group):
        keep = _minimal_under(labelings, automorphisms(shape, group))
        for lab in labelings[keep]:
            yield _cells_for_modules(shape, lab, members)

