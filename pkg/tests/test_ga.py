import math

import numpy as np
import pytest

from modfly.dynamics import FitnessParams, FitnessValue
from modfly.enumeration import _all_classes
from modfly.errors import InvalidParams, Stalled
from modfly.ga import (GaParams, Individual, _crossover_once, crossover, evolve, initialize,
                       pop_select, tournament_select)
from modfly.structure import (Aim, canonical_key, check_feasible, dfs_parents, dfs_tree_split,
                              free_faces, identical_roster, key_from_cells, place_cells,
                              reconnect, validate_aim)

from helpers import PLUS_CELLS, chain_aim, mass_roster, random_tree


def _ind(value, tag=0):
    fv = FitnessValue(value, 0.0, 0.0, (0.0, 0.0, 0.0), 3 if math.isfinite(value) else 0)
    return Individual(Aim([[0, 0, 0, 0]]), fv, ((tag, 0),))


def test_params_validation():
    GaParams().validate()
    for bad in (dict(pop_size=0), dict(t_size=0), dict(c_size=0), dict(k_converge=0),
                dict(cross_p=1.5), dict(g_size=-1), dict(seed=-1)):
        with pytest.raises(InvalidParams):
            GaParams(**bad).validate()


def test_initialize_chains_are_minus_inf():
    pop = initialize(5, identical_roster(5), 10, np.random.default_rng(0))
    assert len(pop) == 10
    for ind in pop:
        assert validate_aim(ind.aim).ok
        assert ind.fitness.value == -math.inf


def test_initialize_single_module():
    pop = initialize(1, identical_roster(1), 3, np.random.default_rng(0))
    assert [p.aim for p in pop] == [Aim([[0, 0, 0, 0]])] * 3


def test_population_of_one_runs():
    best, trace = evolve(identical_roster(4), GaParams(pop_size=1, g_size=5, t_size=2, c_size=2))
    assert trace.generations >= 1 and validate_aim(best.aim).ok


def test_tournament_equal_fitness_returns_sampled_member():
    rng = np.random.default_rng(1)
    seen = {tournament_select([1.0] * 10, 2, rng) for _ in range(200)}
    assert seen <= set(range(10)) and len(seen) > 5


def test_tournament_finite_beats_minus_inf():
    fit = [-math.inf] * 9 + [-3.0]
    rng = np.random.default_rng(2)
    picks = [tournament_select(fit, 2, rng) for _ in range(500)]
    # index 9 is sampled in about 20% of tournaments and must win every one of them
    assert 0.1 < picks.count(9) / 500 < 0.3


def test_tournament_exhaustive_is_argmax():
    fit = [1.0, 5.0, 2.0, 5.0]
    assert tournament_select(fit, 4, np.random.default_rng(0)) == 1
    assert tournament_select(fit, 10, np.random.default_rng(0)) == 1


def test_pop_select_examples():
    cands = [_ind(v, i) for i, v in enumerate([5.0, 4.0, 3.0])]
    assert pop_select(cands, 3) == cands
    infs = [_ind(-math.inf, i) for i in range(5)]
    assert pop_select(infs, 3) == infs[:3]
    mixed = [_ind(v, i) for i, v in enumerate([1.0, -math.inf, 7.0, 3.0, 3.0, -2.0])]
    chosen = pop_select(mixed, 3)
    rejected = [c for c in mixed if c not in chosen]
    assert min(c.fitness.value for c in chosen) >= max(c.fitness.value for c in rejected)
    assert [c.cells[0][0] for c in chosen] == [2, 3, 4]


def test_pop_select_dedup():
    roster = identical_roster(2)
    fv = FitnessValue(-1.0, 0, 0, (0, 0, 0), 3)
    a = Individual(Aim([[2, 0, 0, 0], [0, 0, 1, 0]]), fv, ((0, 0), (1, 0)))
    b = Individual(Aim([[0, 2, 0, 0], [0, 0, 0, 1]]), fv, ((0, 0), (0, 1)))
    assert len(pop_select([a, b], 2)) == 2
    assert pop_select([a, b], 2, dedup=True, roster=roster) == [a]


def test_crossover_two_modules():
    rng = np.random.default_rng(3)
    parent = chain_aim(2)
    seen = {tuple(place_cells(crossover(parent, rng).rows)[1]) for _ in range(200)}
    assert seen == {(1, 0), (0, 1), (-1, 0), (0, -1)}


def test_crossover_branches_chain():
    rng = np.random.default_rng(4)
    children = [crossover(chain_aim(5), rng) for _ in range(200)]
    assert any(len({c[1] for c in place_cells(ch.rows)}) > 1
               and len({c[0] for c in place_cells(ch.rows)}) > 1 for ch in children)
    for ch in children:
        assert validate_aim(ch).ok and check_feasible(ch)


def _reference_crossover(aim, u):
    """One crossover attempt built from the public split/reconnect primitives."""
    n = aim.n
    r = 2 + int(u[0] * (n - 1))
    sp = dfs_tree_split(aim, r)
    L = sp.left_faces[int(u[1] * len(sp.left_faces))]
    R = sp.right_faces[int(u[2] * len(sp.right_faces))]
    child = reconnect(sp, L, R)
    return child if check_feasible(child) else None


def test_fast_crossover_matches_reference():
    rng = np.random.default_rng(5)
    for _ in range(400):
        n = int(rng.integers(2, 12))
        aim = random_tree(rng, n)
        rows, cells = aim.rows, place_cells(aim.rows)
        parent, pface = dfs_parents(rows)
        for _ in range(5):
            u = rng.random(3)
            fast = _crossover_once(rows, cells, parent, pface, free_faces(rows), u)
            ref = _reference_crossover(aim, u)
            if ref is None:
                assert fast is None
            else:
                assert Aim(fast[0]) == ref
                assert list(fast[1]) == place_cells(ref.rows)


def test_crossover_stalls_without_budget():
    with pytest.raises(Stalled):
        crossover(chain_aim(4), np.random.default_rng(0), max_attempts=0)


def test_crossover_reaches_every_class():
    roster = mass_roster(4)
    targets = {key_from_cells(c, roster) for c in _all_classes(roster)}
    rng = np.random.default_rng(6)
    aim, seen = chain_aim(4), set()
    for _ in range(10_000):
        aim = crossover(aim, rng)
        seen.add(canonical_key(aim, roster))
        if seen >= targets:
            break
    assert seen == targets


def test_evolve_finds_plus():
    roster = identical_roster(5)
    best, trace = evolve(roster, GaParams(pop_size=200, seed=0))
    assert trace.converged
    plus_key = key_from_cells(PLUS_CELLS, roster)
    assert best.key == plus_key


def test_evolve_elitism_and_closure():
    for seed in range(3):
        roster = mass_roster(6)
        best, trace = evolve(roster, GaParams(pop_size=60, t_size=10, c_size=5, seed=seed))
        b = trace.best_fitness
        assert all(y >= x for x, y in zip(b, b[1:]))
        assert best.fitness.value == b[-1]
        for aim in trace.best_aims:
            assert validate_aim(aim).ok and check_feasible(aim) and aim.n == 6


def test_evolve_deterministic_and_thread_independent():
    roster = mass_roster(7)
    ga = GaParams(pop_size=100, t_size=20, c_size=10, g_size=15, seed=11)
    b1, t1 = evolve(roster, ga)
    b2, t2 = evolve(roster, ga)
    b4, t4 = evolve(roster, ga, threads=4)
    assert t1.best_fitness == t2.best_fitness == t4.best_fitness
    assert t1.mean_fitness == t4.mean_fitness and t1.retries == t4.retries
    assert b1.aim == b2.aim == b4.aim


def test_evolve_respects_fitness_params():
    roster = identical_roster(5)
    best, _ = evolve(roster, GaParams(pop_size=100, seed=2), FitnessParams(lambda1=0.0))
    assert best.fitness.value == pytest.approx(-best.fitness.sigma_term)
