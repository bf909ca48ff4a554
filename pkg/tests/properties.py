"""Randomised property checks, 1000 hypothesis cases each.

Collected twice: ``test_properties.py`` runs them as ordinary tests and the
acceptance suite calls them directly to report one line per property.
"""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from modfly.dynamics import d_bar, fitness, singular_values_3xk
from modfly.ga import crossover
from modfly.sim import (Plant, RigidState, SimConfig, Trajectory, allocate, forward_force,
                        inverse_kinematics, track)
from modfly.structure import (check_feasible, layout_from_cells, place_cells,
                              pos_tree_search, validate_aim)

from helpers import random_roster, random_tree, transform_cells
from oracles import D4, jacobi_singular_values

CASES = 1000
cases = settings(max_examples=CASES)
seeds = st.integers(0, 2 ** 32 - 1)
finite = st.floats(-1e3, 1e3, allow_nan=False)


def _structure(seed, n_min=1, n_max=14, isotropic=True):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    return rng, random_tree(rng, n), random_roster(rng, n, isotropic)


@cases
@given(seeds, st.floats(0.05, 20.0))
def centering(seed, l):
    _, aim, roster = _structure(seed, isotropic=False)
    lay = pos_tree_search(aim, roster, l)
    com = (lay.masses[:, None] * lay.positions).sum(axis=0) / lay.masses.sum()
    assert np.abs(com).max() <= 1e-12 * l
    assert not lay.positions[:, 2].any()


@cases
@given(seeds)
def crossover_closure(seed):
    rng, aim, _ = _structure(seed, n_min=2)
    child = crossover(aim, rng)
    assert validate_aim(child).ok and check_feasible(child)
    assert child.n == aim.n
    # every module appears exactly once and the tree keeps n - 1 docks
    cells = place_cells(child.rows)
    assert len(set(cells)) == aim.n
    assert len(child.edges()) == aim.n - 1
    assert {e[0] for e in child.edges()} | {e[2] for e in child.edges()} == set(range(1, aim.n + 1))


@cases
@given(seeds, st.sampled_from(D4), st.floats(0.1, 5.0))
def fitness_symmetry(seed, g, l):
    _, aim, roster = _structure(seed)
    cells = place_cells(aim.rows)
    a = fitness(layout_from_cells(cells, roster, l)).value
    b = fitness(layout_from_cells(transform_cells(cells, g), roster, l)).value
    if math.isinf(a) or math.isinf(b):
        assert a == b
    else:
        assert abs(a - b) <= 1e-9 * abs(a)


@cases
@given(seeds, st.booleans())
def kernel_vs_oracle(seed, from_structure):
    rng = np.random.default_rng(seed)
    if from_structure:
        n = int(rng.integers(1, 14))
        m = d_bar(pos_tree_search(random_tree(rng, n), random_roster(rng, n, False)))
    else:
        k = int(rng.integers(1, 12))
        m = rng.normal(size=(3, k)) * 10.0 ** rng.uniform(-4, 4, size=(3, 1))
    got, ref = singular_values_3xk(m), jacobi_singular_values(m)
    for g, r in zip(got, ref):
        assert abs(g - r) <= 1e-10 * r + 1e-15 * ref[0]


@cases
@given(finite, finite, finite)
def ik_round_trip(fx, fy, fz):
    f = np.array([fx, fy, fz])
    c = inverse_kinematics(f)
    assert c.thrust >= 0
    if c.thrust > 0:
        assert np.linalg.norm(forward_force(c) - f) <= 1e-10 * max(1.0, c.thrust)
    else:
        assert np.linalg.norm(f) < 1e-9


@cases
@given(seeds)
def allocation_residual(seed):
    rng, aim, roster = _structure(seed, n_min=3)
    lay = pos_tree_search(aim, roster, float(rng.uniform(0.2, 3.0)))
    plant = Plant(lay)
    if plant.rank() < 6:
        return
    u = rng.normal(size=6) * 10.0 ** rng.uniform(-2, 3)
    F = allocate(u, lay, plant=plant)
    assert np.linalg.norm(plant.P @ F.reshape(-1) - u) <= 1e-10 * np.linalg.norm(u)


@cases
@given(seeds)
def rotational_energy_bound(seed):
    rng, aim, roster = _structure(seed, n_min=3, n_max=10, isotropic=False)
    lay = pos_tree_search(aim, roster)
    if not math.isfinite(fitness(lay).value):
        return
    traj = Trajectory(pos_amp=tuple(rng.uniform(0, 1, 3)), pos_freq=tuple(rng.uniform(0, 0.5, 3)),
                      att_amp=tuple(rng.uniform(0, 0.4, 3)), att_freq=tuple(rng.uniform(0, 0.5, 3)))
    start = RigidState(position=tuple(rng.uniform(-0.2, 0.2, 3)),
                       attitude=tuple(rng.uniform(-0.2, 0.2, 3)),
                       omega=tuple(rng.uniform(-0.5, 0.5, 3)))
    res = track(lay, traj, SimConfig(duration=0.03, allocation="rotational"), initial=start)
    assert res.bound_ratio <= 1 + 1e-9


PROPERTIES = {
    "centering invariant": centering,
    "crossover closure and multiset conservation": crossover_closure,
    "fitness invariance under lattice symmetries": fitness_symmetry,
    "singular-value kernel vs oracle": kernel_vs_oracle,
    "inverse-kinematics round trip": ik_round_trip,
    "allocation residual": allocation_residual,
    "rotational energy bound during simulation": rotational_energy_bound,
}
