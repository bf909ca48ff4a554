"""Shared builders for tests: random feasible trees, fixed shapes and rosters."""

from modfly.structure import STEP_CELLS, Aim, ModuleSpec, opposite

PLUS_CELLS = [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)]
PLUS_AIM = Aim([[2, 3, 4, 5], [0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]])
GOLDEN_PLUS = -6.335292206135786


def chain_aim(n):
    rows = [[0, 0, 0, 0] for _ in range(n)]
    for i in range(1, n):
        rows[i - 1][0] = i + 1
        rows[i][2] = i
    return Aim(rows)


def random_tree(rng, n):
    """Random feasible tree grown on the lattice; module ids are shuffled, 1 stays the root."""
    ids = [1] + [int(v) + 2 for v in rng.permutation(n - 1)]
    rows = {i: [0, 0, 0, 0] for i in ids}
    where = {(0, 0): ids[0]}
    cell_of = {ids[0]: (0, 0)}
    for new in ids[1:]:
        while True:
            host = list(cell_of)[int(rng.integers(len(cell_of)))]
            p = int(rng.integers(4))
            x, y = cell_of[host]
            c = (x + STEP_CELLS[p][0], y + STEP_CELLS[p][1])
            if c not in where:
                break
        where[c] = new
        cell_of[new] = c
        rows[host][p] = new
        rows[new][opposite(p)] = host
    return Aim([rows[i] for i in range(1, n + 1)])


def random_roster(rng, n, isotropic=True):
    out = []
    for i in range(1, n + 1):
        m = float(rng.uniform(0.5, 6.0))
        jx = float(rng.uniform(0.01, 1.0))
        jy = jx if isotropic else float(rng.uniform(0.01, 1.0))
        out.append(ModuleSpec(i, m, (jx, jy, float(rng.uniform(0.01, 1.0)))))
    return out


def mass_roster(n, inertia=0.1):
    """Masses 1, 2, ..., n kg with isotropic inertia."""
    return [ModuleSpec(i, float(i), (inertia,) * 3) for i in range(1, n + 1)]


def transform_cells(cells, g):
    a, b, c, d = g
    return [(a * x + b * y, c * x + d * y) for x, y in cells]


