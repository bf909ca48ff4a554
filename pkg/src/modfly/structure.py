"""Tree (AIM) representation of a flight structure and its surgery primitives.

Each module is a square footprint with four docking faces indexed 0..3,
pointing +x, +y, -x, -y.  An assembly incidence matrix (AIM) has one row per
module; ``rows[i][p] == j`` means face ``p`` of module ``i + 1`` is docked to
module ``j`` (ids are 1-based, 0 marks a free face).  Module 1 is always the
root of the tree.

Placement works on the integer lattice ("cells"); metric positions are only
formed at the very end, by scaling with the edge length and subtracting the
mass-weighted centroid.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidAim, Overlap, RootSplit

N_FACES = 4
# lattice offset of the neighbour docked at each face: +x, +y, -x, -y
STEP_CELLS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def opposite(face: int) -> int:
    return (face + 2) % 4


def step_matrix(l: float = 1.0) -> np.ndarray:
    """3x4 matrix of neighbour offsets, one column per face, scaled by ``l``."""
    step = np.array([[1, 0, -1, 0], [0, 1, 0, -1], [0, 0, 0, 0]], dtype=float)
    return step * l


@dataclass(frozen=True)
class ModuleSpec:
    id: int
    mass: float
    inertia_diag: tuple[float, float, float]

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"module {self.id}: mass must be > 0, got {self.mass}")
        if len(self.inertia_diag) != 3 or not all(j > 0 for j in self.inertia_diag):
            raise ValueError(f"module {self.id}: inertia entries must be three positive values")
        object.__setattr__(self, "inertia_diag", tuple(float(j) for j in self.inertia_diag))

    @property
    def label(self) -> tuple[float, float, float, float]:
        """Physical identity of the module; equal labels are interchangeable."""
        return (float(self.mass),) + self.inertia_diag


def check_roster(roster: Sequence[ModuleSpec]) -> None:
    ids = [m.id for m in roster]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise ValueError(f"roster ids must be unique and contiguous from 1, got {ids}")
    for pos, m in enumerate(roster, start=1):
        if m.id != pos:
            raise ValueError("roster must be ordered by id")


def identical_roster(n: int, mass: float = 1.0, inertia=(0.1, 0.1, 0.1)) -> list[ModuleSpec]:
    return [ModuleSpec(i, mass, tuple(inertia)) for i in range(1, n + 1)]


def plate_roster(masses: Iterable[float], l: float = 1.0) -> list[ModuleSpec]:
    """Roster of thin square plates of side ``l``: Jx = Jy = m l^2/12, Jz = m l^2/6."""
    out = []
    for i, m in enumerate(masses, start=1):
        m = float(m)
        out.append(ModuleSpec(i, m, (m * l * l / 12, m * l * l / 12, m * l * l / 6)))
    return out


class Aim:
    """Immutable n x 4 assembly incidence matrix."""

    __slots__ = ("rows", "_hash")

    def __init__(self, rows):
        self.rows = tuple(tuple(int(v) for v in r) for r in rows)
        self._hash = None

    @classmethod
    def trusted(cls, rows) -> "Aim":
        """Wrap rows of Python ints without re-coercing every entry."""
        obj = cls.__new__(cls)
        obj.rows = tuple(map(tuple, rows))
        obj._hash = None
        return obj

    @property
    def n(self) -> int:
        return len(self.rows)

    def to_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=int).reshape(-1, N_FACES)

    def edges(self) -> list[tuple[int, int, int, int]]:
        """Docked pairs as (i, p, j, q) with i < j, ids 1-based."""
        out = []
        for i, row in enumerate(self.rows, start=1):
            for p, j in enumerate(row):
                if j > i:
                    q = self.rows[j - 1].index(i)
                    out.append((i, p, j, q))
        return out

    def __eq__(self, other):
        return isinstance(other, Aim) and self.rows == other.rows

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.rows)
        return self._hash

    def __repr__(self):
        return f"Aim({[list(r) for r in self.rows]})"


@dataclass
class ValidationReport:
    checks: dict[str, bool] = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v] + self.messages[:3]

    def __bool__(self):
        return self.ok


CHECK_NAMES = ("shape", "range", "no_self_reference", "mutuality",
               "opposite_faces", "edge_count", "connected")


def validate_aim(aim) -> ValidationReport:
    """Check every AIM invariant; violations are report items, never raised."""
    rep = ValidationReport({k: False for k in CHECK_NAMES})
    rows = aim.rows if isinstance(aim, Aim) else aim
    try:
        rows = [list(map(int, r)) for r in rows]
    except (TypeError, ValueError):
        rep.messages.append("entries are not integers")
        return rep
    n = len(rows)
    if n == 0 or any(len(r) != N_FACES for r in rows):
        rep.messages.append(f"expected n x 4 entries with n >= 1")
        return rep
    rep.checks["shape"] = True

    rep.checks["range"] = all(0 <= v <= n for r in rows for v in r)
    if not rep.checks["range"]:
        rep.messages.append("entry outside 0..n")
        return rep

    selfref = [(i + 1, p) for i, r in enumerate(rows) for p, v in enumerate(r) if v == i + 1]
    rep.checks["no_self_reference"] = not selfref
    for i, p in selfref:
        rep.messages.append(f"module {i} face {p + 1} references itself")

    mutual = True
    faces_ok = True
    pairs = 0
    for i, r in enumerate(rows, start=1):
        for p, j in enumerate(r):
            if j == 0 or j == i:
                continue
            back = [q for q, v in enumerate(rows[j - 1]) if v == i]
            if len(back) != 1 or r.count(j) != 1:
                mutual = False
                rep.messages.append(f"module {i} face {p + 1} -> {j} has no unique reciprocal")
                continue
            if back[0] != opposite(p):
                faces_ok = False
                rep.messages.append(
                    f"module {i} face {p + 1} docks face {back[0] + 1} of {j}, not the opposite face")
            if j > i:
                pairs += 1
    rep.checks["mutuality"] = mutual
    rep.checks["opposite_faces"] = faces_ok and mutual
    rep.checks["edge_count"] = mutual and pairs == n - 1
    if mutual and pairs != n - 1:
        rep.messages.append(f"{pairs} docked pairs, expected {n - 1}")

    seen = {1}
    stack = [1]
    while stack:
        i = stack.pop()
        for j in rows[i - 1]:
            if j and j not in seen:
                seen.add(j)
                stack.append(j)
    rep.checks["connected"] = len(seen) == n
    if len(seen) != n:
        rep.messages.append(f"only {len(seen)} of {n} modules reachable from module 1")
    return rep


def _require_valid(aim) -> Aim:
    rep = validate_aim(aim)
    if not rep.ok:
        raise InvalidAim(rep)
    return aim if isinstance(aim, Aim) else Aim(aim)


def place_cells(rows) -> list[tuple[int, int]]:
    """Depth-first placement of every module on the lattice, root at (0, 0).

    Cells are returned in module order; duplicates are left in place so the
    caller can decide whether an overlap is an error.
    """
    n = len(rows)
    cells: list = [None] * n
    cells[0] = (0, 0)
    stack = [1]
    while stack:
        i = stack.pop()
        x, y = cells[i - 1]
        for p, j in enumerate(rows[i - 1]):
            if j and cells[j - 1] is None:
                dx, dy = STEP_CELLS[p]
                cells[j - 1] = (x + dx, y + dy)
                stack.append(j)
    return cells


@dataclass(frozen=True, eq=False)
class LayoutConfiguration:
    """Centered module positions (n x 3, metres) with the roster that produced them."""

    positions: np.ndarray
    roster: tuple[ModuleSpec, ...]
    edge_length: float
    cells: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return len(self.roster)

    @property
    def masses(self) -> np.ndarray:
        return np.array([m.mass for m in self.roster])

    @property
    def inertias(self) -> np.ndarray:
        return np.array([m.inertia_diag for m in self.roster])


def layout_from_cells(cells, roster: Sequence[ModuleSpec], l: float) -> LayoutConfiguration:
    masses = np.array([m.mass for m in roster])
    c = np.asarray(cells, dtype=float).reshape(-1, 2) * l
    centroid = masses @ c / masses.sum()
    pos = np.zeros((len(roster), 3))
    pos[:, :2] = c - centroid
    return LayoutConfiguration(pos, tuple(roster), float(l), tuple(map(tuple, cells)))


def pos_tree_search(aim, roster: Sequence[ModuleSpec], l: float = 1.0) -> LayoutConfiguration:
    """Place every module by depth-first traversal, then shift the mass centroid to the origin.

    Raises InvalidAim for a malformed matrix and Overlap if two modules land
    on the same cell.
    """
    aim = _require_valid(aim)
    if len(roster) != aim.n:
        raise ValueError(f"roster has {len(roster)} modules, AIM has {aim.n}")
    cells = place_cells(aim.rows)
    if len(set(cells)) != len(cells):
        raise Overlap("two modules occupy the same lattice cell")
    return layout_from_cells(cells, roster, l)


def check_feasible(aim, l: float = 1.0) -> bool:
    """True iff the placement gives every module its own cell.

    The check is exact on the integer lattice, so ``l`` does not affect it.
    """
    aim = _require_valid(aim)
    cells = place_cells(aim.rows)
    return len(set(cells)) == len(cells)


def dfs_parents(rows) -> tuple[list[int], list[int]]:
    """Parent id and the parent's docking face for every module (root: 0, -1)."""
    n = len(rows)
    parent = [0] * n
    pface = [-1] * n
    seen = [False] * n
    seen[0] = True
    stack = [1]
    while stack:
        i = stack.pop()
        for p, j in enumerate(rows[i - 1]):
            if j and not seen[j - 1]:
                seen[j - 1] = True
                parent[j - 1] = i
                pface[j - 1] = p
                stack.append(j)
    return parent, pface


def subtree(rows, r: int, parent_id: int) -> list[int]:
    """Modules reachable from ``r`` without crossing back to ``parent_id``."""
    out = [r]
    seen = {r, parent_id}
    stack = [r]
    while stack:
        i = stack.pop()
        for j in rows[i - 1]:
            if j and j not in seen:
                seen.add(j)
                out.append(j)
                stack.append(j)
    return out


@dataclass(frozen=True)
class TreeSplit:
    """Result of cutting the edge between module ``r`` and its DFS parent.

    ``entries`` is the AIM with that docking pair cleared.  Faces are
    (module id, face index) pairs listed in (module, face) order.
    """

    entries: tuple[tuple[int, ...], ...]
    left: tuple[int, ...]
    right: tuple[int, ...]
    left_faces: tuple[tuple[int, int], ...]
    right_faces: tuple[tuple[int, int], ...]
    deleted_pair: tuple[tuple[int, int], tuple[int, int]]


def free_faces(rows, modules=None) -> tuple[tuple[int, int], ...]:
    """Free (module, face) pairs in (module, face) order."""
    if modules is None:
        modules = range(1, len(rows) + 1)
    return tuple((i, p) for i in sorted(modules) for p in range(N_FACES) if rows[i - 1][p] == 0)


def dfs_tree_split(aim, r: int) -> TreeSplit:
    """Remove the edge joining ``r`` to its parent; the left part keeps the root."""
    aim = aim if isinstance(aim, Aim) else Aim(aim)
    if r == 1:
        raise RootSplit("module 1 is the root and has no parent edge")
    if not 1 <= r <= aim.n:
        raise ValueError(f"module {r} not in 1..{aim.n}")
    parent, pface = dfs_parents(aim.rows)
    par, fp = parent[r - 1], pface[r - 1]
    fr = opposite(fp)
    rows = [list(row) for row in aim.rows]
    rows[par - 1][fp] = 0
    rows[r - 1][fr] = 0
    right = subtree(rows, r, par)
    rset = set(right)
    left = [i for i in range(1, aim.n + 1) if i not in rset]
    return TreeSplit(
        entries=tuple(map(tuple, rows)),
        left=tuple(left),
        right=tuple(sorted(right)),
        left_faces=free_faces(rows, left),
        right_faces=free_faces(rows, right),
        deleted_pair=((par, fp), (r, fr)),
    )


def rotate_rows(rows: list[list[int]], modules: Iterable[int], quarter_turns: int) -> None:
    """Rotate the given modules by ``quarter_turns`` x 90 degrees CCW, in place.

    Relabels faces f_k -> f_{k+j mod 4}; applied to a whole fragment this is a
    rigid rotation of that fragment about the z axis.
    """
    j = quarter_turns % 4
    if not j:
        return
    for i in modules:
        old = rows[i - 1]
        rows[i - 1] = [old[(k - j) % 4] for k in range(N_FACES)]


def reconnect(split: TreeSplit, L: tuple[int, int], R: tuple[int, int]) -> Aim:
    """Dock the right fragment's face ``R`` to the left fragment's face ``L``.

    The right fragment is rotated so that ``R`` ends up opposite ``L``.
    """
    if L not in split.left_faces or R not in split.right_faces:
        raise ValueError("L must be a free left face and R a free right face")
    (li, lp), (ri, rp) = L, R
    target = opposite(lp)
    rows = [list(r) for r in split.entries]
    rotate_rows(rows, split.right, target - rp)
    rows[li - 1][lp] = ri
    rows[ri - 1][target] = li
    return Aim(rows)


def random_chain(n: int, rng: np.random.Generator) -> Aim:
    """Straight chain along x with the modules in random order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    order = [int(v) + 1 for v in rng.permutation(n)]
    rows = [[0, 0, 0, 0] for _ in range(n)]
    for a, b in zip(order, order[1:]):
        rows[a - 1][0] = b
        rows[b - 1][2] = a
    return Aim(rows)


def aim_from_cells(cells: Sequence[tuple[int, int]]) -> Aim:
    """Spanning-tree AIM (breadth-first from module 1) for a connected placement."""
    n = len(cells)
    where = {tuple(c): i for i, c in enumerate(cells, start=1)}
    if len(where) != n:
        raise Overlap("cells are not distinct")
    rows = [[0, 0, 0, 0] for _ in range(n)]
    seen = {1}
    queue = [1]
    for i in queue:
        x, y = cells[i - 1]
        for p, (dx, dy) in enumerate(STEP_CELLS):
            j = where.get((x + dx, y + dy))
            if j is not None and j not in seen:
                seen.add(j)
                rows[i - 1][p] = j
                rows[j - 1][opposite(p)] = i
                queue.append(j)
    if len(seen) != n:
        raise ValueError("cells are not edge-connected")
    return Aim(rows)


# Square-lattice symmetries as integer 2x2 matrices (a, b, c, d): (x, y) -> (ax + by, cx + dy).
DIHEDRAL = (
    (1, 0, 0, 1), (0, -1, 1, 0), (-1, 0, 0, -1), (0, 1, -1, 0),
    (1, 0, 0, -1), (-1, 0, 0, 1), (0, 1, 1, 0), (0, -1, -1, 0),
)
# the subgroup that maps the x and y axes onto themselves
AXIS_PRESERVING = ((1, 0, 0, 1), (-1, 0, 0, -1), (1, 0, 0, -1), (-1, 0, 0, 1))


def symmetry_group(roster: Sequence[ModuleSpec]):
    """Lattice symmetries under which fitness is invariant for this roster.

    A quarter turn swaps the x and y inertia axes of every module, so it is
    only admissible when every module has Jx == Jy.
    """
    if all(m.inertia_diag[0] == m.inertia_diag[1] for m in roster):
        return DIHEDRAL
    return AXIS_PRESERVING


def normalize_cells(cells, g=(1, 0, 0, 1)) -> list[tuple[int, int]]:
    a, b, c, d = g
    t = [(a * x + b * y, c * x + d * y) for x, y in cells]
    mx = min(p[0] for p in t)
    my = min(p[1] for p in t)
    return [(x - mx, y - my) for x, y in t]


def canonical_form(cells, labels, group=DIHEDRAL) -> tuple:
    """Lexicographically smallest labelled cell multiset over ``group`` and translation."""
    best = None
    for g in group:
        form = tuple(sorted(zip(normalize_cells(cells, g), labels)))
        if best is None or form < best:
            best = form
    return best


def _label_bytes(label) -> bytes:
    return struct.pack("<4d", *label)


def canonical_key(aim, roster: Sequence[ModuleSpec]) -> bytes:
    """128-bit digest equal for placements related by lattice symmetry and translation.

    Module identity enters through (mass, inertia), so modules with identical
    specs are interchangeable while any physically different swap changes
    the key.
    """
    aim = _require_valid(aim)
    cells = place_cells(aim.rows)
    if len(set(cells)) != len(cells):
        raise Overlap("two modules occupy the same lattice cell")
    return key_from_cells(cells, roster)


def key_from_cells(cells, roster: Sequence[ModuleSpec]) -> bytes:
    labels = [m.label for m in roster]
    form = canonical_form(cells, labels, symmetry_group(roster))
    h = hashlib.blake2b(digest_size=16)
    for (x, y), lab in form:
        h.update(struct.pack("<ii", x, y))
        h.update(_label_bytes(lab))
    return h.digest()
