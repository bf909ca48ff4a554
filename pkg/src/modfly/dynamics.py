"""Configuration-dependent rotational dynamics and the structure fitness.

The fitness of a structure is

    -lambda1 * cond(Dbar) - lambda2 * sigma_max(pinv(Dbar))**2

with ``Dbar = inv(J_S) @ [hat(d_1) ... hat(d_n)]``.  Because ``Dbar`` has only
three rows, its singular values come from the 3x3 Gram matrix
``Dbar @ Dbar.T``; see :func:`singular_values_3xk`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RankDeficient, SingularInertia
from .structure import LayoutConfiguration, ModuleSpec, layout_from_cells


@dataclass(frozen=True)
class FitnessParams:
    lambda1: float = 1.0
    lambda2: float = 1.0
    rank_tolerance: float = 1e-9

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or not (self.lambda1 + self.lambda2 > 0):
            raise ValueError("need lambda1, lambda2 >= 0 with a positive sum")
        if not self.rank_tolerance > 0:
            raise ValueError("rank_tolerance must be positive")


@dataclass(frozen=True)
class FitnessValue:
    value: float
    cond_term: float
    sigma_term: float
    sigma: tuple[float, float, float]
    rank: int

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


# ---------------------------------------------------------------------------
# 3x3 symmetric eigen kernel
# ---------------------------------------------------------------------------

def _charpoly(a00, a01, a02, a11, a12, a22, lam):
    b00, b11, b22 = a00 - lam, a11 - lam, a22 - lam
    c = (b00 * (b11 * b22 - a12 * a12)
         - a01 * (a01 * b22 - a12 * a02)
         + a02 * (a01 * a12 - b11 * a02))
    dc = -((b11 * b22 - a12 * a12) + (b00 * b22 - a02 * a02) + (b00 * b11 - a01 * a01))
    return c, dc


def sym3_eigvalsh(a) -> tuple[float, float, float]:
    """Eigenvalues of a symmetric 3x3 matrix, descending.

    Trigonometric solution of the characteristic polynomial followed by one
    Newton step per root.  The Newton step is skipped near repeated roots
    where the derivative vanishes.
    """
    a00, a01, a02 = float(a[0][0]), float(a[0][1]), float(a[0][2])
    a11, a12, a22 = float(a[1][1]), float(a[1][2]), float(a[2][2])
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    if p1 == 0.0:
        return tuple(sorted((a00, a11, a22), reverse=True))
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b00, b11, b22 = (a00 - q) / p, (a11 - q) / p, (a22 - q) / p
    b01, b02, b12 = a01 / p, a02 / p, a12 / p
    r = 0.5 * (b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
               + b02 * (b01 * b12 - b11 * b02))
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    e0 = q + 2.0 * p * math.cos(phi)
    e2 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e1 = 3.0 * q - e0 - e2

    scale2 = (abs(e0) + abs(e2)) ** 2
    out = []
    for lam in (e0, e1, e2):
        c, dc = _charpoly(a00, a01, a02, a11, a12, a22, lam)
        if abs(dc) > 1e-6 * scale2:
            cand = lam - c / dc
            c2, _ = _charpoly(a00, a01, a02, a11, a12, a22, cand)
            if abs(c2) < abs(c):
                lam = cand
        out.append(lam)
    return tuple(sorted(out, reverse=True))


def sym3_eigvalsh_batch(a00, a01, a02, a11, a12, a22) -> np.ndarray:
    """Vectorised :func:`sym3_eigvalsh` over equally shaped entry arrays; returns (..., 3)."""
    a00, a01, a02, a11, a12, a22 = np.broadcast_arrays(
        *[np.asarray(v, dtype=float) for v in (a00, a01, a02, a11, a12, a22)])
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b00, b11, b22 = (a00 - q) / safe, (a11 - q) / safe, (a22 - q) / safe
    b01, b02, b12 = a01 / safe, a02 / safe, a12 / safe
    r = 0.5 * (b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
               + b02 * (b01 * b12 - b11 * b02))
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    e0 = q + 2.0 * p * np.cos(phi)
    e2 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e1 = 3.0 * q - e0 - e2
    lam = np.stack([e0, e1, e2], axis=-1)
    scale2 = (np.abs(e0) + np.abs(e2))[..., None] ** 2
    A = [x[..., None] for x in (a00, a01, a02, a11, a12, a22)]
    c, dc = _charpoly(*A, lam)
    ok = np.abs(dc) > 1e-6 * scale2
    cand = lam - np.where(ok, c, 0.0) / np.where(ok, dc, 1.0)
    c2, _ = _charpoly(*A, cand)
    lam = np.where(ok & (np.abs(c2) < np.abs(c)), cand, lam)
    diag = np.sort(np.stack([a00, a11, a22], axis=-1), axis=-1)[..., ::-1]
    lam = np.sort(lam, axis=-1)[..., ::-1]
    return np.where((p1 == 0.0)[..., None], diag, lam)


def _null_vector(a, lam):
    r0 = (a[0][0] - lam, a[0][1], a[0][2])
    r1 = (a[1][0], a[1][1] - lam, a[1][2])
    r2 = (a[2][0], a[2][1], a[2][2] - lam)
    best, bn = None, 0.0
    for u, v in ((r0, r1), (r0, r2), (r1, r2)):
        c = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
        nn = c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
        if nn > bn:
            best, bn = c, nn
    if best is None:
        return (1.0, 0.0, 0.0)
    s = 1.0 / math.sqrt(bn)
    return (best[0] * s, best[1] * s, best[2] * s)


def _complement(v):
    if abs(v[0]) > abs(v[1]):
        s = 1.0 / math.hypot(v[0], v[2])
        u = (-v[2] * s, 0.0, v[0] * s)
    else:
        s = 1.0 / math.hypot(v[1], v[2])
        u = (0.0, v[2] * s, -v[1] * s)
    w = (v[1] * u[2] - v[2] * u[1], v[2] * u[0] - v[0] * u[2], v[0] * u[1] - v[1] * u[0])
    return u, w


def singular_values_3xk(m) -> tuple[float, float, float]:
    """Singular values of a 3 x k matrix, descending.

    Eigenvalues of ``M @ M.T`` locate the singular directions; each value is
    then recovered as ``||M.T @ v||`` so small singular values keep their
    relative accuracy instead of inheriting the squared conditioning of the
    Gram matrix.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != 3 or m.shape[1] < 1:
        raise ValueError(f"expected a 3 x k matrix, got shape {m.shape}")
    a = (m @ m.T).tolist()
    if a[0][1] == 0.0 and a[0][2] == 0.0 and a[1][2] == 0.0:
        s = np.sqrt(np.einsum("ij,ij->i", m, m)).tolist()
        return tuple(sorted(s, reverse=True))
    l0, l1, l2 = sym3_eigvalsh(a)
    if l0 <= 0.0:
        return (0.0, 0.0, 0.0)
    if l0 - l1 >= l1 - l2:
        v = _null_vector(a, l0)
    else:
        v = _null_vector(a, l2)
    u, w = _complement(v)
    uw = np.array([u, w])
    nm = uw @ m
    c00, c01, c11 = float(nm[0] @ nm[0]), float(nm[0] @ nm[1]), float(nm[1] @ nm[1])
    th = 0.5 * math.atan2(2.0 * c01, c00 - c11)
    ct, st = math.cos(th), math.sin(th)
    vecs = np.array([v,
                     [ct * u[k] + st * w[k] for k in range(3)],
                     [-st * u[k] + ct * w[k] for k in range(3)]])
    proj = vecs @ m
    s = np.sqrt(np.einsum("ij,ij->i", proj, proj)).tolist()
    return tuple(sorted(s, reverse=True))


# ---------------------------------------------------------------------------
# structure quantities
# ---------------------------------------------------------------------------

def _inertia(pos: np.ndarray, masses: np.ndarray, inertia_sum: np.ndarray) -> np.ndarray:
    x, y = pos[:, 0], pos[:, 1]
    mx, my = masses * x, masses * y
    sxx, syy, sxy = float(mx @ x), float(my @ y), float(mx @ y)
    return np.array([
        [inertia_sum[0] + syy, -sxy, 0.0],
        [-sxy, inertia_sum[1] + sxx, 0.0],
        [0.0, 0.0, inertia_sum[2] + sxx + syy],
    ])


def inertia_total(layout: LayoutConfiguration) -> np.ndarray:
    """Total inertia J_S about the mass centroid (3x3, kg m^2)."""
    return _inertia(layout.positions, layout.masses, layout.inertias.sum(axis=0))


def hat(d) -> np.ndarray:
    x, y, z = d
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def hat_stack(pos: np.ndarray) -> np.ndarray:
    """[hat(d_1) ... hat(d_n)] as a 3 x 3n matrix."""
    n = len(pos)
    h = np.zeros((3, n, 3))
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]
    h[0, :, 1], h[0, :, 2] = -z, y
    h[1, :, 0], h[1, :, 2] = z, -x
    h[2, :, 0], h[2, :, 1] = -y, x
    return h.reshape(3, 3 * n)


def _dbar(pos, J):
    scale = np.abs(J).max()
    if abs(np.linalg.det(J)) < 1e-12 * scale ** 3:
        raise SingularInertia("total inertia is numerically singular")
    return np.linalg.solve(J, hat_stack(pos))


def _planar_sigma(x, y, masses, inertia_sum) -> tuple[float, float, float]:
    """Singular values of Dbar for a planar layout without forming Dbar.

    With all modules at z = 0, J_S is block diagonal (xy block plus zz) and
    Dbar @ Dbar.T splits the same way: roll/pitch only see the z forces,
    yaw only sees the in-plane forces.  The 2 x n roll/pitch block is
    diagonalised by one Jacobi rotation and its singular values taken as row
    norms, which keeps the small one accurate.
    """
    mx, my = masses * x, masses * y
    sxx, syy, sxy = float(mx @ x), float(my @ y), float(mx @ y)
    a, b, c = inertia_sum[0] + syy, -sxy, inertia_sum[1] + sxx
    e = inertia_sum[2] + sxx + syy
    det2 = a * c - b * b
    if det2 <= 1e-12 * max(a, c) ** 2 or e <= 0:
        raise SingularInertia("total inertia is numerically singular")
    i00, i01, i11 = c / det2, -b / det2, a / det2
    r0 = i00 * y - i01 * x
    r1 = i01 * y - i11 * x
    c00, c01, c11 = float(r0 @ r0), float(r0 @ r1), float(r1 @ r1)
    th = 0.5 * math.atan2(2.0 * c01, c00 - c11)
    ct, st = math.cos(th), math.sin(th)
    u, v = ct * r0 + st * r1, ct * r1 - st * r0
    s_yaw = math.sqrt(float(x @ x) + float(y @ y)) / e
    return tuple(sorted((math.sqrt(float(u @ u)), math.sqrt(float(v @ v)), s_yaw),
                        reverse=True))


def planar_sigma_batch(x, y, masses, inertia_sum) -> np.ndarray:
    """Row-wise :func:`_planar_sigma` for (P, n) arrays of centred coordinates and masses.

    Returns a (P, 3) array, descending along the last axis.  Rows with a
    singular xy inertia block come back as NaN.
    """
    mx, my = masses * x, masses * y
    sxx = np.einsum("ij,ij->i", mx, x)
    syy = np.einsum("ij,ij->i", my, y)
    sxy = np.einsum("ij,ij->i", mx, y)
    a, b, c = inertia_sum[0] + syy, -sxy, inertia_sum[1] + sxx
    e = inertia_sum[2] + sxx + syy
    det2 = a * c - b * b
    bad = det2 <= 1e-12 * np.maximum(a, c) ** 2
    det2 = np.where(bad, np.nan, det2)
    i00, i01, i11 = (c / det2)[:, None], (-b / det2)[:, None], (a / det2)[:, None]
    r0 = i00 * y - i01 * x
    r1 = i01 * y - i11 * x
    c00 = np.einsum("ij,ij->i", r0, r0)
    c01 = np.einsum("ij,ij->i", r0, r1)
    c11 = np.einsum("ij,ij->i", r1, r1)
    th = 0.5 * np.arctan2(2.0 * c01, c00 - c11)
    ct, st = np.cos(th)[:, None], np.sin(th)[:, None]
    u, v = ct * r0 + st * r1, ct * r1 - st * r0
    out = np.stack([np.sqrt(np.einsum("ij,ij->i", u, u)),
                    np.sqrt(np.einsum("ij,ij->i", v, v)),
                    np.sqrt(np.einsum("ij,ij->i", x, x) + np.einsum("ij,ij->i", y, y)) / e],
                   axis=-1)
    return -np.sort(-out, axis=-1)


def fitness_values_batch(sigma: np.ndarray, params: FitnessParams = FitnessParams()) -> np.ndarray:
    """Fitness values for a (P, 3) array of descending singular values."""
    s1, s3 = sigma[:, 0], sigma[:, 2]
    ok = (s1 > 0) & (s3 >= params.rank_tolerance * s1)
    s3 = np.where(ok, s3, 1.0)
    val = -params.lambda1 * (s1 / s3) - params.lambda2 / (s3 * s3)
    return np.where(ok, val, -np.inf)


def d_bar(layout: LayoutConfiguration) -> np.ndarray:
    """Map from decomposed module forces to angular acceleration (3 x 3n)."""
    return _dbar(layout.positions, inertia_total(layout))


def allocation_matrix(layout: LayoutConfiguration) -> np.ndarray:
    """Constant 6 x 3n allocation [I ... I; hat(d_1) ... hat(d_n)] acting on decomposed forces."""
    n = layout.n
    return np.vstack([np.tile(np.eye(3), n), hat_stack(layout.positions)])


def fitness_from_sigma(sigma, params: FitnessParams) -> FitnessValue:
    s1, s2, s3 = sigma
    rank = sum(1 for s in sigma if s1 > 0 and s / s1 >= params.rank_tolerance)
    if rank < 3:
        inf = math.inf
        return FitnessValue(-inf, inf, inf, tuple(sigma), rank)
    cond = s1 / s3
    sig = 1.0 / (s3 * s3)
    return FitnessValue(-params.lambda1 * cond - params.lambda2 * sig, cond, sig, tuple(sigma), 3)


def fitness(layout: LayoutConfiguration, params: FitnessParams = FitnessParams()) -> FitnessValue:
    """Score a placed structure; under-actuated structures score -inf."""
    return fitness_from_sigma(singular_values_3xk(d_bar(layout)), params)


class Evaluator:
    """Fitness of lattice placements for a fixed roster, skipping layout objects.

    Used on hot paths (GA, enumeration) where the same roster is scored many
    times.
    """

    def __init__(self, roster: Sequence[ModuleSpec], l: float = 1.0,
                 params: FitnessParams = FitnessParams()):
        self.roster = tuple(roster)
        self.l = float(l)
        self.params = params
        self.masses = np.array([m.mass for m in roster])
        self.total_mass = float(self.masses.sum())
        self.inertia_sum = np.array([m.inertia_diag for m in roster]).sum(axis=0)

    def positions(self, cells) -> np.ndarray:
        c = np.asarray(cells, dtype=float).reshape(-1, 2) * self.l
        pos = np.zeros((len(c), 3))
        pos[:, :2] = c - (self.masses @ c) / self.total_mass
        return pos

    def __call__(self, cells) -> FitnessValue:
        return self.from_flat(np.asarray(cells, dtype=float).ravel())

    def from_flat(self, flat) -> FitnessValue:
        """Score cells given as a flat (x0, y0, x1, y1, ...) sequence."""
        c = np.array(flat, dtype=float).reshape(-1, 2) * self.l
        c -= (self.masses @ c) / self.total_mass
        x, y = c[:, 0], c[:, 1]
        return fitness_from_sigma(_planar_sigma(x, y, self.masses, self.inertia_sum),
                                  self.params)

    def layout(self, cells) -> LayoutConfiguration:
        return layout_from_cells(cells, self.roster, self.l)


def thrust_energy_bound(layout: LayoutConfiguration, omega_dot,
                        params: FitnessParams = FitnessParams()) -> float:
    """Upper bound sigma_max(pinv(Dbar))^2 * ||omega_dot||^2 on the thrust energy ||F||^2."""
    fv = fitness(layout, params)
    if fv.rank < 3:
        raise RankDeficient(f"Dbar has rank {fv.rank}; no bound for an under-actuated structure")
    w = np.asarray(omega_dot, dtype=float)
    return fv.sigma_term * float(w @ w)


def evaluation_report(layout: LayoutConfiguration,
                      params: FitnessParams = FitnessParams()) -> dict:
    fv = fitness(layout, params)
    return {
        "fitness": fv.value,
        "cond_term": fv.cond_term,
        "sigma_term": fv.sigma_term,
        "sigma": list(fv.sigma),
        "rank": fv.rank,
        "J_S": inertia_total(layout).tolist(),
        "positions": layout.positions.tolist(),
    }
