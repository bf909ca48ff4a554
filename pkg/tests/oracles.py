"""Independent reference implementations used only by the tests."""

import itertools

import mpmath as mp


def jacobi_singular_values(m, dps=60, sweeps=60):
    """Singular values of a 3 x k matrix via cyclic Jacobi on M M^T in high precision."""
    with mp.workdps(dps):
        rows = [[mp.mpf(float(v)) for v in r] for r in m]
        a = [[mp.fsum(x * y for x, y in zip(rows[i], rows[j])) for j in range(3)] for i in range(3)]
        for _ in range(sweeps):
            off = mp.fsum(a[i][j] ** 2 for i in range(3) for j in range(3) if i != j)
            if off == 0 or off < mp.mpf(10) ** (-2 * dps + 10) * mp.fsum(a[i][i] ** 2 for i in range(3)):
                break
            for p, q in ((0, 1), (0, 2), (1, 2)):
                if a[p][q] == 0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2 * a[p][q])
                t = mp.sign(theta) / (abs(theta) + mp.sqrt(theta ** 2 + 1)) if theta != 0 else mp.mpf(1)
                c = 1 / mp.sqrt(t ** 2 + 1)
                s = t * c
                for k in range(3):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(3):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
        ev = sorted((max(a[i][i], mp.mpf(0)) for i in range(3)), reverse=True)
        return [float(mp.sqrt(e)) for e in ev]


STEP = ((1, 0), (0, 1), (-1, 0), (0, -1))
D4 = ((1, 0, 0, 1), (0, -1, 1, 0), (-1, 0, 0, -1), (0, 1, -1, 0),
      (1, 0, 0, -1), (-1, 0, 0, 1), (0, 1, 1, 0), (0, -1, -1, 0))
# symmetries that keep the x and y axes apart (for rosters with Jx != Jy)
AXIS = ((1, 0, 0, 1), (-1, 0, 0, -1), (1, 0, 0, -1), (-1, 0, 0, 1))


def _norm(cells):
    mx = min(c[0] for c in cells)
    my = min(c[1] for c in cells)
    return frozenset((x - mx, y - my) for x, y in cells)


def free_polyominoes(n):
    """Brute-force occupied-cell-set enumeration with dihedral dedup (no trees involved)."""
    level = {frozenset([(0, 0)])}
    for _ in range(n - 1):
        nxt = set()
        for shape in level:
            for x, y in shape:
                for dx, dy in STEP:
                    c = (x + dx, y + dy)
                    if c not in shape:
                        nxt.add(_norm(shape | {c}))
        level = nxt
    free = set()
    for shape in level:
        forms = [tuple(sorted(_norm([(a * x + b * y, c * x + d * y) for x, y in shape])))
                 for a, b, c, d in D4]
        free.add(min(forms))
    return sorted(free)


def brute_force_labelled_classes(n, labels, group=D4):
    """All labelled placements up to symmetry: every free shape x every label permutation."""
    classes = set()
    # every orientation of every free shape, so subgroups of D4 are handled too
    fixed = {tuple(sorted(_norm([(a * x + b * y, c * x + d * y) for x, y in shape])))
             for shape in free_polyominoes(n) for a, b, c, d in D4}
    for shape in sorted(fixed):
        cells = list(shape)
        for perm in set(itertools.permutations(labels)):
            forms = []
            for a, b, c, d in group:
                t = [(a * x + b * y, c * x + d * y) for x, y in cells]
                mx = min(p[0] for p in t)
                my = min(p[1] for p in t)
                forms.append(tuple(sorted(((x - mx, y - my), lab) for (x, y), lab in zip(t, perm))))
            classes.add(min(forms))
    return classes
