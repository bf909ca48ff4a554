"""
Scoring flight structures
=========================

Five identical modules can be docked into twelve distinct shapes.  Each one
is scored by how evenly its modules can produce angular acceleration; a
straight chain cannot roll about its own axis at all and scores -Inf.
"""

import math

from modfly import enumeration, structure
from modfly.dynamics import fitness, singular_values_3xk, d_bar

roster = structure.identical_roster(5)

# every canonical class of 5 identical modules
rows = []
for cells in enumeration._all_classes(roster):
    lay = structure.layout_from_cells(cells, roster, 1.0)
    rows.append((fitness(lay).value, singular_values_3xk(d_bar(lay)), cells))
rows.sort(key=lambda r: r[0], reverse=True)

for value, sigma, cells in rows:
    print(f"{value:12.6f}  sigma = ({sigma[0]:.4f}, {sigma[1]:.4f}, {sigma[2]:.4f})  {sorted(cells)}")

# the plus shape wins; the straight chain is under-actuated
assert rows[0][0] > rows[1][0]
assert math.isinf(rows[-1][0])
