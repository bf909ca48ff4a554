"""
Flying structures from one GA run
=================================

Structures picked along a GA trace are flown on the same 6-DoF sinusoid.
With fixed attitude gains, the heavier-inertia early structures lag the
attitude reference more than the converged one.  The ordering is only a
trend: see the acceptance notes for rosters where it breaks between
near-equal structures.
"""

import math

import numpy as np

from modfly import GaParams, evolve
from modfly.sim import SimConfig, track
from modfly.structure import plate_roster, pos_tree_search

roster = plate_roster(np.random.default_rng(2000).uniform(1.0, 5.5, 10))
_, trace = evolve(roster, GaParams(pop_size=300, seed=0))

# best structure whenever the best fitness improved
seen = []
for gen, (value, aim) in enumerate(zip(trace.best_fitness, trace.best_aims)):
    if math.isfinite(value) and (not seen or value > seen[-1][1]):
        seen.append((gen, value, aim))

cfg = SimConfig(duration=10.0)
print(" gen     fitness   pos_rms [m]  att_rms [rad]")
for gen, value, aim in seen:
    res = track(pos_tree_search(aim, roster), config=cfg)
    print(f"{gen:4d}  {value:10.3f}  {res.pos_rms:11.2e}  {res.att_rms:12.5f}")
