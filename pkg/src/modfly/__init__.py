"""Design of flight structures assembled from identical-footprint flying modules.

A structure is a docking tree of square modules on a lattice (the AIM).
The package scores structures by how uniformly and cheaply they can produce
angular acceleration, searches for good ones with a tree-crossover genetic
algorithm or, for small rosters, exhaustively, and flies candidates in a
rigid-body simulator to check that the score predicts tracking quality.
"""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0.0.0"

from .dynamics import (Evaluator, FitnessParams, FitnessValue, allocation_matrix, d_bar,
                       evaluation_report, fitness, inertia_total, singular_values_3xk,
                       thrust_energy_bound)
from .enumeration import EnumerationResult, count_check, enumerate_all
from .errors import (Diverged, GimbalLockWarning, InputError, InvalidAim, InvalidParams,
                     Overlap, RankDeficient, RootSplit, SingularInertia, Stalled, TooLarge)
from .ga import GaParams, GaTrace, Individual, crossover, evolve, pop_select, tournament_select
from .sim import (ModuleCommand, RigidState, SimConfig, SimResult, Trajectory, allocate,
                  forward_force, inverse_kinematics, step_dynamics, track)
from .structure import (Aim, LayoutConfiguration, ModuleSpec, canonical_key, check_feasible,
                        dfs_tree_split, identical_roster, plate_roster, pos_tree_search,
                        reconnect, validate_aim)
