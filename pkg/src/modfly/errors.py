"""Exception types shared across the package."""


class InvalidAim(ValueError):
    """An assembly incidence matrix failed validation."""

    def __init__(self, report):
        self.report = report
        super().__init__("invalid AIM: " + "; ".join(report.failures()))


class Overlap(ValueError):
    """Two modules were placed on the same lattice cell."""


class RootSplit(ValueError):
    """A tree split was requested at the root, which has no parent edge."""


class SingularInertia(ArithmeticError):
    pass


class RankDeficient(ArithmeticError):
    """The structure cannot produce the requested wrench (under-actuated)."""


class Stalled(RuntimeError):
    """Crossover found no feasible child within its retry budget."""


class InvalidParams(ValueError):
    pass


class TooLarge(ValueError):
    """Enumeration was requested beyond the configured module cap."""


class Diverged(RuntimeError):
    """Closed-loop simulation left the sane operating envelope."""


class GimbalLockWarning(RuntimeWarning):
    pass


class InputError(ValueError):
    """Malformed input file; message names the file and line."""
