"""Exception hierarchy shared by all skle modules."""


class SkleError(Exception):
    """Base class for all skle errors."""


class Degenerate(SkleError):
    """Slit configuration violates the state-space constraints (or the margin)."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class ShapeMismatch(SkleError):
    """Two configurations with different slit counts were combined."""


class IllConditioned(SkleError):
    """Collocation system condition estimate exceeds the hard cap."""

    def __init__(self, cond):
        super().__init__(f"collocation system condition estimate {cond:.3e}")
        self.cond = cond


class NoConvergence(SkleError):
    """Iterative refinement failed to reach the requested residual."""


class AtPole(SkleError):
    """Kernel evaluation requested at the pole itself."""


class ExtrapolationUnstable(SkleError):
    """Richardson ladder values disagree beyond tolerance."""


class Singular(SkleError):
    """Period matrix is numerically singular."""


class NonConvergent(SkleError):
    """Grid solve or sampler failed to converge."""


class HullTooLarge(SkleError):
    """Hull does not fit inside the requested integration ball."""


class KernelFailure(SkleError):
    """A kernel solve failed during time integration."""


class LeftStateSpace(SkleError):
    """The slit motion reached the state-space margin at time t."""

    def __init__(self, t):
        super().__init__(f"left state space at t={t:.6g}")
        self.t = t


class StepRejected(SkleError):
    """Adaptive step halving was exhausted near a swallowing event."""


class FitUnstable(SkleError):
    """Capacity tail fit did not stabilise."""


class LiftTooSmall(SkleError):
    """Trace lift offset is below the resolvable scale."""


class InsideHull(SkleError):
    """Canonical map evaluated at a point swallowed by the hull."""


class TooCloseToHull(SkleError):
    """Derivative extraction ring collides with the image of the hull."""


class InsufficientPaths(SkleError):
    """Not enough surviving paths for the requested statistic."""


class TooManyHits(SkleError):
    """Too large a fraction of paths hit the hull before the horizon."""

    def __init__(self, fraction):
        super().__init__(f"{100 * fraction:.1f}% of paths hit the hull before the horizon")
        self.fraction = fraction
