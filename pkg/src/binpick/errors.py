"""Exception types shared across the package.

The CLI maps these onto exit codes, so everything a command can surface
derives from BinPickError.
"""


class BinPickError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BinPickError):
    """Invalid or unknown configuration value."""


# -- geometry ---------------------------------------------------------------

class EmptyInstanceError(BinPickError):
    """Instance has fewer than 3 labeled pixels; too small to trace."""


class FragmentedInstanceError(BinPickError):
    """Instance pixels form more than one 8-connected component."""


class DegeneratePointSetError(BinPickError):
    """Fewer than 2 distinct points; principal axes undefined."""


class TooFewItemsError(BinPickError):
    """An operation needing at least 2 items got fewer."""


# -- world ------------------------------------------------------------------

class EmptyRegionError(BinPickError):
    """Raster region contains no pixels."""


class NonConvergenceError(BinPickError):
    """Pairwise overlap resolution did not converge within the iteration cap."""


class PlacementFailureError(BinPickError):
    """Rejection sampling could not place an item within the attempt cap."""


# -- density ----------------------------------------------------------------

class EmptyBinError(BinPickError):
    """Density map is all zero; no grasp site can be selected."""


class DimensionMismatchError(BinPickError):
    """Two maps that must share dimensions do not."""


# -- grasp ------------------------------------------------------------------

class WidthOutOfRangeError(BinPickError):
    """Grasp width outside (0, max_open_width]."""


# -- singulation ------------------------------------------------------------

class NoItemsError(BinPickError):
    """Clustering called with an empty point set."""


class NothingToSingulateError(BinPickError):
    """No cluster with at least 2 members exists."""


class NoAccessiblePointError(BinPickError):
    """No collision-free gripper standoff exists for the planned push."""
