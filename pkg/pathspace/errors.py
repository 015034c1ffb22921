"""Path space errors"""


class OffGridError(ValueError):
    """Cylindrical function and path live on different grids"""


class NonFiniteDensity(ValueError):
    """One-form density has NaN or infinite entries"""
