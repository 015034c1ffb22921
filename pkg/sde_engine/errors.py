"""SDE engine errors"""


class GridError(ValueError):
    """Invalid time grid or grid mismatch"""


class RetractionFailure(ValueError):
    """Integrated point left the manifold beyond tolerance"""


class SingularFlow(ValueError):
    """Linearized one-step map is numerically singular"""


class ResampleDivergence(ValueError):
    """Re-integrated path drifted away from the base path"""
