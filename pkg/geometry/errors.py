"""Geometry errors"""


class ConstraintViolation(ValueError):
    """Point is off the manifold beyond tolerance"""


class NotTangent(ValueError):
    """Vector is not tangent at its base point"""


class StepUnderflow(ValueError):
    """Finite-difference step too small to resolve a derivative"""
