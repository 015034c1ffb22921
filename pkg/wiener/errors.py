"""Wiener space errors"""


class NonFiniteEvaluation(ValueError):
    """Functional returned NaN or infinite values"""


class InvalidCoefficient(ValueError):
    """Chaos coefficient has the wrong shape or order"""
