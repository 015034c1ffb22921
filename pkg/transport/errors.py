"""Transport errors"""


class GridTooCoarse(ValueError):
    """Too few grid nodes for the requested difference stencil"""
