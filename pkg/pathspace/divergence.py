"""Integration by parts on path space through the projected derivative xbar"""
import logging
from typing import Tuple

import numpy as np

from pathspace.cameron_martin import CameronMartinVector
from pathspace.cylindrical import CylindricalFunction, cylindrical_dH
from pathspace.tangents import xbar
from sde_engine.integrator import SolutionPath
from transport.frames import TransportFrame
from wiener.integrals import divergence_of_h

logger = logging.getLogger(__name__)


def pathspace_ibp_sample(
    f: CylindricalFunction,
    path: SolutionPath,
    frame: TransportFrame,
    h: CameronMartinVector
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-path pair (d_H f(xbar h), f(x) int <h', dB>).

    The two columns agree in mean: the divergence of xbar h on path space is the
    flat divergence of h.
    """
    derivative = cylindrical_dH(f, path, xbar(path, frame, h).values)
    weighted = f.value(path) * -divergence_of_h(path.driver, h)
    return derivative, weighted
