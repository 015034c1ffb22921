"""Redundant/relevant decomposition of the driving noise and driver reconstruction"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from geometry.so3 import polar
from sde_engine.errors import ResampleDivergence
from sde_engine.grid import BrownianDriver
from sde_engine.integrator import SolutionPath
from sde_engine.random_streams import Channel, gaussian_block
from sde_engine.schemes import scheme_for

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-8
# Re-integrated paths differ from the base at order sqrt(dt) under the Heun step
DIVERGENCE_FACTOR = 10.0


@dataclass
class NoiseSplit:
    """
    dB_k = Q_k (dB~_k + dbeta_k).

    frames Q_k (N+1, *batch, m, m) map ker X(x_0) onto ker X(x_k); relevant and
    redundant hold the components in x_0 coordinates, shape (N, *batch, m).
    kernel_basis spans ker X(x_0), shape (m, r).
    """

    frames: np.ndarray
    relevant: np.ndarray
    redundant: np.ndarray
    kernel_basis: np.ndarray

    @property
    def rank(self) -> int:
        return self.kernel_basis.shape[1]

    def beta_coordinates(self) -> np.ndarray:
        """Redundant increments as (N, *batch, r) coordinates of ker X(x_0)"""
        return self.redundant @ self.kernel_basis

    def recombine(self) -> np.ndarray:
        q = self.frames[:-1]
        return np.einsum("...ij,...j->...i", q, self.relevant + self.redundant)

    def transported_redundant(self) -> np.ndarray:
        """Q_k dbeta_k, the redundant noise seen at x_k"""
        return np.einsum("...ij,...j->...i", self.frames[:-1], self.redundant)

    def orthogonality_defect(self) -> float:
        gram = np.swapaxes(self.frames, -1, -2) @ self.frames
        return float(np.max(np.abs(gram - np.eye(gram.shape[-1])), initial=0.0))


def _frame_step(k_perp_from: np.ndarray, k_perp_to: np.ndarray, q: np.ndarray, step: int) -> np.ndarray:
    """Transport for the direct-sum projected connection on the trivial R^m bundle"""
    eye = np.eye(q.shape[-1])
    move = k_perp_to @ k_perp_from + (eye - k_perp_to) @ (eye - k_perp_from)
    nxt = polar(move) @ q
    defect = float(np.max(np.abs(np.swapaxes(nxt, -1, -2) @ nxt - eye), initial=0.0))
    if defect > ORTHOGONALITY_TOL:
        logger.warning(f"Step {step}: noise frame orthogonality defect {defect:.3e}; re-orthonormalizing")
        nxt = polar(nxt)
    return nxt


def decompose_noise(path: SolutionPath) -> NoiseSplit:
    """
    Split dB_k into K_perp(x_k)dB_k and K(x_k)dB_k pulled back to x_0.

    Returns:
        NoiseSplit with frames along every path in the batch
    """
    model = path.model
    steps = path.grid.steps
    m = model.m
    k_perp = model.kernel_complement(path.points)
    frames = np.empty(k_perp.shape)
    frames[0] = np.broadcast_to(np.eye(m), k_perp.shape[1:])
    for k in range(steps):
        frames[k + 1] = _frame_step(k_perp[k], k_perp[k + 1], frames[k], k)
    q_t = np.swapaxes(frames[:-1], -1, -2)
    inc = path.driver.increments
    rel = np.einsum("...ij,...j->...i", k_perp[:-1], inc)
    relevant = np.einsum("...ij,...j->...i", q_t, rel)
    redundant = np.einsum("...ij,...j->...i", q_t, inc - rel)
    basis = model.kernel_basis(path.points.reshape(-1, model.d)[0])
    return NoiseSplit(frames=frames, relevant=relevant, redundant=redundant, kernel_basis=basis)


def divergence_tolerance(dt: float, scale: float = 1.0) -> float:
    return DIVERGENCE_FACTOR * np.sqrt(dt) * scale


def reconstruct_driver(
    path: SolutionPath,
    split: NoiseSplit,
    beta: np.ndarray,
    tol: Optional[float] = None
) -> Tuple[BrownianDriver, SolutionPath]:
    """
    Rebuild drivers from the base relevant noise and fresh redundant noise.

    dB'_k = Q'_k (dB~_k + beta'_k) with Q' propagated along the re-integrated
    path itself, so the new driver and path are built step by step together.

    Args:
        path: Single base path (batch shape ())
        split: Its noise split
        beta: Redundant increments in ker X(x_0) coordinates, shape (N, *resamples, r)
        tol: Sup-distance tolerance against the base path (default 10 sqrt(dt))

    Returns:
        The resampled driver and its solution path, batch shape = resamples
    """
    model = path.model
    grid = path.grid
    dt = grid.dt
    tol = divergence_tolerance(dt) if tol is None else tol
    scheme = scheme_for(model)
    beta = np.asarray(beta, dtype=float)
    batch = beta.shape[1:-1]
    m = model.m

    redundant = beta @ split.kernel_basis.T
    relevant = split.relevant.reshape((grid.steps,) + (1,) * len(batch) + (m,))
    increments = np.empty((grid.steps,) + batch + (m,))
    points = np.empty((grid.steps + 1,) + batch + (model.d,))
    points[0] = path.x0
    x = points[0]
    q = np.broadcast_to(np.eye(m), batch + (m, m)).copy()
    k_perp = model.kernel_complement(x)
    for k in range(grid.steps):
        db = np.einsum("...ij,...j->...i", q, relevant[k] + redundant[k])
        increments[k] = db
        x, _ = scheme.step(x, db, dt)
        points[k + 1] = x
        k_perp_next = model.kernel_complement(x)
        q = _frame_step(k_perp, k_perp_next, q, k)
        k_perp = k_perp_next

    base = path.points.reshape((grid.steps + 1,) + (1,) * len(batch) + (model.d,))
    distance = float(np.max(np.linalg.norm(points - base, axis=-1), initial=0.0))
    if distance > tol:
        raise ResampleDivergence(f"Re-integrated path drifted {distance:.3e} from the base path (tolerance {tol:.3e})")
    logger.debug(f"Reconstructed {int(np.prod(batch))} drivers, sup distance {distance:.3e}")

    idx = np.broadcast_to(np.asarray(path.driver.path_indices), batch)
    driver = BrownianDriver(grid=grid, increments=increments, seed=path.driver.seed, path_indices=idx, level=path.driver.level)
    return driver, SolutionPath(model=model, driver=driver, points=points)


def sup_distance(path: SolutionPath, other: SolutionPath) -> np.ndarray:
    """Per-path sup_k |x_k - x'_k|"""
    extra = other.points.ndim - path.points.ndim
    base = path.points.reshape(path.points.shape[:-1] + (1,) * extra + path.points.shape[-1:])
    return np.max(np.linalg.norm(other.points - base, axis=-1), axis=0)


def resample_beta(split: NoiseSplit, seed: int, base_index: int, count: int, dt: float, level: int = 0) -> np.ndarray:
    """Fresh redundant increments for `count` resamples, shape (N, count, r)"""
    steps = split.relevant.shape[0]
    draws = gaussian_block(seed, range(count), Channel.RESAMPLE, (steps, split.rank), scale=np.sqrt(dt), level=level, extra=(base_index,))
    return draws


def conditional_resamples(
    path: SolutionPath,
    split: NoiseSplit,
    count: int,
    seed: int,
    base_index: int = 0,
    tol: Optional[float] = None
) -> Tuple[BrownianDriver, SolutionPath, np.ndarray]:
    """Draw `count` redundant-noise resamples of a single base path and re-integrate them"""
    beta = resample_beta(split, seed, base_index, count, path.grid.dt)
    driver, resampled = reconstruct_driver(path, split, beta, tol=tol)
    return driver, resampled, beta


def check_recombination(split: NoiseSplit, driver: BrownianDriver) -> float:
    return float(np.max(np.abs(split.recombine() - driver.increments), initial=0.0))

