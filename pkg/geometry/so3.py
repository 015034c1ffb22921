"""Rotation group helpers: hat/vee, Rodrigues exponential, right Jacobian, polar factor"""
import numpy as np

# Below this angle the trigonometric coefficients switch to Taylor series
SMALL_ANGLE = 1e-4


def hat(e: np.ndarray) -> np.ndarray:
    """Map (..., 3) vectors to (..., 3, 3) skew matrices with hat(a) b = a x b"""
    e = np.asarray(e, dtype=float)
    out = np.zeros(e.shape[:-1] + (3, 3))
    out[..., 0, 1] = -e[..., 2]
    out[..., 0, 2] = e[..., 1]
    out[..., 1, 0] = e[..., 2]
    out[..., 1, 2] = -e[..., 0]
    out[..., 2, 0] = -e[..., 1]
    out[..., 2, 1] = e[..., 0]
    return out


def vee(a: np.ndarray) -> np.ndarray:
    """Inverse of hat on skew matrices"""
    return np.stack([a[..., 2, 1], a[..., 0, 2], a[..., 1, 0]], axis=-1)


def skew(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a - np.swapaxes(a, -1, -2))


def _coefficients(theta: np.ndarray):
    """sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3 with series near zero"""
    small = theta < SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(t) / t)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(t)) / (t * t))
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0, (t - np.sin(t)) / (t * t * t))
    return a, b, c


def exp_so3(e: np.ndarray) -> np.ndarray:
    """Rodrigues formula exp(hat(e))"""
    e = np.asarray(e, dtype=float)
    theta = np.linalg.norm(e, axis=-1)
    a, b, _ = _coefficients(theta)
    k = hat(e)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * (k @ k)


def right_jacobian_so3(e: np.ndarray) -> np.ndarray:
    """
    Right Jacobian of the exponential map.

    d/ds exp(hat(e + s w)) at s=0 equals exp(hat(e)) hat(Jr(e) w).
    """
    e = np.asarray(e, dtype=float)
    theta = np.linalg.norm(e, axis=-1)
    _, b, c = _coefficients(theta)
    k = hat(e)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye - b[..., None, None] * k + c[..., None, None] * (k @ k)


def polar(a: np.ndarray) -> np.ndarray:
    """Orthogonal polar factor U V^T of a batch of matrices"""
    u, _, vt = np.linalg.svd(a)
    return u @ vt


def rotation_polar(a: np.ndarray) -> np.ndarray:
    """Nearest rotation (det +1) to a batch of 3x3 matrices"""
    u, _, vt = np.linalg.svd(a)
    sign = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, -1] *= sign[..., None]
    return u @ vt
