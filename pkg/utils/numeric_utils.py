from typing import Callable, Optional

import numpy as np
from scipy.stats import special_ortho_group


def central_difference_gradient(f: Callable[[np.ndarray], float], point: np.ndarray, h: float) -> np.ndarray:
    """
    Central finite-difference gradient of a scalar function.

    Args:
        f: Scalar function of an n-vector
        point: Where to differentiate
        h: Absolute step along every coordinate

    Returns:
        n-vector of (f(x + h e_i) - f(x - h e_i)) / 2h
    """
    point = np.asarray(point, dtype=float)
    grad = np.empty_like(point)
    for i in range(len(point)):
        step = np.zeros_like(point)
        step[i] = h
        grad[i] = (f(point + step) - f(point - step)) / (2.0 * h)
    return grad


def relative_error(approx: np.ndarray, exact: np.ndarray, floor: float) -> float:
    """
    Relative distance between two vectors.

    Args:
        approx: Candidate value
        exact: Reference value
        floor: Lower bound of the denominator, keeps near-zero references finite

    Returns:
        |approx - exact| / max(|exact|, floor)
    """
    return float(np.linalg.norm(approx - exact) / max(float(np.linalg.norm(exact)), floor))


def random_rotation(dim: int, seed: Optional[int] = None) -> np.ndarray:
    """Haar-random element of SO(dim)"""
    if dim == 1:
        return np.ones((1, 1))
    return special_ortho_group.rvs(dim, random_state=seed)


def rotation_fixing_axis(dim: int, axis: int, seed: Optional[int] = None) -> np.ndarray:
    """Random rotation of R^dim that leaves the coordinate axis `axis` pointwise fixed"""
    others = [i for i in range(dim) if i != axis]
    rot = np.eye(dim)
    rot[np.ix_(others, others)] = random_rotation(dim - 1, seed)
    return rot


def point_segment_distance(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """
    Euclidean distance from a point to the segment [a, b].

    Returns:
        The distance to the closest point of the segment (endpoints included)
    """
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return float(np.linalg.norm(point - a))
    s = min(1.0, max(0.0, float(np.dot(point - a, ab)) / denom))
    return float(np.linalg.norm(point - (a + s * ab)))


def local_minima(values: np.ndarray) -> np.ndarray:
    """Indices i with values[i-1] > values[i] <= values[i+1] (interior samples only)"""
    v = np.asarray(values)
    if len(v) < 3:
        return np.array([], dtype=int)
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])
    return np.nonzero(inner)[0] + 1
