import math
from typing import Sequence

import numpy as np

from src.constants import PSD_TOLERANCE


def validate_psd(matrix: np.ndarray, tol: float = PSD_TOLERANCE) -> bool:
    """
    checks that a matrix is square, symmetric and has no eigenvalue
    below -tol times its trace
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    if not np.all(np.isfinite(matrix)):
        return False
    scale = max(float(np.abs(matrix).max(initial=0.0)), 1e-300)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * scale):
        return False
    # an all-zero matrix is a valid (degenerate) covariance
    trace = float(np.trace(matrix))
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    return bool(eigenvalues.min(initial=0.0) >= -tol * max(trace, 0.0))


def validate_elliptic(a: float, e: float) -> bool:
    return a > 0.0 and 0.0 <= e < 1.0


def validate_site(lat: float, lon: float, height: float) -> bool:
    """geodetic latitude in [-pi/2, pi/2], longitude in [-pi, pi], non-negative height"""
    return all(
        [
            -math.pi / 2.0 <= lat <= math.pi / 2.0,
            -math.pi <= lon <= math.pi,
            height >= 0.0,
        ]
    )


def validate_observation_angles(dec: float, sigma_ra: float, sigma_dec: float) -> bool:
    """positive standard deviations and a declination in [-pi/2, pi/2]"""
    return all(
        [
            sigma_ra > 0.0,
            sigma_dec > 0.0,
            -math.pi / 2.0 <= dec <= math.pi / 2.0,
        ]
    )


def validate_sorted(epochs: Sequence[float]) -> bool:
    """epochs are non-decreasing"""
    return all(a <= b for a, b in zip(epochs, epochs[1:]))


def validate_disjoint(correlated: Sequence[int], outliers: Sequence[int]) -> bool:
    return not set(correlated) & set(outliers)


__all__ = [
    "validate_psd",
    "validate_elliptic",
    "validate_site",
    "validate_observation_angles",
    "validate_sorted",
    "validate_disjoint",
]
