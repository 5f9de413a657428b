"""Rotation-group helpers: hat/vee, exponential map, re-projection."""

import numpy as np

from multisparse.errors import ContractError


def hat(a):
    a = np.asarray(a, dtype=float)
    return np.array([[0.0, -a[2], a[1]],
                     [a[2], 0.0, -a[0]],
                     [-a[1], a[0], 0.0]])


def vee(A, tol=1e-8):
    A = np.asarray(A, dtype=float)
    if np.linalg.norm(A + A.T) >= tol:
        raise ContractError("vee() expects a skew-symmetric matrix")
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def vee_skew(A):
    """vee of the skew-symmetric part; no contract check."""
    return 0.5 * np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])


def expm_so3(w):
    """Rodrigues formula for ``exp(hat(w))``."""
    w = np.asarray(w, dtype=float)
    th2 = w @ w
    K = hat(w)
    if th2 < 1e-12:
        # Taylor terms to O(th^4)
        return np.eye(3) + (1.0 - th2 / 6.0) * K + (0.5 - th2 / 24.0) * (K @ K)
    th = np.sqrt(th2)
    return np.eye(3) + (np.sin(th) / th) * K + ((1.0 - np.cos(th)) / th2) * (K @ K)


def rotation_angle(R):
    c = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    return float(np.arccos(c))


def orthonormality_error(R):
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def project_so3(R):
    """Closest rotation in Frobenius norm (polar factor)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1
        Q = U @ Vt
    return Q


def attitude_error(R, R_d):
    """``e_R = 1/2 vee(R_d^T R - R^T R_d)``."""
    return vee_skew(R_d.T @ R - R.T @ R_d)
