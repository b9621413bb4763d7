"""Proper orthogonal decomposition via the method of snapshots.

Snapshots are rows; the temporal correlation matrix C = X X^T / T is
eigendecomposed and spatial modes are recovered as normalized X^T u_k.
Modes are sign-fixed so the largest-magnitude component is positive.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PodBasis:
    """Temporal mean, orthonormal spatial modes (columns), eigenvalues."""

    mean: np.ndarray
    modes: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(default=None)

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]


def temporal_mean(snapshots) -> np.ndarray:
    """Column-wise mean over the snapshot rows."""
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2 or snapshots.shape[0] < 1:
        raise ValueError("snapshots must be a nonempty (T, D) matrix")
    return snapshots.mean(axis=0)


def pod_basis(snapshots, n_pod: int) -> PodBasis:
    """Top ``n_pod`` modes and eigenvalues from centered snapshots.

    Raises when the requested modes reach below 1e-12 of the leading
    eigenvalue (rank-deficient request).
    """
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2:
        raise ValueError("snapshots must be a (T, D) matrix")
    t_count, dim = snapshots.shape
    if not 1 <= n_pod <= min(t_count, dim):
        raise ValueError(f"need 1 <= n_pod <= min(T, D) = {min(t_count, dim)}, got {n_pod}")
    mean = snapshots.mean(axis=0)
    centered = snapshots - mean
    corr = (centered @ centered.T) / t_count
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    lam_max = eigvals[0] if len(eigvals) else 0.0
    if lam_max <= 0.0 or eigvals[n_pod - 1] < 1e-12 * lam_max:
        raise ValueError(f"rank deficient for requested n_pod={n_pod}")
    modes = np.empty((dim, n_pod))
    for k in range(n_pod):
        vec = centered.T @ eigvecs[:, k]
        vec /= np.linalg.norm(vec)
        if vec[np.argmax(np.abs(vec))] < 0:  # sign convention
            vec = -vec
        modes[:, k] = vec
    return PodBasis(mean=mean, modes=modes, eigenvalues=eigvals[:n_pod])


def pod_project(basis: PodBasis, snapshots) -> np.ndarray:
    """Coefficients alpha[t, k] = <snapshot_t - mean, mode_k>."""
    snapshots = np.atleast_2d(np.asarray(snapshots, dtype=np.float64))
    if snapshots.shape[1] != basis.modes.shape[0]:
        raise ValueError(
            f"snapshot dimension {snapshots.shape[1]} does not match modes ({basis.modes.shape[0]})"
        )
    return (snapshots - basis.mean) @ basis.modes


def pod_reconstruct(basis: PodBasis, coeffs) -> np.ndarray:
    """Fields mean + sum_k alpha_k mode_k for each coefficient row."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    if coeffs.shape[1] != basis.n_modes:
        raise ValueError(
            f"coefficient width {coeffs.shape[1]} does not match mode count {basis.n_modes}"
        )
    return basis.mean + coeffs @ basis.modes.T
