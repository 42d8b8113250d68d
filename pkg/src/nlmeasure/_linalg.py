"""Shared SPD matrix helpers: factorization with fallbacks, solves, clamping.

Everything here operates on small dense symmetric matrices (output and
state dimensions, typically 1..10), so robustness is preferred over
asymptotic speed.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DegenerateCovarianceError, NotPositiveSemiDefiniteError

# Relative eigenvalue cutoff for pseudo-inverse solves of near-singular SPD
# matrices (degenerate priors in the small-spread limit).
SPD_SOLVE_RTOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Exact symmetric part (M + M^T) / 2."""
    return 0.5 * (m + m.T)


def spd_factor(cov: np.ndarray, jitter_decades: int = 3) -> np.ndarray:
    """Return a factor F with F @ F.T == cov for a PSD matrix.

    Tries a plain Cholesky first.  On failure, adds a jitter of
    1e-12 * trace / dim to the diagonal and retries, growing the jitter by
    a decade up to `jitter_decades` times.  If that still fails (e.g. an
    exactly singular matrix, whose trace-scaled jitter stays zero), falls
    back to an eigenvalue factor with negative eigenvalues clamped to zero.

    Raises NotPositiveSemiDefiniteError when the matrix is genuinely
    indefinite (a negative eigenvalue large relative to the spectrum).
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {cov.shape}")
    dim = cov.shape[0]
    if dim == 0:
        return cov.copy()
    if not np.all(np.isfinite(cov)):
        raise NotPositiveSemiDefiniteError("not positive semi-definite: non-finite entries")

    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass

    base = 1e-12 * np.trace(cov) / dim
    for decade in range(jitter_decades):
        jitter = base * 10.0**decade
        if jitter <= 0.0:
            break
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(dim))
        except np.linalg.LinAlgError:
            continue

    # Eigenvalue fallback: clamp tiny negative eigenvalues at zero.
    eigvals, eigvecs = np.linalg.eigh(symmetrize(cov))
    scale = max(eigvals.max(initial=0.0), 0.0)
    if eigvals.min() < -1e-8 * max(scale, 1.0):
        raise NotPositiveSemiDefiniteError(
            f"not positive semi-definite: eigenvalue {eigvals.min():.3e}"
        )
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for symmetric positive (semi-)definite a.

    Cholesky when possible; otherwise an eigenvalue pseudo-inverse with
    relative threshold SPD_SOLVE_RTOL * lambda_max.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DegenerateCovarianceError("degenerate input covariance: non-finite entries")
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
        return scipy.linalg.cho_solve((c, low), b, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    eigvals, eigvecs = np.linalg.eigh(symmetrize(a))
    lam_max = eigvals.max(initial=0.0)
    if lam_max <= 0.0:
        raise DegenerateCovarianceError("degenerate input covariance: no positive eigenvalue")
    inv = np.zeros_like(eigvals)
    keep = eigvals > SPD_SOLVE_RTOL * lam_max
    inv[keep] = 1.0 / eigvals[keep]
    proj = eigvecs.T @ b
    scaled = inv[:, None] * proj if proj.ndim == 2 else inv * proj
    return eigvecs @ scaled


def inv_spd(a: np.ndarray) -> np.ndarray:
    """Symmetrized inverse of an SPD matrix via solve_spd."""
    return symmetrize(solve_spd(a, np.eye(a.shape[0])))


def clamp_psd(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Project a symmetric matrix onto the PSD cone.

    Returns the clamped matrix and the total clamped mass (the absolute sum
    of removed negative eigenvalues), which callers record as a diagnostic.
    """
    sym = symmetrize(np.asarray(m, dtype=float))
    eigvals, eigvecs = np.linalg.eigh(sym)
    clipped = np.clip(eigvals, 0.0, None)
    clamp_mass = float(np.sum(clipped - eigvals))
    if clamp_mass == 0.0:
        return sym, 0.0
    return symmetrize((eigvecs * clipped) @ eigvecs.T), clamp_mass


def eigh_descending(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition with deterministic ordering.

    Eigenvalues are sorted descending.  Each eigenvector's sign is fixed so
    its largest-magnitude component is positive, which makes downstream
    constructions reproducible across runs and BLAS builds.
    """
    eigvals, eigvecs = np.linalg.eigh(symmetrize(np.asarray(m, dtype=float)))
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    for j in range(eigvecs.shape[1]):
        col = eigvecs[:, j]
        pivot = int(np.argmax(np.abs(col)))
        if col[pivot] < 0:
            eigvecs[:, j] = -col
    return eigvals, eigvecs
