"""Dense SPD linear algebra and vector geometry for kernel computations.

Everything downstream (kernel norms, inner products, angle metrics) funnels
through the Cholesky factorization of a jittered Gram matrix, so the policy
for conditioning lives here and nowhere else.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

# Relative jitter added to the diagonal before factorization, as a fraction
# of the mean diagonal scale trace(K)/n.  Near-duplicate samples make Gram
# matrices numerically singular; this keeps solves stable without visibly
# perturbing well-conditioned problems.
DEFAULT_JITTER_SCALE = 1e-8

# A failed factorization is retried this many times, multiplying the jitter
# by 10 each attempt, before giving up.
JITTER_RETRIES = 3

SYMMETRY_RTOL = 1e-10


class SingularKernelError(np.linalg.LinAlgError):
    """Gram matrix could not be factorized even after jitter escalation."""


class DegenerateVectorError(ValueError):
    """A vector with zero (or non-finite) norm where a direction is required."""


class KernelMatrix:
    """Symmetric positive-semidefinite Gram matrix with a diagonal jitter.

    The matrix is immutable after construction and may be shared across
    threads.  The Cholesky factor of ``entries + jitter_used * I`` is computed
    lazily on first solve and cached; ``jitter_used`` starts at ``jitter`` and
    escalates by factors of 10 (up to ``JITTER_RETRIES`` times) if the
    factorization fails.
    """

    def __init__(self, entries: np.ndarray, jitter: float | None = None):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"kernel matrix must be square, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("kernel matrix has non-finite entries")
        scale = np.max(np.abs(entries))
        asym = np.max(np.abs(entries - entries.T))
        if scale > 0 and asym > SYMMETRY_RTOL * scale:
            raise ValueError(
                f"kernel matrix is not symmetric: max asymmetry {asym:.3e} "
                f"exceeds {SYMMETRY_RTOL:.0e} * scale {scale:.3e}"
            )
        # Exact symmetry simplifies everything downstream.
        entries = 0.5 * (entries + entries.T)
        n = entries.shape[0]
        if jitter is None:
            jitter = DEFAULT_JITTER_SCALE * float(np.trace(entries)) / n
        if jitter < 0:
            raise ValueError("jitter must be non-negative")
        self._entries = entries
        self._entries.setflags(write=False)
        self.jitter = float(jitter)
        self._chol: np.ndarray | None = None
        self._jitter_used: float | None = None

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    def cholesky(self) -> np.ndarray:
        """Lower-triangular factor L with L L^T = entries + jitter_used * I."""
        if self._chol is None:
            jitter = self.jitter
            eye = np.eye(self.n)
            for attempt in range(JITTER_RETRIES + 1):
                try:
                    self._chol = cholesky(self._entries + jitter * eye, lower=True)
                    self._jitter_used = jitter
                    break
                except np.linalg.LinAlgError:
                    # escalate: zero jitter needs a finite starting point
                    jitter = jitter * 10 if jitter > 0 else max(
                        DEFAULT_JITTER_SCALE * float(np.trace(self._entries)) / self.n,
                        np.finfo(float).tiny,
                    )
            else:
                eigs = np.linalg.eigvalsh(self._entries)
                raise SingularKernelError(
                    f"Cholesky failed after {JITTER_RETRIES} jitter escalations "
                    f"(final jitter {jitter:.3e}); smallest eigenvalue "
                    f"{eigs[0]:.3e}, largest {eigs[-1]:.3e}"
                )
        return self._chol

    @property
    def jitter_used(self) -> float:
        self.cholesky()
        return self._jitter_used

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (entries + jitter_used * I) v = b for one or many right-hand sides."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        return cho_solve((self.cholesky(), True), b)

    def half_solve(self, b: np.ndarray) -> np.ndarray:
        """L^{-1} b, the 'whitened' coordinates of b."""
        b = np.asarray(b, dtype=float)
        return solve_triangular(self.cholesky(), b, lower=True)


def spd_solve(kernel: KernelMatrix, b: np.ndarray) -> np.ndarray:
    """Solve the jittered SPD system K v = b."""
    return kernel.solve(b)


def kernel_inner(kernel: KernelMatrix, a: np.ndarray, b: np.ndarray) -> float:
    """Kernel inner product a^T K^{-1} b.

    Computed as (L^{-1}a) . (L^{-1}b) so that the result is exactly symmetric
    in (a, b) and nonnegative for a == b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (kernel.n,) or b.shape != (kernel.n,):
        raise ValueError(
            f"vectors must have shape ({kernel.n},), got {a.shape} and {b.shape}"
        )
    wa = kernel.half_solve(a)
    wb = wa if b is a else kernel.half_solve(b)
    return float(wa @ wb)


def acute_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Acute angle arccos(|u.v| / (|u||v|)) in [0, pi/2].

    The absolute value folds sign disagreements of both classes into one
    angle; the cosine is clamped to [0, 1] because rounding can push it
    marginally above 1.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0 or not (np.isfinite(nu) and np.isfinite(nv)):
        raise DegenerateVectorError(
            f"acute_angle needs nonzero finite vectors, got norms {nu}, {nv}"
        )
    c = abs(float(u @ v)) / (nu * nv)
    return float(np.arccos(min(c, 1.0)))
