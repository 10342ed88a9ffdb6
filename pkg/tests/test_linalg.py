import numpy as np
import pytest

from ntkdistill.linalg import (
    DegenerateVectorError,
    KernelMatrix,
    SingularKernelError,
    acute_angle,
    kernel_inner,
    spd_solve,
)


def random_spd(n, rng, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def test_solve_identity():
    k = KernelMatrix(np.eye(3), jitter=0.0)
    b = np.array([1.0, 2.0, 3.0])
    assert np.allclose(spd_solve(k, b), b, rtol=0, atol=1e-12)


def test_solve_diagonal():
    k = KernelMatrix(np.diag([2.0, 2.0]), jitter=0.0)
    assert np.allclose(spd_solve(k, np.array([1.0, 1.0])), [0.5, 0.5])


def test_solve_matches_explicit_inverse():
    # brute-force oracle: multiply by the explicitly inverted matrix
    rng = np.random.default_rng(7)
    m = random_spd(5, rng)
    k = KernelMatrix(m, jitter=0.0)
    b = rng.standard_normal(5)
    expected = np.linalg.inv(m) @ b
    assert np.allclose(spd_solve(k, b), expected, rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("n", [2, 16, 128, 512])
def test_solve_residual(n):
    rng = np.random.default_rng(n)
    m = random_spd(n, rng)
    k = KernelMatrix(m)
    b = rng.standard_normal(n)
    v = spd_solve(k, b)
    assert np.linalg.norm(m @ v - b) / np.linalg.norm(b) <= 1e-6


def test_inner_identity_kernel():
    k = KernelMatrix(np.eye(2), jitter=0.0)
    a = np.array([3.0, 4.0])
    assert kernel_inner(k, a, a) == pytest.approx(25.0)


def test_inner_diagonal():
    k = KernelMatrix(np.diag([4.0, 1.0]), jitter=0.0)
    a = np.array([2.0, 0.0])
    assert kernel_inner(k, a, a) == pytest.approx(1.0)


def test_inner_matches_explicit_inverse():
    rng = np.random.default_rng(11)
    m = random_spd(6, rng)
    k = KernelMatrix(m, jitter=0.0)
    a = rng.standard_normal(6)
    b = rng.standard_normal(6)
    expected = a @ np.linalg.inv(m) @ b
    assert kernel_inner(k, a, b) == pytest.approx(expected, rel=1e-8)
    # symmetry is exact by construction
    assert kernel_inner(k, a, b) == kernel_inner(k, b, a)


def test_inner_self_equals_whitened_norm():
    rng = np.random.default_rng(3)
    m = random_spd(8, rng)
    k = KernelMatrix(m)
    a = rng.standard_normal(8)
    lo = np.linalg.cholesky(m + k.jitter_used * np.eye(8))
    from scipy.linalg import solve_triangular

    w = solve_triangular(lo, a, lower=True)
    assert kernel_inner(k, a, a) == pytest.approx(w @ w, rel=1e-9)
    assert kernel_inner(k, a, a) >= 0


def test_default_jitter_scales_with_trace():
    k = KernelMatrix(np.diag([1.0, 3.0]))
    assert k.jitter == pytest.approx(1e-8 * 2.0)


def test_jitter_escalation_recovers_semidefinite():
    # rank-1 PSD matrix: plain Cholesky of K itself would fail
    v = np.array([1.0, 1.0])
    k = KernelMatrix(np.outer(v, v), jitter=0.0)
    b = np.array([1.0, 1.0])
    sol = spd_solve(k, b)
    assert np.all(np.isfinite(sol))
    assert k.jitter_used > 0


def test_singular_error_names_eigen_scale():
    bad = np.diag([1.0, -5.0])  # indefinite, no jitter can fix it at this scale
    k = KernelMatrix(bad, jitter=1e-16)
    with pytest.raises(SingularKernelError, match="eigenvalue"):
        k.cholesky()


def test_asymmetry_rejected():
    m = np.array([[1.0, 0.5], [0.3, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        KernelMatrix(m)


def test_angle_trivial_cases():
    u = np.array([1.0, 2.0, -0.5])
    assert acute_angle(u, u) == pytest.approx(0.0, abs=1e-7)
    assert acute_angle(u, -u) == pytest.approx(0.0, abs=1e-7)
    assert acute_angle(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(
        np.pi / 2
    )


def test_angle_scale_invariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.standard_normal(4)
        v = rng.standard_normal(4)
        for c in (2.0, -3.5, 1e-6, 1e6):
            assert abs(acute_angle(c * u, v) - acute_angle(u, v)) <= 1e-12


def test_angle_degenerate():
    with pytest.raises(DegenerateVectorError):
        acute_angle(np.zeros(3), np.ones(3))
