import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotfield import harmonics
from knotfield.errors import DomainError
from knotfield.harmonics import SpinLabel
from knotfield.verification import _sphere_laplacian, s3_quadrature


def random_unit(rng, n):
    w = rng.normal(size=(n, 4))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def quaternion_product(p, q):
    """Product of unit quaternions written as omega_4 + i omega_a sigma_a style 4-vectors."""
    g1 = harmonics.su2_point(p)
    g2 = harmonics.su2_point(q)
    g = g1 @ g2
    # invert g = w4 * 1 - i w_a sigma_a
    w4 = np.real(np.trace(g)) / 2
    wa = [np.real(1j * np.trace(g @ s)) / 2 for s in harmonics.PAULI]
    return np.array([*wa, w4])


@pytest.mark.parametrize("args", [(-1, 0, 0), (1, 3, 1), (2, 1, 0), (1, 1, 0)])
def test_spin_label_validation(args):
    with pytest.raises(DomainError):
        SpinLabel(*args)


def test_trivial_harmonic_is_constant():
    w = random_unit(np.random.default_rng(0), 5)
    np.testing.assert_allclose(harmonics.harmonic(SpinLabel(0, 0, 0), w), 1 / (np.sqrt(2) * np.pi))


@pytest.mark.parametrize("two_j", [1, 2, 3, 4])
def test_wigner_matrix_is_a_unitary_representation(rng, two_j):
    p, q = random_unit(rng, 2)
    r = quaternion_product(p, q)
    D_p, D_q, D_r = (harmonics.wigner_matrix(two_j, w) for w in (p, q, r))
    np.testing.assert_allclose(D_p @ D_q, D_r, atol=1e-12)
    np.testing.assert_allclose(D_p @ D_p.conj().T, np.eye(two_j + 1), atol=1e-12)


def test_spin_half_matrix_is_the_defining_representation(rng):
    w = random_unit(rng, 1)[0]
    np.testing.assert_allclose(harmonics.wigner_matrix(1, w), harmonics.su2_point(w), atol=1e-14)


def test_orthonormality_by_quadrature():
    labels = harmonics.all_labels(2)
    omega, weights = s3_quadrature()
    Y = np.array([harmonics.harmonic(l, omega) for l in labels])
    gram = (Y.conj() * weights) @ Y.T
    np.testing.assert_allclose(gram, np.eye(len(labels)), atol=1e-12)


def test_quadrature_integrates_volume_and_low_moments():
    omega, weights = s3_quadrature()
    assert weights.sum() == pytest.approx(2 * np.pi**2)
    assert (weights * omega[:, 0] ** 2).sum() == pytest.approx(np.pi**2 / 2)


@pytest.mark.parametrize("label", [SpinLabel(1, 1, -1), SpinLabel(2, 0, 2), SpinLabel(3, -1, 3),
                                   SpinLabel(4, 2, -4)])
def test_laplacian_eigenvalue(rng, label):
    pts = random_unit(rng, 40)
    f = harmonics.harmonic(label, pts)
    lam = np.vdot(f, _sphere_laplacian(label, pts)) / np.vdot(f, f)
    assert lam.real == pytest.approx(-label.two_j * (label.two_j + 2), rel=1e-6)
    assert abs(lam.imag) < 1e-6


@given(st.integers(0, 4), st.integers(0, 10), st.floats(0.3, 3.0))
@settings(max_examples=60, deadline=None)
def test_polynomial_extension_is_homogeneous(two_j, idx, scale):
    labels = [l for l in harmonics.all_labels(4) if l.two_j == two_j]
    label = labels[idx % len(labels)]
    w = random_unit(np.random.default_rng(idx), 3)
    np.testing.assert_allclose(harmonics.harmonic_polynomial(label, scale * w),
                               scale**two_j * harmonics.harmonic(label, w), rtol=1e-10, atol=1e-13)


def test_gradient_matches_finite_differences(rng):
    label = SpinLabel(3, 1, -1)
    w = random_unit(rng, 4) * 1.3
    grad = harmonics.harmonic_gradient(label, w)
    h = 1e-6
    for A in range(4):
        d = np.zeros(4)
        d[A] = h
        fd = (harmonics.harmonic_polynomial(label, w + d) - harmonics.harmonic_polynomial(label, w - d)) / (2 * h)
        np.testing.assert_allclose(grad[..., A], fd, atol=1e-8)


@pytest.mark.parametrize("label", [SpinLabel(2, 2, 0), SpinLabel(2, 0, 2), SpinLabel(3, -1, 1)])
def test_left_rotation_multiplies_by_weight_phase(rng, label):
    # Left multiplication by a rotation about the third axis acts diagonally,
    # so Y picks up exp(+-i m alpha), the same phase at every point.
    alpha = 0.37
    rot = np.array([0.0, 0.0, np.sin(alpha / 2), np.cos(alpha / 2)])
    ratios = []
    for w in random_unit(rng, 5):
        ratios.append(harmonics.harmonic(label, quaternion_product(rot, w)) / harmonics.harmonic(label, w))
    ratios = np.array(ratios)
    m = label.two_m / 2
    np.testing.assert_allclose(ratios, ratios[0], atol=1e-10)
    assert min(abs(ratios[0] - np.exp(1j * m * alpha)), abs(ratios[0] - np.exp(-1j * m * alpha))) < 1e-10


def test_rejects_non_unit_points():
    with pytest.raises(DomainError):
        harmonics.harmonic(SpinLabel(1, 1, 1), [1.0, 1.0, 0.0, 0.0])


def test_su2_point_examples():
    np.testing.assert_allclose(harmonics.su2_point([0, 0, 0, 1.0]), np.eye(2))
    np.testing.assert_allclose(harmonics.su2_point([0, 0, 1.0, 0]), np.diag([-1j, 1j]))
    w = random_unit(np.random.default_rng(1), 10)
    dets = [np.linalg.det(harmonics.su2_point(x)) for x in w]
    np.testing.assert_allclose(dets, 1.0, atol=1e-12)


def test_spin_half_harmonic_is_an_su2_entry(rng):
    # With the left weight as first index, Y_{1/2;1/2,1/2} is (1/pi) g_21.
    w = random_unit(rng, 6)
    g = np.array([harmonics.su2_point(x) for x in w])
    np.testing.assert_allclose(harmonics.harmonic(SpinLabel(1, 1, 1), w), g[:, 1, 0] / np.pi, atol=1e-15)


@pytest.mark.parametrize("label", harmonics.all_labels(3))
def test_antipodal_parity(rng, label):
    w = random_unit(rng, 5)
    np.testing.assert_allclose(harmonics.harmonic(label, -w), (-1) ** label.two_j * harmonics.harmonic(label, w),
                               atol=1e-14)
