"""Left-right hyperspherical harmonics on S^3.

S^3 is identified with SU(2) through ``g(omega) = omega_4 - i omega_a sigma_a``.
Writing ``g = [[a, b], [-conj(b), conj(a)]]`` the Wigner matrix elements are
homogeneous polynomials of degree 2j in ``(a, conj(a), b, conj(b))``; they are
stored as monomial tables so that values and exact gradients come from the
same data.

Conventions: the right index of the Wigner matrix is the eigenvalue ``n`` of
the generators dual to the Maurer-Cartan coframe; the left index carries
``-m`` so that ``m`` is the eigenvalue of the left-action generator with the
same commutation relations.  Labels are doubled integers throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, pi, sqrt

import numpy as np

from .errors import DomainError

# d(a, conj a, b, conj b) / d omega_A; rows: variable, columns: omega_1..omega_4
VARIABLE_GRADIENT = np.array(
    [
        [0.0, 0.0, -1j, 1.0],
        [0.0, 0.0, 1j, 1.0],
        [-1j, -1.0, 0.0, 0.0],
        [1j, -1.0, 0.0, 0.0],
    ]
)

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class SpinLabel:
    """Harmonic label (j; m, n) stored as doubled integers."""

    two_j: int
    two_m: int
    two_n: int

    def __post_init__(self):
        for name in ("two_j", "two_m", "two_n"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise DomainError(f"{name} must be an integer")
        if self.two_j < 0:
            raise DomainError("two_j must be non-negative")
        if abs(self.two_m) > self.two_j or abs(self.two_n) > self.two_j:
            raise DomainError(
                f"|m| and |n| must not exceed j (got 2j={self.two_j}, 2m={self.two_m}, 2n={self.two_n})"
            )
        if (self.two_m - self.two_j) % 2 or (self.two_n - self.two_j) % 2:
            raise DomainError("m and n must differ from j by integers")


def su2_point(omega) -> np.ndarray:
    """SU(2) matrix ``omega_4 * 1 - i omega_a sigma_a`` for unit 4-vectors."""
    w = np.asarray(omega, dtype=float)
    norm = np.linalg.norm(w, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise DomainError("omega must be a unit 4-vector")
    g = w[..., 3, None, None] * np.eye(2) - 1j * np.einsum("...a,aij->...ij", w[..., :3], PAULI)
    return g


@lru_cache(maxsize=None)
def wigner_monomials(two_j: int, two_row: int, two_col: int):
    """Monomial table of the Wigner matrix element D^j_{row,col}.

    Returns ``(coef, powers)`` where ``powers[k] = (p_a, p_abar, p_b, p_bbar)``
    and the element equals ``sum_k coef[k] * a^p_a abar^p_abar b^p_b bbar^p_bbar``.
    """
    jr = (two_j + two_row) // 2  # j + m'
    jr_ = (two_j - two_row) // 2  # j - m'
    jc = (two_j + two_col) // 2  # j + m
    jc_ = (two_j - two_col) // 2  # j - m
    norm = sqrt(factorial(jr) * factorial(jr_) / (factorial(jc) * factorial(jc_)))
    coefs, powers = [], []
    # (a u - conj(b) v)^(j+m) (b u + conj(a) v)^(j-m), coefficient of u^(j+m') v^(j-m')
    for k in range(jc + 1):
        l = jr - k
        if l < 0 or l > jc_:
            continue
        c = comb(jc, k) * comb(jc_, l) * (-1) ** (jc - k) * norm
        powers.append((k, jc_ - l, l, jc - k))
        coefs.append(float(c))
    return np.array(coefs), np.array(powers, dtype=np.int64).reshape(-1, 4)


def harmonic_normalization(two_j: int) -> float:
    return sqrt((two_j + 1) / (2.0 * pi**2))


@lru_cache(maxsize=None)
def harmonic_monomials(two_j: int, two_m: int, two_n: int):
    """Monomial table for the normalised harmonic Y_{j;m,n}."""
    coef, powers = wigner_monomials(two_j, -two_m, two_n)
    return coef * harmonic_normalization(two_j), powers


def _su2_variables(omega):
    w = np.asarray(omega, dtype=float)
    a = w[..., 3] - 1j * w[..., 2]
    b = -w[..., 1] - 1j * w[..., 0]
    return a, np.conj(a), b, np.conj(b)


def wigner_matrix(two_j: int, omega) -> np.ndarray:
    """Full (2j+1)x(2j+1) Wigner matrix of ``g(omega)``; index 0 is m = +j."""
    w = np.asarray(omega, dtype=float)
    variables = _su2_variables(w)
    dim = two_j + 1
    out = np.zeros(w.shape[:-1] + (dim, dim), dtype=complex)
    for r in range(dim):
        for c in range(dim):
            coef, powers = wigner_monomials(two_j, two_j - 2 * r, two_j - 2 * c)
            out[..., r, c] = _evaluate(coef, powers, variables)
    return out


def _evaluate(coef, powers, variables):
    total = 0j
    for ck, pk in zip(coef, powers):
        term = ck
        for v, p in zip(variables, pk):
            if p:
                term = term * v**p
        total = total + term
    return total


def harmonic(label: SpinLabel, omega) -> np.ndarray:
    """Evaluate Y_{j;m,n} at unit 4-vectors ``omega`` (complex result)."""
    w = np.asarray(omega, dtype=float)
    norm = np.linalg.norm(w, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise DomainError("omega must be a unit 4-vector")
    return harmonic_polynomial(label, w)


def harmonic_polynomial(label: SpinLabel, omega) -> np.ndarray:
    """Degree-2j homogeneous extension of Y_{j;m,n} to all of R^4."""
    coef, powers = harmonic_monomials(label.two_j, label.two_m, label.two_n)
    w = np.asarray(omega, dtype=float)
    return np.asarray(_evaluate(coef, powers, _su2_variables(w)) + np.zeros(w.shape[:-1]))


def harmonic_gradient(label: SpinLabel, omega) -> np.ndarray:
    """Exact gradient of the homogeneous extension, shape (..., 4)."""
    coef, powers = harmonic_monomials(label.two_j, label.two_m, label.two_n)
    w = np.asarray(omega, dtype=float)
    variables = _su2_variables(w)
    grad = np.zeros(w.shape, dtype=complex)
    for ck, pk in zip(coef, powers):
        for i in range(4):
            if pk[i] == 0:
                continue
            term = ck * pk[i] * variables[i] ** (pk[i] - 1)
            for v_idx, (v, p) in enumerate(zip(variables, pk)):
                if v_idx != i and p:
                    term = term * v**p
            grad += term[..., None] * VARIABLE_GRADIENT[i] if np.ndim(term) else term * VARIABLE_GRADIENT[i]
    return grad


def all_labels(max_two_j: int):
    """Every SpinLabel with 2j <= max_two_j, in deterministic order."""
    return [
        SpinLabel(tj, tm, tn)
        for tj in range(max_two_j + 1)
        for tm in range(-tj, tj + 1, 2)
        for tn in range(-tj, tj + 1, 2)
    ]
