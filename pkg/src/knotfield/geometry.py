"""Conformal map between Minkowski space and the cylinder over S^3.

All lengths are in units of the de Sitter radius (which is fixed to 1).
Events are arrays whose last axis holds ``(t, x, y, z)``.

The scalar kernels (``_point_*``) are jitted so the field kernel can inline
them; the public functions are thin vectorised wrappers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError

# Levi-Civita symbol, eps[a, b, c]
EPS = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS[_a, _b, _c] = 1.0
    EPS[_a, _c, _b] = -1.0

MINKOWSKI_METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])


@dataclass(frozen=True)
class CylinderPoint:
    """Cylinder coordinates: ``tau`` in (-pi, pi) and unit 4-vector ``omega``."""

    tau: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class CoframeAtEvent:
    """Pulled-back one-forms.

    ``dtau[..., mu]`` and ``e[..., a, mu]`` are the coefficients of dx^mu,
    with mu running over (t, x, y, z).
    """

    dtau: np.ndarray
    e: np.ndarray


def _as_events(events) -> np.ndarray:
    ev = np.asarray(events, dtype=float)
    if ev.shape[-1:] != (4,):
        raise DomainError(f"events must have a trailing axis of length 4, got shape {ev.shape}")
    if not np.all(np.isfinite(ev)):
        raise DomainError("events must be finite")
    return ev


@njit(cache=True)
def _point_sigma(t, x, y, z):
    r2 = x * x + y * y + z * z
    p = r2 - t * t + 1.0
    return 2.0 / np.sqrt(4.0 * t * t + p * p)


@njit(cache=True)
def _point_geometry(t, x, y, z, omega, domega, dtau, e, de):
    """Fill cylinder data and first derivatives at one event.

    omega[A], domega[A, nu] = d omega_A / dx^nu, dtau[mu],
    e[a, mu], de[a, mu, nu] = d e^a_mu / dx^nu.  Returns (sigma, tau).
    """
    xs = (x, y, z)
    r2 = x * x + y * y + z * z
    p = r2 - t * t + 1.0
    s = 4.0 * t * t + p * p
    sig = 2.0 / np.sqrt(s)
    sig2 = sig * sig
    # ds/dx^nu and dsigma/dx^nu = -sigma^3/8 ds
    dsig = np.empty(4)
    dsig[0] = -sig2 * sig / 8.0 * (8.0 * t - 4.0 * p * t)
    for k in range(3):
        dsig[k + 1] = -sig2 * sig / 8.0 * (4.0 * p * xs[k])

    q = r2 - t * t - 1.0
    for a in range(3):
        omega[a] = sig * xs[a]
        for nu in range(4):
            domega[a, nu] = dsig[nu] * xs[a]
        domega[a, a + 1] += sig
    omega[3] = 0.5 * sig * q
    domega[3, 0] = 0.5 * (dsig[0] * q - 2.0 * sig * t)
    for k in range(3):
        domega[3, k + 1] = 0.5 * (dsig[k + 1] * q + 2.0 * sig * xs[k])

    tau = np.arctan2(2.0 * t, p)

    # dtau = sigma^2 P, P = (1/2 (t^2 + r^2 + 1), -t x^k)
    dtau[0] = sig2 * 0.5 * (t * t + r2 + 1.0)
    for k in range(3):
        dtau[k + 1] = -sig2 * t * xs[k]

    # e^a = sigma^2 Q^a with
    #   Q^a_0 = t x^a
    #   Q^a_k = -(1/2 (t^2 - r^2 + 1) delta_ak + x^a x^k + eps_ajk x^j)
    h = 0.5 * (t * t - r2 + 1.0)
    Q = np.empty((3, 4))
    dQ = np.zeros((3, 4, 4))
    for a in range(3):
        Q[a, 0] = t * xs[a]
        dQ[a, 0, 0] = xs[a]
        dQ[a, 0, a + 1] = t
        for k in range(3):
            val = xs[a] * xs[k]
            if a == k:
                val += h
                dQ[a, k + 1, 0] -= t
            # eps_ajk x^j: j is the remaining index when a != k
            if a != k:
                j = 3 - a - k
                sgn = 1.0 if (a, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1.0
                val += sgn * xs[j]
                dQ[a, k + 1, j + 1] -= sgn
            Q[a, k + 1] = -val
            for l in range(3):
                d = 0.0
                if a == k:
                    d -= xs[l]  # d h / dx^l = -x^l
                if l == a:
                    d += xs[k]
                if l == k:
                    d += xs[a]
                dQ[a, k + 1, l + 1] -= d
    for a in range(3):
        for mu in range(4):
            e[a, mu] = sig2 * Q[a, mu]
            for nu in range(4):
                de[a, mu, nu] = 2.0 * sig * dsig[nu] * Q[a, mu] + sig2 * dQ[a, mu, nu]
    return sig, tau


@njit(cache=True)
def _batch_geometry(ev, omega, domega, dtau, e, de, sig, tau):
    for i in range(ev.shape[0]):
        sig[i], tau[i] = _point_geometry(
            ev[i, 0], ev[i, 1], ev[i, 2], ev[i, 3], omega[i], domega[i], dtau[i], e[i], de[i]
        )


def geometry_with_derivatives(events):
    """Return every geometric quantity and its first derivatives.

    Output is a dict of arrays with the leading batch shape of ``events``:
    ``sigma``, ``tau``, ``omega`` (..., 4), ``domega`` (..., 4, 4),
    ``dtau`` (..., 4), ``e`` (..., 3, 4), ``de`` (..., 3, 4, 4).
    """
    ev = _as_events(events)
    shape = ev.shape[:-1]
    flat = np.ascontiguousarray(ev.reshape(-1, 4))
    n = flat.shape[0]
    out = {
        "omega": np.empty((n, 4)),
        "domega": np.empty((n, 4, 4)),
        "dtau": np.empty((n, 4)),
        "e": np.empty((n, 3, 4)),
        "de": np.empty((n, 3, 4, 4)),
        "sigma": np.empty(n),
        "tau": np.empty(n),
    }
    _batch_geometry(flat, out["omega"], out["domega"], out["dtau"], out["e"], out["de"],
                    out["sigma"], out["tau"])
    return {k: v.reshape(shape + v.shape[1:]) for k, v in out.items()}


def sigma(events) -> np.ndarray:
    """Conformal factor ``2 / sqrt(4 t^2 + (r^2 - t^2 + 1)^2)``."""
    ev = _as_events(events)
    t = ev[..., 0]
    r2 = np.sum(ev[..., 1:] ** 2, axis=-1)
    return 2.0 / np.sqrt(4.0 * t * t + (r2 - t * t + 1.0) ** 2)


def to_cylinder(events) -> CylinderPoint:
    """Map events to ``(tau, omega)``; ``tau`` has the sign of ``t``."""
    ev = _as_events(events)
    t = ev[..., 0]
    r2 = np.sum(ev[..., 1:] ** 2, axis=-1)
    sig = sigma(ev)
    omega = np.empty(ev.shape)
    omega[..., :3] = sig[..., None] * ev[..., 1:]
    omega[..., 3] = 0.5 * sig * (r2 - t * t - 1.0)
    tau = np.arctan2(2.0 * t, r2 - t * t + 1.0)
    return CylinderPoint(tau=tau, omega=omega)


def coframe(events) -> CoframeAtEvent:
    """Pulled-back coframe ``{dtau, e^a}`` at each event."""
    g = geometry_with_derivatives(events)
    return CoframeAtEvent(dtau=g["dtau"], e=g["e"])


def maurer_cartan_forms(omega, domega) -> np.ndarray:
    """``e^a = -eta^a_BC omega_B d omega_C`` from embedding coordinates.

    ``domega[..., A, mu]`` holds d omega_A / dx^mu for whatever coordinates
    the caller uses; the result has shape (..., 3, mu).
    """
    omega = np.asarray(omega, dtype=float)
    domega = np.asarray(domega, dtype=float)
    w4 = omega[..., 3]
    e = (
        w4[..., None, None] * domega[..., :3, :]
        - omega[..., :3, None] * domega[..., 3:4, :]
        - np.einsum("abc,...b,...cm->...am", EPS, omega[..., :3], domega[..., :3, :])
    )
    return e
