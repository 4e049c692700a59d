"""Electromagnetic fields of the knotted basis solutions.

A configuration is a real linear combination of basis labels
``(j; m, n)`` with a frequency sign and a choice of real or imaginary part.
The gauge potential on the cylinder is ``X_a e^a``; pulling the coframe back
to Minkowski space gives ``A_mu`` and the field strength follows from an
exact chain rule through the conformal map (no finite differences).

Field conventions: ``E_i = dA_0/dx^i - dA_i/dt`` and ``B = curl A`` with
``A_mu`` the components of the pulled-back one-form, so ``(E, B)`` obey the
source-free Maxwell equations in their usual form.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import DegenerateLandscapeError, DomainError
from .geometry import _as_events, _point_geometry
from .harmonics import VARIABLE_GRADIENT, SpinLabel, harmonic_monomials

RSQRT2 = 1.0 / sqrt(2.0)
FIELD_CSV_HEADER = ["t", "x", "y", "z", "Ex", "Ey", "Ez", "Bx", "By", "Bz", "u"]


def _format_half(two_k: int) -> str:
    return str(two_k // 2) if two_k % 2 == 0 else f"{two_k}/2"


@dataclass(frozen=True)
class ConfigurationLabel:
    """One basis solution ``(j; m, n)``, doubled-integer encoded.

    ``freq_sign`` selects the ``exp(+-2(j+1) i tau)`` branch and ``part``
    the real ("R") or imaginary ("I") physical solution.
    """

    two_j: int
    two_m: int
    two_n: int
    freq_sign: int = 1
    part: str = "R"

    def __post_init__(self):
        if self.two_j < 0:
            raise DomainError("j must be non-negative")
        if abs(self.two_m) > self.two_j or (self.two_m - self.two_j) % 2:
            raise DomainError(f"m must range over -j..j in integer steps (got j={self.j}, m={self.m})")
        if abs(self.two_n) > self.two_j + 2 or (self.two_n - self.two_j) % 2:
            raise DomainError(
                f"n must range over -(j+1)..j+1 in integer steps (got j={self.j}, n={self.n})"
            )
        if self.freq_sign not in (1, -1):
            raise DomainError("freq_sign must be +1 or -1")
        if self.part not in ("R", "I"):
            raise DomainError("part must be 'R' or 'I'")

    @property
    def j(self) -> str:
        return _format_half(self.two_j)

    @property
    def m(self) -> str:
        return _format_half(self.two_m)

    @property
    def n(self) -> str:
        return _format_half(self.two_n)

    def __str__(self):
        sign = "+" if self.freq_sign > 0 else "-"
        return f"({self.j};{self.m},{self.n})_{self.part}{sign}"

    def to_string(self) -> str:
        sign = "+" if self.freq_sign > 0 else "-"
        return f"{self.j},{self.m},{self.n},{self.part},{sign}"

    @classmethod
    def parse(cls, text: str) -> "ConfigurationLabel":
        """Parse ``"j,m,n[,R|I[,+|-]]"``; halves may be written ``1/2``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) < 3 or len(parts) > 5:
            raise DomainError(f"cannot parse configuration label {text!r}")
        try:
            doubled = [Fraction(p) * 2 for p in parts[:3]]
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot parse configuration label {text!r}") from exc
        if any(d.denominator != 1 for d in doubled):
            raise DomainError(f"j, m, n must be integers or half-integers in {text!r}")
        part = parts[3].upper() if len(parts) > 3 else "R"
        sign_text = parts[4] if len(parts) > 4 else "+"
        if sign_text not in ("+", "-"):
            raise DomainError(f"frequency sign must be '+' or '-' in {text!r}")
        return cls(int(doubled[0]), int(doubled[1]), int(doubled[2]), 1 if sign_text == "+" else -1, part)


@dataclass(frozen=True)
class CompositeConfiguration:
    """Real linear combination of basis labels."""

    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple((lab, float(amp)) for lab, amp in self.terms)
        if not terms:
            raise DomainError("a configuration needs at least one term")
        for lab, amp in terms:
            if not isinstance(lab, ConfigurationLabel):
                raise DomainError("terms must be (ConfigurationLabel, amplitude) pairs")
            if not np.isfinite(amp):
                raise DomainError("amplitudes must be finite")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, label: ConfigurationLabel, amplitude: float = 1.0) -> "CompositeConfiguration":
        return cls(((label, amplitude),))

    def scaled(self, factor: float) -> "CompositeConfiguration":
        return CompositeConfiguration(tuple((lab, amp * factor) for lab, amp in self.terms))

    def __add__(self, other: "CompositeConfiguration") -> "CompositeConfiguration":
        return CompositeConfiguration(self.terms + other.terms)

    def to_json(self) -> list:
        return [{"label": lab.to_string(), "amplitude": amp} for lab, amp in self.terms]

    @classmethod
    def from_json(cls, data: list) -> "CompositeConfiguration":
        return cls(tuple((ConfigurationLabel.parse(t["label"]), t["amplitude"]) for t in data))


def as_configuration(config) -> CompositeConfiguration:
    if isinstance(config, CompositeConfiguration):
        return config
    if isinstance(config, ConfigurationLabel):
        return CompositeConfiguration.single(config)
    if isinstance(config, str):
        return CompositeConfiguration.single(ConfigurationLabel.parse(config))
    raise TypeError(f"cannot interpret {config!r} as a configuration")


def basis_coefficients(label: ConfigurationLabel):
    """Return ``[(coefficient, two_n')]`` for the X_+, X_3, X_- components.

    ``two_n'`` is None where the harmonic vanishes (|n'| > j) or the
    coefficient is zero.
    """
    j = label.two_j / 2
    n = label.two_n / 2
    raw = [
        (sqrt(max((j - n) * (j - n + 1) / 2, 0.0)), label.two_n + 2),
        (sqrt(max((j + 1) ** 2 - n**2, 0.0)), label.two_n),
        (-sqrt(max((j + n) * (j + n + 1) / 2, 0.0)), label.two_n - 2),
    ]
    out = []
    for coef, tn in raw:
        if coef == 0.0 or abs(tn) > label.two_j:
            out.append((0.0, None))
        else:
            out.append((coef, tn))
    return out


class _CompiledConfiguration:
    """Flat arrays describing a configuration for the jitted kernel."""

    def __init__(self, config: CompositeConfiguration):
        keys = []
        index = {}
        n_terms = len(config.terms)
        self.k = np.empty(n_terms)
        self.sign = np.empty(n_terms)
        self.part = np.empty(n_terms, dtype=np.int64)
        self.amp = np.empty(n_terms)
        self.coef = np.zeros((n_terms, 3))
        self.hidx = -np.ones((n_terms, 3), dtype=np.int64)
        for i, (lab, amp) in enumerate(config.terms):
            self.k[i] = lab.two_j + 2
            self.sign[i] = lab.freq_sign
            self.part[i] = 0 if lab.part == "R" else 1
            self.amp[i] = amp
            for c, (coef, tn) in enumerate(basis_coefficients(lab)):
                if tn is None:
                    continue
                key = (lab.two_j, lab.two_m, tn)
                if key not in index:
                    index[key] = len(keys)
                    keys.append(key)
                self.coef[i, c] = coef
                self.hidx[i, c] = index[key]
        coefs, pows, starts = [], [], [0]
        max_pow = 0
        for key in keys:
            c, p = harmonic_monomials(*key)
            coefs.append(c)
            pows.append(p)
            starts.append(starts[-1] + len(c))
            max_pow = max(max_pow, key[0])
        self.mon_coef = np.concatenate(coefs) if coefs else np.zeros(0)
        self.mon_pow = np.concatenate(pows) if pows else np.zeros((0, 4), dtype=np.int64)
        self.h_start = np.array(starts, dtype=np.int64)
        self.max_pow = max_pow
        self.n_harm = len(keys)

    def args(self):
        return (self.k, self.sign, self.part, self.amp, self.coef, self.hidx,
                self.mon_coef, self.mon_pow, self.h_start, self.max_pow, self.n_harm)


@njit(cache=True)
def _point_fields(t, x, y, z, k, sign, part, amp, coef, hidx, mon_coef, mon_pow, h_start,
                  max_pow, n_harm, out_EB, out_A, out_Areal):
    omega = np.empty(4)
    domega = np.empty((4, 4))
    dtau = np.empty(4)
    e = np.empty((3, 4))
    de = np.empty((3, 4, 4))
    _sig, tau = _point_geometry(t, x, y, z, omega, domega, dtau, e, de)

    # su(2) variables (a, conj a, b, conj b) and their derivatives
    var = np.empty(4, dtype=np.complex128)
    var[0] = omega[3] - 1j * omega[2]
    var[1] = omega[3] + 1j * omega[2]
    var[2] = -omega[1] - 1j * omega[0]
    var[3] = -omega[1] + 1j * omega[0]
    dvar = np.zeros((4, 4), dtype=np.complex128)
    for v in range(4):
        for A in range(4):
            g = VARIABLE_GRADIENT_NB[v, A]
            if g != 0:
                for nu in range(4):
                    dvar[v, nu] += g * domega[A, nu]
    pw = np.ones((4, max_pow + 1), dtype=np.complex128)
    for v in range(4):
        for p in range(1, max_pow + 1):
            pw[v, p] = pw[v, p - 1] * var[v]

    Y = np.zeros(n_harm, dtype=np.complex128)
    dY = np.zeros((n_harm, 4), dtype=np.complex128)
    for h in range(n_harm):
        for q in range(h_start[h], h_start[h + 1]):
            c = mon_coef[q]
            p0 = mon_pow[q, 0]
            p1 = mon_pow[q, 1]
            p2 = mon_pow[q, 2]
            p3 = mon_pow[q, 3]
            Y[h] += c * pw[0, p0] * pw[1, p1] * pw[2, p2] * pw[3, p3]
            if p0 > 0:
                f = c * p0 * pw[0, p0 - 1] * pw[1, p1] * pw[2, p2] * pw[3, p3]
                for nu in range(4):
                    dY[h, nu] += f * dvar[0, nu]
            if p1 > 0:
                f = c * p1 * pw[0, p0] * pw[1, p1 - 1] * pw[2, p2] * pw[3, p3]
                for nu in range(4):
                    dY[h, nu] += f * dvar[1, nu]
            if p2 > 0:
                f = c * p2 * pw[0, p0] * pw[1, p1] * pw[2, p2 - 1] * pw[3, p3]
                for nu in range(4):
                    dY[h, nu] += f * dvar[2, nu]
            if p3 > 0:
                f = c * p3 * pw[0, p0] * pw[1, p1] * pw[2, p2] * pw[3, p3 - 1]
                for nu in range(4):
                    dY[h, nu] += f * dvar[3, nu]

    for i in range(6):
        out_EB[i] = 0.0
    for mu in range(4):
        out_A[mu] = 0.0
        out_Areal[mu] = 0.0

    Xc = np.empty(3, dtype=np.complex128)
    dXc = np.empty((3, 4), dtype=np.complex128)
    X = np.empty(3, dtype=np.complex128)
    dX = np.empty((3, 4), dtype=np.complex128)
    A = np.empty(4, dtype=np.complex128)
    dA = np.empty((4, 4), dtype=np.complex128)
    for i in range(k.shape[0]):
        w = sign[i] * k[i]
        phase = np.cos(w * tau) + 1j * np.sin(w * tau)
        for c in range(3):
            Xc[c] = 0.0
            for nu in range(4):
                dXc[c, nu] = 0.0
            h = hidx[i, c]
            if h < 0:
                continue
            Xc[c] = coef[i, c] * phase * Y[h]
            for nu in range(4):
                dXc[c, nu] = coef[i, c] * phase * (1j * w * dtau[nu] * Y[h] + dY[h, nu])
        # spherical components: X_1 = (X_+ + X_-)/sqrt2, X_2 = (X_+ - X_-)/(sqrt2 i);
        # with this normalisation the basis obeys J_a X_a = 0
        X[0] = RSQRT2 * (Xc[0] + Xc[2])
        X[1] = -1j * RSQRT2 * (Xc[0] - Xc[2])
        X[2] = Xc[1]
        for nu in range(4):
            dX[0, nu] = RSQRT2 * (dXc[0, nu] + dXc[2, nu])
            dX[1, nu] = -1j * RSQRT2 * (dXc[0, nu] - dXc[2, nu])
            dX[2, nu] = dXc[1, nu]
        for mu in range(4):
            A[mu] = 0.0
            for nu in range(4):
                dA[mu, nu] = 0.0
            for a in range(3):
                A[mu] += X[a] * e[a, mu]
                for nu in range(4):
                    dA[mu, nu] += dX[a, nu] * e[a, mu] + X[a] * de[a, mu, nu]
        # E_i = d_i A_0 - d_0 A_i ; B_i = eps_ijk d_j A_k   (dA[mu, nu] = d_nu A_mu)
        Ec0 = dA[0, 1] - dA[1, 0]
        Ec1 = dA[0, 2] - dA[2, 0]
        Ec2 = dA[0, 3] - dA[3, 0]
        Bc0 = dA[3, 2] - dA[2, 3]
        Bc1 = dA[1, 3] - dA[3, 1]
        Bc2 = dA[2, 1] - dA[1, 2]
        s = amp[i]
        if part[i] == 0:
            out_EB[0] += s * Ec0.real
            out_EB[1] += s * Ec1.real
            out_EB[2] += s * Ec2.real
            out_EB[3] += s * Bc0.real
            out_EB[4] += s * Bc1.real
            out_EB[5] += s * Bc2.real
            for mu in range(4):
                out_Areal[mu] += s * A[mu].real
        else:
            out_EB[0] += s * Ec0.imag
            out_EB[1] += s * Ec1.imag
            out_EB[2] += s * Ec2.imag
            out_EB[3] += s * Bc0.imag
            out_EB[4] += s * Bc1.imag
            out_EB[5] += s * Bc2.imag
            for mu in range(4):
                out_Areal[mu] += s * A[mu].imag
        for mu in range(4):
            out_A[mu] += s * A[mu]


VARIABLE_GRADIENT_NB = np.ascontiguousarray(VARIABLE_GRADIENT)


@njit(cache=True)
def _batch_fields(ev, k, sign, part, amp, coef, hidx, mon_coef, mon_pow, h_start, max_pow,
                  n_harm, out_EB, out_A, out_Areal):
    for i in range(ev.shape[0]):
        _point_fields(ev[i, 0], ev[i, 1], ev[i, 2], ev[i, 3], k, sign, part, amp, coef, hidx,
                      mon_coef, mon_pow, h_start, max_pow, n_harm, out_EB[i], out_A[i],
                      out_Areal[i])


@dataclass(frozen=True)
class EMFieldSample:
    """Real electric and magnetic fields, arrays of shape (..., 3)."""

    E: np.ndarray
    B: np.ndarray

    @property
    def energy_density(self) -> np.ndarray:
        return 0.5 * (np.sum(self.E**2, axis=-1) + np.sum(self.B**2, axis=-1))


class KnotField:
    """Field provider for a configuration.

    Calling ``field(t, x)`` returns ``(E, B)`` at a single event; ``sample``
    evaluates batches.  Instances are picklable so they can be shipped to
    worker processes.
    """

    def __init__(self, config):
        self.config = as_configuration(config)
        self._compiled = _CompiledConfiguration(self.config)
        self._args = self._compiled.args()
        self._eb = np.empty((1, 6))
        self._a = np.empty((1, 4), dtype=np.complex128)
        self._ar = np.empty((1, 4))
        self._ev = np.empty((1, 4))

    def __getstate__(self):
        return {"config": self.config}

    def __setstate__(self, state):
        self.__init__(state["config"])

    def __repr__(self):
        return f"KnotField({self.config!r})"

    def _run(self, events):
        ev = _as_events(events)
        shape = ev.shape[:-1]
        flat = np.ascontiguousarray(ev.reshape(-1, 4))
        n = flat.shape[0]
        eb = np.empty((n, 6))
        a = np.empty((n, 4), dtype=np.complex128)
        ar = np.empty((n, 4))
        if n:
            _batch_fields(flat, *self._args, eb, a, ar)
        return shape, eb, a, ar

    def __call__(self, t, x):
        ev = self._ev
        ev[0, 0] = t
        ev[0, 1:] = x
        _batch_fields(ev, *self._args, self._eb, self._a, self._ar)
        return self._eb[0, :3].copy(), self._eb[0, 3:].copy()

    def sample(self, events) -> EMFieldSample:
        shape, eb, _, _ = self._run(events)
        return EMFieldSample(E=eb[:, :3].reshape(shape + (3,)), B=eb[:, 3:].reshape(shape + (3,)))

    def potential(self, events, physical: bool = False) -> np.ndarray:
        """Gauge potential A_mu; complex sum unless ``physical`` (R/I parts applied)."""
        shape, _, a, ar = self._run(events)
        out = ar if physical else a
        return out.reshape(shape + (4,))

    def energy_density(self, events) -> np.ndarray:
        return self.sample(events).energy_density


def _field(config) -> KnotField:
    return config if isinstance(config, KnotField) else KnotField(config)


def x_coefficients(label: ConfigurationLabel, tau, omega):
    """Complex ``(X_+, X_3, X_-)`` of a basis label at cylinder points."""
    from .harmonics import harmonic

    tau = np.asarray(tau, dtype=float)
    phase = np.exp(1j * label.freq_sign * (label.two_j + 2) * tau)
    out = []
    for coef, tn in basis_coefficients(label):
        if tn is None:
            out.append(np.zeros(np.broadcast(tau, np.asarray(omega)[..., 0]).shape, dtype=complex))
        else:
            out.append(coef * phase * harmonic(SpinLabel(label.two_j, label.two_m, tn), omega))
    return tuple(out)


def gauge_potential(config, events) -> np.ndarray:
    """Complex pulled-back potential ``A_mu`` (temporal gauge on the cylinder)."""
    return _field(config).potential(events)


def field_strength(config, events) -> EMFieldSample:
    """Physical (real) E and B at the given events."""
    return _field(config).sample(events)


def energy_density(config, events) -> np.ndarray:
    """``(|E|^2 + |B|^2) / 2``."""
    return _field(config).energy_density(events)


@dataclass(frozen=True)
class SearchParams:
    half_width: float = 3.0
    grid_points: int = 61
    xtol: float = 1e-6
    chunk: int = 200_000

    def __post_init__(self):
        if not self.half_width > 0 or self.grid_points < 2 or not self.xtol > 0:
            raise DomainError("invalid search parameters")


@dataclass(frozen=True)
class RmaxResult:
    r_max: float
    e_max: float
    x_max: np.ndarray


def grid_axes(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _grid_events(t, xs, ys, zs):
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    ev = np.empty(X.shape + (4,))
    ev[..., 0] = t
    ev[..., 1] = X
    ev[..., 2] = Y
    ev[..., 3] = Z
    return ev.reshape(-1, 4)


def _chunked_density(fld: KnotField, events, chunk):
    out = np.empty(events.shape[0])
    for s in range(0, events.shape[0], chunk):
        out[s:s + chunk] = fld.energy_density(events[s:s + chunk])
    return out


def find_rmax(config, t: float = 0.0, search: SearchParams = SearchParams()) -> RmaxResult:
    """Locate the energy-density maximum at time ``t``.

    A coarse grid over the cube ``[-w, w]^3`` picks the best cell (first in
    row-major order on ties) which Nelder-Mead then refines.
    """
    fld = _field(config)
    axis = grid_axes(-search.half_width, search.half_width, search.grid_points)
    events = _grid_events(t, axis, axis, axis)
    dens = _chunked_density(fld, events, search.chunk)
    best = int(np.argmax(dens))
    if dens[best] < 1e-15:
        raise DegenerateLandscapeError(f"energy density below 1e-15 everywhere (max {dens[best]:.3g})")
    x0 = events[best, 1:]

    def neg(x):
        return -float(fld.energy_density(np.concatenate(([t], x)))[()])

    h = 2 * search.half_width / (search.grid_points - 1)
    simplex = np.vstack([x0] + [x0 + h * 0.5 * np.eye(3)[i] for i in range(3)])
    res = minimize(neg, x0, method="Nelder-Mead",
                   options={"xatol": search.xtol, "fatol": 0.0, "initial_simplex": simplex,
                            "maxiter": 20000, "maxfev": 40000})
    # keep the grid point unless refinement is a strict improvement beyond rounding
    if -res.fun > dens[best] * (1.0 + 1e-13):
        x_max, e_max = res.x, -res.fun
    else:
        x_max, e_max = x0, dens[best]
    return RmaxResult(r_max=float(np.linalg.norm(x_max)), e_max=float(e_max), x_max=np.asarray(x_max))


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid: each axis is ``(lo, hi, count)``."""

    x: tuple
    y: tuple
    z: tuple

    @classmethod
    def cube(cls, lo, hi, n):
        return cls((lo, hi, n), (lo, hi, n), (lo, hi, n))

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """``lo:hi:n`` for a cube or three such specs separated by commas."""
        axes = []
        for chunk in text.split(","):
            bits = chunk.split(":")
            if len(bits) != 3:
                raise DomainError(f"grid axis must be lo:hi:n, got {chunk!r}")
            lo, hi, n = float(bits[0]), float(bits[1]), int(bits[2])
            if n < 0 or (n > 1 and not hi > lo):
                raise DomainError(f"invalid grid axis {chunk!r}")
            axes.append((lo, hi, n))
        if len(axes) == 1:
            axes = axes * 3
        if len(axes) != 3:
            raise DomainError("grid needs one or three axis specs")
        return cls(*axes)

    def axis_values(self):
        return [np.linspace(lo, hi, n) if n != 1 else np.array([lo]) for lo, hi, n in (self.x, self.y, self.z)]


@dataclass(frozen=True)
class GridSamples:
    events: np.ndarray  # (N, 4)
    E: np.ndarray
    B: np.ndarray
    density: np.ndarray


def field_on_grid(config, t: float, grid: GridSpec) -> GridSamples:
    """Sample fields on a grid, row-major with x varying slowest."""
    fld = _field(config)
    xs, ys, zs = grid.axis_values()
    events = _grid_events(t, xs, ys, zs)
    sample = fld.sample(events)
    return GridSamples(events=events, E=sample.E, B=sample.B, density=sample.energy_density)


def write_grid_csv(samples: GridSamples, path) -> None:
    """Write samples with IEEE round-trip formatting (``repr`` of floats)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIELD_CSV_HEADER)
        for ev, E, B, u in zip(samples.events, samples.E, samples.B, samples.density):
            writer.writerow([repr(float(v)) for v in (*ev, *E, *B, u)])


def basis_labels(two_j_values: Iterable[int], parts: Sequence[str] = ("R", "I"),
                 signs: Sequence[int] = (1, -1)):
    """All admissible basis labels for the given spins."""
    return [
        ConfigurationLabel(tj, tm, tn, s, p)
        for tj in two_j_values
        for tm in range(-tj, tj + 1, 2)
        for tn in range(-tj - 2, tj + 3, 2)
        for p in parts
        for s in signs
    ]


# --- presets ----------------------------------------------------------------

def hopf_ranada_reference(events) -> EMFieldSample:
    """Closed-form Hopf-Ranada fields at t = 0 (prefactor 8/pi)."""
    ev = _as_events(events)
    x, y, z = ev[..., 1], ev[..., 2], ev[..., 3]
    pre = 8.0 / np.pi / (1.0 + x * x + y * y + z * z) ** 3
    B = pre[..., None] * np.stack([2 * (y - x * z), -2 * (x + y * z), x * x + y * y - z * z - 1], axis=-1)
    E = pre[..., None] * np.stack([x * x - y * y - z * z + 1, 2 * (x * y - z), 2 * (x * z + y)], axis=-1)
    return EMFieldSample(E=E, B=B)


def null_defect(config, events) -> float:
    """Relative nullity defect ``sum |F.F|^2 / sum |F|^4`` with ``F = E + iB``."""
    s = field_strength(config, events)
    F = s.E + 1j * s.B
    ff = np.einsum("...d,...d->...", F, F)
    u = np.einsum("...d,...d->...", F, F.conj()).real
    return float(np.sum(np.abs(ff) ** 2) / np.sum(u**2))


def derive_hopf_ranada(n_points: int = 400, seed: int = 0) -> CompositeConfiguration:
    """Fit positive-frequency j=0 amplitudes to the Hopf-Ranada Cauchy data.

    The six real j=0 solutions are fixed by their t=0 data, so a linear
    least-squares fit is exact; amplitudes are rounded to the closed form
    when they agree with it to 1e-9.
    """
    labels = [ConfigurationLabel(0, 0, tn, 1, p) for tn in (-2, 0, 2) for p in ("R", "I")]
    rng = np.random.Generator(np.random.Philox(seed))
    ev = np.column_stack([np.zeros(n_points), rng.uniform(-1.5, 1.5, (n_points, 3))])
    ref = hopf_ranada_reference(ev)
    columns = []
    for lab in labels:
        s = field_strength(lab, ev)
        columns.append(np.concatenate([s.E.ravel(), s.B.ravel()]))
    M = np.array(columns).T
    target = np.concatenate([ref.E.ravel(), ref.B.ravel()])
    amps, *_ = np.linalg.lstsq(M, target, rcond=None)
    resid = np.linalg.norm(M @ amps - target) / np.linalg.norm(target)
    if resid > 1e-8:
        raise DegenerateLandscapeError(f"Hopf-Ranada fit residual {resid:.3g}")
    exact = np.array([0.0, 1.0, sqrt(2.0), 0.0, 0.0, -1.0])
    if np.max(np.abs(amps - exact)) < 1e-9:
        amps = exact
    return CompositeConfiguration(tuple((lab, float(a)) for lab, a in zip(labels, amps) if a != 0.0))


class PresetMissing(KeyError):
    """Requested preset is unknown or could not be derived."""


PRESET_DERIVERS = {
    "hopf_ranada": derive_hopf_ranada,
}
_PRESET_CACHE: dict = {}


def get_preset(name: str) -> CompositeConfiguration:
    if name in _PRESET_CACHE:
        return _PRESET_CACHE[name]
    derive = PRESET_DERIVERS.get(name)
    if derive is None:
        raise PresetMissing(f"preset not derived: {name}")
    try:
        config = derive()
    except DegenerateLandscapeError as exc:
        raise PresetMissing(f"preset not derived: {name} ({exc})") from exc
    _PRESET_CACHE[name] = config
    return config


def parse_configuration(items) -> CompositeConfiguration:
    """Build a configuration from strings ``label``, ``amp*label`` or a preset name."""
    if isinstance(items, str):
        items = [items]
    terms = []
    for item in items:
        amp = 1.0
        text = item.strip()
        if "*" in text:
            amp_text, text = text.split("*", 1)
            try:
                amp = float(amp_text)
            except ValueError as exc:
                raise DomainError(f"bad amplitude in {item!r}") from exc
        if "," in text:
            terms.append((ConfigurationLabel.parse(text), amp))
        else:
            terms.extend(get_preset(text).scaled(amp).terms)
    return CompositeConfiguration(tuple(terms))
