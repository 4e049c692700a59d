"""Relativistic Lorentz-force integration for ensembles of point charges.

Dimensionless equations of motion with proper velocity ``U = gamma V``::

    dX/dT = U / gamma,   dU/dT = kappa (E + U/gamma x B)

A seventh state component accumulates the work ``kappa * int E.V dT`` so the
work-energy identity can be checked against ``gamma``.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, FieldPropagationError, StiffnessError

TRAJECTORY_CSV_HEADER = ["pid", "T", "X", "Y", "Z", "VX", "VY", "VZ", "gamma"]

FieldProvider = Callable[[float, np.ndarray], tuple]


@dataclass(frozen=True)
class ParticleState:
    X: np.ndarray
    U: np.ndarray
    T: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(3)
        U = np.asarray(self.U, dtype=float).reshape(3)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(U)) and np.isfinite(self.T)):
            raise DomainError("particle state must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def from_velocity(cls, X, V, T: float = 0.0) -> "ParticleState":
        V = np.asarray(V, dtype=float)
        speed = float(np.linalg.norm(V))
        if not speed < 1.0:
            raise DomainError(f"speed must be below 1 (got {speed})")
        return cls(X, V / np.sqrt(1.0 - speed**2), T)

    @property
    def gamma(self) -> float:
        return float(np.sqrt(1.0 + self.U @ self.U))

    @property
    def V(self) -> np.ndarray:
        return self.U / self.gamma


@dataclass(frozen=True)
class SimulationParams:
    kappa: float
    t_start: float
    t_end: float
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = np.inf

    def __post_init__(self):
        if not np.isfinite(self.kappa):
            raise DomainError("kappa must be finite")
        if self.t_end == self.t_start:
            raise DomainError("t_end must differ from t_start")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise DomainError("tolerances and max_step must be positive")


def lorentz_rhs(state: ParticleState, E, B, kappa: float):
    """Return ``(dX/dT, dU/dT)``."""
    gamma = np.sqrt(1.0 + state.U @ state.U)
    V = state.U / gamma
    return V, kappa * (np.asarray(E) + np.cross(V, B))


@dataclass
class TrajectoryRecord:
    """Accepted-step samples plus dense output over ``[T[0], T[-1]]``."""

    T: np.ndarray
    X: np.ndarray
    U: np.ndarray
    work: np.ndarray
    kappa: float
    segments: list = field(default_factory=list, repr=False)

    @property
    def gamma(self) -> np.ndarray:
        return np.sqrt(1.0 + np.sum(self.U**2, axis=-1))

    @property
    def V(self) -> np.ndarray:
        return self.U / self.gamma[:, None]

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.V, axis=-1)

    def __call__(self, T) -> np.ndarray:
        """Dense output: state rows ``[X, U, work]`` at times ``T``."""
        T = np.atleast_1d(np.asarray(T, dtype=float))
        out = np.empty((T.size, 7))
        for i, t in enumerate(T):
            if not (self.T[0] <= t <= self.T[-1]):
                raise DomainError(f"T={t} outside trajectory window [{self.T[0]}, {self.T[-1]}]")
            for lo, hi, sol in self.segments:
                if lo <= t <= hi:
                    out[i] = sol(t)
                    break
        return out

    def window(self, t_lo: float, t_hi: float) -> "TrajectoryRecord":
        """Samples restricted to ``[t_lo, t_hi]`` (dense output kept)."""
        mask = (self.T >= t_lo) & (self.T <= t_hi)
        return TrajectoryRecord(self.T[mask], self.X[mask], self.U[mask], self.work[mask],
                                self.kappa, self.segments)

    @property
    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.X, axis=0), axis=1)))

    def summary(self) -> dict:
        speed = self.speed
        v_end = self.V[-1]
        s_end = float(np.linalg.norm(v_end))
        direction = v_end / s_end if s_end > 0 else np.zeros(3)
        gamma = self.gamma
        return {
            "max_speed": float(speed.max()),
            "final_speed": s_end,
            "final_direction": [float(v) for v in direction],
            "final_position": [float(v) for v in self.X[-1]],
            "work": float(self.work[-1] - self.work[0]),
            "delta_gamma": float(gamma[-1] - gamma[0]),
            "gamma_final": float(gamma[-1]),
            "n_steps": int(self.T.size),
        }


def _integrate_segment(y0, t0, t1, provider, params):
    kappa = params.kappa

    def rhs(T, y):
        X = y[:3]
        U = y[3:6]
        gamma = np.sqrt(1.0 + U @ U)
        V = U / gamma
        E, B = provider(T, X)
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(B))):
            raise FieldPropagationError(f"non-finite field at T={T}, X={X}")
        dU = kappa * (E + np.cross(V, B))
        out = np.empty(7)
        out[:3] = V
        out[3:6] = dU
        out[6] = kappa * (E @ V)
        return out

    sol = solve_ivp(rhs, (t0, t1), y0, method="RK45", rtol=params.rel_tol, atol=params.abs_tol,
                    max_step=params.max_step, dense_output=True)
    if sol.status == -1:
        last = sol.y[:, -1]
        raise StiffnessError(f"integration failed at T={sol.t[-1]}: {sol.message}",
                             ParticleState(last[:3], last[3:6], sol.t[-1]))
    return sol


def integrate_trajectory(initial: ParticleState, provider: FieldProvider,
                         params: SimulationParams) -> TrajectoryRecord:
    """Integrate from ``initial.T`` out to both ends of the parameter window.

    When ``initial.T`` lies strictly inside ``[t_start, t_end]`` the run is
    split into a backward and a forward leg that are merged in time order.
    """
    lo, hi = sorted((params.t_start, params.t_end))
    T0 = initial.T
    if not lo <= T0 <= hi:
        raise DomainError(f"initial time {T0} outside window [{lo}, {hi}]")
    y0 = np.concatenate([initial.X, initial.U, [0.0]])
    Ts, Ys, segments = [], [], []
    if T0 > lo:
        back = _integrate_segment(y0, T0, lo, provider, params)
        Ts.append(back.t[::-1])
        Ys.append(back.y[:, ::-1])
        segments.append((lo, T0, back.sol))
    if T0 < hi:
        fwd = _integrate_segment(y0, T0, hi, provider, params)
        start = 1 if Ts else 0
        Ts.append(fwd.t[start:])
        Ys.append(fwd.y[:, start:])
        segments.append((T0, hi, fwd.sol))
    T = np.concatenate(Ts)
    Y = np.concatenate(Ys, axis=1)
    return TrajectoryRecord(T=T, X=Y[:3].T.copy(), U=Y[3:6].T.copy(), work=Y[6].copy(),
                            kappa=params.kappa, segments=segments)


def _run_one(args):
    state, provider, params = args
    return integrate_trajectory(state, provider, params)


def default_workers() -> int:
    raw = os.environ.get("KNOTFIELD_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"KNOTFIELD_THREADS must be an integer, got {raw!r}")
    return 1


def run_ensemble(states: Sequence[ParticleState], provider: FieldProvider, params: SimulationParams,
                 workers: int | None = None) -> list:
    """Integrate independent particles; results are in input order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(s, provider, params) for s in states]
    if workers == 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))


# --- initial conditions ---------------------------------------------------

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def octahedron_vertices() -> np.ndarray:
    return np.vstack([np.eye(3), -np.eye(3)])


def icosahedron_vertices() -> np.ndarray:
    pts = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            pts.append((0.0, s1, s2 * GOLDEN))
            pts.append((s1, s2 * GOLDEN, 0.0))
            pts.append((s2 * GOLDEN, 0.0, s1))
    pts = np.array(pts)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def sphere18_directions() -> np.ndarray:
    """Octahedron (6) and icosahedron (12) vertices, unit length."""
    return np.vstack([octahedron_vertices(), icosahedron_vertices()])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError("direction vectors must be non-zero")
    return v / n


def plane_basis(normal):
    n = _unit(normal)
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def symmetric_directions(count: int) -> np.ndarray:
    """Antipodally symmetric unit vectors for radial-in-space ensembles."""
    if count == 6:
        return octahedron_vertices()
    if count == 12:
        return icosahedron_vertices()
    if count == 18:
        return sphere18_directions()
    if count < 2 or count % 2:
        raise DomainError("radial_space needs an even count")
    half = count // 2
    # Fibonacci points on the upper hemisphere, then their antipodes
    k = np.arange(half) + 0.5
    z = 1.0 - k / half
    phi = 2 * np.pi * k / GOLDEN
    rho = np.sqrt(1.0 - z**2)
    up = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return np.vstack([up, -up])


def _ladder(count: int) -> np.ndarray:
    return np.arange(count) - (count - 1) / 2.0


@dataclass(frozen=True)
class EnsembleSpec:
    """Initial-condition generator.

    ``radius``, ``spacing`` and ``speed`` may be the string ``"rmax"``, which
    resolves against the ``rmax_hint`` passed to :func:`generate_ensemble`
    (``spacing`` and ladder ``speed`` resolve to a quarter of it).
    """

    kind: str
    count: int | None = None
    direction: tuple = (0.0, 0.0, 1.0)
    normal: tuple = (0.0, 0.0, 1.0)
    radius: float | str | None = None
    spacing: float | str | None = None
    speed: float | str | None = None
    seed: int = 0
    states: tuple = ()

    KINDS = ("line", "circle", "sphere18", "random_ball", "radial_line", "radial_plane",
             "radial_space", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown ensemble kind {self.kind!r}")
        if self.count is not None and self.count < 1:
            raise DomainError("count must be at least 1")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "count": self.count, "direction": list(self.direction),
               "normal": list(self.normal), "radius": self.radius, "spacing": self.spacing,
               "speed": self.speed, "seed": self.seed}
        if self.kind == "explicit":
            out["states"] = [[list(map(float, x)), list(map(float, v))] for x, v in self.states]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "EnsembleSpec":
        data = dict(data)
        if "states" in data:
            data["states"] = tuple((tuple(x), tuple(v)) for x, v in data["states"])
        for key in ("direction", "normal"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def _resolve(value, rmax_hint, fraction, name):
    if isinstance(value, str):
        if value != "rmax":
            raise DomainError(f"{name} must be a number or 'rmax'")
        if rmax_hint is None:
            raise DomainError(f"{name}='rmax' requires an R_max hint")
        return float(rmax_hint) * fraction
    if value is None:
        raise DomainError(f"{name} is required for this ensemble kind")
    return float(value)


def generate_ensemble(spec: EnsembleSpec, rmax_hint: float | None = None) -> list:
    """Deterministic initial states for ``spec``; all start at T = 0."""
    kind = spec.kind
    zeros = np.zeros(3)
    if kind == "explicit":
        if not spec.states:
            raise DomainError("explicit ensemble needs at least one state")
        return [ParticleState.from_velocity(x, v) for x, v in spec.states]
    if kind == "line":
        count = spec.count or 11
        spacing = _resolve(spec.spacing, rmax_hint, 0.25, "spacing")
        d = _unit(spec.direction)
        return [ParticleState(k * spacing * d, zeros) for k in _ladder(count)]
    if kind == "circle":
        count = spec.count or 10
        radius = _resolve(spec.radius, rmax_hint, 1.0, "radius")
        u, v = plane_basis(spec.normal)
        ang = 2 * np.pi * np.arange(count) / count
        return [ParticleState(radius * (np.cos(a) * u + np.sin(a) * v), zeros) for a in ang]
    if kind == "sphere18":
        radius = _resolve(spec.radius, rmax_hint, 1.0, "radius")
        return [ParticleState(radius * d, zeros) for d in sphere18_directions()]
    if kind == "random_ball":
        count = spec.count or 20
        radius = _resolve(spec.radius, rmax_hint, 1.0, "radius")
        rng = np.random.Generator(np.random.Philox(spec.seed))
        pts = []
        while len(pts) < count:
            p = rng.uniform(-1.0, 1.0, 3)
            if p @ p <= 1.0:
                pts.append(radius * p)
        return [ParticleState(p, zeros) for p in pts]
    if kind == "radial_line":
        count = spec.count or 11
        step = _resolve(spec.speed, rmax_hint, 0.25, "speed")
        d = _unit(spec.direction)
        speeds = _ladder(count) * step
        if np.max(np.abs(speeds)) >= 1.0:
            raise DomainError(f"velocity ladder reaches speed {np.max(np.abs(speeds)):.3g} >= 1")
        return [ParticleState.from_velocity(zeros, s * d) for s in speeds]
    if kind in ("radial_plane", "radial_space"):
        count = spec.count or 10
        speed = _resolve(spec.speed, rmax_hint, 1.0, "speed")
        if not abs(speed) < 1.0:
            raise DomainError(f"speed must be below 1 (got {speed})")
        if kind == "radial_plane":
            u, v = plane_basis(spec.normal)
            ang = 2 * np.pi * np.arange(count) / count
            dirs = [np.cos(a) * u + np.sin(a) * v for a in ang]
        else:
            dirs = symmetric_directions(count)
        return [ParticleState.from_velocity(zeros, speed * d) for d in dirs]
    raise DomainError(f"unknown ensemble kind {kind!r}")  # pragma: no cover


def write_trajectories_csv(records: Sequence[TrajectoryRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_CSV_HEADER)
        for pid, rec in enumerate(records):
            V = rec.V
            gamma = rec.gamma
            for i in range(rec.T.size):
                writer.writerow([pid, repr(float(rec.T[i])), *(repr(float(v)) for v in rec.X[i]),
                                 *(repr(float(v)) for v in V[i]), repr(float(gamma[i]))])
