"""Diagnostics for simulated ensembles and numerical oracles for the fields.

Beam clustering of final directions, the time-reversal defect of paths,
Maxwell residuals by finite differences, total-energy quadrature and
kappa sweeps.  Every routine is deterministic in its inputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dynamics import SimulationParams, generate_ensemble, run_ensemble
from .errors import DomainError
from .fields import KnotField

MIN_BEAM_SPEED = 0.01
# Angles between unit vectors below this are rounding noise and count as zero.
ANGLE_RESOLUTION = 1e-12
SWEEP_THRESHOLDS = (10.0, 15.0, 20.0)


# --- beam clustering ------------------------------------------------------

@dataclass
class BeamReport:
    n_clusters: int
    directions: np.ndarray
    spreads: np.ndarray
    sizes: np.ndarray
    members: list
    unclustered_fraction: float
    threshold_deg: float

    @property
    def mean_spread(self) -> float:
        """Size-weighted mean of the per-cluster spreads (radians)."""
        if self.n_clusters == 0:
            return 0.0
        return float(np.sum(self.sizes * self.spreads) / np.sum(self.sizes))

    def to_json(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "directions": self.directions.tolist(),
            "spreads": self.spreads.tolist(),
            "sizes": self.sizes.tolist(),
            "members": self.members,
            "mean_spread": self.mean_spread,
            "unclustered_fraction": self.unclustered_fraction,
            "threshold_deg": self.threshold_deg,
        }


def _angle(u, v) -> float:
    a = float(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))
    return 0.0 if a < ANGLE_RESOLUTION else a


def cluster_directions(velocities, angle_threshold: float = 15.0,
                       min_speed: float = MIN_BEAM_SPEED) -> BeamReport:
    """Single-linkage clustering of velocity directions.

    Particles slower than ``min_speed`` are left unclustered.  Clusters are
    the connected components of the graph joining directions closer than
    ``angle_threshold`` degrees, numbered by their first member.
    """
    vel = np.asarray(velocities, dtype=float).reshape(-1, 3)
    if vel.shape[0] == 0:
        raise DomainError("cannot cluster an empty ensemble")
    speed = np.linalg.norm(vel, axis=1)
    active = [i for i in range(len(vel)) if speed[i] > min_speed]
    dirs = {i: vel[i] / speed[i] for i in active}
    limit = np.deg2rad(angle_threshold)

    parent = {i: i for i in active}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos, a in enumerate(active):
        for b in active[a_pos + 1:]:
            if _angle(dirs[a], dirs[b]) <= limit:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    groups: dict = {}
    for i in active:
        groups.setdefault(find(i), []).append(i)
    members = [groups[k] for k in sorted(groups)]
    directions, spreads = [], []
    for group in members:
        mean = np.sum([dirs[i] for i in group], axis=0)
        norm = np.linalg.norm(mean)
        centre = mean / norm if norm > 1e-12 else dirs[group[0]]
        directions.append(centre)
        spreads.append(np.mean([_angle(centre, dirs[i]) for i in group]))
    return BeamReport(
        n_clusters=len(members),
        directions=np.array(directions).reshape(-1, 3),
        spreads=np.array(spreads, dtype=float),
        sizes=np.array([len(g) for g in members], dtype=int),
        members=members,
        unclustered_fraction=1.0 - len(active) / len(vel),
        threshold_deg=float(angle_threshold),
    )


def final_velocities(records) -> np.ndarray:
    return np.array([rec.V[-1] for rec in records]).reshape(-1, 3)


def cluster_final_directions(records, angle_threshold: float = 15.0,
                             min_speed: float = MIN_BEAM_SPEED) -> BeamReport:
    """Cluster the final velocity directions of trajectory records."""
    return cluster_directions(final_velocities(records), angle_threshold, min_speed)


def beam_sensitivity(records, thresholds=SWEEP_THRESHOLDS) -> dict:
    vel = final_velocities(records)
    return {f"{t:g}": cluster_directions(vel, t).to_json() for t in thresholds}


# --- time-reversal defect ----------------------------------------------------

def resample_polyline(points, n: int = 256) -> np.ndarray:
    """``n`` points spaced uniformly in arc length along ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(pts[:1], n, axis=0)
    keep = np.concatenate([[True], seg > 0])
    s, pts = s[keep], pts[keep]
    target = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(target, s, pts[:, k]) for k in range(3)])


def hausdorff(a, b) -> float:
    d = cdist(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _dense_path(record, lo: float, hi: float, n: int = 2049) -> np.ndarray:
    """Positions on ``[lo, hi]`` from dense output, ordered away from T = 0."""
    T = np.linspace(lo, hi, n)
    X = record(T)[:, :3]
    return X if abs(lo) <= abs(hi) else X[::-1]


def _path_length(points) -> float:
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def split_time_reversal(records, t1: float):
    """Split records spanning ``[-t1, t1]`` into forward and backward paths."""
    forward = [_dense_path(r, 0.0, t1) for r in records]
    backward = [_dense_path(r, -t1, 0.0) for r in records]
    return forward, backward


def time_reversal_defect(forward, backward, n: int = 256) -> float:
    """Mean per-particle Hausdorff distance between forward and backward paths.

    ``forward[i]`` and ``backward[i]`` are the point sequences of particle
    ``i`` on ``[0, T1]`` and ``[-T1, 0]``; reflecting time leaves the point
    set unchanged, so the paths are compared directly.  The result is
    normalized by the mean path length over all legs.
    """
    if len(forward) != len(backward):
        raise DomainError(f"ensemble sizes differ: {len(forward)} forward vs {len(backward)} backward")
    if len(forward) == 0:
        raise DomainError("empty ensembles")
    fw = [resample_polyline(p, n) for p in forward]
    bw = [resample_polyline(p, n) for p in backward]
    dists = np.array([hausdorff(a, b) for a, b in zip(fw, bw)])
    scale = np.mean([_path_length(p) for p in fw + bw])
    if scale == 0.0:
        return 0.0 if np.all(dists == 0) else float("inf")
    return float(np.mean(dists) / scale)


def _pi_rotation(axis) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    return 2.0 * np.outer(a, a) - np.eye(3)


SYMMETRY_CANDIDATES = {
    "identity": np.eye(3),
    "rot_x": _pi_rotation((1, 0, 0)),
    "rot_y": _pi_rotation((0, 1, 0)),
    "rot_z": _pi_rotation((0, 0, 1)),
    "inversion": -np.eye(3),
}


def ensemble_reversal_defect(forward, backward, n: int = 256) -> dict:
    """Set-level defect allowing a spatial symmetry to accompany time reversal.

    The union of all forward paths is compared with the transformed union of
    backward paths for each candidate orthogonal map; particle identities
    are ignored.  Returned as a diagnostic, not a gate.
    """
    if len(forward) != len(backward) or not forward:
        raise DomainError("forward and backward ensembles must be non-empty and equal in size")
    fw = np.concatenate([resample_polyline(p, n) for p in forward])
    bw = np.concatenate([resample_polyline(p, n) for p in backward])
    scale = np.mean([_path_length(p) for p in list(forward) + list(backward)])
    out = {}
    for name, R in SYMMETRY_CANDIDATES.items():
        d = hausdorff(fw, bw @ R.T)
        out[name] = d / scale if scale > 0 else (0.0 if d == 0 else float("inf"))
    best = min(out, key=out.get)
    return {"per_map": out, "best_map": best, "defect": out[best]}


# --- Maxwell residuals ---------------------------------------------------------

STENCIL = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


def sample_events(n: int, seed: int = 0, t_range=(0.2, 2.0), radius: float = 1.5) -> np.ndarray:
    """Events with uniform time and positions uniform in a ball."""
    rng = np.random.Generator(np.random.Philox(seed))
    t = rng.uniform(*t_range, n)
    direc = rng.normal(size=(n, 3))
    direc /= np.linalg.norm(direc, axis=1)[:, None]
    r = radius * rng.uniform(0.0, 1.0, n) ** (1.0 / 3.0)
    return np.column_stack([t, direc * r[:, None]])


class FlippedB:
    """Field provider with the magnetic field negated (negative control)."""

    def __init__(self, provider):
        self.provider = provider

    def __call__(self, events):
        E, B = self.provider(events)
        return E, -B


def batch_provider(config):
    if callable(config) and not isinstance(config, KnotField):
        return config
    fld = config if isinstance(config, KnotField) else KnotField(config)

    def provider(events):
        s = fld.sample(events)
        return s.E, s.B

    return provider


@dataclass
class ResidualStats:
    max_relative: dict
    mean_relative: dict
    h: float
    order: int = 4
    n_events: int = 0

    @property
    def worst(self) -> float:
        return max(self.max_relative.values())

    def to_json(self) -> dict:
        return {"max_relative": self.max_relative, "mean_relative": self.mean_relative,
                "worst": self.worst, "h": self.h, "fd_order": self.order, "n_events": self.n_events}


def maxwell_residual_scan(config, events, h: float = 1e-3, floor: float = 1e-12) -> ResidualStats:
    """Source-free Maxwell residuals from 4th-order central differences.

    ``config`` is a configuration, a :class:`KnotField`, or a batch provider
    ``events -> (E, B)``.  Each residual is divided by the local field scale
    ``max(|E|, |B|, floor)`` at the same event.
    """
    provider = batch_provider(config)
    ev = np.asarray(events, dtype=float).reshape(-1, 4)
    dE = np.zeros((ev.shape[0], 4, 3))
    dB = np.zeros((ev.shape[0], 4, 3))
    for mu in range(4):
        for k, w in STENCIL:
            shifted = ev.copy()
            shifted[:, mu] += k * h
            E, B = provider(shifted)
            dE[:, mu] += w * E / h
            dB[:, mu] += w * B / h

    def curl(d):
        return np.stack([d[:, 2, 2] - d[:, 3, 1], d[:, 3, 0] - d[:, 1, 2], d[:, 1, 1] - d[:, 2, 0]],
                        axis=1)

    residuals = {
        "div_E": np.abs(dE[:, 1, 0] + dE[:, 2, 1] + dE[:, 3, 2]),
        "div_B": np.abs(dB[:, 1, 0] + dB[:, 2, 1] + dB[:, 3, 2]),
        "faraday": np.linalg.norm(curl(dE) + dB[:, 0], axis=1),
        "ampere": np.linalg.norm(curl(dB) - dE[:, 0], axis=1),
    }
    E0, B0 = provider(ev)
    scale = np.maximum(np.maximum(np.linalg.norm(E0, axis=1), np.linalg.norm(B0, axis=1)), floor)
    rel = {k: v / scale for k, v in residuals.items()}
    return ResidualStats(max_relative={k: float(v.max()) for k, v in rel.items()},
                         mean_relative={k: float(v.mean()) for k, v in rel.items()},
                         h=h, n_events=ev.shape[0])


# --- energy ---------------------------------------------------------------------

@dataclass
class EnergyBudget:
    times: np.ndarray
    totals: np.ndarray
    tail_bounds: np.ndarray
    quadrature: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"times": self.times.tolist(), "totals": self.totals.tolist(),
                "tail_bounds": self.tail_bounds.tolist(), "quadrature": self.quadrature}


def energy_budget(config, times, radius: float = 10.0, n_radial: int = 64, n_polar: int = 32,
                  n_azimuth: int = 64) -> EnergyBudget:
    """Total energy inside a ball of ``radius`` at each time.

    Gauss-Legendre nodes in r and cos(theta), the trapezoid rule in phi.  The
    tail bound assumes the density falls off like r^-8 beyond the ball and
    uses the mean density on the outermost shell.
    """
    if radius < 5.0:
        raise DomainError("energy quadrature needs radius >= 5")
    fld = config if isinstance(config, KnotField) else KnotField(config)
    xr, wr = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * radius * (xr + 1.0)
    wr = 0.5 * radius * wr
    ct, wt = np.polynomial.legendre.leggauss(n_polar)
    st = np.sqrt(1.0 - ct**2)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    wphi = 2.0 * np.pi / n_azimuth
    R, C, P = np.meshgrid(r, ct, phi, indexing="ij")
    S = np.sqrt(1.0 - C**2)
    pts = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], axis=-1).reshape(-1, 3)
    weights = (wr[:, None, None] * r[:, None, None] ** 2 * wt[None, :, None] * wphi
               * np.ones_like(R)).reshape(-1)
    shell = np.stack([radius * np.outer(st, np.cos(phi)), radius * np.outer(st, np.sin(phi)),
                      radius * np.outer(ct, np.ones_like(phi))], axis=-1).reshape(-1, 3)
    shell_w = np.repeat(wt, n_azimuth)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    totals, tails = [], []
    for t in times:
        u = fld.energy_density(np.column_stack([np.full(len(pts), t), pts]))
        totals.append(float(u @ weights))
        u_shell = fld.energy_density(np.column_stack([np.full(len(shell), t), shell]))
        mean_shell = float(u_shell @ shell_w) / 2.0
        tails.append(4.0 * np.pi * radius**3 * mean_shell / 5.0)
    return EnergyBudget(times, np.array(totals), np.array(tails),
                        {"radius": radius, "n_radial": n_radial, "n_polar": n_polar,
                         "n_azimuth": n_azimuth})


# --- kappa dependence -----------------------------------------------------------

def kappa_sweep(config, spec, kappas, t_span=(0.0, 1.0), rmax_hint=None,
                angle_threshold: float = 15.0, workers=None) -> list:
    """Run one ensemble per coupling and summarize speeds and beams."""
    kappas = list(kappas)
    if not kappas:
        raise DomainError("kappa list is empty")
    fld = config if isinstance(config, KnotField) else KnotField(config)
    states = generate_ensemble(spec, rmax_hint)
    rows = []
    for kappa in kappas:
        params = SimulationParams(kappa=float(kappa), t_start=t_span[0], t_end=t_span[1])
        records = run_ensemble(states, fld, params, workers)
        rows.append({
            "kappa": float(kappa),
            "max_speed": float(max(r.speed.max() for r in records)),
            "mean_final_speed": mean_final_speed(records),
            "beam": cluster_final_directions(records, angle_threshold),
            "records": records,
        })
    return rows


def mean_final_speed(records) -> float:
    return float(np.mean([r.speed[-1] for r in records]))


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
