"""Electric and magnetic field lines at fixed time.

Lines are integrated in arc length, ``dx/ds = F(x) / |F(x)|``, with a
fixed-step RK4 scheme; the loop runs inside numba and calls the field
kernel directly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateSeedError, DomainError
from .fields import KnotField, _point_fields

KINDS = {"electric": 0, "magnetic": 1}
UNDERFLOW = 1e-12


@dataclass
class FieldLine:
    points: np.ndarray
    kind: str
    closed: bool
    arc_length: float
    seed: np.ndarray

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "seed": [float(v) for v in self.seed],
            "closed": bool(self.closed),
            "arc_length": float(self.arc_length),
            "points": [[float(v) for v in p] for p in self.points],
        }


@njit(cache=True)
def _direction(t, p, kind, orientation, args_k, args_sign, args_part, args_amp, args_coef,
               args_hidx, mon_coef, mon_pow, h_start, max_pow, n_harm, eb, a, ar, out):
    _point_fields(t, p[0], p[1], p[2], args_k, args_sign, args_part, args_amp, args_coef, args_hidx,
                  mon_coef, mon_pow, h_start, max_pow, n_harm, eb, a, ar)
    off = 3 * kind
    norm = np.sqrt(eb[off] ** 2 + eb[off + 1] ** 2 + eb[off + 2] ** 2)
    if norm < 1e-12:
        return norm
    for i in range(3):
        out[i] = orientation * eb[off + i] / norm
    return norm


@njit(cache=True)
def _trace_kernel(seed, t, kind, orientation, step, max_steps, closure_tol, k, sign, part, amp,
                  coef, hidx, mon_coef, mon_pow, h_start, max_pow, n_harm):
    pts = np.empty((max_steps + 1, 3))
    pts[0] = seed
    eb = np.empty(6)
    a = np.empty(4, dtype=np.complex128)
    ar = np.empty(4)
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    tmp = np.empty(3)
    p = seed.copy()
    closed = False
    n = 0
    for n in range(1, max_steps + 1):
        ok = True
        if _direction(t, p, kind, orientation, k, sign, part, amp, coef, hidx, mon_coef, mon_pow,
                      h_start, max_pow, n_harm, eb, a, ar, k1) < 1e-12:
            ok = False
        if ok:
            for i in range(3):
                tmp[i] = p[i] + 0.5 * step * k1[i]
            ok = _direction(t, tmp, kind, orientation, k, sign, part, amp, coef, hidx, mon_coef,
                            mon_pow, h_start, max_pow, n_harm, eb, a, ar, k2) >= 1e-12
        if ok:
            for i in range(3):
                tmp[i] = p[i] + 0.5 * step * k2[i]
            ok = _direction(t, tmp, kind, orientation, k, sign, part, amp, coef, hidx, mon_coef,
                            mon_pow, h_start, max_pow, n_harm, eb, a, ar, k3) >= 1e-12
        if ok:
            for i in range(3):
                tmp[i] = p[i] + step * k3[i]
            ok = _direction(t, tmp, kind, orientation, k, sign, part, amp, coef, hidx, mon_coef,
                            mon_pow, h_start, max_pow, n_harm, eb, a, ar, k4) >= 1e-12
        if not ok:
            return pts[:n], False, n - 1
        for i in range(3):
            p[i] += step * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
        pts[n] = p
        if n > 10:
            d = 0.0
            for i in range(3):
                d += (p[i] - seed[i]) ** 2
            if np.sqrt(d) < closure_tol:
                closed = True
                return pts[: n + 1], closed, n
    return pts[: n + 1], closed, n


def trace_line(config, t: float, seed, kind: str = "magnetic", step: float = 1e-3,
               max_length: float = 50.0, closure_tol: float = 1e-2,
               orientation: int = 1) -> FieldLine:
    """Trace one field line from ``seed``.

    Stops after ``max_length`` of arc length, when the field underflows, or
    when the line returns within ``closure_tol`` of the seed (after more than
    ten steps).  ``orientation=-1`` follows ``-F``.
    """
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {sorted(KINDS)}")
    if not (step > 0 and max_length > 0 and closure_tol > 0) or orientation not in (1, -1):
        raise DomainError("step, max_length and closure_tol must be positive; orientation +-1")
    fld = config if isinstance(config, KnotField) else KnotField(config)
    seed = np.asarray(seed, dtype=float).reshape(3)
    E, B = fld(t, seed)
    F = E if kind == "electric" else B
    if np.linalg.norm(F) <= UNDERFLOW:
        raise DegenerateSeedError(f"{kind} field vanishes at seed {seed.tolist()}")
    max_steps = int(np.ceil(max_length / step))
    pts, closed, n = _trace_kernel(seed, float(t), KINDS[kind], float(orientation), float(step),
                                   max_steps, float(closure_tol), *fld._args)
    return FieldLine(points=pts.copy(), kind=kind, closed=bool(closed), arc_length=n * step,
                     seed=seed)


DEFAULT_SEEDS = ((0.5, 0.0, 0.0), (-0.5, 0.0, 0.0), (0.0, 0.5, 0.25), (0.25, -0.25, 0.5))


def trace_lines(config, t: float, seeds=DEFAULT_SEEDS, kinds=("electric", "magnetic"), **kwargs):
    """Trace every (seed, kind) pair; seeds where the field vanishes are skipped."""
    fld = config if isinstance(config, KnotField) else KnotField(config)
    lines = []
    for seed in seeds:
        for kind in kinds:
            try:
                lines.append(trace_line(fld, t, seed, kind, **kwargs))
            except DegenerateSeedError:
                continue
    return lines


def write_lines_jsonl(lines, path) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(json.dumps(line.to_json()) + "\n")
